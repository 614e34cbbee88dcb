#pragma once

#include <stdexcept>
#include <string>

namespace bbb {

// Exit status used by the CLI; the numeric values are part of the interface.
enum class Status : int { ok = 0, validation = 1, integration = 2, tolerance = 3 };

class Error : public std::runtime_error {
public:
    Error(Status status, const std::string& what) : std::runtime_error(what), status_(status) {}
    Status status() const { return status_; }

private:
    Status status_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(Status::validation, what) {}
};

struct IntegrationError : Error {
    explicit IntegrationError(const std::string& what) : Error(Status::integration, what) {}
};

struct ToleranceError : Error {
    explicit ToleranceError(const std::string& what) : Error(Status::tolerance, what) {}
};

} // namespace bbb
