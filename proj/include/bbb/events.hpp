#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace bbb {

// Counted diagnostic events plus the first few messages of each kind.
struct EventLog {
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> messages;
    std::size_t max_messages_per_kind = 5;

    void record(const std::string& kind, const std::string& message = {}) {
        const std::size_t c = ++counts[kind];
        if (!message.empty() && c <= max_messages_per_kind) messages.push_back(kind + ": " + message);
    }
    std::size_t count(const std::string& kind) const {
        auto it = counts.find(kind);
        return it == counts.end() ? 0 : it->second;
    }
    void merge(const EventLog& other) {
        for (const auto& [k, c] : other.counts) counts[k] += c;
        for (const auto& m : other.messages) messages.push_back(m);
    }
};

} // namespace bbb
