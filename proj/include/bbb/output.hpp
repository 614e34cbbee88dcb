#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "bbb/config.hpp"

namespace bbb {

struct SeriesRow {
    double t = 0;
    std::string quantity;  // P, Tbar, v, Q, S or traj
    std::string index;     // label n, link "n-m", or trajectory id
    double value = 0;
};

// CSV time series `t,quantity,index,value`, preceded by a `# config-hash: <hash>` line.
class SeriesWriter {
public:
    SeriesWriter(const std::filesystem::path& path, const std::string& hash);
    ~SeriesWriter();
    SeriesWriter(const SeriesWriter&) = delete;
    SeriesWriter& operator=(const SeriesWriter&) = delete;

    void row(double t, const char* quantity, const std::string& index, double value);
    void row(double t, const char* quantity, Index index, double value) { row(t, quantity, std::to_string(index), value); }
    void close();

private:
    std::FILE* f_ = nullptr;
    std::filesystem::path path_;
};

struct Series {
    std::string hash;
    std::vector<SeriesRow> rows;
};

Series read_series(const std::filesystem::path& path);

// 17 significant digits, round-trip exact.
std::string format_double(double x);

void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

// {config, hash, seed, versions, wall-time}
Json make_manifest(const RunConfig& config, double wall_seconds);

std::string link_label(Index n, Index m);

} // namespace bbb
