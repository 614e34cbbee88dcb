#include "bbb/output.hpp"

#include <Eigen/Core>

#include <charconv>
#include <fstream>
#include <sstream>

namespace bbb {

std::string format_double(double x) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, std::size_t(n));
}

std::string link_label(Index n, Index m) { return std::to_string(n) + "-" + std::to_string(m); }

SeriesWriter::SeriesWriter(const std::filesystem::path& path, const std::string& hash) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw ValidationError("output: cannot write " + path.string());
    std::fprintf(f_, "# config-hash: %s\nt,quantity,index,value\n", hash.c_str());
}

SeriesWriter::~SeriesWriter() {
    if (f_) std::fclose(f_);
}

void SeriesWriter::row(double t, const char* quantity, const std::string& index, double value) {
    std::fprintf(f_, "%.17g,%s,%s,%.17g\n", t, quantity, index.c_str(), value);
}

void SeriesWriter::close() {
    if (f_ && std::fclose(f_) != 0) {
        f_ = nullptr;
        throw IntegrationError("output: failed to finish " + path_.string());
    }
    f_ = nullptr;
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
    double x = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError(where + ": not a number: \"" + s + "\"");
    return x;
}

} // namespace

Series read_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("compare: cannot open " + path.string());
    Series out;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# config-hash: ";
            if (line.rfind(key, 0) == 0) out.hash = line.substr(key.size());
            continue;
        }
        if (!header) {
            if (line != "t,quantity,index,value") throw ValidationError(path.string() + ": schema mismatch, expected header t,quantity,index,value");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string t, q, i, v;
        if (!std::getline(ss, t, ',') || !std::getline(ss, q, ',') || !std::getline(ss, i, ',') || !std::getline(ss, v))
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected four fields");
        const std::string where = path.string() + ":" + std::to_string(lineno);
        out.rows.push_back({parse_double(t, where), q, i, parse_double(v, where)});
    }
    if (!header) throw ValidationError(path.string() + ": missing header");
    return out;
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("output: cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
}

Json make_manifest(const RunConfig& config, double wall_seconds) {
    Json m;
    m["config"] = config.source;
    m["hash"] = config.hash;
    m["seed"] = config.seed;
    m["versions"] = {{"bbbsim", "1.0.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    m["wall-time"] = wall_seconds;
    return m;
}

} // namespace bbb
