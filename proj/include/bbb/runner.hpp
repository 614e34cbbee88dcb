#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bbb/config.hpp"
#include "bbb/output.hpp"

namespace bbb {

struct RunSummary {
    Json diagnostics;
    std::vector<std::filesystem::path> files;
};

// Writes series.csv (and ensemble.csv when trajectories are simulated), diagnostics.json and manifest.json into `out`.
RunSummary run(const RunConfig& config, const std::filesystem::path& out, std::ostream* log = nullptr);

enum class Norm { sup, l2, rel_l2 };
Norm parse_norm(const std::string& s);

struct CompareOptions {
    std::string quantity = "P";
    Norm norm = Norm::sup;
    bool interpolate = false;
};

struct CompareReport {
    double error = 0;                   // in the requested norm, maximised over time
    double sup = 0;
    double l2 = 0;
    std::vector<double> times;
    std::vector<double> per_time;       // requested norm at each time
    std::vector<std::string> worst;     // index with the largest |a - b| at each time
    Json to_json() const;
};

// `b` is interpolated linearly in t onto the times of `a` when requested; otherwise time grids must match.
CompareReport compare_series(const Series& a, const Series& b, const CompareOptions& opt);

struct Cos2Report {
    double gamma = 0;
    double delta = 0;
    double residual = 0;
    Json to_json() const;
};

// Fits the P of label 1 in a spin-half run to cos^2(gamma t + delta) with gamma calibrated from the run's model.
Cos2Report compare_cos2(const Series& run, const RunConfig& config);

// A run directory resolves to its series.csv.
std::filesystem::path series_path(const std::filesystem::path& p);

enum class SweepAxis { dt, a, m };
SweepAxis parse_axis(const std::string& s);

struct SweepRow {
    double value = 0;
    double error = 0;       // against the reference solver (or the continuum target for axis a)
    double difference = 0;  // against the previous row
    double ratio = 0;       // error(prev) / error(this), 0 for the first row
};

struct SweepTable {
    SweepAxis axis = SweepAxis::dt;
    std::string metric;
    std::vector<SweepRow> rows;
    double fitted_order = 0;              // least-squares slope of log error against log value
    std::vector<double> richardson;       // |x1 - x2| / |x2 - x3| for consecutive triples
    Json to_json() const;
    std::string format() const;
};

SweepTable sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values, std::ostream* log = nullptr);

// Final probability of a configuration without writing files (reference, wavefree or f3-hydro).
RealVector final_probability(const RunConfig& config);
// Reference-solver probability at the configuration's horizon.
RealVector reference_probability(const RunConfig& config);

} // namespace bbb
