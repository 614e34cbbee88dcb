#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "bbb/runner.hpp"

namespace {

using namespace bbb;

std::string default_out() {
    const char* env = std::getenv("BBBSIM_OUT");
    return env && *env ? env : "out";
}

RunConfig load_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
    RunConfig c = load_config(path);
    if (!seed) return c;
    Json doc = c.source;
    doc["seed"] = *seed;
    return parse_config(doc);
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double x = 0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ValidationError("values: cannot parse \"" + item + "\"");
        out.push_back(x);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory simulator for wave-function, hydrodynamic and wave-function-free quantum dynamics"};
    app.require_subcommand(1);

    std::string config, out = default_out(), quantity = "P", norm = "sup", fit, axis, values;
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
    std::vector<std::string> runs;
    bool quiet = false, interpolate = false;

    auto* run_cmd = app.add_subcommand("run", "simulate a configuration and write its outputs");
    auto* validate_cmd = app.add_subcommand("validate", "check a configuration without running it");
    auto* compare_cmd = app.add_subcommand("compare", "compare two runs, or fit one spin run to cos^2");
    auto* sweep_cmd = app.add_subcommand("sweep", "convergence table over dt, a or M");

    for (auto* c : {run_cmd, validate_cmd, sweep_cmd}) {
        c->add_option("--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);
        c->add_option("--seed", seed, "overrides the configured seed");
    }
    for (auto* c : {run_cmd, compare_cmd, sweep_cmd, validate_cmd}) c->add_flag("--quiet", quiet, "suppress progress output");
    for (auto* c : {run_cmd, compare_cmd, sweep_cmd}) c->add_option("--out", out, "output directory");

    compare_cmd->add_option("runs", runs, "run directories or CSV files")->required()->expected(1, 2);
    compare_cmd->add_option("--quantity", quantity, "P, Tbar, v, Q, S or traj");
    compare_cmd->add_option("--norm", norm, "sup, l2 or rel-l2");
    compare_cmd->add_flag("--interpolate", interpolate, "interpolate the second run in time");
    compare_cmd->add_option("--tolerance", tolerance, "exit 3 when the error exceeds this");
    compare_cmd->add_option("--fit", fit, "cos2: fit a single spin run to the closed form");
    compare_cmd->add_option("--config", config, "configuration of the run for --fit (default: its manifest)");

    sweep_cmd->add_option("--axis", axis, "dt, a or M")->required();
    sweep_cmd->add_option("--values", values, "comma-separated values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : int(Status::validation);
    }
    std::ostream* log = quiet ? nullptr : &std::cerr;

    try {
        if (validate_cmd->parsed()) {
            const RunConfig c = load_with_seed(config, seed);
            if (!quiet) std::cout << "valid: " << to_string(c.formulation) << " on " << to_string(c.model_kind) << ", " << c.steps() << " steps, hash " << c.hash << "\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            const RunSummary s = run(load_with_seed(config, seed), out, log);
            if (!quiet) std::cout << s.diagnostics.dump(2) << "\n";
            return 0;
        }
        if (compare_cmd->parsed()) {
            Json summary;
            double error = 0;
            if (!fit.empty()) {
                if (fit != "cos2") throw ValidationError("fit: only cos2 is supported");
                if (runs.size() != 1) throw ValidationError("runs: --fit takes exactly one run");
                const std::filesystem::path dir = std::filesystem::is_directory(runs[0]) ? std::filesystem::path(runs[0]) : std::filesystem::path(runs[0]).parent_path();
                const RunConfig c = config.empty() ? parse_config(read_json(dir / "manifest.json").at("config")) : load_config(config);
                const Cos2Report rep = compare_cos2(read_series(series_path(runs[0])), c);
                summary = rep.to_json();
                error = rep.residual;
            } else {
                if (runs.size() != 2) throw ValidationError("runs: compare needs two runs");
                const Series a = read_series(series_path(runs[0])), b = read_series(series_path(runs[1]));
                const CompareReport rep = compare_series(a, b, {quantity, parse_norm(norm), interpolate});
                summary = rep.to_json();
                summary["quantity"] = quantity;
                summary["norm"] = norm;
                summary["hashes"] = {a.hash, b.hash};
                error = rep.error;
                if (!quiet)
                    for (std::size_t i = 0; i < rep.times.size(); ++i)
                        std::cerr << "t = " << format_double(rep.times[i]) << "  error " << format_double(rep.per_time[i]) << "  worst index " << rep.worst[i] << "\n";
            }
            if (tolerance) summary["tolerance"] = *tolerance;
            const bool pass = !tolerance || error <= *tolerance;
            summary["pass"] = pass;
            std::cout << summary.dump(2) << "\n";
            if (!pass) {
                std::cerr << "compare: error " << format_double(error) << " exceeds tolerance " << format_double(*tolerance) << "\n";
                return int(Status::tolerance);
            }
            return 0;
        }
        if (sweep_cmd->parsed()) {
            const RunConfig c = load_with_seed(config, seed);
            const SweepTable t = sweep(c, parse_axis(axis), parse_values(values), log);
            std::filesystem::create_directories(out);
            Json doc = t.to_json();
            doc["hash"] = c.hash;
            write_json(std::filesystem::path(out) / "sweep.json", doc);
            std::cout << t.format();
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(e.status());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(Status::integration);
    }
    return 0;
}
