#include "bbb/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace bbb {

namespace fs = std::filesystem;

namespace {

bool emits(std::size_t k, const RunConfig& c) { return k % c.output.every == 0 || k == c.steps(); }

std::vector<std::size_t> output_steps(const RunConfig& c) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k <= c.steps(); ++k)
        if (emits(k, c)) out.push_back(k);
    return out;
}

void say(std::ostream* log, const std::string& s) {
    if (log) *log << s << "\n";
}

Json events_json(const EventLog& log) {
    Json j;
    j["counts"] = Json::object();
    for (const auto& [k, c] : log.counts) j["counts"][k] = c;
    j["messages"] = log.messages;
    return j;
}

// T̄ rows of both orientations for every link with positive endpoint probabilities.
void write_tbar(SeriesWriter& w, double t, const RealVector& p, const RealVector& j, const std::vector<Link>& links) {
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        if (p(m) > probability_floor) w.row(t, "Tbar", link_label(n, m), j(Index(l)) / p(m));
        if (p(n) > probability_floor) w.row(t, "Tbar", link_label(m, n), -j(Index(l)) / p(n));
    }
}

void write_ensemble(const fs::path& path, const RunConfig& c, const EnsembleResult& res) {
    SeriesWriter w(path, c.hash);
    for (Index i = 0; i < res.occupancy.rows(); ++i) {
        const double t = res.times[std::size_t(i)];
        for (Index n = 0; n < res.occupancy.cols(); ++n) w.row(t, "P", n, res.occupancy(i, n));
        for (const auto& tr : res.trajectories) w.row(t, "traj", std::to_string(tr.id), double(tr.samples[std::size_t(i)].second));
    }
    w.close();
}

EnsembleOptions ensemble_options(const RunConfig& c) {
    EnsembleOptions eo;
    eo.trajectories = c.ensemble_size;
    eo.seed = c.seed;
    eo.sample_steps = output_steps(c);
    eo.recorded = c.output.trajectories;
    return eo;
}

Json ensemble_json(const EnsembleResult& res, std::size_t m) {
    Json j;
    j["trajectories"] = m;
    j["sup_error"] = res.sup_error();
    j["max_z"] = res.max_z(m);
    j["fraction_beyond_3sigma"] = res.fraction_beyond(3, m);
    j["events"] = events_json(res.log);
    return j;
}

void run_reference(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    const HermitianGenerator h = c.generator();
    const UnitaryIntegrator integ(h, c.dt, c.integrator);
    ComplexVector psi = polar_compose(c.initial).values();
    SeriesWriter w(out / "series.csv", c.hash);
    double drift = 0;
    for (std::size_t k = 0; k <= c.steps(); ++k) {
        if (k > 0) psi = integ.step(psi);
        drift = std::max(drift, std::abs(psi.squaredNorm() - 1));
        if (!emits(k, c)) continue;
        const double t = double(k) * c.dt;
        const AmplitudeField field(psi, 1e-6);
        const PolarField polar = polar_decompose(field, c.hbar);
        const RealVector p = polar.R.cwiseAbs2();
        for (Index n = 0; n < p.size(); ++n) w.row(t, "P", n, p(n));
        for (Index n = 0; n < p.size(); ++n) w.row(t, "S", n, polar.S(n));
        write_tbar(w, t, p, current(psi, h).values(), h.links());
    }
    w.close();
    sum.files.push_back(out / "series.csv");
    sum.diagnostics["norm_drift"] = drift;
}

void run_wavefree(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    const HermitianGenerator h = c.generator();
    const LinkGeometry g(h);
    EventLog events;
    WaveFreeState s = init_from_polar(c.initial, g, &events);
    SeriesWriter w(out / "series.csv", c.hash);
    InvariantReport worst = check_invariants(s, g);
    std::size_t sign_flips = 0, parity_flips = 0, halved = 0;
    double max_jump = 0;
    const std::size_t steps = c.steps();

    auto emit = [&](std::size_t k) {
        const double t = double(k) * c.dt;
        for (Index n = 0; n < s.p.size(); ++n) w.row(t, "P", n, s.p(n));
        try {
            const PolarField polar = reconstruct_phases(s, g);
            for (Index n = 0; n < s.p.size(); ++n) w.row(t, "S", n, polar.S(n));
        } catch (const IntegrationError& e) {
            events.record("phase-reconstruction", "t = " + format_double(t) + ": " + e.what());
        }
        write_tbar(w, t, s.p, s.j, g.links());
    };
    std::size_t at = 0;
    FluxSource source = [&](std::size_t k) {
        if (k != at++) throw IntegrationError("wave-free run: steps out of order");
        StepFlux sf{s.p, {}};
        if (emits(k, c)) emit(k);
        if (k < steps) {
            StepReport rep;
            s = step(s, g, c.dt, c.wavefree, &rep, &events);
            sign_flips += rep.sign_flips.size();
            parity_flips += rep.parity_flips.size();
            if (rep.substeps > 1) ++halved;
            max_jump = std::max(max_jump, rep.max_theta_jump);
            const InvariantReport inv = check_invariants(s, g);
            worst.theta_modulus_error = std::max(worst.theta_modulus_error, inv.theta_modulus_error);
            worst.loop_defect = std::max(worst.loop_defect, inv.loop_defect);
            worst.min_radicand = std::min(worst.min_radicand, inv.min_radicand);
            worst.antisymmetry_error = std::max(worst.antisymmetry_error, inv.antisymmetry_error);
            worst.probability_sum_error = std::max(worst.probability_sum_error, inv.probability_sum_error);
            sf.flux = std::move(rep.flux);
        }
        return sf;
    };
    if (c.ensemble_size > 0) {
        const EnsembleResult res = run_jump_ensemble(h, source, c.dt, steps, ensemble_options(c));
        write_ensemble(out / "ensemble.csv", c, res);
        sum.files.push_back(out / "ensemble.csv");
        sum.diagnostics["ensemble"] = ensemble_json(res, c.ensemble_size);
    } else {
        for (std::size_t k = 0; k <= steps; ++k) source(k);
    }
    w.close();
    sum.files.insert(sum.files.begin(), out / "series.csv");
    sum.diagnostics["invariants"] = {{"theta_modulus_error", worst.theta_modulus_error},
                                     {"loop_defect", worst.loop_defect},
                                     {"min_radicand", worst.min_radicand},
                                     {"antisymmetry_error", worst.antisymmetry_error},
                                     {"probability_sum_error", worst.probability_sum_error}};
    sum.diagnostics["sign_flips"] = sign_flips;
    sum.diagnostics["parity_flips"] = parity_flips;
    sum.diagnostics["steps_with_substeps"] = halved;
    sum.diagnostics["max_theta_jump"] = max_jump;
    sum.diagnostics["events"] = events_json(events);
}

GridField initial_grid(const RunConfig& c, EventLog* log) {
    const ComplexVector psi = polar_compose(c.initial).values();
    return {psi.cwiseAbs2(), f1_velocity_field(psi, c.circle.a, c.circle.mass, c.hbar, log), c.circle.a};
}

RealVector circle_potential(const RunConfig& c) { return c.circle.potential.size() ? c.circle.potential : RealVector::Zero(c.circle.n); }

double relative_l2(const RealVector& a, const RealVector& ref) { return (a - ref).norm() / ref.norm(); }

// F-I on the circle: positions carried by the interpolated guidance velocity of the reference wave function.
void run_guided_circle(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    const HermitianGenerator h = c.generator();
    const UnitaryIntegrator integ(h, c.dt, c.integrator);
    EventLog events;
    ComplexVector psi = polar_compose(c.initial).values();
    const RealVector v0 = circle_potential(c);
    ParticleEnsemble ens = sample_ensemble(initial_grid(c, &events), c.ensemble_size, c.circle.mass, v0, c.seed);
    SeriesWriter w(out / "series.csv", c.hash), e(out / "ensemble.csv", c.hash);
    double l1 = 0;
    for (std::size_t k = 0; k <= c.steps(); ++k) {
        const RealVector v = f1_velocity_field(psi, c.circle.a, c.circle.mass, c.hbar, &events);
        if (emits(k, c)) {
            const double t = double(k) * c.dt;
            const RealVector p = psi.cwiseAbs2();
            const RealVector est = estimate_density(ens, c.density);
            l1 = (est - p).cwiseAbs().sum();
            for (Index n = 0; n < p.size(); ++n) w.row(t, "P", n, p(n));
            for (Index n = 0; n < p.size(); ++n) w.row(t, "v", n, v(n));
            for (Index n = 0; n < p.size(); ++n) e.row(t, "P", n, est(n));
            for (std::size_t i = 0; i < c.output.trajectories; ++i) e.row(t, "traj", std::to_string(i), ens.x(Index(i)));
        }
        if (k == c.steps()) break;
        // Midpoint in time: advance with the velocity of the average state.
        const ComplexVector next = integ.step(psi);
        const RealVector vm = f1_velocity_field(ComplexVector(0.5 * (psi + next)), c.circle.a, c.circle.mass, c.hbar, &events);
        ens.x = f1_advance(ens.x, vm, c.circle.a, c.dt);
        psi = next;
    }
    w.close();
    e.close();
    sum.files = {out / "series.csv", out / "ensemble.csv"};
    sum.diagnostics["ensemble"] = {{"trajectories", c.ensemble_size}, {"final_l1_error", l1}};
    sum.diagnostics["events"] = events_json(events);
}

void run_guided_jumps(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    const HermitianGenerator h = c.generator();
    const UnitaryIntegrator integ(h, c.dt, c.integrator);
    const EnsembleResult res = simulate_guided_ensemble(polar_compose(c.initial), integ, c.steps(), ensemble_options(c));
    SeriesWriter w(out / "series.csv", c.hash);
    for (Index i = 0; i < res.expected.rows(); ++i)
        for (Index n = 0; n < res.expected.cols(); ++n) w.row(res.times[std::size_t(i)], "P", n, res.expected(i, n));
    w.close();
    write_ensemble(out / "ensemble.csv", c, res);
    sum.files = {out / "series.csv", out / "ensemble.csv"};
    sum.diagnostics["ensemble"] = ensemble_json(res, c.ensemble_size);
}

void run_f2(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    EventLog events;
    ParticleEnsemble ens = sample_ensemble(initial_grid(c, &events), c.ensemble_size, c.circle.mass, circle_potential(c), c.seed);
    SeriesWriter w(out / "series.csv", c.hash);
    for (std::size_t k = 0; k <= c.steps(); ++k) {
        if (k > 0) ens = f2_step(ens, c.dt, c.density, c.hbar, &events);
        if (!emits(k, c)) continue;
        const double t = double(k) * c.dt;
        const RealVector p = estimate_density(ens, c.density);
        for (Index n = 0; n < p.size(); ++n) w.row(t, "P", n, p(n));
        for (std::size_t i = 0; i < c.output.trajectories; ++i) w.row(t, "traj", std::to_string(i), ens.x(Index(i)));
    }
    w.close();
    sum.files = {out / "series.csv"};
    const RealVector ref = reference_probability(c);
    sum.diagnostics["final_l1_error"] = (estimate_density(ens, c.density) - ref).cwiseAbs().sum();
    sum.diagnostics["events"] = events_json(events);
}

void run_f3(const RunConfig& c, const fs::path& out, RunSummary& sum) {
    EventLog events;
    GridField g = initial_grid(c, &events);
    const RealVector v0 = circle_potential(c);
    SeriesWriter w(out / "series.csv", c.hash);
    double integrability = 0;
    for (std::size_t k = 0; k <= c.steps(); ++k) {
        if (k > 0) g = f3_step(g, v0, c.circle.mass, c.dt, c.hbar, c.hydro, &events);
        if (!g.p.allFinite() || !g.v.allFinite()) throw IntegrationError("f3-hydro: non-finite field at step " + std::to_string(k));
        integrability = std::max(integrability, integrability_check(g.v, g.a, c.circle.mass, c.hbar));
        if (!emits(k, c)) continue;
        const double t = double(k) * c.dt;
        const RealVector q = quantum_potential(g.p, g.a, c.circle.mass, c.hbar, c.hydro.eps_p);
        for (Index n = 0; n < g.size(); ++n) w.row(t, "P", n, g.p(n));
        for (Index n = 0; n < g.size(); ++n) w.row(t, "v", n, g.v(n));
        for (Index n = 0; n < g.size(); ++n) w.row(t, "Q", n, q(n));
    }
    w.close();
    sum.files = {out / "series.csv"};
    sum.diagnostics["final_relative_l2_error"] = relative_l2(g.p, reference_probability(c));
    sum.diagnostics["max_integrability_defect"] = integrability;
    sum.diagnostics["events"] = events_json(events);
}

} // namespace

RunSummary run(const RunConfig& c, const fs::path& out, std::ostream* log) {
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ValidationError("output: cannot create " + out.string() + " (" + ec.message() + ")");
    RunSummary sum;
    sum.diagnostics["hash"] = c.hash;
    sum.diagnostics["formulation"] = to_string(c.formulation);
    sum.diagnostics["model"] = to_string(c.model_kind);
    sum.diagnostics["steps"] = c.steps();
    say(log, "run " + to_string(c.formulation) + " on " + to_string(c.model_kind) + ", " + std::to_string(c.steps()) + " steps, hash " + c.hash);
    switch (c.formulation) {
    case Formulation::reference: run_reference(c, out, sum); break;
    case Formulation::wavefree: run_wavefree(c, out, sum); break;
    case Formulation::f1_guided:
        if (c.model_kind == ModelKind::circle)
            run_guided_circle(c, out, sum);
        else
            run_guided_jumps(c, out, sum);
        break;
    case Formulation::f2_ensemble: run_f2(c, out, sum); break;
    case Formulation::f3_hydro: run_f3(c, out, sum); break;
    }
    write_json(out / "diagnostics.json", sum.diagnostics);
    sum.files.push_back(out / "diagnostics.json");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out / "manifest.json", make_manifest(c, wall));
    sum.files.push_back(out / "manifest.json");
    for (const auto& f : sum.files) say(log, "wrote " + f.string());
    return sum;
}

RealVector reference_probability(const RunConfig& c) {
    const HermitianGenerator h = c.generator();
    const AmplitudeField psi0 = polar_compose(c.initial);
    if (h.dim() <= max_exponential_dim) return UnitaryIntegrator(h, double(c.steps()) * c.dt, UnitaryScheme::exact_exponential).step(psi0.values()).cwiseAbs2();
    return evolve(psi0, UnitaryIntegrator(h, c.dt, UnitaryScheme::implicit_midpoint), c.steps()).back().values().cwiseAbs2();
}

RealVector final_probability(const RunConfig& c) {
    switch (c.formulation) {
    case Formulation::reference:
        return evolve(polar_compose(c.initial), UnitaryIntegrator(c.generator(), c.dt, c.integrator), c.steps()).back().values().cwiseAbs2();
    case Formulation::wavefree: {
        const LinkGeometry g(c.generator());
        return evolve_wavefree(init_from_polar(c.initial, g), g, c.dt, c.steps(), c.wavefree).p;
    }
    case Formulation::f3_hydro: {
        GridField g = initial_grid(c, nullptr);
        const RealVector v0 = circle_potential(c);
        for (std::size_t k = 0; k < c.steps(); ++k) g = f3_step(g, v0, c.circle.mass, c.dt, c.hbar, c.hydro);
        return g.p;
    }
    default: throw ValidationError("formulation: the dt axis needs reference, wavefree or f3-hydro");
    }
}

Norm parse_norm(const std::string& s) {
    if (s == "sup") return Norm::sup;
    if (s == "l2") return Norm::l2;
    if (s == "rel-l2") return Norm::rel_l2;
    throw ValidationError("norm: expected sup, l2 or rel-l2 (got \"" + s + "\")");
}

fs::path series_path(const fs::path& p) { return fs::is_directory(p) ? p / "series.csv" : p; }

namespace {

using Frame = std::map<std::string, double>;

std::map<double, Frame> frames(const Series& s, const std::string& quantity) {
    std::map<double, Frame> out;
    for (const auto& r : s.rows)
        if (r.quantity == quantity) out[r.t][r.index] = r.value;
    return out;
}

Frame interpolate_frame(const std::map<double, Frame>& f, double t) {
    auto hi = f.lower_bound(t);
    if (hi != f.end() && hi->first == t) return hi->second;
    if (hi == f.end() || hi == f.begin()) throw ValidationError("compare: time " + format_double(t) + " outside the second run's range");
    auto lo = std::prev(hi);
    const double w = (t - lo->first) / (hi->first - lo->first);
    Frame out;
    for (const auto& [k, v] : lo->second) {
        auto it = hi->second.find(k);
        if (it != hi->second.end()) out[k] = (1 - w) * v + w * it->second;
    }
    return out;
}

} // namespace

CompareReport compare_series(const Series& a, const Series& b, const CompareOptions& opt) {
    const auto fa = frames(a, opt.quantity), fb = frames(b, opt.quantity);
    if (fa.empty()) throw ValidationError("compare: first run has no rows for quantity " + opt.quantity);
    if (fb.empty()) throw ValidationError("compare: second run has no rows for quantity " + opt.quantity);
    if (!opt.interpolate) {
        bool same = fa.size() == fb.size();
        for (auto ia = fa.begin(), ib = fb.begin(); same && ia != fa.end(); ++ia, ++ib) same = ia->first == ib->first;
        if (!same) throw ValidationError("compare: time grids differ; request interpolation explicitly");
    }
    CompareReport rep;
    for (const auto& [t, frame] : fa) {
        const Frame other = opt.interpolate ? interpolate_frame(fb, t) : fb.at(t);
        double sup = 0, sq = 0, ref = 0;
        std::string worst;
        std::size_t shared = 0;
        for (const auto& [k, v] : frame) {
            auto it = other.find(k);
            if (it == other.end()) continue;
            ++shared;
            const double d = std::abs(v - it->second);
            if (d > sup || worst.empty()) {
                sup = std::max(sup, d);
                worst = k;
            }
            sq += d * d;
            ref += it->second * it->second;
        }
        if (shared == 0) throw ValidationError("compare: no common indices at t = " + format_double(t) + " (mismatched schemas)");
        const double l2 = std::sqrt(sq);
        const double e = opt.norm == Norm::sup ? sup : opt.norm == Norm::l2 ? l2 : (ref > 0 ? l2 / std::sqrt(ref) : l2);
        rep.times.push_back(t);
        rep.per_time.push_back(e);
        rep.worst.push_back(worst);
        rep.sup = std::max(rep.sup, sup);
        rep.l2 = std::max(rep.l2, l2);
        rep.error = std::max(rep.error, e);
    }
    return rep;
}

Json CompareReport::to_json() const {
    Json j;
    j["error"] = error;
    j["sup"] = sup;
    j["l2"] = l2;
    std::size_t at = 0;
    for (std::size_t i = 0; i < per_time.size(); ++i)
        if (per_time[i] > per_time[at]) at = i;
    j["worst_time"] = times.empty() ? 0.0 : times[at];
    j["worst_index"] = worst.empty() ? "" : worst[at];
    j["samples"] = times.size();
    return j;
}

Cos2Report compare_cos2(const Series& run, const RunConfig& config) {
    if (config.model_kind != ModelKind::spin_half) throw ValidationError("compare: the cos2 fit needs a spin-half run");
    std::vector<double> t, p;
    for (const auto& r : run.rows)
        if (r.quantity == "P" && r.index == "1") {
            t.push_back(r.t);
            p.push_back(r.value);
        }
    if (t.size() < 3) throw ValidationError("compare: too few P rows for label 1");
    const double gamma = calibrate_gamma(config.spin, config.hbar);
    const double dp = t.size() > 1 ? (p[1] - p[0]) / (t[1] - t[0]) : 0.0;
    const Cos2Fit fit = fit_cos2(t, p, gamma, spin_phase_from_state(p[0], dp));
    return {fit.gamma, fit.delta, fit.residual};
}

Json Cos2Report::to_json() const { return {{"gamma", gamma}, {"delta", delta}, {"residual", residual}}; }

SweepAxis parse_axis(const std::string& s) {
    if (s == "dt") return SweepAxis::dt;
    if (s == "a") return SweepAxis::a;
    if (s == "M") return SweepAxis::m;
    throw ValidationError("axis: expected dt, a or M (got \"" + s + "\")");
}

namespace {

double fit_slope(const std::vector<SweepRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& r : rows) {
        if (!(r.error > 0) || !(r.value > 0)) continue;
        const double x = std::log(r.value), y = std::log(r.error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    if (n < 2) return 0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double ensemble_error(const RunConfig& c) {
    const std::vector<std::size_t> samples = output_steps(c);
    EnsembleOptions eo = ensemble_options(c);
    eo.recorded = 0;
    switch (c.formulation) {
    case Formulation::f2_ensemble: {
        ParticleEnsemble ens = sample_ensemble(initial_grid(c, nullptr), c.ensemble_size, c.circle.mass, circle_potential(c), c.seed);
        for (std::size_t k = 0; k < c.steps(); ++k) ens = f2_step(ens, c.dt, c.density, c.hbar);
        return (estimate_density(ens, c.density) - reference_probability(c)).cwiseAbs().sum();
    }
    case Formulation::wavefree: {
        const LinkGeometry g(c.generator());
        return simulate_wavefree_ensemble(init_from_polar(c.initial, g), g, c.dt, c.steps(), c.wavefree, eo).sup_error();
    }
    case Formulation::f1_guided: {
        if (c.model_kind == ModelKind::circle) throw ValidationError("axis: M sweeps of f1-guided need a discrete-label model");
        const UnitaryIntegrator integ(c.generator(), c.dt, c.integrator);
        return simulate_guided_ensemble(polar_compose(c.initial), integ, c.steps(), eo).sup_error();
    }
    default: throw ValidationError("axis: M needs f1-guided, f2-ensemble or wavefree");
    }
}

ContinuumSpec continuum_spec(const RunConfig& c) {
    ContinuumSpec spec;
    spec.length = c.circle.length();
    spec.mass = c.circle.mass;
    spec.hbar = c.hbar;
    const Json& st = c.source.at("initial_state");
    const std::string type = st.at("type").get<std::string>();
    if (type == "gaussian-packet") {
        spec.center = st.at("center").get<double>();
        spec.width = st.at("width").get<double>();
        spec.q = int(st.value("momentum_q", 0));
    } else if (type == "plane-wave") {
        spec.plane_wave = true;
        spec.q = int(st.at("q").get<int>());
    } else {
        throw ValidationError("initial_state.type: the a axis needs a gaussian-packet or plane-wave state");
    }
    if (c.circle.potential.size() && c.circle.potential.cwiseAbs().maxCoeff() > 0) throw ValidationError("model.potential: the a axis needs V = 0");
    return spec;
}

} // namespace

SweepTable sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values, std::ostream* log) {
    if (values.size() < 2) throw ValidationError("values: a sweep needs at least two values");
    SweepTable table;
    table.axis = axis;
    std::vector<RealVector> results;
    if (axis == SweepAxis::a) {
        if (base.model_kind != ModelKind::circle) throw ValidationError("axis: a needs the circle model");
        std::vector<Index> ns;
        for (double v : values) {
            if (!(v >= 3) || v != std::floor(v)) throw ValidationError("values: the a axis takes grid sizes N (integers >= 3)");
            ns.push_back(Index(v));
        }
        const ContinuumReport rep = continuum_limit_experiment(ns, continuum_spec(base));
        table.metric = "max_n |a dTbar_{n+1,n}/dt + (V+Q)'(x_n)/M| at t = 0";
        for (std::size_t i = 0; i < ns.size(); ++i) table.rows.push_back({rep.a[i], rep.error[i], 0, i ? rep.ratios[i - 1] : 0});
    } else {
        for (double v : values) {
            RunConfig c = base;
            if (axis == SweepAxis::dt) {
                if (!(v > 0)) throw ValidationError("values: dt must be positive");
                c.dt = v;
            } else {
                if (!(v >= 1) || v != std::floor(v)) throw ValidationError("values: M must be a positive integer");
                c.ensemble_size = std::size_t(v);
                c.output.trajectories = 0;
            }
            say(log, "sweep point " + format_double(v));
            SweepRow row;
            row.value = v;
            if (axis == SweepAxis::dt) {
                const RealVector p = final_probability(c);
                const RealVector ref = reference_probability(c);
                row.error = c.formulation == Formulation::f3_hydro ? relative_l2(p, ref) : (p - ref).cwiseAbs().maxCoeff();
                if (!results.empty()) row.difference = (p - results.back()).cwiseAbs().maxCoeff();
                results.push_back(p);
            } else {
                row.error = ensemble_error(c);
            }
            if (!table.rows.empty() && row.error > 0) row.ratio = table.rows.back().error / row.error;
            table.rows.push_back(row);
        }
        table.metric = axis == SweepAxis::dt ? (base.formulation == Formulation::f3_hydro ? "relative L2 of P at the horizon" : "sup |P - P_ref| at the horizon")
                       : base.formulation == Formulation::f2_ensemble ? "L1 density error at the horizon"
                                                                       : "sup |P_hat - P| over output times";
        for (std::size_t i = 2; i < table.rows.size(); ++i)
            if (table.rows[i].difference > 0) table.richardson.push_back(table.rows[i - 1].difference / table.rows[i].difference);
    }
    table.fitted_order = fit_slope(table.rows);
    return table;
}

Json SweepTable::to_json() const {
    Json j;
    j["axis"] = axis == SweepAxis::dt ? "dt" : axis == SweepAxis::a ? "a" : "M";
    j["metric"] = metric;
    j["rows"] = Json::array();
    for (const auto& r : rows) j["rows"].push_back({{"value", r.value}, {"error", r.error}, {"difference", r.difference}, {"ratio", r.ratio}});
    j["fitted_order"] = fitted_order;
    j["richardson"] = richardson;
    return j;
}

std::string SweepTable::format() const {
    std::ostringstream os;
    os << "# " << metric << "\n";
    os << std::setw(14) << "value" << std::setw(14) << "error" << std::setw(14) << "ratio" << "\n";
    for (const auto& r : rows)
        os << std::setw(14) << std::setprecision(6) << r.value << std::setw(14) << r.error << std::setw(14) << (r.ratio > 0 ? std::to_string(r.ratio) : "-")
           << "\n";
    os << "fitted order " << std::setprecision(4) << fitted_order << "\n";
    for (double r : richardson) os << "richardson ratio " << r << "\n";
    return os.str();
}

} // namespace bbb
