#include "bbb/wavefree.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <queue>
#include <sstream>

namespace bbb {

namespace {

double wrap_angle(double x) {
    x = std::remainder(x, 2 * std::numbers::pi);
    return x;
}

// x / d, with an exact zero numerator short-circuiting a vanishing denominator.
double ratio(double x, double d) { return x == 0 ? 0.0 : x / d; }

struct LabelSums {
    RealVector j;  // sum_k J_nk
    RealVector k;  // sum_k K_kn including K_nn = 2 H_nn P_n
};

RealVector link_k(const WaveFreeState& s, const LinkGeometry& g, const std::vector<int>& sign) {
    RealVector k(g.link_count());
    for (std::size_t l = 0; l < g.link_count(); ++l)
        k(Index(l)) = sign[l] * g.baseline(l) * g.magnitude(l) * std::sqrt(std::max(radicand(s, g, l), 0.0));
    return k;
}

RealVector link_k(const WaveFreeState& s, const LinkGeometry& g) { return link_k(s, g, s.sign); }

LabelSums label_sums(const WaveFreeState& s, const LinkGeometry& g, const RealVector& k) {
    LabelSums sums{RealVector::Zero(g.dim()), RealVector::Zero(g.dim())};
    for (Index n = 0; n < g.dim(); ++n) sums.k(n) = 2 * g.diagonal(n) * s.p(n);
    const auto& links = g.links();
    for (std::size_t l = 0; l < links.size(); ++l) {
        sums.j(links[l].n) += s.j(Index(l));
        sums.j(links[l].m) -= s.j(Index(l));
        sums.k(links[l].n) += k(Index(l));
        sums.k(links[l].m) += k(Index(l));
    }
    return sums;
}

// Pairwise update P_n += h J_nm, P_m -= h J_nm.
void add_divergence(RealVector& p, const RealVector& j, const std::vector<Link>& links, double h) {
    for (std::size_t l = 0; l < links.size(); ++l) {
        p(links[l].n) += h * j(Index(l));
        p(links[l].m) -= h * j(Index(l));
    }
}

// Time derivative of (P, J, K) with K_nm = 2 Re(psi_n* H_nm psi_m) carried explicitly.
// With Z = K + i hbar J = 2 psi_n* H_nm psi_m,
// dZ/dt = (i/hbar) [2|H|^2 (P_m - P_n) + Z (H_nn - H_mm) + Z O_n / P_n - Z O_m / P_m],
// O_n = sum_{k != m} psi_k* H_kn psi_n and O_m = sum_{k != n} psi_m* H_mk psi_k.
struct Derivative {
    RealVector p;
    RealVector j;
    RealVector k;
};

Derivative derivative(const RealVector& p, const RealVector& j, const RealVector& k, const LinkGeometry& g, double eps_p) {
    const auto& links = g.links();
    const double hb = g.hbar();
    // sum over neighbours of psi_k* H_kn psi_n, i.e. conj(Z_nk)/2 oriented into n
    ComplexVector into = ComplexVector::Zero(g.dim());
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Complex z(k(Index(l)), hb * j(Index(l)));
        into(links[l].n) += 0.5 * std::conj(z);  // psi_m* H_mn psi_n
        into(links[l].m) += 0.5 * z;             // psi_n* H_nm psi_m
    }
    Derivative d{RealVector::Zero(g.dim()), RealVector(links.size()), RealVector(links.size())};
    add_divergence(d.p, j, links, 1.0);
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        const Complex z(k(Index(l)), hb * j(Index(l)));
        const double a2 = g.magnitude(l) * g.magnitude(l);
        Complex bracket = 2 * a2 * (p(m) - p(n)) + z * (g.diagonal(n) - g.diagonal(m));
        if (p(n) > eps_p) bracket += z * (into(n) - 0.5 * std::conj(z)) / p(n);
        // psi_m* H_mk psi_k summed over k != n is conj of the into-m sum without the link itself
        if (p(m) > eps_p) bracket -= z * std::conj(into(m) - 0.5 * z) / p(m);
        const Complex zd = Complex(0, 1 / hb) * bracket;
        d.j(Index(l)) = zd.imag() / hb;
        d.k(Index(l)) = zd.real();
    }
    return d;
}

double min_radicand(const WaveFreeState& s, const LinkGeometry& g) {
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < g.link_count(); ++l) r = std::min(r, radicand(s, g, l));
    return r;
}

bool euler_guard_ok(const WaveFreeState& s, const LinkGeometry& g, double h, const WaveFreeOptions& opt) {
    RealVector exit = RealVector::Zero(g.dim());
    double tbar_scale = g.generator().spectral_bound() / g.hbar();
    const auto& links = g.links();
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        const double j = s.j(Index(l));
        if (s.p(n) < opt.eps_p || s.p(m) < opt.eps_p) continue;
        if (j > 0) exit(m) += j / s.p(m);
        if (j < 0) exit(n) += -j / s.p(n);
        tbar_scale = std::max({tbar_scale, std::abs(j / s.p(m)), std::abs(j / s.p(n))});
    }
    if (h * exit.maxCoeff() > opt.exit_guard) return false;
    const TbarDot td = tbar_dot(s, g);
    for (std::size_t l = 0; l < links.size(); ++l) {
        if (s.p(links[l].n) < opt.eps_p || s.p(links[l].m) < opt.eps_p) continue;
        const double rate = std::max(std::abs(td.forward(Index(l))), std::abs(td.backward(Index(l))));
        if (!std::isfinite(rate) || h * rate > opt.tbar_guard * tbar_scale) return false;
    }
    return true;
}

} // namespace

LinkGeometry::LinkGeometry(const HermitianGenerator& h) : h_(h), magnitude_(h.links().size()), baseline_(h.links().size()) {
    for (std::size_t l = 0; l < h.links().size(); ++l) {
        const Complex v = h.link_values()[l];
        magnitude_(Index(l)) = std::abs(v);
        baseline_[l] = v.real() < 0 ? -1 : 1;
    }
}

double tbar(const WaveFreeState& s, const LinkGeometry& g, Index n, Index m) {
    const Index l = g.generator().link_index(n, m);
    if (l < 0) return 0;
    const double j = n < m ? s.j(l) : -s.j(l);
    return ratio(j, s.p(m));
}

double radicand(const WaveFreeState& s, const LinkGeometry& g, std::size_t l) {
    const auto& lk = g.links()[l];
    const double q = g.hbar() * s.j(Index(l)) / g.magnitude(l);
    return 4 * s.p(lk.n) * s.p(lk.m) - q * q;
}

double alpha(const WaveFreeState& s, const LinkGeometry& g, std::size_t l, double tolerance) {
    const double r = radicand(s, g, l);
    if (r < -tolerance) {
        std::ostringstream os;
        os << "alpha: radicand " << r << " below -" << tolerance << " on link " << g.links()[l].n << "-" << g.links()[l].m
           << " (state left the physical manifold)";
        throw IntegrationError(os.str());
    }
    return std::sqrt(std::max(r, 0.0));
}

Complex theta_with_sign(const WaveFreeState& s, const LinkGeometry& g, std::size_t l, int sign) {
    const auto& lk = g.links()[l];
    if (!(s.p(lk.n) > 0) || !(s.p(lk.m) > 0)) {
        std::ostringstream os;
        os << "theta: undefined on link " << lk.n << "-" << lk.m << " (zero modulus at an endpoint)";
        throw IntegrationError(os.str());
    }
    const double rr = std::sqrt(s.p(lk.n) * s.p(lk.m));
    const double r = radicand(s, g, l);
    const double jmax = 2 * g.magnitude(l) * rr / g.hbar();
    const double j = r < 0 ? std::copysign(jmax, s.j(Index(l))) : s.j(Index(l));
    const double k = sign * g.baseline(l) * g.magnitude(l) * std::sqrt(std::max(r, 0.0));
    return Complex(k, g.hbar() * j) / (2 * rr * g.value(l));
}

Complex theta(const WaveFreeState& s, const LinkGeometry& g, std::size_t l) { return theta_with_sign(s, g, l, s.sign[l]); }

WaveFreeState init_from_polar(const PolarField& polar, const LinkGeometry& g, EventLog* log) {
    if (polar.R.size() != g.dim()) throw ValidationError("initial state: dimension does not match the model");
    if (std::abs(polar.hbar - g.hbar()) > 1e-15 * g.hbar()) throw ValidationError("initial state: hbar does not match the model");
    WaveFreeState s;
    s.p = polar.R.cwiseAbs2();
    s.p_total = s.p.sum();
    s.j = current_from_polar(polar, g.generator()).values();
    const std::size_t nl = g.link_count();
    s.sign.assign(nl, 1);
    s.parity.assign(nl, 1);
    s.theta.assign(nl, Complex(1));
    for (std::size_t l = 0; l < nl; ++l) {
        const Index n = g.links()[l].n, m = g.links()[l].m;
        if (s.p(n) < probability_floor || s.p(m) < probability_floor) {
            if (log) log->record("frozen-link", "link " + std::to_string(n) + "-" + std::to_string(m) + " touches a label with R = 0");
            continue;
        }
        // Registers start on the branch selected by the initial phases.
        const double re_a = polar.R(n) * polar.R(m) * std::real(std::polar(1.0, (polar.S(m) - polar.S(n)) / polar.hbar) * g.value(l));
        s.sign[l] = re_a * g.baseline(l) < 0 ? -1 : 1;
        s.theta[l] = theta(s, g, l);
    }
    s.theta_prev = s.theta;
    return s;
}

RealVector probability_dot(const WaveFreeState& s, const LinkGeometry& g) {
    RealVector d = RealVector::Zero(g.dim());
    add_divergence(d, s.j, g.links(), 1.0);
    return d;
}

RealVector current_dot(const WaveFreeState& s, const LinkGeometry& g, double eps_p) { return derivative(s.p, s.j, link_k(s, g), g, eps_p).j; }

// dTbar_nm/dt = -1/2 Tbar_nm (sum_k Tbar_kn - sum_k Tbar_km)
//             + (1/2hbar^2) P_m^-1 [H_nm] alpha_nm (P_n^-1 sum_k [H_kn] alpha_kn - P_m^-1 sum_k [H_km] alpha_km)
TbarDot tbar_dot(const WaveFreeState& s, const LinkGeometry& g) {
    const RealVector k = link_k(s, g);
    const LabelSums sums = label_sums(s, g, k);
    const double hb2 = g.hbar() * g.hbar();
    const auto& links = g.links();
    TbarDot out{RealVector(links.size()), RealVector(links.size())};
    auto oriented = [&](std::size_t l, Index n, Index m, double j, double sum_jn, double sum_jm) {
        const double a2 = g.magnitude(l) * g.magnitude(l);
        const double kk = k(Index(l));
        const double pn = s.p(n), pm = s.p(m);
        const double spread = -ratio(sum_jn, pn) + ratio(sum_jm, pm);
        const double first = -0.5 * ratio(j, pm) * (spread == 0 ? 0.0 : spread);
        // K_nm K_mn / (P_n P_m) and K_nm^2 / P_m^2 written through the radicand.
        const double self_nm = 4 * a2 - ratio(hb2 * j * j, pn * pm);
        const double self_mm = ratio(4 * a2 * pn, pm) - ratio(hb2 * j * j, pm * pm);
        const double cross_n = ratio(kk * (sums.k(n) - kk), pm * pn);
        const double cross_m = ratio(kk * (sums.k(m) - kk), pm * pm);
        return first + (cross_n + self_nm - self_mm - cross_m) / (2 * hb2);
    };
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        const double j = s.j(Index(l));
        out.forward(Index(l)) = oriented(l, n, m, j, sums.j(n), sums.j(m));
        out.backward(Index(l)) = oriented(l, m, n, -j, sums.j(m), sums.j(n));
    }
    return out;
}

CrossoverDecision detect_crossover(const WaveFreeState& before, const WaveFreeState& after, const LinkGeometry& g, std::size_t l) {
    const auto& lk = g.links()[l];
    CrossoverDecision d;
    d.flip_sign = after.sign[l] != before.sign[l];
    d.theta = before.theta[l];
    if (!(after.p(lk.n) > 0) || !(after.p(lk.m) > 0)) return d;

    const Complex now = before.theta[l];
    const Complex pred = before.has_history ? 2.0 * now - before.theta_prev[l] : now;
    const Complex keep = double(after.parity[l]) * theta(after, g, l);
    // Through a node of P the continued theta changes sign.
    if (std::abs(keep - pred) > 1.0 && std::abs(-keep - pred) < 0.5 * std::abs(keep - pred)) {
        d.flip_parity = true;
        d.theta = -keep;
    } else {
        d.theta = keep;
    }
    return d;
}

namespace {

struct Advance {
    RealVector p;
    RealVector j;
    RealVector k;     // carried K at the end of the step
    RealVector flux;
};

Advance advance_rk4(const WaveFreeState& s, const LinkGeometry& g, double dt, int substeps, double eps_p) {
    const auto& links = g.links();
    Advance out{s.p, s.j, link_k(s, g), RealVector::Zero(Index(links.size()))};
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
        const RealVector &p = out.p, &j = out.j, &k = out.k;
        const Derivative k1 = derivative(p, j, k, g, eps_p);
        const RealVector j2 = j + 0.5 * h * k1.j;
        const Derivative k2 = derivative(p + 0.5 * h * k1.p, j2, k + 0.5 * h * k1.k, g, eps_p);
        const RealVector j3 = j + 0.5 * h * k2.j;
        const Derivative k3 = derivative(p + 0.5 * h * k2.p, j3, k + 0.5 * h * k2.k, g, eps_p);
        const RealVector j4 = j + h * k3.j;
        const Derivative k4 = derivative(p + h * k3.p, j4, k + h * k3.k, g, eps_p);
        // Weighted stage currents; dP/dt is linear in J, so this is exactly the P increment.
        const RealVector stage_flux = (j + 2 * j2 + 2 * j3 + j4) / 6.0;
        add_divergence(out.p, stage_flux, links, h);
        out.j += h / 6.0 * (k1.j + 2 * k2.j + 2 * k3.j + k4.j);
        out.k += h / 6.0 * (k1.k + 2 * k2.k + 2 * k3.k + k4.k);
        out.flux += stage_flux / substeps;
    }
    return out;
}

// Explicit update P += J h, J += dJ/dt h; empty result when the rate guards fail.
std::optional<Advance> advance_euler(const WaveFreeState& s, const LinkGeometry& g, double dt, int substeps, const WaveFreeOptions& opt) {
    const auto& links = g.links();
    WaveFreeState cur = s;
    Advance out{s.p, s.j, link_k(s, g), RealVector::Zero(Index(links.size()))};
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
        cur.p = out.p;
        cur.j = out.j;
        if (!euler_guard_ok(cur, g, h, opt)) return std::nullopt;
        const Derivative d = derivative(out.p, out.j, out.k, g, opt.eps_p);
        add_divergence(out.p, out.j, links, h);
        out.flux += out.j / substeps;
        out.j += h * d.j;
        out.k += h * d.k;
    }
    return out;
}

} // namespace

WaveFreeState step(const WaveFreeState& s, const LinkGeometry& g, double dt, const WaveFreeOptions& opt, StepReport* report, EventLog* log) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt: must be positive and finite");
    const auto& links = g.links();
    const std::size_t nl = links.size();

    int base = 1;
    if (opt.scheme == WaveFreeScheme::rk4) {
        const double bound = g.generator().spectral_bound() / g.hbar();
        while (dt / base * bound > 1.0) base *= 2;
    }
    std::optional<Advance> adv;
    int substeps = base;
    std::string reason;
    for (int halvings = 0; halvings <= opt.max_halvings; ++halvings, substeps *= 2) {
        adv = opt.scheme == WaveFreeScheme::rk4 ? std::optional<Advance>(advance_rk4(s, g, dt, substeps, opt.eps_p)) : advance_euler(s, g, dt, substeps, opt);
        if (!adv) {
            reason = "rate guard";
            continue;
        }
        if (!adv->p.allFinite() || !adv->j.allFinite()) {
            reason = "non-finite state";
            adv.reset();
            continue;
        }
        WaveFreeState trial = s;
        trial.p = adv->p;
        trial.j = adv->j;
        const double r = min_radicand(trial, g);
        if (nl && r < -opt.radicand_tolerance) {
            std::ostringstream os;
            os << "radicand " << r;
            reason = os.str();
            adv.reset();
            continue;
        }
        break;
    }
    if (!adv) {
        std::ostringstream os;
        os << "step: " << reason << " not resolved after " << opt.max_halvings << " halvings at t = " << s.t << " (dt = " << dt << ")";
        throw IntegrationError(os.str());
    }
    if (substeps > base && log) log->record("step-halving", "t = " + std::to_string(s.t) + ", substeps " + std::to_string(substeps));

    WaveFreeState out = s;
    out.p = std::move(adv->p);
    out.j = std::move(adv->j);
    out.t = s.t + dt;
    const double drift = std::abs(out.p.sum() - s.p_total);
    if (drift > opt.probability_drift) {
        std::ostringstream os;
        os << "step: probability drift " << drift << " at t = " << out.t;
        throw IntegrationError(os.str());
    }

    StepReport rep;
    rep.substeps = substeps;
    rep.min_radicand = nl ? min_radicand(out, g) : 0.0;
    for (std::size_t l = 0; l < nl; ++l) {
        // The carried K decides the branch; a value below resolution keeps the register.
        const double kk = adv->k(Index(l));
        const double resolution = g.magnitude(l) * std::sqrt(opt.radicand_resolution);
        if (std::abs(kk) > resolution && kk * out.sign[l] * g.baseline(l) < 0) out.sign[l] = -out.sign[l];
        const CrossoverDecision d = detect_crossover(s, out, g, l);
        if (d.flip_sign) rep.sign_flips.push_back(l);
        if (d.flip_parity) {
            out.parity[l] = -out.parity[l];
            rep.parity_flips.push_back(l);
        }
        rep.max_theta_jump = std::max(rep.max_theta_jump, std::abs(d.theta - s.theta[l]));
        out.theta[l] = d.theta;
    }
    out.theta_prev = s.theta;
    out.has_history = true;
    if (log) {
        if (!rep.sign_flips.empty()) log->record("sign-flip", "t = " + std::to_string(out.t));
        if (!rep.parity_flips.empty()) log->record("node-crossing", "t = " + std::to_string(out.t));
    }
    rep.flux = std::move(adv->flux);
    if (report) *report = std::move(rep);
    return out;
}

namespace {

struct SpanningTree {
    std::vector<double> phase;  // accumulated phase / hbar
    std::vector<char> reached;
    std::vector<char> in_tree;  // per link
};

SpanningTree spanning_tree(const WaveFreeState& s, const LinkGeometry& g) {
    SpanningTree t{std::vector<double>(g.dim(), 0.0), std::vector<char>(g.dim(), 0), std::vector<char>(g.link_count(), 0)};
    std::queue<Index> q;
    for (Index root = 0; root < g.dim(); ++root) {
        if (t.reached[root]) continue;
        t.reached[root] = 1;
        q.push(root);
        while (!q.empty()) {
            const Index n = q.front();
            q.pop();
            for (const auto& [k, l] : g.generator().adjacent(n)) {
                if (t.reached[k] || !(s.p(n) > 0) || !(s.p(k) > 0)) continue;
                const double arg = std::arg(theta(s, g, std::size_t(l)));  // (S_m - S_n) / hbar for link (n, m)
                t.phase[k] = t.phase[n] + (n < k ? arg : -arg);
                t.reached[k] = 1;
                t.in_tree[l] = 1;
                q.push(k);
            }
        }
    }
    return t;
}

} // namespace

std::vector<double> loop_defects(const WaveFreeState& s, const LinkGeometry& g) {
    const SpanningTree t = spanning_tree(s, g);
    std::vector<double> out;
    for (std::size_t l = 0; l < g.link_count(); ++l) {
        const Index n = g.links()[l].n, m = g.links()[l].m;
        if (t.in_tree[l] || !(s.p(n) > 0) || !(s.p(m) > 0)) continue;
        out.push_back(std::abs(wrap_angle(t.phase[m] - t.phase[n] - std::arg(theta(s, g, l)))));
    }
    return out;
}

PolarField reconstruct_phases(const WaveFreeState& s, const LinkGeometry& g, double closure_tolerance) {
    const SpanningTree t = spanning_tree(s, g);
    for (Index n = 1; n < g.dim(); ++n) {
        bool linked = false;
        for (const auto& [k, l] : g.generator().adjacent(n)) linked = linked || t.in_tree[l];
        if (!linked && !g.generator().adjacent(n).empty()) throw IntegrationError("reconstruct_phases: label " + std::to_string(n) + " not reachable through defined links");
    }
    for (double d : loop_defects(s, g)) {
        if (d > closure_tolerance) {
            std::ostringstream os;
            os << "reconstruct_phases: loop-closure defect " << d << " exceeds " << closure_tolerance << " (no single-valued phase)";
            throw IntegrationError(os.str());
        }
    }
    RealVector phase(g.dim());
    for (Index n = 0; n < g.dim(); ++n) phase(n) = g.hbar() * t.phase[n];
    return PolarField(s.p.cwiseMax(0.0).cwiseSqrt(), phase, g.hbar());
}

InvariantReport check_invariants(const WaveFreeState& s, const LinkGeometry& g) {
    InvariantReport r;
    r.min_radicand = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < g.link_count(); ++l) {
        const Index n = g.links()[l].n, m = g.links()[l].m;
        r.min_radicand = std::min(r.min_radicand, radicand(s, g, l));
        if (!(s.p(n) > 0) || !(s.p(m) > 0)) continue;
        r.theta_modulus_error = std::max(r.theta_modulus_error, std::abs(std::abs(theta(s, g, l)) - 1));
        const double jf = tbar(s, g, n, m) * s.p(m), jb = tbar(s, g, m, n) * s.p(n);
        const double scale = std::max(std::abs(jf), std::abs(jb));
        if (scale > 0) r.antisymmetry_error = std::max(r.antisymmetry_error, std::abs(jf + jb) / scale);
    }
    if (g.link_count() == 0) r.min_radicand = 0;
    for (double d : loop_defects(s, g)) r.loop_defect = std::max(r.loop_defect, d);
    r.probability_sum_error = std::abs(s.p.sum() - s.p_total);
    return r;
}

WaveFreeState evolve_wavefree(WaveFreeState s, const LinkGeometry& g, double dt, std::size_t steps, const WaveFreeOptions& opt,
                              const WaveFreeObserver& observer, EventLog* log) {
    if (observer) observer(0, s, nullptr);
    StepReport rep;
    for (std::size_t k = 0; k < steps; ++k) {
        s = step(s, g, dt, opt, &rep, log);
        if (observer) observer(k + 1, s, &rep);
    }
    return s;
}

EnsembleResult simulate_wavefree_ensemble(const WaveFreeState& s0, const LinkGeometry& g, double dt, std::size_t steps, const WaveFreeOptions& opt,
                                          const EnsembleOptions& ens) {
    WaveFreeState s = s0;
    std::size_t at = 0;
    EventLog log;
    FluxSource source = [&](std::size_t k) {
        if (k != at) throw IntegrationError("wave-free ensemble: steps requested out of order");
        StepFlux sf;
        sf.p = s.p;
        if (k < steps) {
            StepReport rep;
            s = step(s, g, dt, opt, &rep, &log);
            sf.flux = std::move(rep.flux);
        }
        ++at;
        return sf;
    };
    EnsembleResult res = run_jump_ensemble(g.generator(), source, dt, steps, ens);
    res.log.merge(log);
    return res;
}

} // namespace bbb
