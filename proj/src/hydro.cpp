#include "bbb/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bbb/random.hpp"

namespace bbb {

namespace {

Index wrap_index(Index k, Index n) { return ((k % n) + n) % n; }

double wrap_position(double x, double length) {
    x = std::fmod(x, length);
    if (x < 0) x += length;
    if (x >= length) x = 0;
    return x;
}

} // namespace

RealVector quantum_potential(const RealVector& p, double a, double mass, double hbar, double eps_p, EventLog* log) {
    const Index n = p.size();
    RealVector r(n);
    for (Index k = 0; k < n; ++k) {
        if (p(k) < eps_p) {
            if (log) log->record("density-floor", "cell " + std::to_string(k));
            r(k) = std::sqrt(eps_p);
        } else {
            r(k) = std::sqrt(p(k));
        }
    }
    RealVector q(n);
    const double c = -hbar * hbar / (2 * mass * a * a);
    for (Index k = 0; k < n; ++k) q(k) = c * (r(wrap_index(k + 1, n)) - 2 * r(k) + r(wrap_index(k - 1, n))) / r(k);
    return q;
}

RealVector central_gradient(const RealVector& f, double a) {
    const Index n = f.size();
    RealVector d(n);
    for (Index k = 0; k < n; ++k) d(k) = (f(wrap_index(k + 1, n)) - f(wrap_index(k - 1, n))) / (2 * a);
    return d;
}

RealVector f1_velocity_field(const ComplexVector& psi, double a, double mass, double hbar, EventLog* log) {
    const Index n = psi.size();
    RealVector v(n);
    for (Index k = 0; k < n; ++k) {
        const Complex up = psi(wrap_index(k + 1, n)), here = psi(k), down = psi(wrap_index(k - 1, n));
        if (up == Complex(0) || here == Complex(0) || down == Complex(0)) {
            if (log) log->record("phase-undefined", "cell " + std::to_string(k));
            v(k) = 0;
            continue;
        }
        const double fwd = std::arg(up * std::conj(here)), bwd = std::arg(here * std::conj(down));
        if (log && (std::abs(fwd) > std::numbers::pi - 1e-6 || std::abs(bwd) > std::numbers::pi - 1e-6))
            log->record("unwrap-ambiguity", "cell " + std::to_string(k));
        v(k) = hbar * (fwd + bwd) / (2 * a * mass);
    }
    return v;
}

double interpolate_periodic(const RealVector& f, double a, double x) {
    const Index n = f.size();
    const double u = x / a;
    const double fl = std::floor(u);
    const double fr = u - fl;
    const Index i = wrap_index(Index(fl), n);
    return f(i) * (1 - fr) + f(wrap_index(i + 1, n)) * fr;
}

RealVector f1_advance(const RealVector& x, const RealVector& v_grid, double a, double dt) {
    const double length = a * double(v_grid.size());
    RealVector out(x.size());
    for (Index i = 0; i < x.size(); ++i) out(i) = wrap_position(x(i) + interpolate_periodic(v_grid, a, x(i)) * dt, length);
    return out;
}

RealVector estimate_density(const ParticleEnsemble& ens, const DensityEstimator& est) {
    const Index n = ens.grid_size();
    RealVector hist = RealVector::Zero(n);
    for (Index i = 0; i < ens.x.size(); ++i) hist(wrap_index(Index(std::floor(ens.x(i) / ens.a + 0.5)), n)) += ens.weight(i);
    if (est.kind == DensityKind::histogram) return hist;

    const double h = est.bandwidth > 0 ? est.bandwidth : ens.a;
    const Index radius = std::min<Index>(Index(std::ceil(6 * h / ens.a)), n / 2);
    RealVector taps(2 * radius + 1);
    for (Index j = -radius; j <= radius; ++j) {
        const double z = double(j) * ens.a / h;
        taps(j + radius) = std::exp(-0.5 * z * z);
    }
    taps /= taps.sum();
    RealVector out = RealVector::Zero(n);
    for (Index k = 0; k < n; ++k)
        for (Index j = -radius; j <= radius; ++j) out(k) += taps(j + radius) * hist(wrap_index(k - j, n));
    return out;
}

ParticleEnsemble f2_step(const ParticleEnsemble& ens, double dt, const DensityEstimator& est, double hbar, EventLog* log) {
    if (!(dt > 0)) throw ValidationError("dt: must be positive");
    const RealVector p = estimate_density(ens, est);
    for (Index i = 0; i < ens.x.size(); ++i) {
        const Index k = wrap_index(Index(std::floor(ens.x(i) / ens.a + 0.5)), p.size());
        if (!(p(k) > 0)) {
            if (log) log->record("density-underflow", "cell " + std::to_string(k));
            break;
        }
    }
    const RealVector q = quantum_potential(p, ens.a, ens.mass, hbar, 1e-12, log);
    const RealVector force = -central_gradient(ens.potential + q, ens.a) / ens.mass;
    ParticleEnsemble out = ens;
    const double length = ens.length();
    for (Index i = 0; i < ens.x.size(); ++i) {
        out.v(i) = ens.v(i) + interpolate_periodic(force, ens.a, ens.x(i)) * dt;
        out.x(i) = wrap_position(ens.x(i) + out.v(i) * dt, length);
    }
    return out;
}

ParticleEnsemble sample_ensemble(const GridField& g, std::size_t m, double mass, const RealVector& potential, std::uint64_t seed) {
    const Index n = g.size();
    std::vector<double> cdf(n);
    double acc = 0;
    for (Index k = 0; k < n; ++k) cdf[k] = acc += std::max(g.p(k), 0.0);
    ParticleEnsemble ens;
    ens.mass = mass;
    ens.a = g.a;
    ens.potential = potential;
    ens.x.resize(Index(m));
    ens.v.resize(Index(m));
    ens.weight = RealVector::Constant(Index(m), 1.0 / double(m));
    const double length = g.length();
    for (std::size_t i = 0; i < m; ++i) {
        const double u = counter_uniform(seed, i, 0) * acc;
        const Index k = std::min<Index>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), n - 1);
        const double x = wrap_position((double(k) + counter_uniform(seed, i, 1) - 0.5) * g.a, length);
        ens.x(Index(i)) = x;
        ens.v(Index(i)) = interpolate_periodic(g.v, g.a, x);
    }
    return ens;
}

ParticleEnsemble grid_ensemble(const GridField& g, double mass, const RealVector& potential) {
    ParticleEnsemble ens;
    ens.mass = mass;
    ens.a = g.a;
    ens.potential = potential;
    ens.x = RealVector::LinSpaced(g.size(), 0, g.a * double(g.size() - 1));
    ens.v = g.v;
    ens.weight = g.p / g.p.sum();
    return ens;
}

GridField f3_step(const GridField& g, const RealVector& potential, double mass, double dt, double hbar, const HydroOptions& opt, EventLog* log) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt: must be positive and finite");
    const Index n = g.size();
    const double vmax = g.v.cwiseAbs().maxCoeff();
    if (vmax * dt / g.a > opt.cfl) {
        std::ostringstream os;
        os << "dt: CFL violation, max|v| dt / a = " << vmax * dt / g.a << " > " << opt.cfl << "; require dt <= " << opt.cfl * g.a / vmax;
        throw ValidationError(os.str());
    }
    const RealVector q = quantum_potential(g.p, g.a, mass, hbar, opt.eps_p, log);
    RealVector phi = potential + q;
    if (opt.bernoulli) phi += 0.5 * mass * g.v.cwiseAbs2();
    GridField out = g;
    out.v = g.v - central_gradient(phi, g.a) * (dt / mass);
    // Flux through the face between k and k+1, using the updated velocity.
    RealVector flux(n);
    for (Index k = 0; k < n; ++k) {
        const Index up = wrap_index(k + 1, n);
        if (opt.flux == FluxKind::upwind)
            flux(k) = g.p(k) * std::max(out.v(k), 0.0) + g.p(up) * std::min(out.v(up), 0.0);
        else
            flux(k) = 0.5 * (g.p(k) * out.v(k) + g.p(up) * out.v(up));
    }
    for (Index k = 0; k < n; ++k) out.p(k) = g.p(k) - (flux(k) - flux(wrap_index(k - 1, n))) * dt / g.a;
    return out;
}

double integrability_check(const RealVector& v, double a, double mass, double hbar) {
    const double c = v.sum() * a * mass;
    const double quantum = 2 * std::numbers::pi * hbar;
    return std::abs(c - quantum * std::round(c / quantum));
}

} // namespace bbb
