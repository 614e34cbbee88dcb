#include "bbb/models.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bbb/reference.hpp"

namespace bbb {

HermitianGenerator build_circle(const CircleModel& model, double hbar) {
    if (model.n < 3) throw ValidationError("model.N: must be at least 3");
    if (!(model.a > 0)) throw ValidationError("model.a: must be positive");
    if (!(model.mass > 0)) throw ValidationError("model.mass: must be positive");
    if (model.potential.size() != 0 && model.potential.size() != model.n) throw ValidationError("model.potential: length must equal N");
    const double off = -hbar * hbar / (2 * model.mass * model.a * model.a);
    std::vector<Entry<double>> e;
    for (Index k = 0; k < model.n; ++k) {
        const double v = model.potential.size() ? model.potential(k) : 0.0;
        e.push_back({k, k, Complex(v - 2 * off)});
        e.push_back({k, (k + 1) % model.n, Complex(off)});
    }
    return HermitianGenerator(model.n, e, hbar);
}

HermitianGenerator build_spin_half(const SpinHalfModel& model, double hbar) {
    return HermitianGenerator(2, {{0, 1, Complex(model.mu * model.field)}}, hbar);
}

HermitianGenerator build_particle_spin(const ParticleSpinModel& model, double hbar) {
    const HermitianGenerator c = build_circle(model.circle, hbar);
    const double mub = model.spin.mu * model.spin.field;
    std::vector<Entry<double>> e;
    const Index n = model.circle.n;
    for (Index k = 0; k < n; ++k) {
        for (Index s = 0; s < 2; ++s) {
            e.push_back({particle_spin_label(k, s), particle_spin_label(k, s), Complex(c.diagonal()(k))});
            e.push_back({particle_spin_label(k, s), particle_spin_label((k + 1) % n, s), c(k, (k + 1) % n)});
        }
        if (mub != 0) e.push_back({particle_spin_label(k, 0), particle_spin_label(k, 1), Complex(mub)});
    }
    return HermitianGenerator(2 * n, e, hbar);
}

RealVector harmonic_potential(Index n, double a, double mass, double omega, double center) {
    RealVector v(n);
    for (Index k = 0; k < n; ++k) {
        const double x = double(k) * a - center;
        v(k) = 0.5 * mass * omega * omega * x * x;
    }
    return v;
}

PolarField gaussian_packet(Index n, double a, double center, double width, int q, double hbar) {
    if (n < 3) throw ValidationError("initial_state: grid too small");
    if (!(width > 0)) throw ValidationError("initial_state.width: must be positive");
    const double length = a * double(n);
    const double k = 2 * std::numbers::pi * q / length;
    const int images = int(std::ceil(8 * width / length)) + 2;
    RealVector r(n), s(n);
    for (Index i = 0; i < n; ++i) {
        const double x = double(i) * a;
        double sum = 0;
        for (int j = -images; j <= images; ++j) {
            const double u = x - center - j * length;
            sum += std::exp(-u * u / (4 * width * width));
        }
        r(i) = sum;
        s(i) = hbar * k * x;
    }
    r /= r.norm();
    return PolarField(r, s, hbar);
}

PolarField plane_wave(Index n, int q, double hbar) {
    RealVector s(n);
    for (Index i = 0; i < n; ++i) s(i) = hbar * 2 * std::numbers::pi * q * double(i) / double(n);
    return PolarField(RealVector::Constant(n, 1 / std::sqrt(double(n))), s, hbar);
}

PolarField basis_state(Index n, Index label, double hbar) {
    if (label < 0 || label >= n) throw ValidationError("initial_state.n: label out of range");
    RealVector r = RealVector::Zero(n);
    r(label) = 1;
    return PolarField(r, RealVector::Zero(n), hbar);
}

PolarField ground_state(const CircleModel& model, double hbar) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_circle(model, hbar).dense().real());
    RealVector r = es.eigenvectors().col(0);
    if (r.sum() < 0) r = -r;
    r = r.cwiseMax(0.0);
    r /= r.norm();
    return PolarField(r, RealVector::Zero(model.n), hbar);
}

PolarField product_state(const PolarField& spatial, const PolarField& spin) {
    if (spin.R.size() != 2) throw ValidationError("initial_state.spin: needs two components");
    const Index n = spatial.R.size();
    RealVector r(2 * n), s(2 * n);
    for (Index k = 0; k < n; ++k)
        for (Index j = 0; j < 2; ++j) {
            r(particle_spin_label(k, j)) = spatial.R(k) * spin.R(j);
            s(particle_spin_label(k, j)) = spatial.S(k) + spin.S(j);
        }
    return PolarField(r, s, spatial.hbar);
}

double AnalyticSpinSolution::p2(double t) const {
    const double c = std::cos(gamma * t + delta);
    return c * c;
}

double AnalyticSpinSolution::tbar12(double t) const { return 2 * gamma * std::tan(gamma * t + delta); }

double printed_spin_gamma(const SpinHalfModel& model, double hbar) {
    const double mub = model.mu * model.field;
    return 2 * mub * mub / (hbar * hbar);
}

double calibrate_gamma(const SpinHalfModel& model, double hbar) {
    const double mub = std::abs(model.mu * model.field);
    if (!(mub > 0)) throw ValidationError("calibrate_gamma: mu B must be positive");
    const HermitianGenerator h = build_spin_half(model, hbar);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    auto p2 = [&](double t) {
        const Eigen::VectorXcd ph = (es.eigenvalues().cast<Complex>() * Complex(0, -t / hbar)).array().exp();
        const Eigen::VectorXcd psi = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * Eigen::Vector2cd(1, 0);
        return std::norm(psi(1));
    };
    const double dt = 0.01 * hbar / mub;
    std::vector<double> crossings;
    double t = 0, f = p2(0) - 0.5;
    while (crossings.size() < 6) {
        if (t > 1e4 * hbar / mub) throw IntegrationError("calibrate_gamma: no oscillation detected");
        const double tn = t + dt, fn = p2(tn) - 0.5;
        if ((f < 0) != (fn < 0)) {
            double lo = t, hi = tn, flo = f;
            for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
                const double mid = 0.5 * (lo + hi), fm = p2(mid) - 0.5;
                if ((fm < 0) == (flo < 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            crossings.push_back(0.5 * (lo + hi));
        }
        t = tn;
        f = fn;
    }
    // P_2 = sin^2(gamma t) crosses 1/2 every pi / (2 gamma).
    const double n = double(crossings.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < crossings.size(); ++i) {
        sx += double(i);
        sy += crossings[i];
        sxx += double(i) * double(i);
        sxy += double(i) * crossings[i];
    }
    const double spacing = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return std::numbers::pi / (2 * spacing);
}

double spin_phase_from_state(double p2, double dp2dt) {
    const double d = std::acos(std::sqrt(std::clamp(p2, 0.0, 1.0)));
    return dp2dt <= 0 ? d : -d;
}

Cos2Fit fit_cos2(const std::vector<double>& t, const std::vector<double>& p2, double gamma, double delta_guess) {
    if (t.size() != p2.size() || t.empty()) throw ValidationError("fit_cos2: sample arrays empty or mismatched");
    double delta = delta_guess;
    for (int it = 0; it < 50; ++it) {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double ph = gamma * t[i] + delta;
            const double r = p2[i] - std::cos(ph) * std::cos(ph);
            const double dr = std::sin(2 * ph);  // d r / d delta
            num += r * dr;
            den += dr * dr;
        }
        if (!(den > 0)) break;
        const double upd = -num / den;
        delta += upd;
        if (std::abs(upd) < 1e-15) break;
    }
    Cos2Fit fit{gamma, delta, 0};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double c = std::cos(gamma * t[i] + delta);
        fit.residual = std::max(fit.residual, std::abs(p2[i] - c * c));
    }
    if (!std::isfinite(fit.residual)) throw IntegrationError("fit_cos2: fit failure");
    return fit;
}

SpinClosedFormReport spin_closed_form_experiment(const SpinHalfModel& model, double hbar, double horizon, double dt, const PolarField& initial,
                                                 const WaveFreeOptions& options) {
    SpinClosedFormReport rep;
    rep.gamma_calibrated = calibrate_gamma(model, hbar);
    rep.gamma_printed = printed_spin_gamma(model, hbar);
    {
        std::ostringstream os;
        os << "gamma calibrated from the reference solver = " << rep.gamma_calibrated << "; printed constant 2 mu^2 B^2 / hbar^2 = "
           << rep.gamma_printed << " (dimensionally inconsistent, not used)";
        rep.log.push_back(os.str());
    }
    const LinkGeometry g(build_spin_half(model, hbar));
    WaveFreeState s = init_from_polar(initial, g);
    rep.steps = std::size_t(std::llround(horizon / dt));
    std::vector<double> ts, p2s, tb;
    evolve_wavefree(s, g, dt, rep.steps, options, [&](std::size_t k, const WaveFreeState& st, const StepReport*) {
        ts.push_back(double(k) * dt);
        p2s.push_back(st.p(1));
        tb.push_back(st.p(1) > probability_floor ? st.j(0) / st.p(1) : std::numeric_limits<double>::quiet_NaN());
    });
    const double delta0 = spin_phase_from_state(s.p(1), -s.j(0));
    rep.fit = fit_cos2(ts, p2s, rep.gamma_calibrated, delta0);
    const AnalyticSpinSolution sol{rep.fit.gamma, rep.fit.delta};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (std::abs(std::cos(sol.gamma * ts[i] + sol.delta)) <= 0.2 || !std::isfinite(tb[i])) continue;
        rep.tbar_deviation = std::max(rep.tbar_deviation, std::abs(tb[i] - sol.tbar12(ts[i])) / (1 + std::abs(tb[i])));
        ++rep.tbar_samples;
    }
    std::ostringstream os;
    os << "cos^2 fit: gamma = " << rep.fit.gamma << ", delta = " << rep.fit.delta << ", sup residual = " << rep.fit.residual;
    rep.log.push_back(os.str());
    return rep;
}

namespace {

struct WrappedGaussian {
    double length, center, width;

    // R and its first three derivatives, image sum of exp(-u^2 / 4 s^2).
    std::array<double, 4> eval(double x) const {
        std::array<double, 4> r{0, 0, 0, 0};
        const int images = int(std::ceil(8 * width / length)) + 2;
        const double s2 = width * width;
        for (int j = -images; j <= images; ++j) {
            const double u = x - center - j * length;
            const double e = std::exp(-u * u / (4 * s2));
            r[0] += e;
            r[1] += -u / (2 * s2) * e;
            r[2] += (u * u / (4 * s2 * s2) - 1 / (2 * s2)) * e;
            r[3] += (-u * u * u / (8 * s2 * s2 * s2) + 3 * u / (4 * s2 * s2)) * e;
        }
        return r;
    }
};

} // namespace

ContinuumReport continuum_limit_experiment(const std::vector<Index>& ns, const ContinuumSpec& spec) {
    ContinuumReport rep;
    const WrappedGaussian gauss{spec.length, spec.center, spec.width};
    for (Index n : ns) {
        const double a = spec.length / double(n);
        CircleModel model{n, a, spec.mass, {}};
        const LinkGeometry g(build_circle(model, spec.hbar));
        const PolarField polar = spec.plane_wave ? plane_wave(n, spec.q, spec.hbar) : gaussian_packet(n, a, spec.center, spec.width, spec.q, spec.hbar);
        const WaveFreeState s = init_from_polar(polar, g);
        const TbarDot td = tbar_dot(s, g);
        const RealVector pd = probability_dot(s, g);
        double err = 0, first_err = 0;
        for (Index k = 0; k < n; ++k) {
            const Index up = (k + 1) % n;
            const Index l = g.generator().link_index(k, up);
            const bool k_first = k < up;
            const double j_up_k = k_first ? -s.j(l) : s.j(l);  // J_{k+1,k}
            if (j_up_k < 0) throw ValidationError("continuum_limit_experiment: state is not right-moving");
            const double tdot = k_first ? td.backward(l) : td.forward(l);
            // -1/2 Tbar_{k+1,k} (sum_j Tbar_{j,k+1} - sum_j Tbar_{j,k}) = -1/2 Tbar (-dP_{k+1}/P_{k+1} + dP_k/P_k)
            const double first = -0.5 * (j_up_k / s.p(k)) * (-pd(up) / s.p(up) + pd(k) / s.p(k));
            double target = 0;
            if (!spec.plane_wave) {
                const auto r = gauss.eval(double(k) * a);
                const double dq = -spec.hbar * spec.hbar / (2 * spec.mass) * (r[3] / r[0] - r[2] * r[1] / (r[0] * r[0]));
                target = -dq / spec.mass;
            }
            err = std::max(err, std::abs(a * tdot - target));
            first_err = std::max(first_err, std::abs(a * first - target));
        }
        rep.n.push_back(n);
        rep.a.push_back(a);
        rep.error.push_back(err);
        rep.first_group_error.push_back(first_err);
    }
    for (std::size_t i = 0; i + 1 < rep.error.size(); ++i) rep.ratios.push_back(rep.error[i] / rep.error[i + 1]);
    return rep;
}

} // namespace bbb
