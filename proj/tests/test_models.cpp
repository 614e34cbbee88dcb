#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bbb/models.hpp"
#include "helpers.hpp"

using namespace bbb;
using doctest::Approx;

TEST_SUITE("models") {

TEST_CASE("circle generator entries") {
    const double a = 0.5, mass = 2, hbar = 1.5;
    const RealVector v = (RealVector(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const HermitianGenerator h = build_circle({4, a, mass, v}, hbar);
    const double hop = hbar * hbar / (2 * mass * a * a);
    for (Index n = 0; n < 4; ++n) {
        CHECK(h(n, n).real() == Approx(v(n) + 2 * hop).epsilon(1e-15));
        CHECK(h(n, (n + 1) % 4) == Complex(-hop));
        CHECK(h((n + 1) % 4, n) == Complex(-hop));
    }
    CHECK(h(0, 2) == Complex(0));
    CHECK(h.links().size() == 4);
    // plane waves diagonalise the free ring
    const HermitianGenerator free = build_circle({12, a, mass, {}}, hbar);
    const ComplexVector pw = polar_compose_values(plane_wave(12, 2, hbar));
    const ComplexVector hp = free.dense() * pw;
    const double e = 2 * hop * (1 - std::cos(2 * std::numbers::pi * 2 / 12));
    CHECK((hp - e * pw).norm() < 1e-13);
    CHECK_THROWS_AS(build_circle({2, a, mass, {}}), ValidationError);
}

TEST_CASE("spin-half generator") {
    const HermitianGenerator h = build_spin_half({0.7, 2.0}, 1.3);
    CHECK(h(0, 1) == Complex(1.4));
    CHECK(h(0, 0) == Complex(0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    CHECK(es.eigenvalues()(0) == Approx(-1.4));
    CHECK(es.eigenvalues()(1) == Approx(1.4));
}

TEST_CASE("particle-spin generator is the Kronecker sum") {
    const ParticleSpinModel m{{5, 0.6, 1.0, RealVector::LinSpaced(5, 0, 1)}, {1.0, 0.8}};
    const Eigen::MatrixXcd hc = build_circle(m.circle).dense(), hs = build_spin_half(m.spin).dense();
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(10, 10);
    for (Index k = 0; k < 5; ++k)
        for (Index k2 = 0; k2 < 5; ++k2)
            for (Index s = 0; s < 2; ++s)
                for (Index s2 = 0; s2 < 2; ++s2) {
                    Complex v = 0;
                    if (s == s2) v += hc(k, k2);
                    if (k == k2) v += hs(s, s2);
                    want(particle_spin_label(k, s), particle_spin_label(k2, s2)) = v;
                }
    CHECK((build_particle_spin(m).dense() - want).norm() < 1e-14);
}

TEST_CASE("gamma is calibrated from the reference") {
    CHECK(calibrate_gamma({1.0, 1.0}, 1.0) == Approx(1).epsilon(1e-10));
    CHECK(calibrate_gamma({1.0, 2.5}, 1.0) == Approx(2.5).epsilon(1e-10));
    CHECK(calibrate_gamma({0.5, 1.0}, 2.0) == Approx(0.25).epsilon(1e-10));
    CHECK(printed_spin_gamma({1.0, 2.0}, 1.0) == 8);
    CHECK_THROWS_AS(calibrate_gamma({1.0, 0.0}), ValidationError);
}

TEST_CASE("closed form examples") {
    const AnalyticSpinSolution sol{1.0, 0.0};
    CHECK(sol.p2(0) == 1);
    CHECK(sol.tbar12(0) == 0);
    const double t = std::numbers::pi / 4;
    CHECK(sol.p2(t) == Approx(0.5));
    CHECK(sol.tbar12(t) == Approx(2));
    // Tbar_12 = -d ln P_2 / dt
    for (double tt : {0.1, 0.4, 1.0, 2.0}) {
        const double h = 1e-6;
        const double d = -(std::log(sol.p2(tt + h)) - std::log(sol.p2(tt - h))) / (2 * h);
        CHECK(sol.tbar12(tt) == Approx(d).epsilon(1e-7));
    }
}

TEST_CASE("cos2 fit recovers the phase") {
    std::vector<double> t, p;
    for (int i = 0; i < 400; ++i) {
        t.push_back(0.01 * i);
        p.push_back(std::pow(std::cos(1.3 * t.back() - 0.4), 2));
    }
    const Cos2Fit f = fit_cos2(t, p, 1.3, spin_phase_from_state(p[0], (p[1] - p[0]) / 0.01));
    CHECK(f.delta == Approx(-0.4).epsilon(1e-10));
    CHECK(f.residual < 1e-12);
}

TEST_CASE("spin closed form through the wave-free integrator") {
    const PolarField sy(RealVector::Constant(2, 1 / std::sqrt(2.0)), (RealVector(2) << 0, std::numbers::pi / 2).finished());
    WaveFreeOptions opt;
    opt.scheme = WaveFreeScheme::rk4;
    const SpinClosedFormReport r = spin_closed_form_experiment({1.0, 1.0}, 1.0, std::numbers::pi, 1e-3, sy, opt);
    CHECK(r.gamma_calibrated == Approx(1).epsilon(1e-10));
    CHECK(r.fit.residual < 1e-8);
    CHECK(r.tbar_deviation < 1e-4);
    CHECK(r.tbar_samples > 100);
}

TEST_CASE("particle-spin without a field never moves the spin") {
    const ParticleSpinModel m{{6, 0.5, 1.0, {}}, {1.0, 0.0}};
    const HermitianGenerator h = build_particle_spin(m);
    const PolarField spatial = gaussian_packet(6, 0.5, 1.5, 0.6, 1);
    const PolarField up = basis_state(2, 0);
    const PolarField psi0 = product_state(spatial, up);
    EnsembleOptions opt;
    opt.trajectories = 500;
    opt.sample_steps = {0, 200};
    opt.recorded = 500;
    const EnsembleResult r = simulate_guided_ensemble(polar_compose(psi0), UnitaryIntegrator(h, 0.01), 200, opt);
    for (const auto& tr : r.trajectories)
        for (const auto& smp : tr.samples) CHECK(smp.second % 2 == 0);
}

TEST_CASE("product state: spin sector matches the pure spin") {
    const ParticleSpinModel m{{6, 0.5, 1.0, {}}, {1.0, 0.9}};
    const LinkGeometry g(build_particle_spin(m));
    const LinkGeometry gs(build_spin_half(m.spin));
    const PolarField spin(RealVector((RealVector(2) << std::sqrt(0.8), std::sqrt(0.2)).finished()), (RealVector(2) << 0, 0.9).finished());
    const PolarField psi0 = product_state(gaussian_packet(6, 0.5, 1.5, 0.8, 1), spin);
    WaveFreeOptions opt;
    opt.scheme = WaveFreeScheme::rk4;
    const std::size_t steps = 1000;
    const WaveFreeState full = evolve_wavefree(init_from_polar(psi0, g), g, 1e-3, steps, opt);
    const WaveFreeState pure = evolve_wavefree(init_from_polar(spin, gs), gs, 1e-3, steps, opt);
    double up = 0;
    for (Index k = 0; k < 6; ++k) up += full.p(particle_spin_label(k, 0));
    CHECK(std::abs(up - pure.p(0)) < 1e-6);
}

TEST_CASE("continuum limit diagnostic") {
    ContinuumSpec plane;
    plane.plane_wave = true;
    const ContinuumReport pw = continuum_limit_experiment({32, 64}, plane);
    for (double e : pw.error) CHECK(e < 1e-10);

    const ContinuumReport r = continuum_limit_experiment({64, 128, 256}, ContinuumSpec{});
    CHECK(r.error[2] < r.error[0]);
    for (double q : r.ratios) CHECK(q > 1.6);
}

}
