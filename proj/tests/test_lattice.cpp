#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bbb/models.hpp"
#include "helpers.hpp"

using namespace bbb;
using doctest::Approx;

TEST_SUITE("lattice") {

TEST_CASE("polar decomposition examples") {
    const double pi = std::numbers::pi;
    {
        ComplexVector v(2);
        v << 1, 0;
        const PolarField p = polar_decompose(AmplitudeField(v));
        CHECK(p.R(0) == 1);
        CHECK(p.R(1) == 0);
        CHECK(p.S(0) == 0);
        CHECK(p.S(1) == 0);
    }
    {
        ComplexVector v(2);
        v << Complex(1, 1) / 2.0, Complex(1, -1) / 2.0;
        const double hbar = 0.7;
        const PolarField p = polar_decompose(AmplitudeField(v), hbar);
        CHECK(p.R(0) == Approx(1 / std::sqrt(2.0)).epsilon(1e-15));
        CHECK(p.R(1) == Approx(1 / std::sqrt(2.0)).epsilon(1e-15));
        CHECK(p.S(0) == Approx(hbar * pi / 4).epsilon(1e-15));
        CHECK(p.S(1) == Approx(-hbar * pi / 4).epsilon(1e-15));
    }
    // arg in (-pi, pi]: a negative real amplitude maps to +pi
    {
        ComplexVector v(1);
        v << Complex(-1, -0.0);
        CHECK(polar_decompose(AmplitudeField(v)).S(0) == Approx(pi));
    }
    // round trip with no zero entries
    const ComplexVector psi = testing::random_state(9, 3);
    const ComplexVector back = polar_compose(polar_decompose(AmplitudeField(psi), 1.3)).values();
    CHECK((back - psi).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("polar composition examples") {
    {
        const ComplexVector psi = polar_compose(PolarField((RealVector(2) << 1, 0).finished(), RealVector::Zero(2))).values();
        CHECK(psi(0) == Complex(1));
        CHECK(psi(1) == Complex(0));
    }
    {
        const double hbar = 2;
        const double r = 1 / std::sqrt(2.0);
        const ComplexVector psi =
            polar_compose(PolarField((RealVector(2) << r, r).finished(), (RealVector(2) << 0, hbar * std::numbers::pi / 2).finished(), hbar)).values();
        CHECK(std::abs(psi(0) - Complex(r, 0)) < 1e-15);
        CHECK(std::abs(psi(1) - Complex(0, r)) < 1e-15);
    }
    {
        const ComplexVector psi = polar_compose(PolarField((RealVector(2) << 0, 1).finished(), (RealVector(2) << 5, 0).finished())).values();
        CHECK(psi(0) == Complex(0));
        CHECK(psi(1) == Complex(1));
    }
    CHECK_THROWS_AS(PolarField((RealVector(2) << -0.1, 1).finished(), RealVector::Zero(2)), ValidationError);
}

TEST_CASE("probability examples") {
    ComplexVector a(2), b(2), c(2);
    a << 1, 0;
    b << 1 / std::sqrt(2.0), Complex(0, 1 / std::sqrt(2.0));
    c << 0.6, Complex(0, 0.8);
    CHECK(probability(AmplitudeField(a)).values()(0) == 1);
    CHECK(probability(AmplitudeField(b)).values()(1) == Approx(0.5).epsilon(1e-15));
    CHECK(probability(AmplitudeField(c)).values()(0) == Approx(9.0 / 25).epsilon(1e-15));
    CHECK(probability(AmplitudeField(c)).values()(1) == Approx(16.0 / 25).epsilon(1e-15));
    ComplexVector bad(2);
    bad << 1, 1;
    CHECK_THROWS_AS(AmplitudeField{bad}, ValidationError);
}

TEST_CASE("hermiticity is enforced at construction") {
    CHECK_THROWS_AS(HermitianGenerator(2, {{0, 1, Complex(1, 1)}, {1, 0, Complex(1, 1)}}), ValidationError);
    CHECK_THROWS_AS(HermitianGenerator(2, {{0, 0, Complex(1, 0.5)}}), ValidationError);
    CHECK_THROWS_AS(HermitianGenerator(2, {{0, 2, Complex(1)}}), ValidationError);
    CHECK_THROWS_AS(HermitianGenerator(2, {{0, 1, Complex(1)}, {0, 1, Complex(1)}}), ValidationError);
    const HermitianGenerator h(2, {{0, 1, Complex(1, 1)}, {1, 0, Complex(1, -1)}});
    CHECK(h(1, 0) == Complex(1, -1));
    CHECK(h.links().size() == 1);
    const Eigen::MatrixXcd d = h.dense();
    CHECK((d - d.adjoint()).norm() == 0);
    // adjacency symmetric
    const HermitianGenerator ring = testing::complex_ring(5);
    for (Index n = 0; n < 5; ++n)
        for (const auto& [k, l] : ring.adjacent(n)) CHECK(ring.link_index(k, n) == l);
}

TEST_CASE("current examples") {
    const HermitianGenerator spin = build_spin_half({1.0, 1.5}, 0.5);
    ComplexVector psi(2);
    psi << 1 / std::sqrt(2.0), Complex(0, 1 / std::sqrt(2.0));
    const CurrentField j = current(AmplitudeField(psi), spin);
    CHECK(j(0, 1) == Approx(1.5 / 0.5).epsilon(1e-14));
    CHECK(j(1, 0) == -j(0, 1));

    // real state and real generator carry no current
    const HermitianGenerator circle = build_circle({8, 0.5, 1.0, {}});
    ComplexVector real = testing::random_state(8, 1).real().cast<Complex>();
    real /= real.norm();
    CHECK(current(real, circle).values().cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("divergence of the current is dP/dt") {
    const HermitianGenerator h = testing::complex_ring(7, 0.8);
    const ComplexVector psi = testing::random_state(7, 11);
    const RealVector div = current(psi, h).divergence(7);
    const double dt = 1e-5;
    const RealVector fd = (testing::exact_evolution(h, psi, dt).cwiseAbs2() - testing::exact_evolution(h, psi, -dt).cwiseAbs2()) / (2 * dt);
    CHECK((div - fd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("current_from_polar agrees with current") {
    const HermitianGenerator models[] = {build_circle({8, 0.3, 1.2, RealVector::LinSpaced(8, 0, 1)}), build_spin_half({0.8, 1.1}, 1.0),
                                         testing::complex_ring(6, 1.7), build_particle_spin({{5, 0.4, 1.0, {}}, {1.0, 0.6}})};
    for (const auto& h : models) {
        double worst = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            const ComplexVector psi = testing::random_state(h.dim(), 1000 + s);
            const PolarField p = polar_decompose(AmplitudeField(psi), h.hbar());
            const RealVector a = current(psi, h).values(), b = current_from_polar(p, h).values();
            worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-12);
    }
    // constant phase, real generator
    const HermitianGenerator c = build_circle({6, 1, 1, {}});
    const PolarField flat(RealVector::Constant(6, 1 / std::sqrt(6.0)), RealVector::Constant(6, 0.4));
    CHECK(current_from_polar(flat, c).values().cwiseAbs().maxCoeff() < 1e-16);
}

TEST_CASE("spectral bound dominates the spectrum") {
    const HermitianGenerator h = testing::complex_ring(9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= h.spectral_bound() + 1e-12);
}

}
