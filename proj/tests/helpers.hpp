#pragma once

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>

#include "bbb/lattice.hpp"

namespace testing {

using namespace bbb;

// Independent oracle: psi(t) = V exp(-i D t / hbar) V^H psi0 from a dense eigendecomposition.
inline ComplexVector exact_evolution(const HermitianGenerator& h, const ComplexVector& psi0, double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    const Eigen::VectorXcd ph = (es.eigenvalues().cast<Complex>() * Complex(0, -t / h.hbar())).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * (es.eigenvectors().adjoint() * psi0);
}

inline ComplexVector random_state(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ComplexVector psi(n);
    for (Index k = 0; k < n; ++k) psi(k) = Complex(g(rng), g(rng));
    return psi / psi.norm();
}

// Ring with complex hoppings and a site potential, so links carry flux and phases matter.
inline HermitianGenerator complex_ring(Index n, double hbar = 1) {
    std::vector<Entry<double>> e;
    for (Index k = 0; k < n; ++k) {
        e.push_back({k, k, Complex(0.3 * double(k % 3) - 0.2)});
        e.push_back({k, (k + 1) % n, std::polar(0.7 + 0.1 * double(k), 0.4 + 0.3 * double(k))});
    }
    return HermitianGenerator(n, e, hbar);
}

} // namespace testing
