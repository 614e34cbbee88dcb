#pragma once

#include <cstdint>

#include "bbb/events.hpp"
#include "bbb/lattice.hpp"

namespace bbb {

// Periodic 1-D grid; cell k sits at x_k = k a.
struct GridField {
    RealVector p;  // probability mass per cell
    RealVector v;  // velocity per cell
    double a = 1;

    Index size() const { return p.size(); }
    double length() const { return a * double(p.size()); }
};

struct ParticleEnsemble {
    RealVector x;       // positions in [0, L)
    RealVector v;
    RealVector weight;  // sums to 1
    double mass = 1;
    double a = 1;
    RealVector potential;  // V on the grid

    Index grid_size() const { return potential.size(); }
    double length() const { return a * double(potential.size()); }
};

enum class DensityKind { histogram, kernel };

struct DensityEstimator {
    DensityKind kind = DensityKind::histogram;
    double bandwidth = 0;  // kernel width; 0 selects the grid spacing
};

enum class FluxKind { centered, upwind };

struct HydroOptions {
    FluxKind flux = FluxKind::centered;
    bool bernoulli = true;  // include the kinetic term m v^2 / 2 in the velocity update
    double cfl = 0.5;
    double eps_p = 1e-12;
};

// Q_k = -(hbar^2 / 2m) D2(sqrt P)_k / (a^2 sqrt P_k) with the periodic three-point stencil.
RealVector quantum_potential(const RealVector& p, double a, double mass, double hbar, double eps_p = 1e-12, EventLog* log = nullptr);

// Periodic central difference.
RealVector central_gradient(const RealVector& f, double a);

// v_k = (unwrapped central difference of S)_k / m.
RealVector f1_velocity_field(const ComplexVector& psi, double a, double mass, double hbar, EventLog* log = nullptr);

// Linear interpolation of a grid field at positions on the periodic domain.
double interpolate_periodic(const RealVector& f, double a, double x);

// Continuous guidance x <- x + v(x) dt with v interpolated from the grid.
RealVector f1_advance(const RealVector& x, const RealVector& v_grid, double a, double dt);

RealVector estimate_density(const ParticleEnsemble& ens, const DensityEstimator& est);

ParticleEnsemble f2_step(const ParticleEnsemble& ens, double dt, const DensityEstimator& est, double hbar, EventLog* log = nullptr);

// M equally weighted particles drawn from the grid density (uniform inside each cell), velocities interpolated from v.
ParticleEnsemble sample_ensemble(const GridField& g, std::size_t m, double mass, const RealVector& potential, std::uint64_t seed);

// One particle per cell centre carrying weight P_k.
ParticleEnsemble grid_ensemble(const GridField& g, double mass, const RealVector& potential);

GridField f3_step(const GridField& g, const RealVector& potential, double mass, double dt, double hbar, const HydroOptions& opt = {},
                  EventLog* log = nullptr);

// |sum_k v_k a m mod 2 pi hbar|, distance to the nearest multiple.
double integrability_check(const RealVector& v, double a, double mass, double hbar);

} // namespace bbb
