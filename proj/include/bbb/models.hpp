#pragma once

#include <string>
#include <vector>

#include "bbb/lattice.hpp"
#include "bbb/wavefree.hpp"

namespace bbb {

struct CircleModel {
    Index n = 64;
    double a = 1;
    double mass = 1;
    RealVector potential;  // empty means V = 0

    double length() const { return a * double(n); }
};

struct SpinHalfModel {
    double mu = 1;
    double field = 1;
};

struct ParticleSpinModel {
    CircleModel circle;
    SpinHalfModel spin;
};

// Diagonal V_n + hbar^2/(M a^2), nearest neighbours -hbar^2/(2 M a^2), periodic.
HermitianGenerator build_circle(const CircleModel& model, double hbar = 1);
// mu B sigma_x.
HermitianGenerator build_spin_half(const SpinHalfModel& model, double hbar = 1);
// H_circle (x) 1 + 1 (x) H_spin on labels n = 2k + s.
HermitianGenerator build_particle_spin(const ParticleSpinModel& model, double hbar = 1);
inline Index particle_spin_label(Index k, Index s) { return 2 * k + s; }

RealVector harmonic_potential(Index n, double a, double mass, double omega, double center);

// Wrapped Gaussian packet whose probability has standard deviation `width`, phase hbar k x with k = 2 pi q / L.
PolarField gaussian_packet(Index n, double a, double center, double width, int q, double hbar = 1);
PolarField plane_wave(Index n, int q, double hbar = 1);
PolarField basis_state(Index n, Index label, double hbar = 1);
// Lowest eigenvector of the circle generator, made nonnegative.
PolarField ground_state(const CircleModel& model, double hbar = 1);
PolarField product_state(const PolarField& spatial, const PolarField& spin);

struct AnalyticSpinSolution {
    double gamma = 1;
    double delta = 0;

    double p2(double t) const;
    // Tbar_12 = 2 gamma tan(gamma t + delta).
    double tbar12(double t) const;
};

// The constant as printed alongside the closed form, 2 mu^2 B^2 / hbar^2. Kept only for the discrepancy report.
double printed_spin_gamma(const SpinHalfModel& model, double hbar = 1);

// Half the angular frequency of P_2(t) from the reference solver started at (1, 0).
double calibrate_gamma(const SpinHalfModel& model, double hbar = 1);

struct Cos2Fit {
    double gamma = 0;
    double delta = 0;
    double residual = 0;  // sup over samples
};
// Least-squares phase fit of P_2(t) = cos^2(gamma t + delta) at fixed gamma.
Cos2Fit fit_cos2(const std::vector<double>& t, const std::vector<double>& p2, double gamma, double delta_guess);
// Initial phase from P_2(0) and the sign of dP_2/dt at t = 0.
double spin_phase_from_state(double p2, double dp2dt);

struct SpinClosedFormReport {
    double gamma_calibrated = 0;
    double gamma_printed = 0;
    Cos2Fit fit;
    double tbar_deviation = 0;  // max |Tbar - 2 gamma tan| / (1 + |Tbar|) where |cos| > 0.2
    std::size_t tbar_samples = 0;
    std::size_t steps = 0;
    std::vector<std::string> log;
};

SpinClosedFormReport spin_closed_form_experiment(const SpinHalfModel& model, double hbar, double horizon, double dt, const PolarField& initial,
                                                 const WaveFreeOptions& options);

struct ContinuumSpec {
    double length = 20;
    double center = 10;
    double width = 2;
    int q = 2;
    double mass = 1;
    double hbar = 1;
    bool plane_wave = false;
};

struct ContinuumReport {
    std::vector<Index> n;
    std::vector<double> a;
    std::vector<double> error;   // max_n |a dTbar_{n+1,n}/dt + (V+Q)'(x_n)/M|
    std::vector<double> ratios;  // error(a) / error(a/2)
    std::vector<double> first_group_error;  // same with only the -Tbar(...)/2 group kept
};

// Velocity v_n = a Tbar_{n+1,n}; its time derivative at t = 0 against the continuum force -(V+Q)'/M at x_n.
ContinuumReport continuum_limit_experiment(const std::vector<Index>& ns, const ContinuumSpec& spec);

} // namespace bbb
