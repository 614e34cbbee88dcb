#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "bbb/events.hpp"
#include "bbb/lattice.hpp"

namespace bbb {

enum class UnitaryScheme { implicit_midpoint, exact_exponential };

inline constexpr double probability_floor = 1e-12;
inline constexpr Index max_exponential_dim = 4096;

class UnitaryIntegrator {
public:
    UnitaryIntegrator(HermitianGenerator h, double dt, UnitaryScheme scheme = UnitaryScheme::implicit_midpoint);

    ComplexVector step(const ComplexVector& psi) const;
    double dt() const { return dt_; }
    UnitaryScheme scheme() const { return scheme_; }
    const HermitianGenerator& generator() const { return h_; }

private:
    struct Impl;
    HermitianGenerator h_;
    double dt_;
    UnitaryScheme scheme_;
    std::shared_ptr<const Impl> impl_;
};

// psi(t0), psi(t0 + dt), ..., psi(t0 + steps dt).
std::vector<AmplitudeField> evolve(const AmplitudeField& psi0, const UnitaryIntegrator& integ, std::size_t steps);

// into_first[l] = T_nm (jump m -> n), into_second[l] = T_mn (jump n -> m) for link l = (n, m).
struct JumpRates {
    RealVector into_first;
    RealVector into_second;
};

// T_nm = max(0, J_nm) / P_m with the probability floor applied to both endpoints.
JumpRates rates_from_flux(const RealVector& p, const RealVector& flux, const HermitianGenerator& h, double eps_p = probability_floor,
                          EventLog* log = nullptr);
JumpRates bell_rates(const AmplitudeField& psi, const HermitianGenerator& h, double eps_p = probability_floor, EventLog* log = nullptr);

double exit_rate(const JumpRates& rates, const HermitianGenerator& h, Index n);

// Scales the exits of any label whose total jump probability dt*sum_k T_kn exceeds cap. Returns the number of capped labels.
std::size_t cap_exit_probability(JumpRates& rates, const HermitianGenerator& h, double dt, double cap);

// Categorical draw with one uniform variate u in [0, 1).
Index jump_step(Index n, const JumpRates& rates, const HermitianGenerator& h, double dt, double u);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::uint64_t id = 0;
    std::vector<std::pair<double, Index>> samples;
};

struct EnsembleOptions {
    std::size_t trajectories = 1000;
    std::uint64_t seed = 0;
    std::vector<std::size_t> sample_steps;  // step indices at which occupancy is recorded
    std::size_t recorded = 0;               // trajectories kept in full (at every sample step)
    double eps_p = probability_floor;
    double exit_cap = 0.1;
    unsigned threads = 0;                   // 0: hardware concurrency
    RealVector initial_distribution;        // empty: the model's P at t0
};

struct EnsembleResult {
    std::vector<double> times;
    Eigen::MatrixXd occupancy;  // sample x label, empirical
    Eigen::MatrixXd expected;   // sample x label, co-evolved probability
    std::vector<TrajectoryRecord> trajectories;
    EventLog log;

    double sup_error() const { return (occupancy - expected).cwiseAbs().maxCoeff(); }
    // Largest |P_hat - P| / sqrt(P(1-P)/M) over all samples and labels.
    double max_z(std::size_t m) const;
    double fraction_beyond(double z, std::size_t m) const;
};

// Supplies, for step k (t_k -> t_k + dt), the start-of-step probability and the step-averaged link flux.
// Called once for each k = 0..steps in order; the flux of the final call is unused.
struct StepFlux {
    RealVector p;
    RealVector flux;
};
using FluxSource = std::function<StepFlux(std::size_t step)>;

// Generic jump-chain driver shared by the guided and wave-free ensembles.
EnsembleResult run_jump_ensemble(const HermitianGenerator& h, const FluxSource& source, double dt, std::size_t steps, const EnsembleOptions& options);

// F-I: Bell jump trajectories guided by the reference wave function.
EnsembleResult simulate_guided_ensemble(const AmplitudeField& psi0, const UnitaryIntegrator& integ, std::size_t steps, const EnsembleOptions& options);

} // namespace bbb
