#pragma once

#include <functional>
#include <vector>

#include "bbb/events.hpp"
#include "bbb/lattice.hpp"
#include "bbb/reference.hpp"

namespace bbb {

// Per-link data cached from a generator: |H_nm|, the baseline sign of Re H_nm (+1 when Re H_nm = 0), adjacency.
class LinkGeometry {
public:
    explicit LinkGeometry(const HermitianGenerator& h);

    Index dim() const { return h_.dim(); }
    double hbar() const { return h_.hbar(); }
    const HermitianGenerator& generator() const { return h_; }
    const std::vector<Link>& links() const { return h_.links(); }
    std::size_t link_count() const { return h_.links().size(); }
    Complex value(std::size_t l) const { return h_.link_values()[l]; }
    double magnitude(std::size_t l) const { return magnitude_(Index(l)); }
    int baseline(std::size_t l) const { return baseline_[l]; }
    double diagonal(Index n) const { return h_.diagonal()(n); }

private:
    HermitianGenerator h_;
    RealVector magnitude_;
    std::vector<int> baseline_;
};

enum class WaveFreeScheme { euler, rk4 };

struct WaveFreeOptions {
    WaveFreeScheme scheme = WaveFreeScheme::euler;
    double eps_p = probability_floor;
    double radicand_tolerance = 1e-9;
    double radicand_resolution = 1e-14;  // below this the sign of Re(psi_n* H_nm psi_m) is not resolvable
    double exit_guard = 0.05;            // max_m sum_n T_nm dt
    double tbar_guard = 0.1;             // dt |dTbar/dt| relative to the rate scale
    int max_halvings = 20;
    double probability_drift = 1e-8;
};

// The wave-function-free state. The antisymmetric link current J_nm = Tbar_nm P_m is stored once per
// link (n < m), so Tbar_nm = J_nm / P_m and Tbar_mn = -J_nm / P_n.
struct WaveFreeState {
    RealVector p;
    RealVector j;
    std::vector<int> sign;     // crossover register multiplying the baseline sign
    std::vector<int> parity;   // continuation of theta through nodes of P
    std::vector<Complex> theta;       // continued theta at t
    std::vector<Complex> theta_prev;  // continued theta at t - dt
    bool has_history = false;
    double t = 0;
    double p_total = 1;
};

double tbar(const WaveFreeState& s, const LinkGeometry& g, Index n, Index m);
double radicand(const WaveFreeState& s, const LinkGeometry& g, std::size_t l);
double alpha(const WaveFreeState& s, const LinkGeometry& g, std::size_t l, double tolerance = 1e-9);
// Physical theta_nm for link l = (n, m) from (P, J, sign register).
Complex theta(const WaveFreeState& s, const LinkGeometry& g, std::size_t l);
// theta with the register `sign` substituted, |theta| = 1 by construction.
Complex theta_with_sign(const WaveFreeState& s, const LinkGeometry& g, std::size_t l, int sign);

WaveFreeState init_from_polar(const PolarField& polar, const LinkGeometry& g, EventLog* log = nullptr);

// dJ_nm/dt per link and dP_n/dt per label.
RealVector current_dot(const WaveFreeState& s, const LinkGeometry& g, double eps_p = probability_floor);
RealVector probability_dot(const WaveFreeState& s, const LinkGeometry& g);

struct TbarDot {
    RealVector forward;   // dTbar_nm/dt for link (n, m)
    RealVector backward;  // dTbar_mn/dt
};
TbarDot tbar_dot(const WaveFreeState& s, const LinkGeometry& g);

struct CrossoverDecision {
    bool flip_sign = false;
    bool flip_parity = false;
    Complex theta;  // continued theta after the decision
};

// `after` carries the integrated (P, J) and the updated sign register; the parity is chosen by
// continuity with the linear prediction from the two previous theta values.
CrossoverDecision detect_crossover(const WaveFreeState& before, const WaveFreeState& after, const LinkGeometry& g, std::size_t l);

struct StepReport {
    RealVector flux;  // step-averaged J per link; dt * divergence equals the P increment
    int substeps = 1;
    std::vector<std::size_t> sign_flips;
    std::vector<std::size_t> parity_flips;
    double max_theta_jump = 0;
    double min_radicand = 0;
};

WaveFreeState step(const WaveFreeState& s, const LinkGeometry& g, double dt, const WaveFreeOptions& opt = {}, StepReport* report = nullptr,
                   EventLog* log = nullptr);

// Phases by spanning-tree accumulation from label 0; throws when a cycle fails to close within 1e-6.
PolarField reconstruct_phases(const WaveFreeState& s, const LinkGeometry& g, double closure_tolerance = 1e-6);
// Closure defect |arg prod theta| of every fundamental cycle.
std::vector<double> loop_defects(const WaveFreeState& s, const LinkGeometry& g);

struct InvariantReport {
    double theta_modulus_error = 0;
    double loop_defect = 0;
    double min_radicand = 0;
    double antisymmetry_error = 0;
    double probability_sum_error = 0;
};
InvariantReport check_invariants(const WaveFreeState& s, const LinkGeometry& g);

using WaveFreeObserver = std::function<void(std::size_t step, const WaveFreeState& s, const StepReport* report)>;
WaveFreeState evolve_wavefree(WaveFreeState s, const LinkGeometry& g, double dt, std::size_t steps, const WaveFreeOptions& opt = {},
                              const WaveFreeObserver& observer = {}, EventLog* log = nullptr);

EnsembleResult simulate_wavefree_ensemble(const WaveFreeState& s0, const LinkGeometry& g, double dt, std::size_t steps, const WaveFreeOptions& opt,
                                          const EnsembleOptions& ens);

} // namespace bbb
