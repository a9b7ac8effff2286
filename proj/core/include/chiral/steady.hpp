#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiral/dynamics.hpp"

namespace chiral {

enum class Classification { Steady, LimitCycle, NotConverged, Diverged };

std::string to_string(Classification c);

struct Tolerances {
    double eps_p = 1e-7;          // max |pdot|, hbar k Gamma_tot
    double eps_sigma = 1e-7;      // max |sigma-dot|, Gamma_tot
    double eps_spread = 1e-7;     // max_ij |p_i - p_j|, hbar k
    double window = 200.0;        // trailing observation window W
    double cycle_window = 2.0e4;  // span of each half of the limit-cycle test
    double cycle_correlation = 0.9;
};

struct Residuals {
    double max_pdot = 0.0;
    double max_sigmadot = 0.0;
    double momentum_spread = 0.0;

    bool within(const Tolerances& tol) const {
        return max_pdot < tol.eps_p && max_sigmadot < tol.eps_sigma &&
               momentum_spread < tol.eps_spread;
    }
};

Residuals residuals(const EnsembleState& state, const DerivedRates& rates,
                    const PhysicalParams& params);

/// Periodicity test on an evenly sampled series (momentum spread). Both halves must
/// carry non-decaying oscillation whose autocorrelation repeats above min_correlation
/// at the same period (10%).
bool looks_periodic(std::span<const double> series, double min_correlation);

/// Bounded motion that neither settles nor drifts: the momentum spread does not decay
/// (and stays above 10 eps_spread), no relative coordinate strays a quarter wavelength
/// from the final configuration, and some state in the first half of the series lies
/// within a quarter of that excursion of the final one. `configs` holds each sample's
/// sorted positions measured from their mean.
bool looks_recurrent(std::span<const double> spread, std::span<const std::vector<double>> configs,
                     double eps_spread);

/// Sorted positions relative to their mean, the coordinates used by looks_recurrent.
std::vector<double> relative_configuration(const EnsembleState& state);

/// Classifies a stored trajectory. Throws UsageError when it is shorter than W.
Classification classify(const Trajectory& traj, const DerivedRates& rates,
                        const PhysicalParams& params, const Tolerances& tol);

struct SteadyOptions {
    IntegratorSettings integrator{.model = CoherenceModel::Adiabatic};
    Tolerances tol;
    double budget = 1.0e4;           // max simulated time
    double sample_interval = 10.0;   // spacing of monitored residual samples
    // Once max |pdot| falls below this, a Newton step on the slaved steady
    // equations is attempted and kept only if it lands on a linearly stable point.
    bool polish = true;
    double polish_threshold = 1e-4;
    // Called with the state at every monitored sample, including the initial one.
    std::function<void(const EnsembleState&)> observer;
};

struct SteadyStateResult {
    PhysicalParams params;
    EnsembleState state;
    std::vector<double> fractions;   // anchored fractional positions in position order
    Classification classification = Classification::NotConverged;
    Residuals residuals;
    double drift_momentum = 0.0;     // common momentum, meaningful when Steady
    double simulated_time = 0.0;
    double wall_seconds = 0.0;
    bool saturation_warning = false;
    int polish_count = 0;
};

struct PolishResult {
    EnsembleState state;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool stable = false;
};

/// Newton solve of F_j(z) = gamma_p * p_c for all j with sigma slaved, starting from
/// the given state. The first atom in label order is held fixed.
PolishResult polish_steady_state(const EnsembleState& start, const DerivedRates& rates,
                                 const PhysicalParams& params, int max_iterations = 30);

/// Growth rate of the fastest slaved motional mode (translation excluded).
double max_growth_rate(const EnsembleState& state, const DerivedRates& rates,
                       const PhysicalParams& params);

SteadyStateResult find_steady(EnsembleState initial, const PhysicalParams& params,
                              const SteadyOptions& options = {});

/// Seeded start at rest with sigma = 0: atom j sits at j*lambda displaced uniformly by
/// up to +-jitter/2 wavelengths. Gaps shorter than lambda/4 pull atoms into coincident
/// pairs, so fully random starts rarely reach the ordered states; jitter = 1 gives them.
EnsembleState random_initial_state(int n_atoms, std::uint64_t seed, double jitter = 0.02);

struct AnnealSchedule {
    double start = 20.0;    // |delta| of the first run
    double step = 0.5;
    std::vector<double> explicit_deltas;   // overrides start/step when non-empty
    double first_budget = 5.0e4;           // budget of the first run from the random start
    double jitter = 0.02;                  // initial-state jitter in wavelengths
};

std::vector<double> detuning_schedule(double target, const AnnealSchedule& schedule);

struct AnnealStep {
    double delta = 0.0;
    Classification classification = Classification::NotConverged;
    Residuals residuals;
    std::vector<double> fractions;
    double simulated_time = 0.0;
};

struct AnnealResult {
    SteadyStateResult final;      // last converged state (or the first failure if none)
    SteadyStateResult last;       // result of the last step that ran, converged or not
    std::vector<AnnealStep> history;
    bool completed = false;
    std::optional<double> failed_delta;
};

AnnealResult anneal_detuning(const PhysicalParams& target, const AnnealSchedule& schedule,
                             std::uint64_t seed, const SteadyOptions& options = {});

/// Continues an annealing chain from a converged state along further detunings.
/// first_budget > 0 replaces options.budget until the first step has converged.
AnnealResult anneal_from(const EnsembleState& start, const PhysicalParams& base,
                         std::span<const double> deltas, const SteadyOptions& options,
                         double first_budget = 0.0);

struct SlipWindow {
    double lo = 0.55;
    double hi = 0.95;
};

struct SlipReport {
    std::vector<int> boundaries;      // index (position order) of the first atom after each slip
    std::vector<int> group_sizes;
    std::vector<double> slip_gaps;    // full spacing at each slip, in wavelengths

    int slip_count() const { return static_cast<int>(boundaries.size()); }
};

/// Expects positions in ascending order (unwrapped).
SlipReport detect_phase_slips(std::span<const double> sorted_z, SlipWindow window = {});

/// Positions of the state in ascending order.
std::vector<double> sorted_positions(const EnsembleState& state);

}  // namespace chiral
