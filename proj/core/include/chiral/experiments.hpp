#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chiral/steady.hpp"

namespace chiral {

// ---- mode spectroscopy ----

struct ModeOptions {
    double kick = 1e-3;               // wavelengths, alternating in sign along the chain
    double t_sample = 4.0e5;          // 1/Gamma_tot
    double sample_interval = 20.0;
    double dt = 0.0;                  // adiabatic step, 0 = default
    double noise_factor = 10.0;       // peaks must exceed noise_factor * median power
    // ... and this fraction of the atom's largest bin, which keeps out the weak
    // second-order sum and difference tones of the mode frequencies
    double relative_floor = 1e-3;
    int peak_half_width = 4;          // a peak is the largest bin within +- this many
};

struct ModeSpectrum {
    std::vector<double> frequencies;          // angular, Gamma_tot units
    double resolution = 0.0;                  // bin width 2 pi / t_sample (1/t_sample cyclic)
    std::vector<std::vector<double>> power;   // per atom in position order; row 0 is the reference
    std::vector<std::vector<double>> peaks;   // detected peak frequencies per atom
};

/// Switches off damping, kicks the chain out of equilibrium and Fourier-analyses each
/// atom's motion relative to the leftmost atom (which only accelerates).
ModeSpectrum mode_spectroscopy(const SteadyStateResult& steady, const ModeOptions& options = {});

/// Local maxima of a power spectrum above the noise floor (indices into the spectrum).
std::vector<int> detect_peaks(std::span<const double> power, const ModeOptions& options);

// ---- effective potential ----

struct PotentialCurve {
    int atom = 0;                     // index in position order
    std::vector<double> z;            // trial positions (1/k)
    std::vector<double> force;        // pdot of the scanned atom
    std::vector<double> potential;    // -integral of force, zero at the first point

    /// Interior local minima whose well depth (height of the lower enclosing barrier
    /// above the minimum) exceeds min_prominence times the full range of the curve.
    /// Wells shallower than that are a marginal equilibrium on the verge of vanishing.
    int local_minima(double min_prominence = 1e-3) const;
    /// Every strict interior local minimum, however shallow.
    int raw_local_minima() const;
};

/// Moves one atom across a wavelength centred on its equilibrium while the others stay
/// put, re-solving all coherences at every trial position. Momenta keep their steady
/// values so damping enters as in the dynamics; for a symmetric chain they are zero.
PotentialCurve effective_potential(const SteadyStateResult& steady, int atom,
                                   int grid_points = 401);

// ---- chirality quench ----

struct QuenchOptions {
    double duration = 4.0e5;
    double record_interval = 100.0;
    IntegratorSettings integrator{.model = CoherenceModel::Adiabatic};
};

struct QuenchFrame {
    double t = 0.0;
    int slip_count = 0;
    std::vector<int> group_sizes;
};

struct QuenchResult {
    std::vector<QuenchFrame> frames;
    std::vector<int> crossing_order;  // atom labels, in the order they changed group
    bool collapsed = false;           // slips present at the start and none at the end
    EnsembleState final_state;
};

QuenchResult chirality_quench(const SteadyStateResult& steady, double chi_r_new,
                              const QuenchOptions& options = {});

// ---- transplant across a phase slip ----

struct TransplantResult {
    int atom = 0;                     // position-order index that was moved
    SlipReport before;
    SlipReport after;
    SteadyStateResult result;
    bool stable_slip = false;         // re-converged with at least one slip
    bool distinct = false;            // ... and different group sizes from the start
};

/// Moves atom j (position order) to the other side of the adjacent slip by giving it
/// the fractional position of its neighbour across the slip, plus 1e-6 wavelengths.
TransplantResult transplant_across_slip(const SteadyStateResult& steady, int atom,
                                        const SteadyOptions& options = {});

// ---- equilibration times ----

struct EquilibrationOptions {
    SteadyOptions steady;
    double threshold = 0.01;          // relative deviation from the final momentum
    double jitter = 0.25;             // initial-state jitter in wavelengths
    int workers = 0;
};

struct EquilibrationStats {
    std::vector<std::uint64_t> trial_seeds;        // converged trials only
    std::vector<std::vector<double>> times;        // [trial][atom], atom 0 subtracted
    std::vector<double> median;                    // per atom
    int excluded = 0;                              // trials that did not converge
};

EquilibrationStats equilibration_times(const PhysicalParams& params, int trials,
                                       std::uint64_t seed,
                                       const EquilibrationOptions& options = {});

// ---- sweeps ----

enum class SweepAxis { ChiR, Delta, Gamma1D, NAtoms, GammaP };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);
PhysicalParams with_axis_value(PhysicalParams base, SweepAxis axis, double value);

struct SweepOptions {
    bool anneal = true;
    AnnealSchedule schedule;
    SteadyOptions steady;
    int workers = 0;
};

struct SweepPoint {
    double value = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    SteadyStateResult result;
    SlipReport slips;
};

/// Independent steady-state runs for every (value, seed) pair, sorted by value then
/// seed. A failing point records its error and the sweep continues.
std::vector<SweepPoint> sweep(const PhysicalParams& base, SweepAxis axis,
                              std::span<const double> values,
                              std::span<const std::uint64_t> seeds,
                              const SweepOptions& options = {});

/// Steady state for one parameter set: annealed from the far-detuned side when
/// |delta| is below the schedule start, a direct run from the random start otherwise.
SteadyStateResult prepare_steady(const PhysicalParams& params, std::uint64_t seed,
                                 const AnnealSchedule& schedule, const SteadyOptions& options);

struct ChiralityStep {
    double chi_r = 0.0;
    SteadyStateResult result;
    SlipReport slips;
};

/// Prepares the first chirality by detuning annealing, then raises (or lowers) the
/// chirality through the remaining values, each run starting from the previous state.
std::vector<ChiralityStep> anneal_chirality(const PhysicalParams& base,
                                            std::span<const double> chi_values,
                                            std::uint64_t seed, const AnnealSchedule& schedule,
                                            const SteadyOptions& options);

}  // namespace chiral
