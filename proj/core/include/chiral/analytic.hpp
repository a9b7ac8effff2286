#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiral/params.hpp"
#include "chiral/state.hpp"

namespace chiral {

/// Weak-scattering lattice of a fully chiral chain.
struct WsSolution {
    std::vector<double> f;          // f[0] = 1
    std::vector<double> energies;   // E_j in units of hbar*Gamma_tot*s0^2
    double total_energy = 0.0;
};

/// Each atom sits where the summed field of the atoms to its left is a quarter
/// wavelength out of phase: f_j = (arg sum_{i<j} e^{2 pi i f_i} - pi/2) / 2 pi.
/// Energies use the chiral rate chi (units of Gamma_tot).
WsSolution ws_chiral_positions(int n_atoms, double chi = 0.25);

/// Uniform spacing of the symmetric weak-scattering lattice, in wavelengths.
double ws_symmetric_spacing(int n_atoms);
/// Anchored fractional positions of that lattice (f[0] = 1).
std::vector<double> ws_symmetric_positions(int n_atoms);

/// Least-squares slope of log |sum_j E_j| against log N.
double ws_energy_scaling(std::span<const int> n_list, double chi = 0.25);

class NoSolution : public std::runtime_error {
public:
    NoSolution(int atom, double delta)
        : std::runtime_error("no stable steady position for atom " + std::to_string(atom) +
                             " at delta = " + std::to_string(delta)),
          atom_(atom), delta_(delta) {}
    int atom() const noexcept { return atom_; }
    double delta() const noexcept { return delta_; }

private:
    int atom_;
    double delta_;
};

struct ChiralSolverOptions {
    int scan_points = 4096;          // per wavelength
    double root_tolerance = 1e-10;   // in wavelengths
    double start = 20.0;             // |delta| of the large-detuning branch
    double step = 0.25;              // continuation step toward the target
};

struct ChiralSteadySolution {
    std::vector<double> f;            // f[0] = 1
    std::vector<cplx> sigma;
    double drift_momentum = 0.0;      // hbar k
    std::vector<double> residuals;    // momentum-equality residual per atom (0 for atom 0)

    /// Unwrapped positions with consecutive gaps (f_{j} - f_{j-1}) mod 1 in (0, 1].
    std::vector<double> positions() const;
};

/// Exact steady state of the fully chiral chain (chi_r = 1) at any detuning.
///
/// The cascade lets each atom be placed in turn: sigma_j follows from the atoms on its
/// left, and f_j must make the recoil plus interference force equal to that on atom 0
/// so all atoms share one drift momentum. Among the roots, only those where the
/// relative force restores are kept; the one continuously connected to the
/// weak-scattering lattice is followed from |delta| = start toward the target.
ChiralSteadySolution chiral_steady_any_detuning(int n_atoms, const PhysicalParams& params,
                                                const ChiralSolverOptions& options = {});

/// Natural frequencies omega_j = sqrt(4 chi s0^2 omega_r sqrt(j)), j = 1..N-1
/// (Gamma_tot units). Atom 0 only accelerates and has none.
std::vector<double> mode_frequencies(int n_atoms, const PhysicalParams& params);

struct Temperature {
    double kt_hbar_gamma = 0.0;       // k_B T / (hbar Gamma_tot)
    double kelvin = 0.0;
    double kelvin_times_gamma_p = 0.0;   // T * (gamma_p / Gamma_tot), independent of gamma_p
};

/// Einstein-relation temperature k_B T = hbar omega_r Gamma_tot s0^2 / gamma_p.
/// Throws ValidationError for gamma_p = 0.
Temperature temperature(const PhysicalParams& params, const AtomicConstants& atom = {});

/// E_1 / k_B T = 2 (Gamma_1D / Gamma_tot)(gamma_p / omega_r) for the fully chiral trap.
double stability_ratio(const PhysicalParams& params);

}  // namespace chiral
