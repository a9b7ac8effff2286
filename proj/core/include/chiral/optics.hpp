#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

#include "chiral/state.hpp"

namespace chiral {

// Field amplitudes (right-moving, left-moving) on the left of an element are the
// matrix times those on its right. A chain multiplies out leftmost first:
// M = m_0 P(z_1 - z_0) m_1 P(z_2 - z_1) ... m_{N-1}.
using TransferMatrix = Eigen::Matrix2cd;

class SingularElementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AtomScattering {
    cplx r;
    cplx t;
};

/// r = -2 Gamma / (2 Gamma + gamma - 2 i Delta), t = 1 + r.
AtomScattering atom_scattering(double detuning, double gamma_probe, double gamma_loss);

/// (1/t) [[t^2 - r^2, r], [-r, 1]]; throws SingularElementError when t vanishes
/// (lossless atom exactly on resonance).
TransferMatrix atom_matrix(double detuning, double gamma_probe, double gamma_loss);

/// diag(e^{i d}, e^{-i d}) for a distance d in units of 1/k.
TransferMatrix propagation_matrix(double d);

struct OpticalResponse {
    double detuning = 0.0;
    cplx t_r, r_l, r_r, t_l;
    TransferMatrix matrix = TransferMatrix::Identity();
};

/// Probe response of atoms at the given ascending positions.
OpticalResponse ensemble_response(std::span<const double> sorted_z, double detuning,
                                  double gamma_probe, double gamma_loss);

struct Spectrum {
    std::vector<OpticalResponse> points;
    double peak_detuning = 0.0;   // argmax |R_L|
    double peak_value = 0.0;
    double fwhm = 0.0;            // full width at half maximum of |R_L|; NaN if not bracketed
};

Spectrum spectrum(std::span<const double> sorted_z, std::span<const double> detunings,
                  double gamma_probe, double gamma_loss);

/// Full width at half maximum of samples y(x) around their largest value, with linear
/// interpolation at the crossings. NaN when the half level is not reached on both sides.
double full_width_half_max(std::span<const double> x, std::span<const double> y);

}  // namespace chiral
