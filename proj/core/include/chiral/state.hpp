#pragma once

#include <complex>
#include <span>
#include <vector>

namespace chiral {

using cplx = std::complex<double>;

struct EnsembleState {
    std::vector<double> z;      // 1/k
    std::vector<double> p;      // hbar k
    std::vector<cplx> sigma;    // <sigma_ge>
    double t = 0.0;             // 1/Gamma_tot

    EnsembleState() = default;
    explicit EnsembleState(int n) : z(n, 0.0), p(n, 0.0), sigma(n, cplx{}) {}

    int size() const { return static_cast<int>(z.size()); }
    bool all_finite() const;
    /// Index of the first non-finite entry across (z, p, sigma), or -1.
    int first_non_finite() const;
    /// Largest |sigma_j|; above 0.5 the linear (unsaturated) model is suspect.
    double max_coherence() const;
};

inline constexpr double kSaturationWarning = 0.5;

/// (k z / 2 pi) mod 1 mapped into (0, 1].
double fractional_position(double z);
std::vector<double> fractional_positions(std::span<const double> z);

/// Indices that sort z ascending (stable).
std::vector<int> position_order(std::span<const double> z);

/// Fractional positions of the atoms taken in position order and shifted so the
/// leftmost atom sits at f = 1.
std::vector<double> anchored_fractions(std::span<const double> z);

/// Shortest signed distance between two fractional positions on the unit circle.
double circular_difference(double a, double b);

}  // namespace chiral
