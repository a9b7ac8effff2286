#include "chiral/optics.hpp"

#include <algorithm>
#include <cmath>

#include "chiral/params.hpp"

namespace chiral {

AtomScattering atom_scattering(double detuning, double gamma_probe, double gamma_loss) {
    if (!(gamma_probe > 0.0)) throw ValidationError("probe_gamma", "must be > 0");
    if (!(gamma_loss >= 0.0)) throw ValidationError("probe_loss", "must be >= 0");
    AtomScattering s;
    s.r = -2.0 * gamma_probe / cplx(2.0 * gamma_probe + gamma_loss, -2.0 * detuning);
    s.t = 1.0 + s.r;
    return s;
}

TransferMatrix atom_matrix(double detuning, double gamma_probe, double gamma_loss) {
    const auto [r, t] = atom_scattering(detuning, gamma_probe, gamma_loss);
    if (std::abs(t) < 1e-300)
        throw SingularElementError("atom transfer matrix is singular (t = 0); offset the detuning");
    TransferMatrix m;
    m << t * t - r * r, r, -r, 1.0;
    return m / t;
}

TransferMatrix propagation_matrix(double d) {
    TransferMatrix m = TransferMatrix::Zero();
    m(0, 0) = std::polar(1.0, d);
    m(1, 1) = std::polar(1.0, -d);
    return m;
}

OpticalResponse ensemble_response(std::span<const double> sorted_z, double detuning,
                                  double gamma_probe, double gamma_loss) {
    if (!std::is_sorted(sorted_z.begin(), sorted_z.end()))
        throw UsageError("ensemble_response expects ascending positions");
    OpticalResponse out;
    out.detuning = detuning;
    auto chain = [&](bool mirrored) {
        TransferMatrix m = TransferMatrix::Identity();
        if (sorted_z.empty()) return m;
        const TransferMatrix atom = atom_matrix(detuning, gamma_probe, gamma_loss);
        const std::size_t n = sorted_z.size();
        m = atom;
        for (std::size_t j = 1; j < n; ++j) {
            const double gap = mirrored ? sorted_z[n - j] - sorted_z[n - j - 1]
                                        : sorted_z[j] - sorted_z[j - 1];
            m = m * propagation_matrix(gap) * atom;
        }
        return m;
    };
    const TransferMatrix m = chain(false);
    // Light from the right sees the mirrored chain. Taking t_l from it avoids the
    // cancellation in M11 - M12 M21 / M22 when the chain is nearly opaque.
    const TransferMatrix back = chain(true);
    if (std::abs(m(1, 1)) < 1e-300 || std::abs(back(1, 1)) < 1e-300)
        throw SingularElementError("ensemble matrix has M22 = 0");
    out.matrix = m;
    out.t_r = 1.0 / m(1, 1);
    out.r_l = -m(1, 0) / m(1, 1);
    out.r_r = m(0, 1) / m(1, 1);
    out.t_l = 1.0 / back(1, 1);
    return out;
}

double full_width_half_max(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || x.size() != y.size()) return NAN;
    const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double half = 0.5 * y[peak];
    auto crossing = [&](std::size_t inside, std::size_t outside) {
        const double t = (y[inside] - half) / (y[inside] - y[outside]);
        return x[inside] + t * (x[outside] - x[inside]);
    };
    double left = NAN, right = NAN;
    for (std::size_t i = peak; i > 0; --i)
        if (y[i - 1] < half) {
            left = crossing(i, i - 1);
            break;
        }
    for (std::size_t i = peak; i + 1 < y.size(); ++i)
        if (y[i + 1] < half) {
            right = crossing(i, i + 1);
            break;
        }
    return right - left;
}

Spectrum spectrum(std::span<const double> sorted_z, std::span<const double> detunings,
                  double gamma_probe, double gamma_loss) {
    if (detunings.empty()) throw UsageError("spectrum needs at least one detuning");
    if (!std::is_sorted(detunings.begin(), detunings.end()))
        throw UsageError("spectrum detunings must be ascending");
    Spectrum s;
    std::vector<double> mag;
    for (double d : detunings) {
        s.points.push_back(ensemble_response(sorted_z, d, gamma_probe, gamma_loss));
        mag.push_back(std::abs(s.points.back().r_l));
    }
    const auto peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    s.peak_detuning = detunings[peak];
    s.peak_value = mag[peak];
    s.fwhm = full_width_half_max(detunings, mag);
    return s;
}

}  // namespace chiral
