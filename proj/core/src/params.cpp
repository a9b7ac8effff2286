#include "chiral/params.hpp"

#include <cmath>

namespace chiral {

double AtomicConstants::recoil_rad_per_s() const {
    const double k = wavevector_per_m();
    return kHbar * k * k / (2.0 * mass_kg);
}

double AtomicConstants::gamma_tot_rad_per_s(double gamma_1d_frac) const {
    const double rate = kTwoPi * linewidth_mhz * 1e6;
    if (!linewidth_is_free_space) return rate;
    return rate / (1.0 - gamma_1d_frac);
}

void PhysicalParams::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (n_atoms < 1) throw ValidationError("n_atoms", "must be a positive integer");
    if (!finite(gamma_1d_frac) || gamma_1d_frac < 0.0 || gamma_1d_frac > 1.0)
        throw ValidationError("gamma_1d_frac", "must lie in [0, 1]");
    if (!finite(chi_r) || std::abs(chi_r) > 1.0)
        throw ValidationError("chi_r", "must lie in [-1, 1]");
    if (!finite(delta)) throw ValidationError("delta", "must be finite");
    if (!finite(s0) || s0 < 0.0) throw ValidationError("s0", "must be >= 0");
    if (omega && (!finite(*omega) || *omega < 0.0))
        throw ValidationError("omega", "must be >= 0");
    if (!finite(gamma_p) || gamma_p < 0.0) throw ValidationError("gamma_p", "must be >= 0");
    if (!finite(omega_r) || omega_r <= 0.0) throw ValidationError("omega_r", "must be > 0");
    if (probe_gamma_frac &&
        (!finite(*probe_gamma_frac) || *probe_gamma_frac <= 0.0 || *probe_gamma_frac > 0.5))
        throw ValidationError("probe_gamma_frac", "must lie in (0, 0.5]");
}

double PhysicalParams::rabi() const { return omega ? *omega : default_pump(delta, s0); }

DerivedRates derive_rates(const PhysicalParams& params) {
    if (!std::isfinite(params.gamma_1d_frac) || params.gamma_1d_frac < 0.0 ||
        params.gamma_1d_frac > 1.0)
        throw ValidationError("gamma_1d_frac", "must lie in [0, 1]");
    if (!std::isfinite(params.chi_r) || std::abs(params.chi_r) > 1.0)
        throw ValidationError("chi_r", "must lie in [-1, 1]");
    DerivedRates r;
    r.chi = params.chi_r * params.gamma_1d_frac;
    r.gamma_r = 0.5 * (params.gamma_1d_frac + r.chi);
    r.gamma_l = 0.5 * (params.gamma_1d_frac - r.chi);
    r.gamma_free = 1.0 - params.gamma_1d_frac;
    return r;
}

double default_pump(double delta, double saturation) {
    return saturation * std::sqrt(delta * delta + 0.25);
}

double weak_scattering_s0_squared(double omega, double delta) {
    return omega * omega / (delta * delta + 0.25);
}

}  // namespace chiral
