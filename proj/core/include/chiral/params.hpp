#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace chiral {

// Internal units: time 1/Gamma_tot, length 1/k, momentum hbar*k,
// energy hbar*Gamma_tot. One wavelength is 2*pi in these units.
inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kWavelength = kTwoPi;

class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Operation called outside its domain (as opposed to a bad parameter value).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Physical constants of the atomic transition used to fix omega_r/Gamma_tot.
///
/// The free-space rate reading treats the quoted 5.2 MHz as gamma = 2*pi*5.2 MHz
/// with Gamma_tot = gamma / (1 - Gamma_1D/Gamma_tot). The alternative reading
/// takes the same number as Gamma_tot itself. Both are selectable.
struct AtomicConstants {
    double wavenumber_per_cm = 11727.0;      // 1/lambda, vacuum
    double mass_kg = 2.20694695e-25;         // 133Cs
    double linewidth_mhz = 5.2;              // divided by 2*pi convention (Hz, not rad/s)
    bool linewidth_is_free_space = true;

    double wavelength_m() const { return 1.0 / (wavenumber_per_cm * 100.0); }
    double wavevector_per_m() const { return kTwoPi / wavelength_m(); }
    /// Recoil angular frequency hbar k^2 / 2m in rad/s.
    double recoil_rad_per_s() const;
    /// Gamma_tot in rad/s for the given guided fraction.
    double gamma_tot_rad_per_s(double gamma_1d_frac) const;
    double omega_r_over_gamma_tot(double gamma_1d_frac) const {
        return recoil_rad_per_s() / gamma_tot_rad_per_s(gamma_1d_frac);
    }
};

inline constexpr double kHbar = 1.054571817e-34;
inline constexpr double kBoltzmann = 1.380649e-23;

struct PhysicalParams {
    int n_atoms = 50;
    double gamma_1d_frac = 0.25;
    double chi_r = 0.0;
    double delta = 20.0;
    // Saturation parameter |s0| used when no explicit Rabi frequency is set.
    double s0 = 0.1;
    std::optional<double> omega;
    double gamma_p = 0.005;
    double omega_r = AtomicConstants{}.omega_r_over_gamma_tot(0.25);
    std::optional<double> probe_gamma_frac;

    /// Throws ValidationError naming the first offending field.
    void validate() const;

    double rabi() const;
    double probe_gamma() const { return probe_gamma_frac.value_or(0.5 * gamma_1d_frac); }
    /// Free-space loss seen by the probe: everything not in the two guided channels.
    double probe_loss() const { return 1.0 - 2.0 * probe_gamma(); }
};

struct DerivedRates {
    double gamma_l = 0.0;
    double gamma_r = 0.0;
    double chi = 0.0;
    double gamma_free = 1.0;
};

DerivedRates derive_rates(const PhysicalParams& params);

/// Rabi frequency giving |s0| = saturation for any detuning.
double default_pump(double delta, double saturation = 0.1);

/// |s0|^2 = Omega^2 / (delta^2 + 1/4) in Gamma_tot units.
double weak_scattering_s0_squared(double omega, double delta);

}  // namespace chiral
