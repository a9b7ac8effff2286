#include "chiral/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace chiral {

namespace {

// e^{2 pi i f}, reducing f first so that whole wavelengths give exactly 1.
cplx unit_phase(double f) { return std::polar(1.0, kTwoPi * (f - std::round(f))); }

double wrap_unit(double f) {
    f -= std::floor(f);
    return f <= 0.0 ? 1.0 : f;
}

}  // namespace

WsSolution ws_chiral_positions(int n_atoms, double chi) {
    if (n_atoms < 1) throw ValidationError("n_atoms", "must be a positive integer");
    WsSolution ws;
    ws.f.reserve(n_atoms);
    ws.energies.reserve(n_atoms);
    cplx acc{};
    for (int j = 0; j < n_atoms; ++j) {
        double f = 1.0;
        if (j > 0) {
            const double angle = std::atan2(acc.imag(), acc.real()) - kTwoPi / 4.0;
            f = wrap_unit(angle / kTwoPi);
        }
        ws.f.push_back(f);
        ws.energies.push_back(j == 0 ? 0.0 : -2.0 * chi * std::sqrt(static_cast<double>(j)));
        ws.total_energy += ws.energies.back();
        acc += unit_phase(f);
    }
    return ws;
}

double ws_symmetric_spacing(int n_atoms) {
    if (n_atoms < 2) throw ValidationError("n_atoms", "needs at least two atoms");
    return 1.0 - 0.5 / n_atoms;
}

std::vector<double> ws_symmetric_positions(int n_atoms) {
    const double d = ws_symmetric_spacing(n_atoms);
    std::vector<double> f(n_atoms);
    for (int j = 0; j < n_atoms; ++j) f[j] = wrap_unit(1.0 + j * d);
    return f;
}

double ws_energy_scaling(std::span<const int> n_list, double chi) {
    if (n_list.size() < 3) throw UsageError("energy scaling fit needs at least three sizes");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int n : n_list) {
        if (n < 2) throw ValidationError("n_atoms", "energy scaling needs N >= 2");
        const double x = std::log(static_cast<double>(n));
        const double y = std::log(std::abs(ws_chiral_positions(n, chi).total_energy));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(n_list.size());
    const double denom = m * sxx - sx * sx;
    if (!(denom > 0.0)) throw UsageError("energy scaling fit needs distinct sizes");
    return (m * sxy - sx * sy) / denom;
}

std::vector<double> ChiralSteadySolution::positions() const {
    std::vector<double> z(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
        if (j == 0) {
            z[j] = kWavelength * f[0];
        } else {
            double gap = f[j] - f[j - 1];
            gap -= std::floor(gap);
            if (gap <= 0.0) gap = 1.0;
            z[j] = z[j - 1] + kWavelength * gap;
        }
    }
    return z;
}

namespace {

// Steady conditions of one atom given the atoms to its left, summarized by
// a = sum_{i<j} sigma_i e^{-2 pi i f_i}.
struct AtomCondition {
    cplx a;
    cplx drive;    // -i Omega
    cplx denom;    // i delta - 1/2
    double chi;
    double target;   // |sigma_0|^2

    cplx sigma(double f) const { return (drive + chi * unit_phase(f) * a) / denom; }
    double g(double f) const {
        const cplx s = sigma(f);
        return std::norm(s) + 2.0 * (std::conj(s) * unit_phase(f) * a).real() - target;
    }
};

double refine_root(const AtomCondition& c, double lo, double hi, double glo, double tol) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double gm = c.g(mid);
        if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Roots of g on one period where g crosses upward (restoring relative force).
std::vector<double> stable_roots(const AtomCondition& c, const ChiralSolverOptions& opt) {
    std::vector<double> roots;
    const int m = opt.scan_points;
    double prev_f = 0.0;
    double prev_g = c.g(prev_f);
    for (int k = 1; k <= m; ++k) {
        const double f = static_cast<double>(k) / m;
        const double gk = c.g(f);
        if (prev_g < 0.0 && gk >= 0.0)
            roots.push_back(wrap_unit(refine_root(c, prev_f, f, prev_g, opt.root_tolerance)));
        prev_f = f;
        prev_g = gk;
    }
    return roots;
}

struct Placement {
    std::vector<double> f;
    std::vector<cplx> sigma;
    std::vector<double> residuals;
};

// Places atoms left to right, picking the stable root nearest each seed.
Placement place_chain(int n, const PhysicalParams& params, double delta,
                      const std::vector<double>& seed, const ChiralSolverOptions& opt) {
    const double chi = derive_rates(params).chi;
    PhysicalParams p = params;
    p.delta = delta;
    AtomCondition c;
    c.drive = cplx(0.0, -p.rabi());
    c.denom = cplx(-0.5, delta);
    c.chi = chi;
    c.a = 0.0;
    c.target = 0.0;

    Placement out;
    out.f.push_back(1.0);
    out.sigma.push_back(c.sigma(1.0));
    out.residuals.push_back(0.0);
    c.target = std::norm(out.sigma[0]);
    c.a = out.sigma[0] * std::conj(unit_phase(1.0));
    for (int j = 1; j < n; ++j) {
        const std::vector<double> roots = stable_roots(c, opt);
        if (roots.empty()) throw NoSolution(j, delta);
        double best = roots.front();
        double best_d = INFINITY;
        for (double r : roots) {
            const double d = std::abs(circular_difference(r, seed[j]));
            if (d < best_d) {
                best_d = d;
                best = r;
            }
        }
        const cplx s = c.sigma(best);
        out.f.push_back(best);
        out.sigma.push_back(s);
        out.residuals.push_back(std::abs(c.g(best)));
        c.a += s * std::conj(unit_phase(best));
    }
    return out;
}

}  // namespace

ChiralSteadySolution chiral_steady_any_detuning(int n_atoms, const PhysicalParams& params,
                                                const ChiralSolverOptions& options) {
    params.validate();
    if (n_atoms < 1) throw ValidationError("n_atoms", "must be a positive integer");
    if (params.chi_r != 1.0) throw ValidationError("chi_r", "exact solver needs chi_r = 1");
    if (!(params.gamma_1d_frac > 0.0))
        throw ValidationError("gamma_1d_frac", "exact solver needs guided coupling");
    if (options.scan_points < 16) throw ValidationError("scan_points", "must be >= 16");
    if (!(options.step > 0.0)) throw ValidationError("step", "must be > 0");

    std::vector<double> seed = ws_chiral_positions(n_atoms).f;
    const double target = params.delta;
    const double sign = target >= 0.0 ? 1.0 : -1.0;
    std::vector<double> deltas;
    if (std::abs(target) < options.start) {
        for (double d = sign * options.start; sign * (d - target) > 1e-12; d -= sign * options.step)
            deltas.push_back(d);
    }
    deltas.push_back(target);

    Placement placed;
    for (double d : deltas) {
        placed = place_chain(n_atoms, params, d, seed, options);
        seed = placed.f;
    }

    ChiralSteadySolution sol;
    sol.f = std::move(placed.f);
    sol.sigma = std::move(placed.sigma);
    sol.residuals = std::move(placed.residuals);
    const double chi = derive_rates(params).chi;
    // Without damping the common momentum grows without bound.
    sol.drift_momentum = params.gamma_p > 0.0
                             ? -chi * std::norm(sol.sigma[0]) / params.gamma_p
                             : -std::numeric_limits<double>::infinity();
    return sol;
}

std::vector<double> mode_frequencies(int n_atoms, const PhysicalParams& params) {
    params.validate();
    const double chi = derive_rates(params).chi;
    if (!(chi > 0.0)) throw ValidationError("chi_r", "mode frequencies need chi > 0");
    const double s0sq = weak_scattering_s0_squared(params.rabi(), params.delta);
    std::vector<double> w;
    for (int j = 1; j < n_atoms; ++j)
        w.push_back(std::sqrt(4.0 * chi * s0sq * params.omega_r * std::sqrt(static_cast<double>(j))));
    return w;
}

Temperature temperature(const PhysicalParams& params, const AtomicConstants& atom) {
    params.validate();
    if (!(params.gamma_p > 0.0))
        throw ValidationError("gamma_p", "temperature is infinite without damping");
    const double s0sq = weak_scattering_s0_squared(params.rabi(), params.delta);
    Temperature t;
    t.kt_hbar_gamma = params.omega_r * s0sq / params.gamma_p;
    const double gamma_tot = atom.gamma_tot_rad_per_s(params.gamma_1d_frac);
    t.kelvin = kHbar * gamma_tot * t.kt_hbar_gamma / kBoltzmann;
    t.kelvin_times_gamma_p = t.kelvin * params.gamma_p;
    return t;
}

double stability_ratio(const PhysicalParams& params) {
    params.validate();
    return 2.0 * params.gamma_1d_frac * params.gamma_p / params.omega_r;
}

}  // namespace chiral
