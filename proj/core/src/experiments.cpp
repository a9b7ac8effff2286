#include "chiral/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unsupported/Eigen/FFT>

#include "chiral/parallel.hpp"
#include "chiral/rng.hpp"

namespace chiral {

namespace {

// Hann-windowed one-sided amplitude spectrum (squared) of a zero-mean copy of x.
std::vector<double> power_spectrum(std::vector<double> x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double wsum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = 0.5 * (1.0 - std::cos(kTwoPi * k / static_cast<double>(n - 1)));
        x[k] = (x[k] - mean) * w;
        wsum += w;
    }
    Eigen::FFT<double> fft;
    std::vector<cplx> spec;
    fft.fwd(spec, x);
    std::vector<double> power(n / 2 + 1);
    for (std::size_t k = 0; k < power.size(); ++k) {
        const double amp = 2.0 * std::abs(spec[k]) / wsum;
        power[k] = amp * amp;
    }
    return power;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return NAN;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

// Group index of every atom label: number of slips to its left.
std::vector<int> group_of(const EnsembleState& s, const SlipWindow& window) {
    const std::vector<int> order = position_order(s.z);
    std::vector<double> z(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) z[r] = s.z[order[r]];
    const SlipReport rep = detect_phase_slips(z, window);
    std::vector<int> group(order.size(), 0);
    std::size_t b = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        while (b < rep.boundaries.size() && static_cast<std::size_t>(rep.boundaries[b]) <= r) ++b;
        group[order[r]] = static_cast<int>(b);
    }
    return group;
}

}  // namespace

std::vector<int> detect_peaks(std::span<const double> power, const ModeOptions& options) {
    std::vector<int> peaks;
    if (power.size() < 3) return peaks;
    const double floor = std::max({options.noise_factor *
                                       median_of(std::vector<double>(power.begin(), power.end())),
                                   options.relative_floor *
                                       *std::max_element(power.begin(), power.end()),
                                   1e-18});
    const int n = static_cast<int>(power.size());
    const int h = std::max(1, options.peak_half_width);
    // The lowest bins carry the window's leakage of whatever mean drift survives.
    for (int k = 2; k < n; ++k) {
        if (!(power[k] > floor)) continue;
        bool is_max = true;
        for (int q = std::max(0, k - h); q <= std::min(n - 1, k + h) && is_max; ++q)
            if (q != k && (power[q] > power[k] || (power[q] == power[k] && q < k))) is_max = false;
        if (is_max) peaks.push_back(k);
    }
    return peaks;
}

ModeSpectrum mode_spectroscopy(const SteadyStateResult& steady, const ModeOptions& options) {
    if (steady.classification != Classification::Steady)
        throw UsageError("mode spectroscopy needs a steady input state");
    if (!(options.t_sample > 0.0) || !(options.sample_interval > 0.0))
        throw ValidationError("t_sample", "sampling times must be > 0");
    PhysicalParams params = steady.params;
    params.gamma_p = 0.0;
    const DerivedRates rates = derive_rates(params);
    IntegratorSettings settings{.dt = options.dt, .model = CoherenceModel::Adiabatic};
    Stepper stepper(rates, params, settings);

    EnsembleState state = steady.state;
    state.t = 0.0;
    const std::vector<int> order = position_order(state.z);
    const int n = state.size();
    for (int r = 0; r < n; ++r)
        state.z[order[r]] += (r % 2 == 0 ? 1.0 : -1.0) * options.kick * kWavelength;
    stepper.slave_coherences(state);

    const long long per_sample = std::max(1LL, std::llround(options.sample_interval / stepper.dt()));
    const double sample_dt = static_cast<double>(per_sample) * stepper.dt();
    const auto samples = static_cast<std::size_t>(options.t_sample / sample_dt);
    if (samples < 8) throw ValidationError("t_sample", "too short for the sample interval");

    std::vector<std::vector<double>> rel(n, std::vector<double>(samples));
    for (std::size_t k = 0; k < samples; ++k) {
        for (int r = 0; r < n; ++r) rel[r][k] = state.z[order[r]] - state.z[order[0]];
        for (long long s = 0; s < per_sample; ++s) stepper.step(state);
    }

    ModeSpectrum out;
    const double total = static_cast<double>(samples) * sample_dt;
    out.resolution = kTwoPi / total;
    for (std::size_t k = 0; k <= samples / 2; ++k) out.frequencies.push_back(out.resolution * k);
    out.power.assign(n, std::vector<double>(out.frequencies.size(), 0.0));
    out.peaks.assign(n, {});
    // Relative motion below this amplitude (1/k units) is rounding noise.
    const double amplitude_floor = 1e-9;
    for (int r = 1; r < n; ++r) {
        out.power[r] = power_spectrum(rel[r]);
        for (int k : detect_peaks(out.power[r], options))
            if (out.power[r][k] > amplitude_floor * amplitude_floor)
                out.peaks[r].push_back(out.frequencies[k]);
    }
    return out;
}

int PotentialCurve::raw_local_minima() const {
    int count = 0;
    for (std::size_t i = 1; i + 1 < potential.size(); ++i)
        if (potential[i] < potential[i - 1] && potential[i] < potential[i + 1]) ++count;
    return count;
}

int PotentialCurve::local_minima(double min_prominence) const {
    const std::vector<double>& v = potential;
    if (v.size() < 3) return 0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double cut = min_prominence * (*hi - *lo);
    int count = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (!(v[i] < v[i - 1] && v[i] < v[i + 1])) continue;
        double left = v[i], right = v[i];
        for (std::size_t k = i; k-- > 0;) {
            left = std::max(left, v[k]);
            if (v[k] < v[i]) break;
        }
        for (std::size_t k = i + 1; k < v.size(); ++k) {
            right = std::max(right, v[k]);
            if (v[k] < v[i]) break;
        }
        if (std::min(left, right) - v[i] > cut) ++count;
    }
    return count;
}

PotentialCurve effective_potential(const SteadyStateResult& steady, int atom, int grid_points) {
    const int n = steady.state.size();
    if (atom < 0 || atom >= n) throw ValidationError("atom", "index out of range");
    if (grid_points < 3) throw ValidationError("grid_points", "must be >= 3");
    const PhysicalParams& params = steady.params;
    const DerivedRates rates = derive_rates(params);
    const int label = position_order(steady.state.z)[atom];

    PotentialCurve curve;
    curve.atom = atom;
    EnsembleState s = steady.state;
    Derivatives d;
    const double z_eq = steady.state.z[label];
    for (int k = 0; k < grid_points; ++k) {
        const double z = z_eq + kWavelength * (-0.5 + static_cast<double>(k) / (grid_points - 1));
        s.z[label] = z;
        try {
            s.sigma = steady_coherences(s.z, rates, params).sigma;
        } catch (const SingularSystemError& e) {
            throw SingularSystemError("effective potential: coherence solve failed at z = " +
                                      std::to_string(z) + " (" + e.what() + ")");
        }
        eom_rhs(s, rates, params, d);
        curve.z.push_back(z);
        curve.force.push_back(d.dp[label]);
    }
    curve.potential.assign(grid_points, 0.0);
    for (int k = 1; k < grid_points; ++k)
        curve.potential[k] = curve.potential[k - 1] - 0.5 * (curve.force[k] + curve.force[k - 1]) *
                                                          (curve.z[k] - curve.z[k - 1]);
    return curve;
}

QuenchResult chirality_quench(const SteadyStateResult& steady, double chi_r_new,
                              const QuenchOptions& options) {
    PhysicalParams params = steady.params;
    params.chi_r = chi_r_new;
    params.validate();
    if (!(options.duration > 0.0) || !(options.record_interval > 0.0))
        throw ValidationError("duration", "quench times must be > 0");
    const DerivedRates rates = derive_rates(params);
    Stepper stepper(rates, params, options.integrator);
    EnsembleState state = steady.state;
    state.t = 0.0;
    stepper.slave_coherences(state);

    const SlipWindow window;
    QuenchResult out;
    auto record = [&] {
        const SlipReport rep = detect_phase_slips(sorted_positions(state), window);
        out.frames.push_back({state.t, rep.slip_count(), rep.group_sizes});
    };
    std::vector<int> groups = group_of(state, window);
    record();
    const long long per_record =
        std::max(1LL, std::llround(options.record_interval / stepper.dt()));
    const long long total = std::llround(options.duration / stepper.dt());
    for (long long step = 0; step < total;) {
        for (long long k = 0; k < per_record && step < total; ++k, ++step) {
            stepper.step(state);
            state.t = static_cast<double>(step + 1) * stepper.dt();
        }
        record();
        // While an atom is inside the gap the slip structure is momentarily different;
        // compare group membership only between frames with the original slip count.
        if (out.frames.back().slip_count != out.frames.front().slip_count) continue;
        const std::vector<int> now = group_of(state, window);
        for (std::size_t a = 0; a < now.size(); ++a)
            if (now[a] != groups[a]) out.crossing_order.push_back(static_cast<int>(a));
        groups = now;
    }
    out.collapsed = out.frames.front().slip_count > 0 && out.frames.back().slip_count == 0;
    out.final_state = std::move(state);
    return out;
}

TransplantResult transplant_across_slip(const SteadyStateResult& steady, int atom,
                                        const SteadyOptions& options) {
    const int n = steady.state.size();
    if (atom < 0 || atom >= n) throw ValidationError("atom", "index out of range");
    TransplantResult out;
    out.atom = atom;
    const std::vector<int> order = position_order(steady.state.z);
    out.before = detect_phase_slips(sorted_positions(steady.state));
    if (out.before.slip_count() == 0) throw UsageError("transplant needs a phase slip");

    const auto& b = out.before.boundaries;
    EnsembleState start = steady.state;
    const double offset = 1e-6 * kWavelength;
    if (std::find(b.begin(), b.end(), atom + 1) != b.end()) {
        // last atom of a group joins the group on its right
        start.z[order[atom]] = start.z[order[atom + 1]] - kWavelength + offset;
    } else if (std::find(b.begin(), b.end(), atom) != b.end()) {
        start.z[order[atom]] = start.z[order[atom - 1]] + kWavelength - offset;
    } else {
        throw UsageError("atom " + std::to_string(atom) + " is not next to a phase slip");
    }
    start.t = 0.0;
    out.result = find_steady(start, steady.params, options);
    out.after = detect_phase_slips(sorted_positions(out.result.state));
    out.stable_slip =
        out.result.classification == Classification::Steady && out.after.slip_count() > 0;
    out.distinct = out.stable_slip && out.after.group_sizes != out.before.group_sizes;
    return out;
}

EquilibrationStats equilibration_times(const PhysicalParams& params, int trials,
                                       std::uint64_t seed,
                                       const EquilibrationOptions& options) {
    params.validate();
    if (trials < 1) throw ValidationError("trials", "must be >= 1");
    const int n = params.n_atoms;

    struct Trial {
        std::uint64_t seed = 0;
        bool converged = false;
        std::vector<double> times;
    };
    std::vector<Trial> results(trials);
    parallel_for(trials, options.workers, [&](int k) {
        Trial& tr = results[k];
        tr.seed = CounterRng(seed, static_cast<std::uint64_t>(k))();
        std::vector<double> t_hist;
        std::vector<std::vector<double>> p_hist;
        SteadyOptions so = options.steady;
        so.polish = false;   // a Newton jump would make every atom "settle" at the same instant
        so.observer = [&](const EnsembleState& s) {
            t_hist.push_back(s.t);
            p_hist.push_back(s.p);
        };
        const SteadyStateResult r =
            find_steady(random_initial_state(n, tr.seed, options.jitter), params, so);
        if (r.classification != Classification::Steady) return;
        tr.converged = true;
        const std::vector<int> order = position_order(r.state.z);
        tr.times.assign(n, 0.0);
        for (int rank = 0; rank < n; ++rank) {
            const int a = order[rank];
            const double pf = r.state.p[a];
            const double band = options.threshold * std::max(std::abs(pf), so.tol.eps_spread);
            double settled = t_hist.front();
            for (std::size_t s = 0; s < t_hist.size(); ++s)
                if (std::abs(p_hist[s][a] - pf) > band)
                    settled = s + 1 < t_hist.size() ? t_hist[s + 1] : t_hist[s];
            tr.times[rank] = settled;
        }
        const double t0 = tr.times[0];
        for (double& t : tr.times) t -= t0;
    });

    EquilibrationStats stats;
    for (const Trial& tr : results) {
        if (!tr.converged) {
            ++stats.excluded;
            continue;
        }
        stats.trial_seeds.push_back(tr.seed);
        stats.times.push_back(tr.times);
    }
    stats.median.assign(n, NAN);
    if (!stats.times.empty())
        for (int a = 0; a < n; ++a) {
            std::vector<double> col;
            for (const auto& row : stats.times) col.push_back(row[a]);
            stats.median[a] = median_of(std::move(col));
        }
    return stats;
}

SweepAxis parse_sweep_axis(const std::string& name) {
    static const std::map<std::string, SweepAxis> names{
        {"chi_r", SweepAxis::ChiR},          {"delta", SweepAxis::Delta},
        {"gamma_1d_frac", SweepAxis::Gamma1D}, {"n_atoms", SweepAxis::NAtoms},
        {"gamma_p", SweepAxis::GammaP}};
    const auto it = names.find(name);
    if (it == names.end()) throw ValidationError("sweep_axis", "unknown axis '" + name + "'");
    return it->second;
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::ChiR: return "chi_r";
        case SweepAxis::Delta: return "delta";
        case SweepAxis::Gamma1D: return "gamma_1d_frac";
        case SweepAxis::NAtoms: return "n_atoms";
        case SweepAxis::GammaP: return "gamma_p";
    }
    return "?";
}

PhysicalParams with_axis_value(PhysicalParams base, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::ChiR: base.chi_r = value; break;
        case SweepAxis::Delta: base.delta = value; break;
        case SweepAxis::Gamma1D: base.gamma_1d_frac = value; break;
        case SweepAxis::NAtoms:
            if (value != std::round(value)) throw ValidationError("n_atoms", "must be an integer");
            base.n_atoms = static_cast<int>(value);
            break;
        case SweepAxis::GammaP: base.gamma_p = value; break;
    }
    base.validate();
    return base;
}

SteadyStateResult prepare_steady(const PhysicalParams& params, std::uint64_t seed,
                                 const AnnealSchedule& schedule, const SteadyOptions& options) {
    params.validate();
    if (!schedule.explicit_deltas.empty() || std::abs(params.delta) < schedule.start) {
        AnnealResult a = anneal_detuning(params, schedule, seed, options);
        return a.completed ? std::move(a.final) : std::move(a.last);
    }
    SteadyOptions first = options;
    first.budget = std::max(options.budget, schedule.first_budget);
    return find_steady(random_initial_state(params.n_atoms, seed, schedule.jitter), params, first);
}

std::vector<SweepPoint> sweep(const PhysicalParams& base, SweepAxis axis,
                              std::span<const double> values,
                              std::span<const std::uint64_t> seeds,
                              const SweepOptions& options) {
    std::vector<std::pair<double, std::uint64_t>> grid;
    for (double v : values)
        for (std::uint64_t s : seeds) grid.emplace_back(v, s);
    std::sort(grid.begin(), grid.end());
    std::vector<SweepPoint> out(grid.size());
    parallel_for(static_cast<int>(grid.size()), options.workers, [&](int i) {
        SweepPoint& pt = out[i];
        pt.value = grid[i].first;
        pt.seed = grid[i].second;
        try {
            const PhysicalParams p = with_axis_value(base, axis, pt.value);
            if (options.anneal) {
                pt.result = prepare_steady(p, pt.seed, options.schedule, options.steady);
            } else {
                SteadyOptions first = options.steady;
                first.budget = std::max(first.budget, options.schedule.first_budget);
                pt.result = find_steady(
                    random_initial_state(p.n_atoms, pt.seed, options.schedule.jitter), p, first);
            }
            pt.slips = detect_phase_slips(sorted_positions(pt.result.state));
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
    });
    return out;
}

std::vector<ChiralityStep> anneal_chirality(const PhysicalParams& base,
                                            std::span<const double> chi_values,
                                            std::uint64_t seed, const AnnealSchedule& schedule,
                                            const SteadyOptions& options) {
    std::vector<ChiralityStep> out;
    EnsembleState state;
    for (std::size_t k = 0; k < chi_values.size(); ++k) {
        PhysicalParams p = base;
        p.chi_r = chi_values[k];
        p.validate();
        ChiralityStep step;
        step.chi_r = p.chi_r;
        if (k == 0) {
            step.result = prepare_steady(p, seed, schedule, options);
        } else {
            state.t = 0.0;
            step.result = find_steady(state, p, options);
        }
        state = step.result.state;
        step.slips = detect_phase_slips(sorted_positions(state));
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace chiral
