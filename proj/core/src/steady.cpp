#include "chiral/steady.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>

#include "chiral/rng.hpp"

namespace chiral {

std::string to_string(Classification c) {
    switch (c) {
        case Classification::Steady: return "Steady";
        case Classification::LimitCycle: return "LimitCycle";
        case Classification::NotConverged: return "NotConverged";
        case Classification::Diverged: return "Diverged";
    }
    return "Unknown";
}

Residuals residuals(const EnsembleState& state, const DerivedRates& rates,
                    const PhysicalParams& params) {
    const Derivatives d = eom_rhs(state, rates, params);
    Residuals r;
    for (int j = 0; j < state.size(); ++j) {
        r.max_pdot = std::max(r.max_pdot, std::abs(d.dp[j]));
        r.max_sigmadot = std::max(r.max_sigmadot, std::abs(d.dsigma[j]));
    }
    if (state.size() > 0) {
        const auto [lo, hi] = std::minmax_element(state.p.begin(), state.p.end());
        r.momentum_spread = *hi - *lo;
    }
    return r;
}

namespace {

struct AutocorrPeak {
    int lag = 0;
    double value = -1.0;
};

double pearson_at_lag(std::span<const double> x, int lag) {
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    const int m = static_cast<int>(x.size());
    for (int t = 0; t + lag < m; ++t) {
        sxy += x[t] * x[t + lag];
        sxx += x[t] * x[t];
        syy += x[t + lag] * x[t + lag];
    }
    return (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

AutocorrPeak autocorr_peak(std::span<const double> raw) {
    std::vector<double> x(raw.begin(), raw.end());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& v : x) v -= mean;
    const int max_lag = static_cast<int>(x.size()) / 3;
    std::vector<double> r(max_lag + 1, 0.0);
    for (int l = 1; l <= max_lag; ++l) r[l] = pearson_at_lag(x, l);
    int first_negative = 0;
    for (int l = 1; l <= max_lag; ++l) {
        if (r[l] < 0.0) {
            first_negative = l;
            break;
        }
    }
    if (first_negative == 0) return {};
    double best = -1.0;
    for (int l = first_negative; l <= max_lag; ++l) best = std::max(best, r[l]);
    for (int l = first_negative; l <= max_lag; ++l) {
        if (r[l] >= 0.9 * best) {
            // walk to the local maximum of this lobe
            while (l + 1 <= max_lag && r[l + 1] > r[l]) ++l;
            return {l, r[l]};
        }
    }
    return {};
}

double stddev(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return std::sqrt(s / n);
}

}  // namespace

bool looks_periodic(std::span<const double> series, double min_correlation) {
    const std::size_t m = series.size();
    if (m < 64) return false;
    const auto first = series.subspan(0, m / 2);
    const auto second = series.subspan(m / 2, m - m / 2);
    const double s1 = stddev(first), s2 = stddev(second);
    if (!(s2 > 1e-12) || s2 < 0.5 * s1) return false;
    const AutocorrPeak a = autocorr_peak(first);
    const AutocorrPeak b = autocorr_peak(second);
    if (a.lag < 2 || b.lag < 2) return false;
    if (a.value < min_correlation || b.value < min_correlation) return false;
    if (std::abs(a.lag - b.lag) > 0.1 * a.lag + 1) return false;
    // The peak must repeat one period later.
    if (2 * b.lag >= static_cast<int>(second.size()) * 2 / 3) return false;
    std::vector<double> x(second.begin(), second.end());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& v : x) v -= mean;
    double repeat = -1.0;
    for (int l = 2 * b.lag - 2; l <= 2 * b.lag + 2; ++l) repeat = std::max(repeat, pearson_at_lag(x, l));
    return repeat >= min_correlation;
}

std::vector<double> relative_configuration(const EnsembleState& state) {
    std::vector<double> c = state.z;
    std::sort(c.begin(), c.end());
    const double mean = c.empty() ? 0.0 : std::accumulate(c.begin(), c.end(), 0.0) / c.size();
    for (double& v : c) v -= mean;
    return c;
}

bool looks_recurrent(std::span<const double> spread, std::span<const std::vector<double>> configs,
                     double eps_spread) {
    const std::size_t m = spread.size();
    if (m < 64 || configs.size() != m) return false;
    const double m1 = std::accumulate(spread.begin(), spread.begin() + m / 2, 0.0) / (m / 2);
    const double m2 = std::accumulate(spread.begin() + m / 2, spread.end(), 0.0) / (m - m / 2);
    if (!(m2 > 10.0 * eps_spread) || m2 < 0.5 * m1) return false;
    const std::vector<double>& last = configs.back();
    auto distance = [&](const std::vector<double>& c) {
        double d = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) d = std::max(d, std::abs(c[j] - last[j]));
        return d;
    };
    double excursion = 0.0, closest = INFINITY;
    for (std::size_t k = 0; k < m; ++k) {
        const double d = distance(configs[k]);
        excursion = std::max(excursion, d);
        if (k < m / 2) closest = std::min(closest, d);
    }
    return excursion > 0.0 && excursion < 0.25 * kWavelength && closest <= 0.25 * excursion;
}

Classification classify(const Trajectory& traj, const DerivedRates& rates,
                        const PhysicalParams& params, const Tolerances& tol) {
    if (traj.diverged) return Classification::Diverged;
    if (traj.samples.empty() || traj.samples.back().t - traj.samples.front().t < tol.window)
        throw UsageError("trajectory is shorter than the observation window");
    const double t_end = traj.samples.back().t;
    bool steady = true;
    std::vector<double> spread;
    std::vector<std::vector<double>> configs;
    spread.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        const Residuals r = residuals(s, rates, params);
        spread.push_back(r.momentum_spread);
        configs.push_back(relative_configuration(s));
        if (s.t >= t_end - tol.window - 1e-9 && !r.within(tol)) steady = false;
    }
    if (steady) return Classification::Steady;
    if (looks_periodic(spread, tol.cycle_correlation) ||
        looks_recurrent(spread, configs, tol.eps_spread))
        return Classification::LimitCycle;
    return Classification::NotConverged;
}

namespace {

// Force on each atom with the damping term removed and sigma slaved.
std::vector<double> slaved_forces(EnsembleState& s, const DerivedRates& rates,
                                  const PhysicalParams& params) {
    s.sigma = steady_coherences(s.z, rates, params).sigma;
    PhysicalParams undamped = params;
    undamped.gamma_p = 0.0;
    return eom_rhs(s, rates, undamped).dp;
}

}  // namespace

double max_growth_rate(const EnsembleState& state, const DerivedRates& rates,
                       const PhysicalParams& params) {
    EnsembleState s = state;
    s.sigma = steady_coherences(s.z, rates, params).sigma;
    const int n = s.size();
    const Eigen::MatrixXd k = slaved_force_jacobian(jacobian(s, rates, params));
    Eigen::MatrixXd motion = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    motion.block(0, n, n, n) = 2.0 * params.omega_r * Eigen::MatrixXd::Identity(n, n);
    motion.block(n, 0, n, n) = k;
    motion.block(n, n, n, n) = -params.gamma_p * Eigen::MatrixXd::Identity(n, n);
    Eigen::EigenSolver<Eigen::MatrixXd> es(motion, false);
    return es.eigenvalues().real().maxCoeff();
}

PolishResult polish_steady_state(const EnsembleState& start, const DerivedRates& rates,
                                 const PhysicalParams& params, int max_iterations) {
    PolishResult out;
    out.state = start;
    const int n = start.size();
    if (n == 0 || params.gamma_p <= 0.0) return out;
    EnsembleState s = start;
    double pc = std::accumulate(s.p.begin(), s.p.end(), 0.0) / n;

    auto residual_vec = [&](EnsembleState& st, double p) {
        std::vector<double> f = slaved_forces(st, rates, params);
        Eigen::VectorXd r(n);
        for (int j = 0; j < n; ++j) r[j] = f[j] - params.gamma_p * p;
        return r;
    };

    Eigen::VectorXd r = residual_vec(s, pc);
    double norm = r.cwiseAbs().maxCoeff();
    double moved = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it;
        if (norm < 1e-13) break;
        const Eigen::MatrixXd k = slaved_force_jacobian(jacobian(s, rates, params));
        Eigen::MatrixXd a = k;
        a.col(0).setConstant(-params.gamma_p);   // atom 0 pinned, p_c takes its column
        const Eigen::VectorXd step = a.partialPivLu().solve(-r);
        if (!step.allFinite()) return out;
        double lambda = 1.0;
        bool accepted = false;
        for (int tries = 0; tries < 12; ++tries, lambda *= 0.5) {
            EnsembleState trial = s;
            for (int j = 1; j < n; ++j) trial.z[j] += lambda * step[j];
            const double pc_trial = pc + lambda * step[0];
            const Eigen::VectorXd rt = residual_vec(trial, pc_trial);
            const double nt = rt.cwiseAbs().maxCoeff();
            if (nt < norm) {
                double dz = 0.0;
                for (int j = 1; j < n; ++j) dz = std::max(dz, std::abs(lambda * step[j]));
                moved += dz;
                s = std::move(trial);
                pc = pc_trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
        }
        if (!accepted || moved > 0.5) break;
    }
    out.residual = norm;
    if (norm > 1e-11 || moved > 0.5) return out;
    std::fill(s.p.begin(), s.p.end(), pc);
    out.converged = true;
    out.stable = max_growth_rate(s, rates, params) < 1e-9;
    out.state = std::move(s);
    return out;
}

SteadyStateResult find_steady(EnsembleState initial, const PhysicalParams& params,
                              const SteadyOptions& options) {
    params.validate();
    if (!(options.budget > 0.0)) throw ValidationError("budget", "must be > 0");
    const auto wall_start = std::chrono::steady_clock::now();
    const DerivedRates rates = derive_rates(params);
    const Tolerances& tol = options.tol;

    SteadyStateResult result;
    result.params = params;
    Stepper stepper(rates, params, options.integrator);
    EnsembleState state = std::move(initial);
    if (int bad = state.first_non_finite(); bad >= 0) throw NonFiniteError(bad);
    stepper.slave_coherences(state);

    const long long steps_per_sample =
        std::max(1LL, std::llround(options.sample_interval / stepper.dt()));
    const double sample_dt = static_cast<double>(steps_per_sample) * stepper.dt();
    const double t0 = state.t;
    std::deque<std::pair<double, bool>> window;   // (time, residuals within tol)
    std::vector<double> spread_history;
    std::vector<std::vector<double>> config_history;
    const auto keep_configs = static_cast<std::size_t>(2.0 * tol.cycle_window / sample_dt) + 2;
    double last_polish = -INFINITY;
    double last_cycle_check = t0;
    double max_coh = state.max_coherence();
    long long step_count = 0;

    auto push_sample = [&](const Residuals& r) {
        window.emplace_back(state.t, r.within(tol));
        while (!window.empty() && window.front().first < state.t - tol.window - 1e-9)
            window.pop_front();
        spread_history.push_back(r.momentum_spread);
        config_history.push_back(relative_configuration(state));
        if (config_history.size() > 2 * keep_configs)
            config_history.erase(config_history.begin(), config_history.end() - keep_configs);
        if (options.observer) options.observer(state);
    };

    Residuals current = residuals(state, rates, params);
    push_sample(current);
    Classification cls = Classification::NotConverged;
    try {
        while (state.t - t0 < options.budget - 1e-9) {
            for (long long k = 0; k < steps_per_sample; ++k) {
                stepper.step(state);
                ++step_count;
                state.t = t0 + static_cast<double>(step_count) * stepper.dt();
            }
            max_coh = std::max(max_coh, state.max_coherence());
            current = residuals(state, rates, params);
            push_sample(current);

            const bool full_window = state.t - window.front().first >= tol.window - 1e-9;
            if (full_window &&
                std::all_of(window.begin(), window.end(), [](const auto& w) { return w.second; })) {
                cls = Classification::Steady;
                break;
            }
            if (options.polish && current.max_pdot < options.polish_threshold &&
                !current.within(tol) && state.t - last_polish >= tol.window) {
                last_polish = state.t;
                PolishResult pr = polish_steady_state(state, rates, params);
                if (pr.converged && pr.stable) {
                    pr.state.t = state.t;
                    state = std::move(pr.state);
                    stepper.slave_coherences(state);
                    ++result.polish_count;
                    window.clear();
                    current = residuals(state, rates, params);
                    push_sample(current);
                }
            }
            const double span = state.t - t0;
            if (span >= 2.0 * tol.cycle_window &&
                state.t - last_cycle_check >= 0.25 * tol.cycle_window) {
                last_cycle_check = state.t;
                const auto len = static_cast<std::size_t>(2.0 * tol.cycle_window / sample_dt);
                const std::span<const double> all(spread_history);
                const std::span<const std::vector<double>> cfg(config_history);
                if (len <= all.size() &&
                    (looks_periodic(all.subspan(all.size() - len), tol.cycle_correlation) ||
                     looks_recurrent(all.subspan(all.size() - len), cfg.subspan(cfg.size() - len),
                                     tol.eps_spread))) {
                    cls = Classification::LimitCycle;
                    break;
                }
            }
        }
    } catch (const DivergenceError&) {
        cls = Classification::Diverged;
    }

    result.state = state;
    result.classification = cls;
    result.residuals = cls == Classification::Diverged ? Residuals{} : current;
    result.fractions = anchored_fractions(state.z);
    if (state.size() > 0)
        result.drift_momentum =
            std::accumulate(state.p.begin(), state.p.end(), 0.0) / state.size();
    result.simulated_time = state.t - t0;
    result.saturation_warning = max_coh > kSaturationWarning;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

EnsembleState random_initial_state(int n_atoms, std::uint64_t seed, double jitter) {
    if (!(jitter >= 0.0 && jitter <= 1.0)) throw ValidationError("jitter", "must lie in [0, 1]");
    CounterRng rng(seed);
    EnsembleState s(n_atoms);
    for (int j = 0; j < n_atoms; ++j)
        s.z[j] = kWavelength * (j + jitter * (rng.uniform() - 0.5));
    return s;
}

std::vector<double> detuning_schedule(double target, const AnnealSchedule& schedule) {
    if (!schedule.explicit_deltas.empty()) {
        const auto& d = schedule.explicit_deltas;
        const double sign = d.front() >= 0.0 ? 1.0 : -1.0;
        if (std::abs(std::abs(d.front()) - 20.0) > 1e-12)
            throw UsageError("annealing schedule must start at +-20 Gamma_tot");
        if ((target >= 0.0) != (sign > 0.0))
            throw UsageError("annealing schedule sign must match the target detuning");
        for (std::size_t i = 1; i < d.size(); ++i)
            if (sign * (d[i] - d[i - 1]) > 0.0)
                throw UsageError("annealing schedule is not monotone toward resonance");
        if (std::abs(d.back() - target) > 1e-12)
            throw UsageError("annealing schedule must end at the target detuning");
        return d;
    }
    if (!(schedule.step > 0.0)) throw UsageError("annealing step must be > 0");
    if (std::abs(target) > schedule.start + 1e-12)
        throw UsageError("target detuning lies beyond the annealing start");
    const double sign = target >= 0.0 ? 1.0 : -1.0;
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double d = sign * (schedule.start - k * schedule.step);
        if (sign * (d - target) <= 1e-12) break;
        out.push_back(d);
    }
    out.push_back(target);
    return out;
}

namespace {

void recenter(EnsembleState& s) {
    if (s.size() == 0) return;
    const double lo = *std::min_element(s.z.begin(), s.z.end());
    const double shift = kWavelength * std::floor(lo / kWavelength);
    for (double& z : s.z) z -= shift;
    s.t = 0.0;
}

}  // namespace

AnnealResult anneal_from(const EnsembleState& start, const PhysicalParams& base,
                         std::span<const double> deltas, const SteadyOptions& options,
                         double first_budget) {
    AnnealResult out;
    EnsembleState state = start;
    bool have_converged = false;
    for (double d : deltas) {
        PhysicalParams p = base;
        p.delta = d;
        recenter(state);
        SteadyOptions step_options = options;
        if (!have_converged && first_budget > 0.0) step_options.budget = first_budget;
        SteadyStateResult r = find_steady(state, p, step_options);
        AnnealStep step;
        step.delta = d;
        step.classification = r.classification;
        step.residuals = r.residuals;
        step.fractions = r.fractions;
        step.simulated_time = r.simulated_time;
        out.history.push_back(step);
        out.last = r;
        if (r.classification != Classification::Steady) {
            out.failed_delta = d;
            if (!have_converged) out.final = std::move(r);
            return out;
        }
        state = r.state;
        out.final = std::move(r);
        have_converged = true;
    }
    out.completed = true;
    return out;
}

AnnealResult anneal_detuning(const PhysicalParams& target, const AnnealSchedule& schedule,
                             std::uint64_t seed, const SteadyOptions& options) {
    target.validate();
    const std::vector<double> deltas = detuning_schedule(target.delta, schedule);
    return anneal_from(random_initial_state(target.n_atoms, seed, schedule.jitter), target, deltas,
                       options, schedule.first_budget);
}

SlipReport detect_phase_slips(std::span<const double> sorted_z, SlipWindow window) {
    SlipReport rep;
    const int n = static_cast<int>(sorted_z.size());
    if (n < 2) return rep;
    int group_start = 0;
    for (int i = 0; i + 1 < n; ++i) {
        const double gap = (sorted_z[i + 1] - sorted_z[i]) / kWavelength;
        const double frac = gap - std::floor(gap);
        if (frac >= window.lo && frac <= window.hi) {
            rep.boundaries.push_back(i + 1);
            rep.group_sizes.push_back(i + 1 - group_start);
            rep.slip_gaps.push_back(gap);
            group_start = i + 1;
        }
    }
    rep.group_sizes.push_back(n - group_start);
    return rep;
}

std::vector<double> sorted_positions(const EnsembleState& state) {
    std::vector<double> z = state.z;
    std::sort(z.begin(), z.end());
    return z;
}

}  // namespace chiral
