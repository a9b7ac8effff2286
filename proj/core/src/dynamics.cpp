#include "chiral/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace chiral {

namespace {

constexpr cplx kI{0.0, 1.0};

// Partial sums over the chain in position order:
//   left[j]  = sum_{z_i < z_j} sigma_i e^{-i z_i}
//   right[j] = sum_{z_i > z_j} sigma_i e^{+i z_i}
//   tie[j]   = sum_{i != j, z_i == z_j} sigma_i
struct ChainSums {
    std::vector<int> order;
    std::vector<cplx> phase;
    std::vector<cplx> left, right, tie;

    void compute(std::span<const double> z, std::span<const cplx> sigma) {
        const int n = static_cast<int>(z.size());
        order = position_order(z);
        phase.resize(n);
        left.assign(n, cplx{});
        right.assign(n, cplx{});
        tie.assign(n, cplx{});
        for (int j = 0; j < n; ++j) phase[j] = std::polar(1.0, z[j]);

        cplx acc{};
        for (int a = 0; a < n;) {
            int b = a;
            cplx group{}, group_phased{};
            while (b < n && z[order[b]] == z[order[a]]) {
                const int i = order[b];
                group += sigma[i];
                group_phased += sigma[i] * std::conj(phase[i]);
                ++b;
            }
            for (int c = a; c < b; ++c) {
                const int j = order[c];
                left[j] = acc;
                tie[j] = group - sigma[j];
            }
            acc += group_phased;
            a = b;
        }
        acc = cplx{};
        for (int b = n; b > 0;) {
            int a = b - 1;
            cplx group_phased{};
            while (a >= 0 && z[order[a]] == z[order[b - 1]]) {
                group_phased += sigma[order[a]] * phase[order[a]];
                --a;
            }
            for (int c = a + 1; c < b; ++c) right[order[c]] = acc;
            acc += group_phased;
            b = a + 1;
        }
    }
};

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void eom_rhs(const EnsembleState& state, const DerivedRates& rates, const PhysicalParams& params,
             Derivatives& out) {
    if (int bad = state.first_non_finite(); bad >= 0) throw NonFiniteError(bad);
    const int n = state.size();
    out.resize(n);
    thread_local ChainSums sums;
    sums.compute(state.z, state.sigma);

    const cplx diag{-0.5, params.delta};
    const cplx drive = kI * params.rabi();
    const double gl = rates.gamma_l;
    const double chi = rates.chi;
    for (int j = 0; j < n; ++j) {
        const cplx s = state.sigma[j];
        const cplx from_left = sums.phase[j] * sums.left[j];
        const cplx from_right = std::conj(sums.phase[j]) * sums.right[j];
        out.dz[j] = 2.0 * params.omega_r * state.p[j];
        out.dsigma[j] = diag * s + drive - gl * (from_left + from_right + sums.tie[j]) -
                        chi * from_left;
        const cplx sc = std::conj(s);
        out.dp[j] = -chi * std::norm(s) - 2.0 * chi * (sc * from_left).real() -
                    2.0 * gl * (sc * (from_left - from_right)).real() -
                    params.gamma_p * state.p[j];
    }
}

Derivatives eom_rhs(const EnsembleState& state, const DerivedRates& rates,
                    const PhysicalParams& params) {
    Derivatives d;
    eom_rhs(state, rates, params, d);
    return d;
}

CoherenceSolve steady_coherences(std::span<const double> z, const DerivedRates& rates,
                                 const PhysicalParams& params, double max_condition) {
    for (std::size_t j = 0; j < z.size(); ++j)
        if (!std::isfinite(z[j])) throw NonFiniteError(static_cast<int>(j));
    const int n = static_cast<int>(z.size());
    Eigen::MatrixXcd a(n, n);
    std::vector<cplx> phase(n);
    for (int j = 0; j < n; ++j) phase[j] = std::polar(1.0, z[j]);
    const cplx diag{-0.5, params.delta};
    for (int j = 0; j < n; ++j) {
        a(j, j) = diag;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            // e^{i k |z_j - z_i|}
            cplx e;
            double w = rates.gamma_l;
            if (z[i] < z[j]) {
                e = phase[j] * std::conj(phase[i]);
                w += rates.chi;
            } else if (z[i] > z[j]) {
                e = phase[i] * std::conj(phase[j]);
            } else {
                e = 1.0;
            }
            a(j, i) = -w * e;
        }
    }
    const Eigen::VectorXcd b = Eigen::VectorXcd::Constant(n, -kI * params.rabi());
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    CoherenceSolve out;
    const double rcond = lu.rcond();
    out.condition = rcond > 0.0 ? 1.0 / rcond : INFINITY;
    if (!(out.condition <= max_condition))
        throw SingularSystemError("coherence system is ill-conditioned (condition estimate " +
                                  std::to_string(out.condition) + ")");
    const Eigen::VectorXcd x = lu.solve(b);
    out.sigma.assign(x.data(), x.data() + n);
    out.residual = n > 0 ? (a * x - b).cwiseAbs().maxCoeff() : 0.0;
    return out;
}

double max_stable_dt(const IntegratorSettings& settings, const PhysicalParams& params) {
    if (settings.model == CoherenceModel::Dynamic)
        return settings.dt_max_coeff / std::max(1.0, std::abs(params.delta));
    // Slaved coherences leave only the motional time scales: the damping rate and a
    // bound on the trap frequency with |sigma| <= 1/2 on every atom.
    const double w2 = 4.0 * params.omega_r * std::max(params.gamma_1d_frac, 1e-3) *
                      params.n_atoms * 0.25;
    return 0.5 / std::max({params.gamma_p, std::sqrt(w2), 1e-6});
}

double default_dt(const IntegratorSettings& settings, const PhysicalParams& params) {
    if (settings.model == CoherenceModel::Dynamic)
        return std::min(5e-3, max_stable_dt(settings, params));
    return std::min(5.0, max_stable_dt(settings, params));
}

Stepper::Stepper(const DerivedRates& rates, const PhysicalParams& params,
                 IntegratorSettings settings)
    : rates_(rates), params_(params), settings_(settings) {
    dt_ = settings_.dt > 0.0 ? settings_.dt : default_dt(settings_, params_);
    if (!(dt_ > 0.0)) throw ValidationError("dt", "must be > 0");
    if (dt_ > max_stable_dt(settings_, params_) * (1.0 + 1e-12))
        throw ValidationError("dt", "exceeds the stability limit " +
                                        std::to_string(max_stable_dt(settings_, params_)));
}

void Stepper::slave_coherences(EnsembleState& state) const {
    if (settings_.model != CoherenceModel::Adiabatic) return;
    state.sigma = steady_coherences(state.z, rates_, params_).sigma;
}

void Stepper::derivs(const EnsembleState& s, Derivatives& d) {
    if (settings_.model == CoherenceModel::Adiabatic) {
        tmp_.z = s.z;
        tmp_.p = s.p;
        tmp_.sigma = steady_coherences(s.z, rates_, params_).sigma;
        eom_rhs(tmp_, rates_, params_, d);
        std::fill(d.dsigma.begin(), d.dsigma.end(), cplx{});
    } else {
        eom_rhs(s, rates_, params_, d);
    }
}

void Stepper::step(EnsembleState& state) {
    const int n = state.size();
    const double h = dt_;
    EnsembleState stage = state;
    auto combine = [&](const Derivatives& k, double c) {
        for (int j = 0; j < n; ++j) {
            stage.z[j] = state.z[j] + c * k.dz[j];
            stage.p[j] = state.p[j] + c * k.dp[j];
            stage.sigma[j] = state.sigma[j] + c * k.dsigma[j];
        }
    };
    derivs(state, k1_);
    combine(k1_, 0.5 * h);
    derivs(stage, k2_);
    combine(k2_, 0.5 * h);
    derivs(stage, k3_);
    combine(k3_, h);
    derivs(stage, k4_);
    const double w = h / 6.0;
    for (int j = 0; j < n; ++j) {
        state.z[j] += w * (k1_.dz[j] + 2.0 * k2_.dz[j] + 2.0 * k3_.dz[j] + k4_.dz[j]);
        state.p[j] += w * (k1_.dp[j] + 2.0 * k2_.dp[j] + 2.0 * k3_.dp[j] + k4_.dp[j]);
        state.sigma[j] +=
            w * (k1_.dsigma[j] + 2.0 * k2_.dsigma[j] + 2.0 * k3_.dsigma[j] + k4_.dsigma[j]);
    }
    state.t += h;
    slave_coherences(state);
    const double bound = settings_.divergence_bound;
    for (int j = 0; j < n; ++j) {
        if (!(std::abs(state.z[j]) <= bound) || !(std::abs(state.p[j]) <= bound) ||
            !(std::abs(state.sigma[j]) <= bound))
            throw DivergenceError(state.t);
    }
}

Trajectory integrate(EnsembleState state, const DerivedRates& rates, const PhysicalParams& params,
                     const IntegratorSettings& settings, double t_end) {
    if (settings.stride < 1) throw ValidationError("stride", "must be >= 1");
    if (int bad = state.first_non_finite(); bad >= 0) throw NonFiniteError(bad);
    Stepper stepper(rates, params, settings);
    Trajectory traj;
    traj.dt = stepper.dt();
    traj.model = settings.model;
    stepper.slave_coherences(state);
    auto record = [&](const EnsembleState& s) {
        traj.max_coherence = std::max(traj.max_coherence, s.max_coherence());
        traj.samples.push_back(s);
    };
    record(state);
    const double t0 = state.t;
    const auto steps = static_cast<long long>(std::llround((t_end - t0) / stepper.dt()));
    for (long long k = 1; k <= steps; ++k) {
        stepper.step(state);
        // Rebuild the clock from the step count so long runs do not accumulate drift.
        state.t = t0 + static_cast<double>(k) * stepper.dt();
        if (k % settings.stride == 0 || k == steps) record(state);
    }
    traj.saturation_warning = traj.max_coherence > kSaturationWarning;
    return traj;
}

Jacobian jacobian(const EnsembleState& state, const DerivedRates& rates,
                  const PhysicalParams& params) {
    if (int bad = state.first_non_finite(); bad >= 0) throw NonFiniteError(bad);
    const int n = state.size();
    Jacobian jac;
    jac.at = state;
    auto& m = jac.matrix;
    m = Eigen::MatrixXd::Zero(4 * n, 4 * n);
    const cplx diag{-0.5, params.delta};
    auto zi = [](int j) { return j; };
    auto pi = [n](int j) { return n + j; };
    auto ri = [n](int j) { return 2 * n + j; };
    auto ii = [n](int j) { return 3 * n + j; };

    for (int j = 0; j < n; ++j) {
        m(zi(j), pi(j)) = 2.0 * params.omega_r;
        m(pi(j), pi(j)) = -params.gamma_p;

        // sigma-dot_j = diag * sigma_j: complex multiplication as a real 2x2 block.
        m(ri(j), ri(j)) += diag.real();
        m(ri(j), ii(j)) += -diag.imag();
        m(ii(j), ri(j)) += diag.imag();
        m(ii(j), ii(j)) += diag.real();

        const cplx sj = state.sigma[j];
        m(pi(j), ri(j)) += -2.0 * rates.chi * sj.real();
        m(pi(j), ii(j)) += -2.0 * rates.chi * sj.imag();

        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const double s = sgn(state.z[j] - state.z[i]);
            const double left = state.z[i] < state.z[j] ? 1.0 : 0.0;
            const cplx e = std::polar(1.0, std::abs(state.z[j] - state.z[i]));
            const cplx si = state.sigma[i];

            // sigma-dot_j gets -w e sigma_i
            const double w = rates.gamma_l + rates.chi * left;
            const cplx dz_term = -w * si * (kI * s) * e;  // d/dz_j; d/dz_i is its negative
            m(ri(j), zi(j)) += dz_term.real();
            m(ii(j), zi(j)) += dz_term.imag();
            m(ri(j), zi(i)) -= dz_term.real();
            m(ii(j), zi(i)) -= dz_term.imag();
            const cplx c = -w * e;
            m(ri(j), ri(i)) += c.real();
            m(ri(j), ii(i)) += -c.imag();
            m(ii(j), ri(i)) += c.imag();
            m(ii(j), ii(i)) += c.real();

            // p-dot_j gets -2 c_ji Re(conj(sigma_j) sigma_i e)
            const double cf = rates.chi * left + rates.gamma_l * s;
            if (cf == 0.0) continue;
            const cplx q = std::conj(sj) * si * e;
            m(pi(j), zi(j)) += 2.0 * cf * s * q.imag();
            m(pi(j), zi(i)) -= 2.0 * cf * s * q.imag();
            const cplx x = si * e;
            m(pi(j), ri(j)) += -2.0 * cf * x.real();
            m(pi(j), ii(j)) += -2.0 * cf * x.imag();
            const cplx y = std::conj(sj) * e;
            m(pi(j), ri(i)) += -2.0 * cf * y.real();
            m(pi(j), ii(i)) += 2.0 * cf * y.imag();
        }
    }
    return jac;
}

Eigen::MatrixXd slaved_force_jacobian(const Jacobian& jac) {
    const int n = jac.n_atoms();
    const auto& m = jac.matrix;
    const Eigen::MatrixXd pz = m.block(n, 0, n, n);
    const Eigen::MatrixXd ps = m.block(n, 2 * n, n, 2 * n);
    const Eigen::MatrixXd sz = m.block(2 * n, 0, 2 * n, n);
    const Eigen::MatrixXd ss = m.block(2 * n, 2 * n, 2 * n, 2 * n);
    return pz - ps * ss.partialPivLu().solve(sz);
}

}  // namespace chiral
