#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "chiral/params.hpp"
#include "chiral/state.hpp"

namespace chiral {

class NonFiniteError : public std::runtime_error {
public:
    explicit NonFiniteError(int index)
        : std::runtime_error("non-finite state entry at atom " + std::to_string(index)),
          index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(double t)
        : std::runtime_error("state diverged at t = " + std::to_string(t)), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Derivatives {
    std::vector<double> dz;
    std::vector<double> dp;
    std::vector<cplx> dsigma;

    void resize(int n) {
        dz.assign(n, 0.0);
        dp.assign(n, 0.0);
        dsigma.assign(n, cplx{});
    }
};

/// Right-hand side of the classical equations of motion.
///
/// Chiral sums run over atoms strictly to the left in *current* position order;
/// atoms at identical positions get zero chiral weight and sgn(0) = 0 in the
/// symmetric force. Evaluated in O(N log N) with prefix sums over the sorted chain.
Derivatives eom_rhs(const EnsembleState& state, const DerivedRates& rates,
                    const PhysicalParams& params);
void eom_rhs(const EnsembleState& state, const DerivedRates& rates, const PhysicalParams& params,
             Derivatives& out);

struct CoherenceSolve {
    std::vector<cplx> sigma;
    double residual = 0.0;      // max_j |A sigma - b|_j
    double condition = 1.0;     // LU condition estimate (1 / rcond)
};

/// Coherences with sigma-dot = 0 at frozen positions (dense pivoted LU).
/// Throws SingularSystemError when the condition estimate exceeds max_condition.
CoherenceSolve steady_coherences(std::span<const double> z, const DerivedRates& rates,
                                 const PhysicalParams& params, double max_condition = 1e12);

enum class CoherenceModel {
    Dynamic,     // sigma integrated alongside (z, p)
    Adiabatic,   // sigma slaved to steady_coherences at every stage
};

struct IntegratorSettings {
    double dt = 0.0;             // 0 selects the model default
    int stride = 1;              // steps between stored samples
    CoherenceModel model = CoherenceModel::Dynamic;
    double dt_max_coeff = 0.02;  // Dynamic: dt <= coeff / max(1, |delta|)
    double divergence_bound = 1e6;
};

double max_stable_dt(const IntegratorSettings& settings, const PhysicalParams& params);
double default_dt(const IntegratorSettings& settings, const PhysicalParams& params);

struct Trajectory {
    std::vector<EnsembleState> samples;
    double dt = 0.0;
    CoherenceModel model = CoherenceModel::Dynamic;
    double max_coherence = 0.0;
    bool saturation_warning = false;
    bool diverged = false;
};

/// Fixed-step classical RK4. Deterministic for fixed inputs.
class Stepper {
public:
    Stepper(const DerivedRates& rates, const PhysicalParams& params, IntegratorSettings settings);

    double dt() const { return dt_; }
    /// Replaces sigma by the frozen-position solution (Adiabatic model only).
    void slave_coherences(EnsembleState& state) const;
    /// Advances one step; throws DivergenceError if any coordinate exceeds the bound.
    void step(EnsembleState& state);

private:
    void derivs(const EnsembleState& s, Derivatives& d);

    DerivedRates rates_;
    PhysicalParams params_;
    IntegratorSettings settings_;
    double dt_;
    EnsembleState tmp_;
    Derivatives k1_, k2_, k3_, k4_;
};

Trajectory integrate(EnsembleState state, const DerivedRates& rates, const PhysicalParams& params,
                     const IntegratorSettings& settings, double t_end);

/// Dense real Jacobian over (z, p, Re sigma, Im sigma), each block of length N.
struct Jacobian {
    Eigen::MatrixXd matrix;
    EnsembleState at;

    int n_atoms() const { return at.size(); }
    static int z_index(int j) { return j; }
    int p_index(int j) const { return n_atoms() + j; }
    int re_index(int j) const { return 2 * n_atoms() + j; }
    int im_index(int j) const { return 3 * n_atoms() + j; }
};

Jacobian jacobian(const EnsembleState& state, const DerivedRates& rates,
                  const PhysicalParams& params);

/// Position-space stiffness K_jk = d(pdot_j)/d(z_k) with the coherences slaved to
/// their frozen-position steady values (Schur complement of the full Jacobian).
Eigen::MatrixXd slaved_force_jacobian(const Jacobian& jac);

}  // namespace chiral
