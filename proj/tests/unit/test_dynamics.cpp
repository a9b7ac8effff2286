#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"

#include "chiral/dynamics.hpp"
#include "chiral/rng.hpp"
#include "chiral/steady.hpp"
#include "../oracles.hpp"

using namespace chiral;
using doctest::Approx;

namespace {

EnsembleState random_state(int n, std::uint64_t seed, double spread = 30.0) {
    CounterRng rng(seed);
    EnsembleState s(n);
    for (int j = 0; j < n; ++j) {
        s.z[j] = spread * rng.uniform();
        s.p[j] = rng.uniform() - 0.5;
        s.sigma[j] = {0.2 * (rng.uniform() - 0.5), 0.2 * (rng.uniform() - 0.5)};
    }
    return s;
}

PhysicalParams params_for(double chi_r, double delta) {
    PhysicalParams p;
    p.chi_r = chi_r;
    p.delta = delta;
    p.gamma_p = 0.03;
    p.omega_r = 0.02;
    return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("right-hand side matches a brute-force evaluation of the equations") {
    for (double chi_r : {-1.0, -0.3, 0.0, 0.4, 1.0})
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto p = params_for(chi_r, 3.0);
            const auto s = random_state(7, seed);
            const auto d = eom_rhs(s, derive_rates(p), p);
            const auto o = oracle::eom(s.z, s.p, s.sigma, p.gamma_1d_frac, chi_r, p.delta, p.rabi(),
                                       p.gamma_p, p.omega_r);
            CHECK(max_abs_diff(d.dz, o.dz) < 1e-14);
            CHECK(max_abs_diff(d.dp, o.dp) < 1e-13);
            CHECK(max_abs_diff(d.dsigma, o.ds) < 1e-13);
        }
}

TEST_CASE("coincident atoms get no chiral weight and a zero signed force") {
    auto p = params_for(0.6, 1.0);
    EnsembleState s(3);
    s.z = {1.0, 1.0, 4.0};
    s.sigma = {{0.1, 0.02}, {-0.03, 0.05}, {0.04, -0.01}};
    const auto d = eom_rhs(s, derive_rates(p), p);
    const auto o = oracle::eom(s.z, s.p, s.sigma, p.gamma_1d_frac, p.chi_r, p.delta, p.rabi(),
                               p.gamma_p, p.omega_r);
    CHECK(max_abs_diff(d.dp, o.dp) < 1e-14);
    CHECK(max_abs_diff(d.dsigma, o.ds) < 1e-14);
}

TEST_CASE("hand-evaluated right-hand sides") {
    SUBCASE("only damping survives without light") {
        PhysicalParams p;
        p.omega = 0.0;
        p.gamma_p = 0.1;
        EnsembleState s(2);
        s.z = {0.0, 5.0};
        s.p = {1.0, -1.0};
        const auto d = eom_rhs(s, derive_rates(p), p);
        CHECK(d.dp[0] == Approx(-0.1));
        CHECK(d.dp[1] == Approx(0.1));
        CHECK(std::abs(d.dsigma[0]) == 0.0);
        CHECK(std::abs(d.dsigma[1]) == 0.0);
    }
    SUBCASE("recoil from chiral emission") {
        PhysicalParams p;
        p.n_atoms = 1;
        p.chi_r = 1.0;
        p.gamma_p = 0.0;
        EnsembleState s(1);
        s.sigma[0] = {0.0, 0.1};
        CHECK(eom_rhs(s, derive_rates(p), p).dp[0] == Approx(-2.5e-3).epsilon(1e-12));
    }
    SUBCASE("bare drive") {
        PhysicalParams p;
        p.n_atoms = 1;
        p.delta = 0.0;
        p.omega = 0.05;
        EnsembleState s(1);
        const auto d = eom_rhs(s, derive_rates(p), p);
        CHECK(d.dsigma[0].real() == 0.0);
        CHECK(d.dsigma[0].imag() == Approx(0.05));
    }
}

TEST_CASE("chiral terms vanish term by term in the symmetric model") {
    const auto p = params_for(0.0, -2.0);
    const auto s = random_state(9, 11);
    const auto d = eom_rhs(s, derive_rates(p), p);
    // rebuild with only the Gamma_L terms (Gamma_L = Gamma_1D / 2 when chi = 0)
    const auto o = oracle::eom(s.z, s.p, s.sigma, p.gamma_1d_frac, 0.0, p.delta, p.rabi(), p.gamma_p,
                               p.omega_r);
    CHECK(derive_rates(p).chi == 0.0);
    CHECK(max_abs_diff(d.dp, o.dp) < 1e-14);
    CHECK(max_abs_diff(d.dsigma, o.ds) < 1e-14);
}

TEST_CASE("translation leaves the momentum and coherence derivatives unchanged") {
    const auto p = params_for(0.7, 4.0);
    auto s = random_state(8, 3);
    const auto a = eom_rhs(s, derive_rates(p), p);
    for (double& z : s.z) z += 2.345;
    const auto b = eom_rhs(s, derive_rates(p), p);
    CHECK(max_abs_diff(a.dp, b.dp) < 1e-13);
    CHECK(max_abs_diff(a.dsigma, b.dsigma) < 1e-13);
}

TEST_CASE("non-finite input is rejected with its index") {
    const auto p = params_for(0.0, 1.0);
    auto s = random_state(4, 2);
    s.z[3] = NAN;
    try {
        eom_rhs(s, derive_rates(p), p);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.index() == 3);
    }
}

TEST_CASE("pure damping decays exponentially") {
    PhysicalParams p;
    p.omega = 0.0;
    p.delta = 1.0;
    p.gamma_p = 0.1;
    EnsembleState s(2);
    s.z = {0.0, 7.0};
    s.p = {1.0, -0.5};
    IntegratorSettings st;
    st.dt = 0.005;
    const auto tr = integrate(s, derive_rates(p), p, st, 50.0);
    const auto& f = tr.samples.back();
    CHECK(f.t == Approx(50.0));
    CHECK(f.p[0] == Approx(std::exp(-5.0)).epsilon(1e-6));
    CHECK(f.p[1] == Approx(-0.5 * std::exp(-5.0)).epsilon(1e-6));
}

TEST_CASE("a single resonant atom relaxes to 2 i Omega") {
    PhysicalParams p;
    p.n_atoms = 1;
    p.delta = 0.0;
    p.omega = 0.05;
    p.gamma_p = 0.0;
    IntegratorSettings st;
    const auto tr = integrate(EnsembleState(1), derive_rates(p), p, st, 60.0);
    const cplx s = tr.samples.back().sigma[0];
    CHECK(std::abs(s - cplx(0.0, 0.1)) < 1e-12);
}

TEST_CASE("integration error falls as dt^4") {
    PhysicalParams p = params_for(0.5, 2.0);
    p.n_atoms = 4;
    EnsembleState s(4);
    s.z = {0.0, 7.0, 12.5, 19.0};
    s.p = {0.3, -0.2, 0.1, 0.0};
    IntegratorSettings st;
    st.dt_max_coeff = 1.0;
    auto run = [&](double dt) {
        st.dt = dt;
        return integrate(s, derive_rates(p), p, st, 4.0).samples.back();
    };
    const double h = 0.1;
    const auto ref = run(h / 16);
    auto err = [&](const EnsembleState& x) {
        return std::max({max_abs_diff(x.z, ref.z), max_abs_diff(x.p, ref.p),
                         max_abs_diff(x.sigma, ref.sigma)});
    };
    const double e1 = err(run(h));
    const double e2 = err(run(h / 2));
    MESSAGE("error ratio on halving dt: " << e1 / e2);
    CHECK(e1 / e2 >= 12.0);
}

TEST_CASE("integration is bitwise deterministic and honours the stride") {
    const auto p = params_for(0.8, 1.5);
    const auto s = random_state(6, 9);
    IntegratorSettings st;
    st.stride = 7;
    const auto a = integrate(s, derive_rates(p), p, st, 3.0);
    const auto b = integrate(s, derive_rates(p), p, st, 3.0);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.samples.size() == 1 + (600 + 6) / 7);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k].z == b.samples[k].z);
        CHECK(a.samples[k].p == b.samples[k].p);
        CHECK(a.samples[k].sigma == b.samples[k].sigma);
    }
}

TEST_CASE("step size limit and divergence guard") {
    const auto p = params_for(0.0, 10.0);
    IntegratorSettings st;
    CHECK(max_stable_dt(st, p) == Approx(0.002));
    CHECK(default_dt(st, p) == Approx(0.002));
    st.dt = 0.01;
    CHECK_THROWS_AS(integrate(random_state(3, 1), derive_rates(p), p, st, 1.0), ValidationError);
    st.dt = 0.001;
    st.divergence_bound = 1e-3;
    CHECK_THROWS_AS(integrate(random_state(3, 1), derive_rates(p), p, st, 1.0), DivergenceError);
}

TEST_CASE("strong pumping raises the saturation flag") {
    PhysicalParams p;
    p.n_atoms = 1;
    p.delta = 0.0;
    p.omega = 1.0;
    const auto tr = integrate(EnsembleState(1), derive_rates(p), p, {}, 20.0);
    CHECK(tr.saturation_warning);
    CHECK(tr.max_coherence > 0.5);
}

TEST_CASE("steady coherences") {
    SUBCASE("single atom on resonance") {
        PhysicalParams p;
        p.n_atoms = 1;
        p.delta = 0.0;
        p.omega = 0.05;
        const auto c = steady_coherences(std::vector<double>{0.3}, derive_rates(p), p);
        CHECK(std::abs(c.sigma[0] - cplx(0.0, 0.1)) < 1e-14);
    }
    SUBCASE("cascaded: the first atom sees no one") {
        PhysicalParams p;
        p.chi_r = 1.0;
        p.delta = 0.7;
        const auto one = steady_coherences(std::vector<double>{0.0}, derive_rates(p), p);
        for (double z1 : {0.1, 1.7, 4.2, 9.9}) {
            const auto two = steady_coherences(std::vector<double>{0.0, z1}, derive_rates(p), p);
            CHECK(std::abs(two.sigma[0] - one.sigma[0]) < 1e-15);
        }
    }
    SUBCASE("far detuned coherences are uniform") {
        PhysicalParams p;
        p.delta = 1e3;
        p.chi_r = 0.5;
        const auto s = random_state(10, 4);
        const auto c = steady_coherences(s.z, derive_rates(p), p);
        double lo = 1e9, hi = 0;
        for (auto x : c.sigma) {
            lo = std::min(lo, std::abs(x));
            hi = std::max(hi, std::abs(x));
        }
        CHECK((hi - lo) / hi < 0.01);
        CHECK(hi == Approx(0.1).epsilon(0.01));
    }
    SUBCASE("solution zeroes the coherence derivative") {
        for (double chi_r : {0.0, 0.35, 1.0}) {
            const auto p = params_for(chi_r, 1.0);
            auto s = random_state(12, 5);
            s.sigma = steady_coherences(s.z, derive_rates(p), p).sigma;
            const auto d = eom_rhs(s, derive_rates(p), p);
            for (auto x : d.dsigma) CHECK(std::abs(x) < 1e-10);
        }
    }
    SUBCASE("ill-conditioned systems are refused") {
        PhysicalParams p;
        p.delta = 0.0;
        p.gamma_1d_frac = 1.0;
        // two coincident atoms with lossless symmetric coupling: the dark state is singular
        CHECK_THROWS_AS(steady_coherences(std::vector<double>{0.0, 0.0}, derive_rates(p), p, 1e3),
                        SingularSystemError);
    }
}

TEST_CASE("analytic jacobian agrees with central differences") {
    for (double chi_r : {0.0, 0.45, 1.0}) {
        const auto p = params_for(chi_r, 1.3);
        const auto s = random_state(5, 17);
        const auto jac = jacobian(s, derive_rates(p), p);
        const int n = 5;
        REQUIRE(jac.matrix.rows() == 4 * n);
        const double h = 1e-6;
        double worst = 0;
        for (int c = 0; c < 4 * n; ++c) {
            auto bump = [&](double e) {
                EnsembleState t = s;
                const int blk = c / n, j = c % n;
                if (blk == 0) t.z[j] += e;
                if (blk == 1) t.p[j] += e;
                if (blk == 2) t.sigma[j] += cplx(e, 0.0);
                if (blk == 3) t.sigma[j] += cplx(0.0, e);
                return eom_rhs(t, derive_rates(p), p);
            };
            const auto up = bump(h), dn = bump(-h);
            for (int j = 0; j < n; ++j) {
                const double fd[4] = {(up.dz[j] - dn.dz[j]) / (2 * h), (up.dp[j] - dn.dp[j]) / (2 * h),
                                      (up.dsigma[j] - dn.dsigma[j]).real() / (2 * h),
                                      (up.dsigma[j] - dn.dsigma[j]).imag() / (2 * h)};
                for (int blk = 0; blk < 4; ++blk) {
                    const double an = jac.matrix(blk * n + j, c);
                    worst = std::max(worst, std::abs(an - fd[blk]) / std::max(std::abs(an), 1e-3));
                }
            }
        }
        MESSAGE("chi_r = " << chi_r << ": worst relative deviation " << worst);
        CHECK(worst < 1e-5);
        for (int j = 0; j < n; ++j) CHECK(jac.matrix(j, n + j) == Approx(2.0 * p.omega_r));
    }
}

TEST_CASE("symmetric steady state has exactly one translation zero mode") {
    PhysicalParams p;
    p.n_atoms = 10;
    SteadyOptions o;
    const auto r = find_steady(random_initial_state(10, 3), p, o);
    REQUIRE(r.classification == Classification::Steady);
    EnsembleState s = r.state;
    s.sigma = steady_coherences(s.z, derive_rates(p), p).sigma;
    const auto jac = jacobian(s, derive_rates(p), p);
    const Eigen::VectorXcd ev = jac.matrix.eigenvalues();
    int small = 0;
    double next = INFINITY;
    for (int k = 0; k < ev.size(); ++k) {
        if (std::abs(ev[k]) < 1e-8)
            ++small;
        else
            next = std::min(next, std::abs(ev[k]));
    }
    MESSAGE("smallest non-zero |eigenvalue| " << next);
    CHECK(small == 1);
    // the slaved stiffness annihilates a uniform shift
    const Eigen::MatrixXd k = slaved_force_jacobian(jac);
    CHECK((k * Eigen::VectorXd::Ones(10)).cwiseAbs().maxCoeff() < 1e-10);
}
