#include <cmath>

#include <Eigen/LU>

#include "doctest.h"

#include "chiral/analytic.hpp"
#include "chiral/optics.hpp"
#include "chiral/rng.hpp"

using namespace chiral;
using doctest::Approx;

namespace {

std::vector<double> random_chain(int n, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> z;
    double x = 0;
    for (int j = 0; j < n; ++j) {
        x += 0.1 + 8.0 * rng.uniform();
        z.push_back(x);
    }
    return z;
}

}  // namespace

TEST_CASE("single-atom scattering") {
    const auto s = atom_scattering(0.0, 0.125, 0.75);
    CHECK(std::abs(s.r - cplx(-0.25, 0.0)) < 1e-15);
    CHECK(std::abs(s.t - cplx(0.75, 0.0)) < 1e-15);
    CHECK(std::abs(atom_scattering(1e-9, 0.3, 0.0).r) == Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(atom_matrix(0.0, 0.3, 0.0), SingularElementError);
    for (double d = -5; d <= 5; d += 0.1) {
        const auto a = atom_scattering(d, 0.2, 0.0);
        CHECK(std::norm(a.r) + std::norm(a.t) == Approx(1.0).epsilon(1e-13));
        const auto b = atom_scattering(d, 0.2, 0.5);
        // Lorentzian with half-width (2 Gamma + gamma) / 2
        const double hw = (2 * 0.2 + 0.5) / 2;
        CHECK(std::norm(b.r) == Approx(std::pow(0.2 / hw, 2) / (1 + d * d / (hw * hw))).epsilon(1e-12));
        CHECK(std::abs(atom_matrix(d, 0.2, 0.5).determinant() - 1.0) < 1e-13);
    }
}

TEST_CASE("propagation matrices") {
    CHECK((propagation_matrix(kWavelength) - TransferMatrix::Identity()).norm() < 1e-14);
    CHECK((propagation_matrix(kWavelength / 2) + TransferMatrix::Identity()).norm() < 1e-14);
    CHECK(std::abs(propagation_matrix(1.234).determinant() - 1.0) < 1e-15);
}

TEST_CASE("ensemble response invariants on random chains") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto z = random_chain(1 + static_cast<int>(seed) * 3, seed);
        for (double d : {-3.0, -0.4, 0.0, 0.7, 2.5}) {
            const auto r = ensemble_response(z, d, 0.125, 0.75);
            // relative to the size of the two products that cancel in the determinant
            const auto& m = r.matrix;
            const double scale = std::abs(m(0, 0) * m(1, 1)) + std::abs(m(0, 1) * m(1, 0));
            CHECK(std::abs(m.determinant() - 1.0) / scale < 1e-9);
            CHECK(std::abs(r.t_l - r.t_r) < 1e-9);
            CHECK(std::norm(r.r_l) + std::norm(r.t_r) <= 1.0 + 1e-9);
            CHECK(std::norm(r.r_r) + std::norm(r.t_l) <= 1.0 + 1e-9);
            auto shifted = z;
            for (double& x : shifted) x += 0.789;
            const auto s = ensemble_response(shifted, d, 0.125, 0.75);
            CHECK(std::abs(s.r_l) == Approx(std::abs(r.r_l)).epsilon(1e-10));
            CHECK(std::abs(s.r_r) == Approx(std::abs(r.r_r)).epsilon(1e-10));
            // light from the right sees the mirror image of the chain
            std::vector<double> mirrored;
            for (auto it = z.rbegin(); it != z.rend(); ++it) mirrored.push_back(-*it);
            const auto back = ensemble_response(mirrored, d, 0.125, 0.75);
            CHECK(std::abs(back.r_l) == Approx(std::abs(r.r_r)).epsilon(1e-9));
            CHECK(std::abs(back.t_r - r.t_l) < 1e-12);
        }
        const auto lossless = ensemble_response(z, 0.3, 0.2, 0.0);
        CHECK(std::norm(lossless.r_l) + std::norm(lossless.t_r) == Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("ensemble response special cases") {
    const auto empty = ensemble_response(std::vector<double>{}, 0.0, 0.125, 0.75);
    CHECK(std::abs(empty.t_r - 1.0) < 1e-15);
    CHECK(std::abs(empty.r_l) < 1e-15);

    const auto one = ensemble_response(std::vector<double>{0.0}, 0.3, 0.125, 0.75);
    const auto a = atom_scattering(0.3, 0.125, 0.75);
    CHECK(std::abs(one.r_l - a.r) < 1e-14);
    CHECK(std::abs(one.t_r - a.t) < 1e-14);

    std::vector<double> bragg;
    for (int j = 0; j < 10; ++j) bragg.push_back(j * kWavelength);
    const auto b = ensemble_response(bragg, 0.0, 0.125, 0.75);
    const double super_atom = 2 * 10 * 0.125 / (2 * 10 * 0.125 + 0.75);
    CHECK(std::abs(b.r_l) == Approx(super_atom).epsilon(1e-12));
    CHECK(std::abs(b.r_r) == Approx(super_atom).epsilon(1e-12));
    CHECK(std::abs(std::abs(b.r_l) - 0.769) < 1e-3);

    const auto far = ensemble_response(bragg, 100.0, 0.125, 0.75);
    CHECK(std::abs(far.t_r) > 0.99);

    CHECK_THROWS_AS(ensemble_response(std::vector<double>{2.0, 1.0}, 0.0, 0.125, 0.75), UsageError);
}

TEST_CASE("spectrum width") {
    std::vector<double> grid;
    for (int k = 0; k <= 4000; ++k) grid.push_back(-10.0 + 20.0 * k / 4000);
    const auto s = spectrum(std::vector<double>{0.0}, grid, 0.125, 0.75);
    // |r| is a square-root Lorentzian; it falls to half its peak at sqrt(3) half-widths
    const double hw = (2 * 0.125 + 0.75) / 2;
    CHECK(s.fwhm == Approx(2 * std::sqrt(3.0) * hw).epsilon(1e-4));
    CHECK(s.peak_detuning == Approx(0.0).epsilon(1e-9));
    CHECK(std::isnan(full_width_half_max(std::vector<double>{0, 1, 2}, std::vector<double>{1, 1, 1})));
}

TEST_CASE("chiral weak-scattering lattice reflects differently from each side") {
    const auto ws = ws_chiral_positions(50);
    ChiralSteadySolution tmp;
    tmp.f = ws.f;
    const auto z = tmp.positions();
    std::vector<double> grid;
    for (int k = 0; k <= 2000; ++k) grid.push_back(-20.0 + 40.0 * k / 2000);
    const auto s = spectrum(z, grid, 0.125, 0.75);
    double asym = 0;
    for (const auto& r : s.points) asym = std::max(asym, std::abs(std::abs(r.r_l) - std::abs(r.r_r)));
    CHECK(asym > 0.05);
}
