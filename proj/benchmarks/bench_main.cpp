#include <benchmark/benchmark.h>

#include "chiral/analytic.hpp"
#include "chiral/dynamics.hpp"
#include "chiral/optics.hpp"
#include "chiral/steady.hpp"

using namespace chiral;

namespace {

PhysicalParams params_for(int n) {
    PhysicalParams p;
    p.n_atoms = n;
    p.chi_r = 0.5;
    return p;
}

void BM_EomRhs(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const auto p = params_for(n);
    const auto rates = derive_rates(p);
    EnsembleState s = random_initial_state(n, 1);
    for (auto& x : s.sigma) x = {0.0, 0.1};
    Derivatives d;
    for (auto _ : st) {
        eom_rhs(s, rates, p, d);
        benchmark::DoNotOptimize(d.dp.data());
    }
    st.SetComplexityN(n);
}
BENCHMARK(BM_EomRhs)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_SteadyCoherences(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const auto p = params_for(n);
    const auto rates = derive_rates(p);
    const auto s = random_initial_state(n, 1);
    const auto z = sorted_positions(s);
    for (auto _ : st) benchmark::DoNotOptimize(steady_coherences(z, rates, p).sigma.data());
    st.SetComplexityN(n);
}
BENCHMARK(BM_SteadyCoherences)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_OpticsSpectrum(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    ChiralSteadySolution ws;
    ws.f = ws_chiral_positions(n).f;
    const auto z = ws.positions();
    std::vector<double> grid;
    for (int k = 0; k <= 1000; ++k) grid.push_back(-40.0 + 0.08 * k);
    const PhysicalParams p;
    for (auto _ : st)
        benchmark::DoNotOptimize(spectrum(z, grid, p.probe_gamma(), p.probe_loss()).fwhm);
}
BENCHMARK(BM_OpticsSpectrum)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
