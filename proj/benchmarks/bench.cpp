#include <benchmark/benchmark.h>

#include <vector>

#include "sclab/classical.hpp"
#include "sclab/grid.hpp"
#include "sclab/mollifier.hpp"
#include "sclab/radial_spectrum.hpp"
#include "sclab/tridiag.hpp"

using namespace sclab;

namespace {

ModelParams reference(double h) {
    ModelParams m;
    m.alpha = 0.5;
    m.d = 2;
    m.h = h;
    m.grid.kind = GridKind::Adapted;
    return m;
}

void BM_SturmCount(benchmark::State& st) {
    const radial::Discretization disc(resolve_grid(reference(0.05), 0.0));
    const auto mat = disc.channel_matrix(3);
    for (auto _ : st) benchmark::DoNotOptimize(tridiag::count_below(mat, -0.5));
    st.SetItemsProcessed(st.iterations() * std::int64_t(mat.size()));
}
BENCHMARK(BM_SturmCount);

void BM_SturmCountBatched(benchmark::State& st) {
    const radial::Discretization disc(resolve_grid(reference(0.05), 0.0));
    const auto mat = disc.channel_matrix(3);
    std::vector<double> s(8);
    std::vector<std::size_t> c(8);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = -5.0 + 0.5 * double(i);
    for (auto _ : st) {
        tridiag::count_below(mat, s, c);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * std::int64_t(mat.size() * s.size()));
}
BENCHMARK(BM_SturmCountBatched);

void BM_PhiTable(benchmark::State& st) {
    static const auto bank = mollifier::build_cutoff_bank();
    double s = -50.0, acc = 0.0;
    for (auto _ : st) {
        acc += bank.Phi(s);
        s = s > 50.0 ? -50.0 : s + 0.37;
    }
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_PhiTable);

void BM_PhiDirect(benchmark::State& st) {
    const mollifier::Profile p;
    for (auto _ : st) benchmark::DoNotOptimize(mollifier::phi_direct(p, 3.7, 1 << 12));
}
BENCHMARK(BM_PhiDirect);

void BM_LoopReturn(benchmark::State& st) {
    const auto dyn = classical::DynParams::make(0.8);
    for (auto _ : st) benchmark::DoNotOptimize(classical::loop_return(dyn, 2, 1e-12).t);
}
BENCHMARK(BM_LoopReturn)->Unit(benchmark::kMillisecond);

void BM_SpectralSummary(benchmark::State& st) {
    const double h = 1.0 / double(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(radial::spectral_summary(reference(h), {1.0, 0.0}, 0.0).entries.size());
}
BENCHMARK(BM_SpectralSummary)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
