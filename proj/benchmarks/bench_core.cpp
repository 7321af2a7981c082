#include "burgers/hjb.hpp"
#include "burgers/integrator.hpp"
#include "burgers/random.hpp"
#include "burgers/spectral.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace burgers;

namespace {

NoiseModel noise(std::size_t m) {
    NoiseModel n;
    n.covariance = CovarianceOperator::power(0.75);
    n.levy = LevyModel({{1.0, 0.5}, {-1.0, 0.5}}, 0.3, SpectralField::basis(m, 1));
    return n;
}

SpectralField field(std::size_t m) {
    SpectralField u(m);
    for (std::size_t k = 0; k < m; ++k) u[k] = 1.0 / static_cast<double>(k + 1);
    return u;
}

void BM_RegularizedNonlinearity(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    GalerkinNonlinearity nl(m, {static_cast<int>(m)});
    const SpectralField u = field(m);
    std::vector<double> out(m);
    for (auto _ : state) {
        nl.load(u.coeffs());
        nl.apply(out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_RegularizedNonlinearity)->RangeMultiplier(2)->Range(1, 64);

void BM_StepperStep(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    IntegratorConfig cfg;
    cfg.modes = m;
    cfg.T = 1.0;
    GalerkinStepper st(cfg, noise(m));
    Rng rng = substream(1, 0, 0);
    std::vector<double> y(field(m).values()), xi(m);
    std::vector<JumpDraw> jumps;
    for (auto _ : state) {
        st.draw_step(rng, xi, jumps);
        st.prepare(y);
        st.advance_state(y, xi, jumps);
        benchmark::DoNotOptimize(y.data());
        // keep the state bounded across iterations
        for (double& v : y) v *= 0.5;
    }
}
BENCHMARK(BM_StepperStep)->RangeMultiplier(2)->Range(1, 64);

void BM_FdHjbSolve(benchmark::State& state) {
    IntegratorConfig cfg;
    cfg.modes = 1;
    cfg.T = 0.1;
    FdGridSpec spec;
    spec.n_pts = static_cast<std::size_t>(state.range(0));
    const NoiseModel n = noise(1);
    for (auto _ : state) {
        const ValueGrid g = fd_hjb_solve(cfg, n, 0.5, spec);
        benchmark::DoNotOptimize(g.slice(g.slices() - 1).data());
    }
}
BENCHMARK(BM_FdHjbSolve)->Arg(51)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
