#include <benchmark/benchmark.h>

#include "dimorph/ibm.hpp"
#include "dimorph/kernels.hpp"
#include "dimorph/macro_solver.hpp"

using namespace dimorph;

namespace {

InheritanceKernel gauss() { return InheritanceKernel::additive(NoiseDensity::gaussian(0.5)); }

void BM_BirthOperatorFast(benchmark::State& state) {
  const TraitGrid g(-6.0, 6.0, static_cast<std::size_t>(state.range(0)));
  const BirthOperator op(gauss(), g);
  const auto mu = gaussian_measure(g, -1.0, 0.5), nu = gaussian_measure(g, 1.0, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(mu, nu));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BirthOperatorFast)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_BirthOperatorTensor(benchmark::State& state) {
  const TraitGrid g(-6.0, 6.0, static_cast<std::size_t>(state.range(0)));
  const auto k = gauss();
  const auto mu = gaussian_measure(g, -1.0, 0.5), nu = gaussian_measure(g, 1.0, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(birth_operator_tensor(k, mu, nu));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BirthOperatorTensor)->RangeMultiplier(2)->Range(32, 128)->Complexity();

void BM_MacroRhs(benchmark::State& state) {
  const TraitGrid g(-6.0, 6.0, static_cast<std::size_t>(state.range(0)));
  const MacroModel model(RateSet::symmetric(2.0, 1.0, 0.25), gauss(), g);
  const auto m = gaussian_measure(g, -1.0, 0.5), f = gaussian_measure(g, 1.0, 0.5);
  std::vector<double> dm(g.size()), df(g.size());
  for (auto _ : state) {
    model.rhs(m.weights(), f.weights(), dm, df);
    benchmark::DoNotOptimize(dm.data());
  }
}
BENCHMARK(BM_MacroRhs)->Arg(128)->Arg(512);

void BM_IbmEvents(benchmark::State& state) {
  const TraitGrid g(-6.0, 6.0, 128);
  const auto k = gauss();
  const auto N = static_cast<std::size_t>(state.range(0));
  ScaledPopulation pop(RateSet::symmetric(2.0, 1.0, 0.25), N);
  Rng rng(1);
  for (double x : initial_traits(gaussian_measure(g, 0.0, 1.0, 2.0), N, InitMode::quantile, rng)) {
    pop.add(Sex::male, x);
    pop.add(Sex::female, x);
  }
  for (auto _ : state) benchmark::DoNotOptimize(step(pop, k, g, rng));
}
BENCHMARK(BM_IbmEvents)->Arg(1000)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
