#include <benchmark/benchmark.h>

#include <bcr/diagnostics.hpp>
#include <bcr/engine.hpp>
#include <bcr/runner.hpp>

namespace {

void BM_SimulateRun(benchmark::State& state, const char* name) {
  const auto cfg = bcr::scenario(name);
  const auto horizon = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto trace = bcr::simulate_run(cfg.modes, cfg.prior, *cfg.plant, horizon, seed++,
                                   cfg.action_mode, cfg.commit_length);
    benchmark::DoNotOptimize(trace.steps.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_SimulateRun, bandit, "bandit-identifiable")->Arg(500)->Arg(5000);
BENCHMARK_CAPTURE(BM_SimulateRun, fig5, "fig5-core-ambiguity")->Arg(2000);

void BM_DivergenceAndDecomposition(benchmark::State& state) {
  const auto cfg = bcr::scenario("fig5-core-ambiguity");
  const auto trace = bcr::simulate_run(cfg.modes, cfg.prior, *cfg.plant, 2000, 1);
  for (auto _ : state) {
    const auto d = bcr::divergence_process(trace, 0, 1);
    auto sub = bcr::decompose_subdivergences(d, cfg.modes->size());
    benchmark::DoNotOptimize(sub);
  }
}
BENCHMARK(BM_DivergenceAndDecomposition);

void BM_Boundedness(benchmark::State& state) {
  const auto cfg = bcr::scenario("bandit-identifiable");
  bcr::BoundednessOptions o;
  o.horizon = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    bcr::Rng rng(7);
    auto report = bcr::check_boundedness(*cfg.modes, 0, o, rng);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_Boundedness)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_CoreMembership(benchmark::State& state) {
  const auto cfg = bcr::scenario("fig5-core-ambiguity");
  const auto& modes = *cfg.modes;
  bcr::CoreOptions o;
  for (auto _ : state) {
    bcr::Rng rng(11);
    auto r = bcr::test_core_membership(modes[0], modes[1], o, rng);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_CoreMembership)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
