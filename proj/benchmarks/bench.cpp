#include <benchmark/benchmark.h>

#include "ibsim/engine.hpp"
#include "ibsim/experiment.hpp"
#include "ibsim/rng.hpp"

namespace {

using namespace ibsim;

void BM_EngineScheduleRun(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    for (auto _ : state) {
        Engine engine;
        std::int64_t sink = 0;
        for (int i = 0; i < batch; ++i)
            engine.schedule(SimTime{(i * 7919) % 100000}, [&sink] { ++sink; });
        engine.run_until(1_ms);
        benchmark::DoNotOptimize(sink);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EngineScheduleRun)->Arg(1000)->Arg(100000);

void BM_RngNormal(benchmark::State& state) {
    Rng rng(42);
    double acc = 0;
    for (auto _ : state) acc += rng.normal();
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngNormal);

// whole-stack throughput: events per wall second for a short shifter run
void BM_FatTreeShifter(benchmark::State& state) {
    ScenarioConfig cfg;
    cfg.topo_kind = ScenarioConfig::TopoKind::FatTree;
    cfg.fat_tree = {2, 4, 2, 1};
    cfg.injector_kind = ScenarioConfig::InjectorKind::FixedShifter;
    cfg.shifter.kind = ShifterConfig::Kind::FixedSize;
    cfg.shifter.message_bytes = 1 << 16;
    cfg.shifter.chunk_bytes = 1 << 16;
    cfg.duration = 200_us;
    cfg.sampling_interval = 100_us;
    for (auto _ : state) {
        RunReport r = run_scenario(cfg);
        benchmark::DoNotOptimize(r.counters.messages_completed);
    }
}
BENCHMARK(BM_FatTreeShifter)->Unit(benchmark::kMillisecond);

// event-builder traffic on the same fabric
void BM_FatTreeDaqpipe(benchmark::State& state) {
    ScenarioConfig cfg;
    cfg.topo_kind = ScenarioConfig::TopoKind::FatTree;
    cfg.fat_tree = {2, 4, 2, 1};
    cfg.injector_kind = ScenarioConfig::InjectorKind::Daqpipe;
    cfg.daqpipe.credits = 2;
    cfg.daqpipe.parallel_sends = 4;
    cfg.daqpipe.fragment_size.fixed_bytes = 1 << 17;
    cfg.duration = 200_us;
    cfg.sampling_interval = 100_us;
    for (auto _ : state) {
        RunReport r = run_scenario(cfg);
        benchmark::DoNotOptimize(r.counters.messages_completed);
    }
}
BENCHMARK(BM_FatTreeDaqpipe)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
