// Serial reference against the OpenMP path for the three parallel kernels.

#include <benchmark/benchmark.h>

#include "nmpsa/analysis.hpp"
#include "nmpsa/emulator.hpp"

using namespace nmpsa;

namespace {

CheckGrid grid() {
  CheckGrid g;
  g.phys_sizes = {4, 8, 16};
  g.trials = 50;
  return g;
}

void BM_EmulationGridSerial(benchmark::State& st) {
  const CheckGrid g = grid();
  for (auto _ : st) benchmark::DoNotOptimize(run_emulation_grid_serial(g).cases);
}

void BM_EmulationGridParallel(benchmark::State& st) {
  const CheckGrid g = grid();
  for (auto _ : st) benchmark::DoNotOptimize(run_emulation_grid(g).cases);
}

struct Scenario {
  ModelConfig cfg = load_model_config(resolve_model_path("qwen3-30b"));
  OperatorGraph graph = decode_operators(cfg, 32, 8192);
  System sys = make_system("default");
};

void BM_ScheduleModelSerial(benchmark::State& st) {
  const Scenario s;
  for (auto _ : st) benchmark::DoNotOptimize(schedule_model_serial(s.cfg, s.graph, s.sys).totals.total_cycles);
}

void BM_ScheduleModelParallel(benchmark::State& st) {
  const Scenario s;
  for (auto _ : st) benchmark::DoNotOptimize(schedule_model(s.cfg, s.graph, s.sys).totals.total_cycles);
}

struct Sweep {
  System sys = make_system("default");
  std::vector<SweepCandidate> cands;
  std::vector<GemmOp> work;
  Sweep() {
    const AreaModel area;
    cands = area_matched_candidates({128, 256, 384, 512, 640, 768}, area, reference_area(sys, area));
    const ModelConfig cfg = load_model_config(resolve_model_path("opt-66b"));
    work = single_core_workload(decode_operators(cfg, 8, 8192), sys);
  }
};

void BM_BufferSweepSerial(benchmark::State& st) {
  const Sweep s;
  for (auto _ : st) benchmark::DoNotOptimize(buffer_compute_sweep_serial(s.cands, s.work, s.sys).size());
}

void BM_BufferSweepParallel(benchmark::State& st) {
  const Sweep s;
  for (auto _ : st) benchmark::DoNotOptimize(buffer_compute_sweep(s.cands, s.work, s.sys).size());
}

}  // namespace

BENCHMARK(BM_EmulationGridSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmulationGridParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScheduleModelSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScheduleModelParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BufferSweepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BufferSweepParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
