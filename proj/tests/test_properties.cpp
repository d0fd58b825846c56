// Randomized invariants of the mapping, tiling, stall, energy and scheduling
// models. Every generator is seeded so failures replay.

#include <doctest.h>

#include <random>
#include <set>

#include "nmpsa/analysis.hpp"
#include "nmpsa/emulator.hpp"

using namespace nmpsa;

namespace {
count_t draw(std::mt19937_64& rng, count_t lo, count_t hi) {
  return std::uniform_int_distribution<count_t>(lo, hi)(rng);
}

ArrayConfig square(count_t phys, count_t g) {
  ArrayConfig a;
  a.phys_rows = a.phys_cols = phys;
  a.granularity = g;
  return a;
}
}  // namespace

TEST_CASE("tiles partition the iteration space exactly") {
  std::mt19937_64 rng(11);
  const std::vector<ArrayConfig> arrays{square(64, 8), square(8, 2), square(4, 2), square(48, 48)};
  for (int trial = 0; trial < 1000; ++trial) {
    const ArrayConfig& a = arrays[static_cast<std::size_t>(draw(rng, 0, 3))];
    const auto shapes = logical_shapes(a);
    const LogicalShape shape = shapes[static_cast<std::size_t>(draw(rng, 0, static_cast<count_t>(shapes.size()) - 1))];
    const Dataflow df = draw(rng, 0, 1) ? Dataflow::IS : Dataflow::OS;
    const GemmOp op{draw(rng, 1, 200), draw(rng, 1, 3000), draw(rng, 1, 3000)};
    const TilingLimits lim{draw(rng, 0, 1) ? draw(rng, 1, 700) : 0, draw(rng, 0, 1) ? draw(rng, 1, 300) : 0};
    const TilePlan plan = tile_gemm(op, shape, df, a.phys_rows, lim);
    count_t volume = 0, count = 0;
    bool fits = true;
    for_each_tile(plan, [&](const Tile& t) {
      volume += t.volume();
      ++count;
      fits = fits && t.m_t <= shape.rows && t.s_t <= shape.cols && t.t_t >= 1;
    });
    CHECK(fits);
    REQUIRE_MESSAGE(volume == op.macs(), "op " << op.m << "x" << op.n << "x" << op.k << " on " << shape.str());
    CHECK(count == plan.tiles_total);
  }
}

TEST_CASE("serpentine mapping is a bijection onto the physical fabric") {
  for (const ArrayConfig& a : {square(64, 8), square(8, 2), square(4, 2), square(16, 4)}) {
    for (const LogicalShape& s : logical_shapes(a)) {
      for (Dataflow df : {Dataflow::OS, Dataflow::IS}) {
        const MappingPlan p = snake_map(a, s, df);
        std::set<std::pair<count_t, count_t>> seen;
        for (count_t r = 0; r < s.rows; ++r)
          for (count_t c = 0; c < s.cols; ++c) {
            const PhysCoord pc = p.to_physical(r, c);
            CHECK(pc.row >= 0);
            CHECK(pc.row < a.phys_rows);
            CHECK(pc.col >= 0);
            CHECK(pc.col < a.phys_cols);
            seen.insert({pc.row, pc.col});
          }
        CHECK(static_cast<count_t>(seen.size()) == a.pes());
      }
    }
  }
}

TEST_CASE("stalls never grow with more bandwidth") {
  std::mt19937_64 rng(23);
  const ArrayConfig a = square(64, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const GemmOp op{draw(rng, 1, 64), draw(rng, 64, 30000), draw(rng, 64, 30000)};
    const auto shapes = logical_shapes(a);
    const LogicalShape shape = shapes[static_cast<std::size_t>(draw(rng, 0, 3))];
    const Dataflow df = draw(rng, 0, 1) ? Dataflow::IS : Dataflow::OS;
    MemorySystem mem;
    const TilePlan plan = tile_gemm(op, shape, df, a.phys_rows, tiling_limits(shape, df, mem, op.elem_bytes));
    count_t prev = -1;
    for (double bw : {1e12, 4e12, 24e12, 96e12, 1e15}) {
      mem.total_dram_bw = bw;
      const count_t s = stall_cycles(plan, mem, a, 4);
      if (prev >= 0) CHECK(s <= prev);
      prev = s;
    }
  }
}

TEST_CASE("energy is additive over activity") {
  std::mt19937_64 rng(5);
  const EnergyModel e = EnergyModel::calibrate(16, 4, 4096, 0.8e9, 64, 24, 6.4e10);
  std::uniform_real_distribution<double> u(0, 1e9);
  for (int trial = 0; trial < 100; ++trial) {
    const ActivityCounts x{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const ActivityCounts y{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const ActivityCounts sum{x.macs + y.macs, x.vector_elems + y.vector_elems,
                             x.core_active_cycles + y.core_active_cycles, x.noc_bytes + y.noc_bytes,
                             x.dram_bytes + y.dram_bytes};
    EnergyBreakdown parts = e.energy(x);
    parts += e.energy(y);
    CHECK(e.energy(sum).total() == doctest::Approx(parts.total()));
  }
}

TEST_CASE("flexible scheduling dominates every forced mode on random ops") {
  std::mt19937_64 rng(31);
  const System sys = make_system("default");
  for (int trial = 0; trial < 60; ++trial) {
    GemmOp op{draw(rng, 1, 128), draw(rng, 1, 20000), draw(rng, 1, 20000), "rand"};
    op.nonlinear_follow = draw(rng, 0, 1) ? Nonlinear::Activation : Nonlinear::None;
    const OpChoice flex = schedule_operator(op, sys);
    for (PartitionMode m : kAllModes) CHECK(flex.cost.total_cycles <= schedule_operator(op, sys, {m}).cost.total_cycles);
  }
}

TEST_CASE("minimum buffers move in opposite directions as the array narrows") {
  const System sys = make_system("default");
  const GemmOp op{8, 4096, 4096};
  BufferNeed prev{};
  bool first = true;
  for (const LogicalShape& s : logical_shapes(sys.array)) {
    const BufferNeed n = min_buffers(s, Dataflow::IS, tile_gemm(op, s, Dataflow::IS, 64));
    if (!first) {
      CHECK(n.weight_buf_bytes <= prev.weight_buf_bytes);
      CHECK(n.act_buf_bytes >= prev.act_buf_bytes);
    }
    prev = n;
    first = false;
  }
}

TEST_CASE("parallel and serial paths agree bit for bit") {
  CheckGrid g;
  g.trials = 20;
  const CheckSummary par = run_emulation_grid(g);
  const CheckSummary ser = run_emulation_grid_serial(g);
  CHECK(par.cases == ser.cases);
  CHECK(par.output_failures == ser.output_failures);
  CHECK(par.cycle_failures == ser.cycle_failures);

  const System sys = make_system("default");
  const ModelConfig cfg = load_model_config(resolve_model_path("qwen3-30b"));
  const OperatorGraph graph = decode_operators(cfg, 16, 2048);
  const ModelSchedule a = schedule_model(cfg, graph, sys);
  const ModelSchedule b = schedule_model_serial(cfg, graph, sys);
  CHECK(a.totals.total_cycles == b.totals.total_cycles);
  CHECK(a.totals.energy.total() == b.totals.energy.total());
  CHECK(a.mode_histogram == b.mode_histogram);
  const ModelSchedule again = schedule_model(cfg, graph, sys);
  CHECK(again.totals.total_cycles == a.totals.total_cycles);
}

TEST_CASE("model totals add up from per-operator reports") {
  const System sys = make_system("default");
  const ModelConfig cfg = load_model_config(resolve_model_path("llama3-70b"));
  const ModelSchedule s = schedule_model(cfg, decode_operators(cfg, 8, 1024), sys);
  count_t sum = 0;
  for (const auto& c : s.ops) sum += c.cost.total_cycles;
  CHECK(sum == s.totals.total_cycles);  // reconfiguration is charged to the op that triggers it
  CHECK(s.totals.total_cycles == s.totals.array_cycles + s.totals.stall_cycles + s.totals.collective_cycles +
                                     s.totals.reconfig_cycles + s.totals.vector_cycles - s.totals.overlap_cycles);
}
