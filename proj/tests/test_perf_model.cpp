#include <doctest.h>

#include <vector>

#include "nmpsa/perf_model.hpp"
#include "nmpsa/system.hpp"

using namespace nmpsa;

namespace {
const LogicalShape k8x512{8, 512, 8};
const GemmOp ffn_gate{8, 28672, 8192, "ffn_gate"};
}  // namespace

TEST_CASE("OS tiling of the FFN gate on 8x512") {
  const TilePlan p = tile_gemm(ffn_gate, k8x512, Dataflow::OS, 64);
  CHECK(p.row_tiles == 1);
  CHECK(p.col_tiles == 56);
  CHECK(p.phases == 1);
  CHECK(p.per_tile_T == 8192);
  CHECK(array_cycles(p) == 459335);
}

TEST_CASE("IS tiling of the FFN gate on 8x512") {
  const TilePlan p = tile_gemm(ffn_gate, k8x512, Dataflow::IS, 64);
  CHECK(p.col_tiles == 16);
  CHECK(p.per_tile_T == 28672);
}

TEST_CASE("a single-tile op has one tile and one phase") {
  const TilePlan p = tile_gemm({4, 4, 5}, {4, 4, 1}, Dataflow::OS, 4);
  CHECK(p.tiles_total == 1);
  CHECK(p.phases == 1);
  CHECK(array_cycles(p) == 16);
}

TEST_CASE("phase splitting adds one skew per extra phase") {
  const TilePlan one = tile_gemm(ffn_gate, k8x512, Dataflow::IS, 64);
  const TilePlan split = tile_gemm(ffn_gate, k8x512, Dataflow::IS, 64, {8192, 0});
  CHECK(split.phases == 4);
  CHECK(array_cycles(split) == array_cycles(one) + 3 * (skew_cycles(k8x512) + 64));
}

TEST_CASE("first-tile refill volumes") {
  CHECK(refill_bytes(tile_gemm(ffn_gate, k8x512, Dataflow::OS, 64)).stream == 8519680);
  CHECK(refill_bytes(tile_gemm(ffn_gate, k8x512, Dataflow::IS, 64)).stream == 29360128);
  // Unit depth: one row of A and one column of B.
  CHECK(refill_bytes(tile_gemm({8, 512, 1}, k8x512, Dataflow::OS, 64)).stream == (8 + 512) * 2);
}

TEST_CASE("refill-limited OS stage at batch 8") {
  ArrayConfig a;
  MemorySystem mem;
  const double bpc = mem.per_core_bytes_per_cycle(a, 4);
  CHECK(bpc == doctest::Approx(468.75));
  const StageWork s{8192, 8519680, 0, true};
  std::vector<StageWork> one{s};
  const count_t first = pipeline_stalls(one, bpc, true, true, 0);
  CHECK(first >= 18175);
  CHECK(first <= 18176);
  std::vector<StageWork> two{s, {8192, 8519680, 0, false}};
  const count_t total = pipeline_stalls(two, bpc, true, true, 0);
  CHECK(total >= 18175 + 9983 - 1);
  CHECK(total <= 18175 + 9983 + 1);
}

TEST_CASE("pipeline stall limits") {
  std::vector<StageWork> st{{1000, 500, 0, true}, {1000, 400, 0, false}, {1000, 900, 0, false}};
  // Compute covers every refill: only the first stage stalls.
  CHECK(pipeline_stalls(st, 1.0, true, true, 0) == 500);
  CHECK(pipeline_stalls(st, 1e18, true, true, 0) == 0);
  // Without double buffering nothing overlaps.
  CHECK(pipeline_stalls(st, 1.0, false, true, 0) == 1800);
}

TEST_CASE("minimum buffers") {
  const BufferNeed is = min_buffers(k8x512, Dataflow::IS, tile_gemm({8, 512, 512}, k8x512, Dataflow::IS, 64));
  CHECK(is.weight_buf_bytes == 1048576);
  CHECK(is.act_buf_bytes == 16384);
  const LogicalShape sq{64, 64, 1};
  const BufferNeed os = min_buffers(sq, Dataflow::OS, tile_gemm({64, 64, 1024}, sq, Dataflow::OS, 64));
  CHECK(os.weight_buf_bytes == 262144);
  CHECK(os.act_buf_bytes == 262144);
}

TEST_CASE("tiling limits come from buffer halves") {
  MemorySystem mem;
  const TilingLimits l = tiling_limits(k8x512, Dataflow::OS, mem, 2);
  CHECK(l.phase_depth == 8192);
  CHECK(l.chunk_depth == 512);
  mem.act_buf_bytes = 8;
  CHECK_THROWS_AS(tiling_limits(k8x512, Dataflow::OS, mem, 2), InfeasibleError);
}

TEST_CASE("memory system validation") {
  MemorySystem mem;
  mem.total_dram_bw = 0;
  CHECK_THROWS_AS(mem.validate(), ConfigError);
}

TEST_CASE("energy calibration reproduces the peak power split") {
  const EnergyModel e = EnergyModel::calibrate(16, 4, 4096, 0.8e9, 64, 24, 6.4e10);
  CHECK(e.per_mac * 1e12 == doctest::Approx(0.1836).epsilon(0.001));
  ActivityCounts peak;
  peak.macs = 16.0 * 4 * 4096 * 0.8e9;
  peak.vector_elems = 16.0 * 4 * 64 * 0.8e9;
  peak.core_active_cycles = 16.0 * 4 * 0.8e9;
  peak.noc_bytes = 24 * 6.4e10;
  const EnergyBreakdown b = e.energy(peak);
  CHECK(b.matrix == doctest::Approx(38.5));
  CHECK(b.vector == doctest::Approx(14.2));
  CHECK(b.control == doctest::Approx(4.4));
  CHECK(b.noc == doctest::Approx(4.8));
  // The four published components add to 61.9 W; the quoted total is 61.8 W.
  CHECK(b.logic() == doctest::Approx(61.8).epsilon(0.01));
  CHECK(e.energy({}).total() == 0.0);
}

TEST_CASE("MAC-Tree compute cycles and peak ratio") {
  const CostReport r = mac_tree_cycles({1, 512, 16}, MemorySystem{});
  CHECK(r.array_cycles == 2);
  MacTreeParams p;
  CHECK(mac_tree_utilization({1, 512, 17}, p) == doctest::Approx(0.85));
  const System ours = make_system("default");
  const System tree = make_system("mac-tree");
  CHECK(ours.peak_flops() / ours.num_pus() / (tree.peak_flops() / tree.num_pus()) == doctest::Approx(3.2));
}

TEST_CASE("cost report accumulation") {
  CostReport a, b;
  a.array_cycles = 10;
  a.macs = 100;
  a.pe_capacity = 400;
  a.recompute_total();
  b.stall_cycles = 5;
  b.macs = 100;
  b.pe_capacity = 100;
  b.recompute_total();
  a += b;
  CHECK(a.total_cycles == 15);
  CHECK(a.utilization == doctest::Approx(0.4));
  CHECK(a.scaled(3).total_cycles == 45);
}
