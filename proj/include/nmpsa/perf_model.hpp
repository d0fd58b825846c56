#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nmpsa/array_model.hpp"
#include "nmpsa/energy.hpp"

namespace nmpsa {

struct MemorySystem {
  double total_dram_bw = 24.0e12;  // bytes/s across the stack
  double noc_link_bw = 6.4e10;     // bytes/s per inter-PU link
  count_t weight_buf_bytes = 1 << 20;
  count_t act_buf_bytes = 256 << 10;
  bool double_buffered = true;
  // Output writeback contends with refill on the same per-core share.
  bool writeback_shares_bandwidth = true;

  void validate() const;
  double per_pu_bw(const ArrayConfig& a) const { return total_dram_bw / static_cast<double>(a.num_pus); }
  double per_core_bw(const ArrayConfig& a, count_t active_cores) const {
    return per_pu_bw(a) / static_cast<double>(active_cores);
  }
  double per_core_bytes_per_cycle(const ArrayConfig& a, count_t active_cores) const {
    return per_core_bw(a, active_cores) / a.freq_hz;
  }
};

/// Temporal segmentation limits. A phase is a pipeline run that starts with a
/// stationary preload and fill skew; it is bounded by the activation-side
/// buffer half. Within a phase the streamed operand is refilled in chunks
/// bounded by the weight buffer half. Zero means unlimited.
struct TilingLimits {
  count_t phase_depth = 0;
  count_t chunk_depth = 0;
};

TilingLimits tiling_limits(const LogicalShape& shape, Dataflow df, const MemorySystem& mem, count_t elem_bytes);

struct TilePlan {
  LogicalShape logical;
  Dataflow dataflow = Dataflow::OS;
  count_t phys_rows = 0;
  count_t elem_bytes = 2;
  count_t m = 0, n = 0, k = 0;
  count_t spatial = 0;   // N under OS, K under IS
  count_t temporal = 0;  // K under OS, N under IS
  count_t row_tiles = 0;
  count_t col_tiles = 0;
  count_t phases = 0;
  count_t phase_depth = 0;
  count_t chunk_depth = 0;
  count_t per_tile_T = 0;  // deepest tile
  count_t tiles_total = 0;
};

/// One refill unit of a TilePlan with its true extents.
struct Tile {
  count_t m_t = 0;
  count_t s_t = 0;  // spatial column extent
  count_t t_t = 0;  // temporal depth
  count_t phase = 0;
  bool first_in_phase = false;
  bool opens_spatial = false;   // first chunk of this spatial tile within the phase
  bool closes_spatial = false;  // last chunk of this spatial tile within the phase

  count_t n_t(Dataflow df) const { return df == Dataflow::OS ? s_t : t_t; }
  count_t k_t(Dataflow df) const { return df == Dataflow::OS ? t_t : s_t; }
  count_t volume() const { return m_t * s_t * t_t; }
};

TilePlan tile_gemm(const GemmOp& op, const LogicalShape& shape, Dataflow df, count_t phys_rows,
                   const TilingLimits& limits = {});

/// Visits tiles in execution order: phase, row tile, column tile, chunk.
void for_each_tile(const TilePlan& plan, const std::function<void(const Tile&)>& fn);

/// Fill/drain skew of one pipeline run on the logical array.
count_t skew_cycles(const LogicalShape& shape);
/// `instances` back-to-back copies of the same GEMM chain like tiles: the
/// last phase of one copy and the first phase of the next share a pipeline run.
count_t array_cycles(const TilePlan& plan, count_t instances = 1);

struct TileTraffic {
  count_t stream = 0;
  count_t stationary = 0;
  count_t writeback = 0;
  count_t refill() const { return stream + stationary; }
  count_t total() const { return stream + stationary + writeback; }
};

TileTraffic tile_traffic(const TilePlan& plan, const Tile& tile);
/// Traffic of the first tile, and the sum over all tiles.
TileTraffic refill_bytes(const TilePlan& plan);
TileTraffic total_traffic(const TilePlan& plan);

/// Compute and refill demand of one double-buffered stage.
struct StageWork {
  double compute_cycles = 0;
  double refill_bytes = 0;
  double writeback_bytes = 0;
  bool phase_start = false;
};

/// A stage flagged phase_start pays its full refill; other stages stall by
/// max(0, refill(i) - compute(i-1)). Writeback of a stage joins the next
/// stage's refill window when it shares bandwidth.
count_t pipeline_stalls(std::span<const StageWork> stages, double bytes_per_cycle, bool double_buffered,
                        bool writeback_shares_bandwidth, count_t drain_slack);

count_t stall_cycles(const TilePlan& plan, const MemorySystem& mem, const ArrayConfig& cfg,
                     count_t active_cores = 1, count_t instances = 1);

struct BufferNeed {
  count_t weight_buf_bytes = 0;
  count_t act_buf_bytes = 0;
};

BufferNeed min_buffers(const LogicalShape& shape, Dataflow df, const TilePlan& plan);

struct CostReport {
  count_t array_cycles = 0;
  count_t stall_cycles = 0;
  count_t collective_cycles = 0;
  count_t reconfig_cycles = 0;
  count_t vector_cycles = 0;
  count_t overlap_cycles = 0;  // credited linear/nonlinear overlap
  count_t total_cycles = 0;
  double seconds = 0;
  double utilization = 0;
  count_t macs = 0;
  count_t dram_bytes = 0;
  count_t noc_bytes = 0;
  count_t vector_elems = 0;
  count_t core_active_cycles = 0;
  double pe_capacity = 0;  // PE-cycles available while the op occupied the fabric
  EnergyBreakdown energy;

  void recompute_total() {
    total_cycles = array_cycles + stall_cycles + collective_cycles + reconfig_cycles + vector_cycles - overlap_cycles;
  }
  CostReport& operator+=(const CostReport& o);
  CostReport scaled(count_t factor) const;
};

/// Cost of `instances` chained copies of `op` on one core under a fixed shape
/// and dataflow.
CostReport core_cost(const GemmOp& op, const LogicalShape& shape, Dataflow df, const ArrayConfig& cfg,
                     const MemorySystem& mem, count_t active_cores, count_t instances = 1);

struct MacTreeParams {
  count_t macs_per_cycle = 16 * 16 * 16;
  double freq_hz = 1.0e9;
  count_t align = 16;
  double unaligned_utilization = 0.85;
  count_t num_pus = 16;
};

double mac_tree_utilization(const GemmOp& op, const MacTreeParams& p);

/// One PU's MAC-Tree executing `op` with the same double-buffer stall model.
CostReport mac_tree_cycles(const GemmOp& op, const MemorySystem& mem, const MacTreeParams& p = {},
                           count_t instances = 1);

}  // namespace nmpsa
