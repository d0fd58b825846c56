#include "nmpsa/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nmpsa {

namespace {
count_t ceil_div(count_t a, count_t b) { return (a + b - 1) / b; }
}  // namespace

void MemorySystem::validate() const {
  if (total_dram_bw <= 0 || noc_link_bw <= 0) throw ConfigError("bandwidths must be positive");
  if (weight_buf_bytes < 1 || act_buf_bytes < 1) throw ConfigError("buffer sizes must be positive");
}

TilingLimits tiling_limits(const LogicalShape& shape, Dataflow, const MemorySystem& mem, count_t elem_bytes) {
  const count_t div = mem.double_buffered ? 2 : 1;
  TilingLimits lim;
  lim.phase_depth = (mem.act_buf_bytes / div) / (shape.rows * elem_bytes);
  lim.chunk_depth = (mem.weight_buf_bytes / div) / (shape.cols * elem_bytes);
  if (lim.phase_depth < 1 || lim.chunk_depth < 1)
    throw InfeasibleError("tile refill volume exceeds buffer capacity for shape " + shape.str());
  return lim;
}

TilePlan tile_gemm(const GemmOp& op, const LogicalShape& shape, Dataflow df, count_t phys_rows,
                   const TilingLimits& limits) {
  if (op.m < 1 || op.n < 1 || op.k < 1) throw std::invalid_argument("GEMM dimensions must be >= 1");
  TilePlan p;
  p.logical = shape;
  p.dataflow = df;
  p.phys_rows = phys_rows;
  p.elem_bytes = op.elem_bytes;
  p.m = op.m;
  p.n = op.n;
  p.k = op.k;
  p.spatial = df == Dataflow::OS ? op.n : op.k;
  p.temporal = df == Dataflow::OS ? op.k : op.n;
  p.row_tiles = ceil_div(p.m, shape.rows);
  p.col_tiles = ceil_div(p.spatial, shape.cols);
  p.phase_depth = limits.phase_depth > 0 ? std::min(limits.phase_depth, p.temporal) : p.temporal;
  p.phases = ceil_div(p.temporal, p.phase_depth);
  p.chunk_depth = limits.chunk_depth > 0 ? std::min(limits.chunk_depth, p.phase_depth) : p.phase_depth;
  p.per_tile_T = p.chunk_depth;
  count_t chunks = 0;
  for (count_t ph = 0; ph < p.phases; ++ph) {
    const count_t len = std::min(p.phase_depth, p.temporal - ph * p.phase_depth);
    chunks += ceil_div(len, p.chunk_depth);
  }
  p.tiles_total = p.row_tiles * p.col_tiles * chunks;
  return p;
}

void for_each_tile(const TilePlan& p, const std::function<void(const Tile&)>& fn) {
  for (count_t ph = 0; ph < p.phases; ++ph) {
    const count_t t0 = ph * p.phase_depth;
    const count_t len = std::min(p.phase_depth, p.temporal - t0);
    const count_t chunks = ceil_div(len, p.chunk_depth);
    bool first = true;
    for (count_t rt = 0; rt < p.row_tiles; ++rt) {
      const count_t m_t = std::min(p.logical.rows, p.m - rt * p.logical.rows);
      for (count_t ct = 0; ct < p.col_tiles; ++ct) {
        const count_t s_t = std::min(p.logical.cols, p.spatial - ct * p.logical.cols);
        for (count_t ch = 0; ch < chunks; ++ch) {
          Tile t;
          t.m_t = m_t;
          t.s_t = s_t;
          t.t_t = std::min(p.chunk_depth, len - ch * p.chunk_depth);
          t.phase = ph;
          t.first_in_phase = first;
          t.opens_spatial = ch == 0;
          t.closes_spatial = ch + 1 == chunks;
          first = false;
          fn(t);
        }
      }
    }
  }
}

count_t skew_cycles(const LogicalShape& shape) { return shape.rows + shape.cols - 1; }

count_t array_cycles(const TilePlan& p, count_t instances) {
  // Streaming work is the temporal depth of every spatial tile; each phase
  // additionally pays one preload and one fill/drain skew.
  const count_t runs = instances * (p.phases - 1) + 1;
  return instances * p.row_tiles * p.col_tiles * p.temporal + runs * (skew_cycles(p.logical) + p.phys_rows);
}

TileTraffic tile_traffic(const TilePlan& p, const Tile& t) {
  const count_t eb = p.elem_bytes;
  TileTraffic tr;
  if (p.dataflow == Dataflow::OS) {
    // A (m_t x t_t) and B (t_t x s_t) stream; outputs leave once per spatial tile.
    tr.stream = (t.m_t + t.s_t) * t.t_t * eb;
    if (t.closes_spatial) tr.writeback = t.m_t * t.s_t * eb;
  } else {
    // A (m_t x s_t) is stationary; B (s_t x t_t) streams; outputs leave per chunk.
    tr.stream = t.s_t * t.t_t * eb;
    if (t.opens_spatial) tr.stationary = t.m_t * t.s_t * eb;
    tr.writeback = t.m_t * t.t_t * eb;
  }
  return tr;
}

TileTraffic refill_bytes(const TilePlan& p) {
  TileTraffic out;
  bool done = false;
  for_each_tile(p, [&](const Tile& t) {
    if (done) return;
    out = tile_traffic(p, t);
    done = true;
  });
  return out;
}

TileTraffic total_traffic(const TilePlan& p) {
  TileTraffic sum;
  for_each_tile(p, [&](const Tile& t) {
    const auto tr = tile_traffic(p, t);
    sum.stream += tr.stream;
    sum.stationary += tr.stationary;
    sum.writeback += tr.writeback;
  });
  return sum;
}

count_t pipeline_stalls(std::span<const StageWork> stages, double bpc, bool double_buffered,
                        bool writeback_shares_bandwidth, count_t drain_slack) {
  if (bpc <= 0) throw std::invalid_argument("bandwidth per cycle must be positive");
  double stall = 0;
  if (!double_buffered) {
    for (const auto& s : stages)
      stall += (s.refill_bytes + (writeback_shares_bandwidth ? s.writeback_bytes : 0.0)) / bpc;
    return static_cast<count_t>(std::ceil(stall - 1e-9));
  }
  double prev_compute = 0;
  double pending_wb = 0;
  for (const auto& s : stages) {
    const double bytes = s.refill_bytes + (writeback_shares_bandwidth ? pending_wb : 0.0);
    const double need = bytes / bpc;
    stall += s.phase_start ? need : std::max(0.0, need - prev_compute);
    prev_compute = s.compute_cycles;
    pending_wb = s.writeback_bytes;
  }
  if (writeback_shares_bandwidth) stall += std::max(0.0, pending_wb / bpc - static_cast<double>(drain_slack));
  return static_cast<count_t>(std::ceil(stall - 1e-9));
}

count_t stall_cycles(const TilePlan& p, const MemorySystem& mem, const ArrayConfig& cfg, count_t active_cores,
                     count_t instances) {
  // Prefetch runs across phase boundaries; only the op's first tile waits for
  // its whole refill.
  std::vector<StageWork> one;
  one.reserve(static_cast<std::size_t>(p.tiles_total));
  for_each_tile(p, [&](const Tile& t) {
    const auto tr = tile_traffic(p, t);
    one.push_back({static_cast<double>(t.t_t), static_cast<double>(tr.refill()),
                   static_cast<double>(tr.writeback), one.empty()});
  });
  std::vector<StageWork> stages;
  stages.reserve(one.size() * static_cast<std::size_t>(instances));
  for (count_t i = 0; i < instances; ++i) {
    stages.insert(stages.end(), one.begin(), one.end());
    // A chained copy prefetches behind the previous copy's last tile.
    if (i > 0) stages[stages.size() - one.size()].phase_start = false;
  }
  return pipeline_stalls(stages, mem.per_core_bytes_per_cycle(cfg, active_cores), mem.double_buffered,
                         mem.writeback_shares_bandwidth, skew_cycles(p.logical));
}

BufferNeed min_buffers(const LogicalShape& shape, Dataflow, const TilePlan& p) {
  return {2 * shape.cols * p.per_tile_T * p.elem_bytes, 2 * shape.rows * p.per_tile_T * p.elem_bytes};
}

CostReport& CostReport::operator+=(const CostReport& o) {
  array_cycles += o.array_cycles;
  stall_cycles += o.stall_cycles;
  collective_cycles += o.collective_cycles;
  reconfig_cycles += o.reconfig_cycles;
  vector_cycles += o.vector_cycles;
  overlap_cycles += o.overlap_cycles;
  total_cycles += o.total_cycles;
  seconds += o.seconds;
  macs += o.macs;
  dram_bytes += o.dram_bytes;
  noc_bytes += o.noc_bytes;
  vector_elems += o.vector_elems;
  core_active_cycles += o.core_active_cycles;
  pe_capacity += o.pe_capacity;
  utilization = pe_capacity > 0 ? static_cast<double>(macs) / pe_capacity : 0.0;
  energy += o.energy;
  return *this;
}

CostReport CostReport::scaled(count_t f) const {
  CostReport r = *this;
  r.array_cycles *= f;
  r.stall_cycles *= f;
  r.collective_cycles *= f;
  r.reconfig_cycles *= f;
  r.vector_cycles *= f;
  r.overlap_cycles *= f;
  r.total_cycles *= f;
  r.seconds *= static_cast<double>(f);
  r.macs *= f;
  r.dram_bytes *= f;
  r.noc_bytes *= f;
  r.vector_elems *= f;
  r.core_active_cycles *= f;
  r.pe_capacity *= static_cast<double>(f);
  const double d = static_cast<double>(f);
  r.energy = {energy.matrix * d, energy.vector * d, energy.control * d, energy.noc * d, energy.dram * d};
  return r;
}

CostReport core_cost(const GemmOp& op, const LogicalShape& shape, Dataflow df, const ArrayConfig& cfg,
                     const MemorySystem& mem, count_t active_cores, count_t instances) {
  const auto lim = tiling_limits(shape, df, mem, op.elem_bytes);
  const auto plan = tile_gemm(op, shape, df, cfg.phys_rows, lim);
  CostReport r;
  r.array_cycles = array_cycles(plan, instances);
  r.stall_cycles = stall_cycles(plan, mem, cfg, active_cores, instances);
  r.recompute_total();
  r.seconds = static_cast<double>(r.total_cycles) / cfg.freq_hz;
  r.macs = op.macs() * instances;
  r.dram_bytes = total_traffic(plan).total() * instances;
  r.core_active_cycles = r.total_cycles;
  r.pe_capacity = static_cast<double>(r.total_cycles) * static_cast<double>(cfg.pes());
  r.utilization = r.pe_capacity > 0 ? static_cast<double>(r.macs) / r.pe_capacity : 0.0;
  return r;
}

double mac_tree_utilization(const GemmOp& op, const MacTreeParams& p) {
  return op.k % p.align == 0 ? 1.0 : p.unaligned_utilization;
}

CostReport mac_tree_cycles(const GemmOp& op, const MemorySystem& mem, const MacTreeParams& p, count_t instances) {
  const count_t eb = op.elem_bytes;
  const double util = mac_tree_utilization(op, p);
  const auto compute = static_cast<count_t>(
      std::ceil(static_cast<double>(op.macs()) / static_cast<double>(p.macs_per_cycle) / util - 1e-9));

  // Weights stream in buffer-half chunks; activations arrive with the first chunk.
  const count_t w_half = mem.double_buffered ? mem.weight_buf_bytes / 2 : mem.weight_buf_bytes;
  const count_t w_bytes = op.k * op.n * eb;
  const count_t chunks = std::max<count_t>(1, ceil_div(w_bytes, w_half));
  std::vector<StageWork> stages;
  stages.reserve(static_cast<std::size_t>(chunks * instances));
  for (count_t c = 0; c < instances; ++c) {
    for (count_t i = 0; i < chunks; ++i) {
      const double part = static_cast<double>(std::min(w_half, w_bytes - i * w_half));
      StageWork s;
      s.compute_cycles = static_cast<double>(compute) / static_cast<double>(chunks);
      s.refill_bytes = part + (i == 0 ? static_cast<double>(op.m * op.k * eb) : 0.0);
      s.phase_start = c == 0 && i == 0;
      stages.push_back(s);
    }
    stages.back().writeback_bytes = static_cast<double>(op.m * op.n * eb);
  }
  const double bpc = mem.total_dram_bw / static_cast<double>(p.num_pus) / p.freq_hz;

  CostReport r;
  r.array_cycles = compute * instances;
  r.stall_cycles = pipeline_stalls(stages, bpc, mem.double_buffered, mem.writeback_shares_bandwidth, 0);
  r.recompute_total();
  r.seconds = static_cast<double>(r.total_cycles) / p.freq_hz;
  r.macs = op.macs() * instances;
  r.dram_bytes = (w_bytes + op.m * op.k * eb + op.m * op.n * eb) * instances;
  r.core_active_cycles = r.total_cycles;
  r.pe_capacity = static_cast<double>(r.total_cycles) * static_cast<double>(p.macs_per_cycle);
  r.utilization = r.pe_capacity > 0 ? static_cast<double>(r.macs) / r.pe_capacity : 0.0;
  return r;
}

}  // namespace nmpsa
