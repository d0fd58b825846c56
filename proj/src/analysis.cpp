#include "nmpsa/analysis.hpp"

#include <cmath>

namespace nmpsa {

namespace {
count_t ceil_div(count_t a, count_t b) { return (a + b - 1) / b; }
}  // namespace

RooflineSpec ridge_point(const System& sys) {
  RooflineSpec r;
  r.peak_flops = sys.peak_flops();
  r.bandwidth = sys.mem.total_dram_bw;
  r.ridge = r.peak_flops / r.bandwidth;
  r.label = sys.name;
  return r;
}

double operator_intensity(const GemmOp& op) {
  const double m = static_cast<double>(op.m), n = static_cast<double>(op.n), k = static_cast<double>(op.k);
  return 2.0 * m * n * k / (static_cast<double>(op.elem_bytes) * (m * k + k * n + m * n));
}

OperatorIntensity classify(const GemmOp& op, const RooflineSpec& roof) {
  const double i = operator_intensity(op);
  return {i, i >= roof.ridge};
}

std::vector<GemmOp> single_core_workload(const OperatorGraph& graph, const System& sys) {
  const count_t cores = sys.array.num_pus * sys.array.cores_per_pu;
  const auto side = static_cast<count_t>(std::llround(std::sqrt(static_cast<double>(cores))));
  std::vector<GemmOp> out;
  out.reserve(graph.ops.size());
  for (const auto& op : graph.ops) {
    GemmOp s = op;
    if (!op.is_attention() && side * side == cores) {
      s.n = ceil_div(op.n, side);
      s.k = ceil_div(op.k, side);
    }
    out.push_back(s);
  }
  return out;
}

DataflowTrend dataflow_trend(const std::vector<GemmOp>& workload, const System& sys) {
  DataflowTrend t;
  const count_t active = sys.array.cores_per_pu;
  for (const auto& op : workload) {
    DataflowTrendRow row;
    row.op = op;
    row.n_greater_k = op.n > op.k;
    const CoreChoice os = core_choice(op, Dataflow::OS, sys.array, sys.mem, active);
    const CoreChoice is = core_choice(op, Dataflow::IS, sys.array, sys.mem, active);
    row.os_cycles = os.cost.total_cycles;
    row.is_cycles = is.cost.total_cycles;
    row.chosen = row.is_cycles < row.os_cycles ? Dataflow::IS : Dataflow::OS;
    row.follows_rule = row.chosen == (row.n_greater_k ? Dataflow::IS : Dataflow::OS);
    ++t.tiles;
    if (row.follows_rule) ++t.tiles_following_rule;
    t.rows.push_back(row);
  }
  return t;
}

double reference_area(const System& sys, const AreaModel& area) {
  const double sram = static_cast<double>(sys.mem.weight_buf_bytes + sys.mem.act_buf_bytes);
  return static_cast<double>(sys.array.pes()) * area.pe_area + sram * area.sram_byte_area;
}

std::vector<SweepCandidate> area_matched_candidates(const std::vector<count_t>& cols, const AreaModel& area,
                                                    double budget) {
  std::vector<SweepCandidate> out;
  for (count_t c : cols) {
    SweepCandidate s;
    s.rows = 8;
    s.cols = c;
    const double left = budget - static_cast<double>(s.rows * c) * area.pe_area;
    if (left <= 0) throw ConfigError("candidate 8x" + std::to_string(c) + " leaves no area for buffers");
    const double bytes = left / area.sram_byte_area;
    s.act_buf_bytes = static_cast<count_t>(bytes * area.act_fraction);
    s.weight_buf_bytes = static_cast<count_t>(bytes) - s.act_buf_bytes;
    out.push_back(s);
  }
  return out;
}

namespace {

SweepRow evaluate_candidate(const SweepCandidate& cand, const std::vector<GemmOp>& workload, const System& sys) {
  System s = sys;
  s.array.phys_rows = cand.rows;
  s.array.phys_cols = cand.cols;
  s.array.granularity = cand.rows;
  s.array.reconfigurable = false;
  s.mem.weight_buf_bytes = cand.weight_buf_bytes;
  s.mem.act_buf_bytes = cand.act_buf_bytes;
  s.calibrate_energy();
  SweepRow row;
  row.cand = cand;
  CostReport total;
  for (const auto& op : workload) {
    const CoreChoice c = select_core_dataflow(op, s.array, s.mem, s.array.cores_per_pu);
    CostReport r = c.cost;
    r.macs = op.macs();
    attach_energy(r, s);
    total += r;
  }
  row.array_cycles = total.array_cycles;
  row.stall_cycles = total.stall_cycles;
  row.energy_j = total.energy.total();
  return row;
}

}  // namespace

std::vector<SweepRow> buffer_compute_sweep(const std::vector<SweepCandidate>& cands,
                                           const std::vector<GemmOp>& workload, const System& sys) {
  std::vector<SweepRow> rows(cands.size());
  std::vector<std::exception_ptr> errors(cands.size());
  const auto n = static_cast<std::int64_t>(cands.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      rows[u] = evaluate_candidate(cands[u], workload, sys);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

std::vector<SweepRow> buffer_compute_sweep_serial(const std::vector<SweepCandidate>& cands,
                                                  const std::vector<GemmOp>& workload, const System& sys) {
  std::vector<SweepRow> rows;
  for (const auto& c : cands) rows.push_back(evaluate_candidate(c, workload, sys));
  return rows;
}

std::map<std::string, count_t> shape_demand(const ModelSchedule& s) {
  std::map<std::string, count_t> out;
  for (const auto& c : s.ops)
    if (!c.attention) out[c.shape.str()] += c.op.count;
  return out;
}

double mode_entropy(const std::array<count_t, 4>& hist) {
  count_t total = 0;
  for (count_t h : hist) total += h;
  if (total == 0) return 0.0;
  double e = 0;
  for (count_t h : hist) {
    if (h == 0) continue;
    const double p = static_cast<double>(h) / static_cast<double>(total);
    e -= p * std::log2(p);
  }
  return e;
}

ScheduleReport report_schedule(const ModelSchedule& flexible, const std::array<ModelSchedule, 4>& fixed) {
  ScheduleReport r;
  r.histogram = flexible.mode_histogram;
  count_t total = 0;
  for (count_t h : r.histogram) total += h;
  for (std::size_t i = 0; i < 4; ++i)
    r.share[i] = total ? static_cast<double>(r.histogram[i]) / static_cast<double>(total) : 0.0;
  r.entropy_bits = mode_entropy(r.histogram);
  r.flexible_cycles = static_cast<double>(flexible.totals.total_cycles);
  for (std::size_t i = 0; i < 4; ++i) {
    r.fixed_cycles[i] = static_cast<double>(fixed[i].totals.total_cycles);
    r.slowdown[i] = r.flexible_cycles > 0 ? r.fixed_cycles[i] / r.flexible_cycles : 1.0;
    for (const auto& c : fixed[i].ops)
      if (c.forced_mode_infeasible) ++r.forced_fallbacks;
  }
  return r;
}

ScheduleReport report_schedule(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys) {
  const ModelSchedule flex = schedule_model(cfg, graph, sys);
  std::array<ModelSchedule, 4> fixed;
  for (std::size_t i = 0; i < 4; ++i) fixed[i] = schedule_model(cfg, graph, sys, {kAllModes[i]});
  return report_schedule(flex, fixed);
}

}  // namespace nmpsa
