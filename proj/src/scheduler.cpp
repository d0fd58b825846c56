#include "nmpsa/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <tuple>

namespace nmpsa {

namespace {

count_t ceil_div(count_t a, count_t b) { return (a + b - 1) / b; }

count_t isqrt_exact(count_t p) {
  const auto s = static_cast<count_t>(std::llround(std::sqrt(static_cast<double>(p))));
  return s * s == p ? s : 0;
}

double ring_factor(Collective c) { return c == Collective::AllReduce ? 2.0 : 1.0; }

double ring_cycles(count_t p, double payload, Collective c, double bw, double freq) {
  if (p <= 1 || payload <= 0) return 0.0;
  return ring_factor(c) * static_cast<double>(p - 1) / static_cast<double>(p) * payload / bw * freq;
}

count_t ceil_cycles(double x) { return static_cast<count_t>(std::ceil(x - 1e-9)); }

}  // namespace

std::string to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::IS_S: return "IS-S";
    case PartitionMode::OS_S: return "OS-S";
    case PartitionMode::IS_ST: return "IS-ST";
    case PartitionMode::OS_ST: return "OS-ST";
  }
  return "?";
}

std::string to_string(Topology t) { return t == Topology::Chain1x16 ? "chain" : "mesh"; }
std::string to_string(Collective c) { return c == Collective::AllReduce ? "all-reduce" : "all-gather"; }

PartitionMode parse_mode(const std::string& s) {
  std::string u;
  for (char ch : s) u += ch == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (auto m : kAllModes)
    if (to_string(m) == u) return m;
  throw ConfigError("unknown partition mode '" + s + "' (expected is-s, os-s, is-st or os-st)");
}

Dataflow mode_dataflow(PartitionMode m) {
  return (m == PartitionMode::IS_S || m == PartitionMode::IS_ST) ? Dataflow::IS : Dataflow::OS;
}

bool is_spatio_temporal(PartitionMode m) { return m == PartitionMode::IS_ST || m == PartitionMode::OS_ST; }

GemmOp PartitionPlan::executed_op() const {
  GemmOp e = per_pu_op;
  if (temporal_split > 1) {
    if (mode == PartitionMode::IS_ST)
      e.n = ceil_div(e.n, temporal_split);
    else
      e.k = ceil_div(e.k, temporal_split);
  }
  return e;
}

std::vector<PartitionPlan> partition_modes(const GemmOp& op, count_t num_pus) {
  std::vector<PartitionPlan> out;
  const count_t st = isqrt_exact(num_pus);
  const count_t payload = op.m * op.n * op.elem_bytes;
  for (auto mode : kAllModes) {
    PartitionPlan p;
    p.mode = mode;
    p.per_pu_op = op;
    p.per_pu_op.count = 1;
    p.payload_bytes = payload;
    p.collective = mode_dataflow(mode) == Dataflow::IS ? Collective::AllReduce : Collective::AllGather;
    p.spatial_dim = mode_dataflow(mode) == Dataflow::IS ? SplitDim::K : SplitDim::N;
    if (!is_spatio_temporal(mode)) {
      p.topology = Topology::Chain1x16;
      p.spatial_factor = num_pus;
      p.temporal_split = 1;
    } else {
      p.topology = Topology::Mesh4x4;
      p.spatial_factor = st;
      p.temporal_split = st;
    }
    const count_t f = p.spatial_factor;
    if (f < 1) {
      p.feasible = false;
    } else if (p.spatial_dim == SplitDim::K) {
      p.feasible = op.k >= f && (p.temporal_split == 1 || op.n >= p.temporal_split);
      p.per_pu_op.k = ceil_div(op.k, f);
    } else {
      p.feasible = op.n >= f && (p.temporal_split == 1 || op.k >= p.temporal_split);
      p.per_pu_op.n = ceil_div(op.n, f);
    }
    out.push_back(p);
  }
  return out;
}

count_t collective_cycles(const PartitionPlan& plan, const MemorySystem& mem, double freq, count_t num_pus) {
  const auto payload = static_cast<double>(plan.payload_bytes);
  if (plan.topology == Topology::Chain1x16)
    return ceil_cycles(ring_cycles(num_pus, payload, plan.collective, mem.noc_link_bw, freq));
  const count_t s = isqrt_exact(num_pus);
  return ceil_cycles(ring_cycles(s, payload, plan.collective, mem.noc_link_bw, freq) +
                     ring_cycles(s, payload / static_cast<double>(s), plan.collective, mem.noc_link_bw, freq));
}

count_t collective_noc_bytes(const PartitionPlan& plan, count_t num_pus) {
  const double f = ring_factor(plan.collective);
  const auto payload = static_cast<double>(plan.payload_bytes);
  if (plan.topology == Topology::Chain1x16)
    return static_cast<count_t>(std::llround(f * static_cast<double>(num_pus - 1) * payload));
  const count_t s = isqrt_exact(num_pus);
  const double row = static_cast<double>(s) * f * static_cast<double>(s - 1) * payload;
  return static_cast<count_t>(std::llround(row + row / static_cast<double>(s)));
}

CoreChoice core_choice(const GemmOp& op, Dataflow df, const ArrayConfig& cfg, const MemorySystem& mem,
                       count_t active_cores, count_t instances) {
  CoreChoice c;
  c.dataflow = df;
  c.shape = select_logical_shape(op.m, cfg);
  c.plan = tile_gemm(op, c.shape, df, cfg.phys_rows, tiling_limits(c.shape, df, mem, op.elem_bytes));
  c.cost = core_cost(op, c.shape, df, cfg, mem, active_cores, instances);
  return c;
}

CoreChoice select_core_dataflow(const GemmOp& op, const ArrayConfig& cfg, const MemorySystem& mem,
                                count_t active_cores, count_t instances) {
  CoreChoice os = core_choice(op, Dataflow::OS, cfg, mem, active_cores, instances);
  CoreChoice is = core_choice(op, Dataflow::IS, cfg, mem, active_cores, instances);
  return is.cost.total_cycles < os.cost.total_cycles ? is : os;
}

count_t nonlinear_cycles(count_t elements, double tput) {
  if (elements <= 0) return 0;
  return ceil_cycles(static_cast<double>(elements) / tput);
}

count_t overlap_credit(const GemmOp& op, Dataflow df, count_t tiles_total, count_t nl, count_t linear) {
  if (op.nonlinear_follow == Nonlinear::None || df == Dataflow::IS || tiles_total < 1) return 0;
  // Each finished output tile can be post-processed while the next computes;
  // only the last tile's share is exposed.
  const count_t hidden = nl * (tiles_total - 1) / tiles_total;
  return std::min({hidden, nl, linear});
}

void attach_energy(CostReport& r, const System& sys) {
  ActivityCounts a;
  a.macs = static_cast<double>(r.macs);
  a.vector_elems = static_cast<double>(r.vector_elems);
  a.core_active_cycles = static_cast<double>(r.core_active_cycles);
  a.noc_bytes = static_cast<double>(r.noc_bytes);
  a.dram_bytes = static_cast<double>(r.dram_bytes);
  r.energy = sys.energy.energy(a);
}

namespace {

// Linear fields and traffic cover all `count` chained instances of an op;
// collective, nonlinear and credit are per instance.
struct InstanceCost {
  count_t linear_array = 0;
  count_t linear_stall = 0;
  count_t collective = 0;
  count_t nonlinear = 0;
  count_t credit = 0;
  count_t tiles = 1;
  count_t dram_bytes = 0;
  count_t noc_bytes = 0;
  count_t busy_core_cycles = 0;
  Dataflow df = Dataflow::OS;
  LogicalShape shape;
};

count_t per_instance_linear(const GemmOp& op, const InstanceCost& ic) {
  return ceil_div(ic.linear_array + ic.linear_stall, std::max<count_t>(op.count, 1));
}

double system_pe_capacity_per_cycle(const System& sys) {
  if (sys.engine == Engine::MacTree) return static_cast<double>(sys.mac_tree.macs_per_cycle * sys.mac_tree.num_pus);
  return static_cast<double>(sys.array.pes() * sys.array.num_pus * sys.array.cores_per_pu);
}

// Folds the instances of one op into a report, crediting cross-branch
// overlap between independent expert instances.
CostReport fold_instances(const GemmOp& op, const InstanceCost& ic, const System& sys) {
  CostReport r;
  const count_t n = op.count;
  r.array_cycles = ic.linear_array;
  r.stall_cycles = ic.linear_stall;
  r.collective_cycles = ic.collective * n;
  r.vector_cycles = ic.nonlinear * n;
  r.overlap_cycles = ic.credit * n;
  if (op.is_expert() && n > 1) {
    const count_t linear = per_instance_linear(op, ic);
    r.overlap_cycles += (n - 1) * std::max<count_t>(0, std::min(ic.nonlinear - ic.credit, linear - ic.credit));
  }
  r.recompute_total();
  r.seconds = static_cast<double>(r.total_cycles) / sys.freq_hz();
  r.macs = op.total_macs();
  r.dram_bytes = ic.dram_bytes;
  r.noc_bytes = ic.noc_bytes * n;
  r.vector_elems = op.nonlinear_follow == Nonlinear::None ? 0 : op.m * op.n * n;
  r.core_active_cycles = ic.busy_core_cycles;
  r.pe_capacity = static_cast<double>(r.total_cycles) * system_pe_capacity_per_cycle(sys);
  r.utilization = r.pe_capacity > 0 ? static_cast<double>(r.macs) / r.pe_capacity : 0.0;
  attach_energy(r, sys);
  return r;
}

// One instance of `plan` on the systolic stack.
InstanceCost systolic_instance(const GemmOp& op, const PartitionPlan& plan, const System& sys, count_t pus_used) {
  const ArrayConfig& cfg = sys.array;
  const GemmOp ex = plan.executed_op();
  // Cores share the PU slice along N; the widest core sets the pace.
  const count_t chunk = ceil_div(ex.n, cfg.cores_per_pu);
  const count_t active = ceil_div(ex.n, chunk);
  GemmOp core_op = ex;
  core_op.n = chunk;
  const CoreChoice cc = core_choice(core_op, plan.dataflow(), cfg, sys.mem, active, op.count);

  InstanceCost ic;
  ic.df = cc.dataflow;
  ic.shape = cc.shape;
  ic.linear_array = cc.cost.array_cycles;
  ic.linear_stall = cc.cost.stall_cycles;
  ic.collective = pus_used > 1 ? collective_cycles(plan, sys.mem, cfg.freq_hz, pus_used) : 0;
  ic.noc_bytes = pus_used > 1 ? collective_noc_bytes(plan, pus_used) : 0;
  if (op.nonlinear_follow != Nonlinear::None)
    ic.nonlinear = nonlinear_cycles(ceil_div(op.m * op.n, pus_used), sys.pu_vector_throughput());
  ic.tiles = cc.plan.tiles_total;
  ic.credit = overlap_credit(op, ic.df, ic.tiles, ic.nonlinear, per_instance_linear(op, ic));
  // Traffic scales with the share of the op a core handles.
  const double share = static_cast<double>(op.macs()) / static_cast<double>(core_op.macs());
  ic.dram_bytes = static_cast<count_t>(std::llround(static_cast<double>(cc.cost.dram_bytes) * share));
  const count_t busy_cores = pus_used * active;
  ic.busy_core_cycles = (ic.linear_array + ic.linear_stall) * busy_cores;
  return ic;
}

OpChoice schedule_mac_tree(const GemmOp& op, const System& sys) {
  const MacTreeParams& p = sys.mac_tree;
  OpChoice out;
  out.op = op;
  const count_t slice = ceil_div(op.n, p.num_pus);
  const count_t pus = ceil_div(op.n, slice);
  PartitionPlan plan;
  plan.mode = PartitionMode::OS_S;
  plan.topology = Topology::Chain1x16;
  plan.spatial_dim = SplitDim::N;
  plan.spatial_factor = pus;
  plan.collective = Collective::AllGather;
  plan.payload_bytes = op.m * op.n * op.elem_bytes;
  plan.per_pu_op = op;
  plan.per_pu_op.n = slice;
  plan.per_pu_op.count = 1;
  plan.feasible = true;

  const CostReport pu = mac_tree_cycles(plan.per_pu_op, sys.mem, p, op.count);
  InstanceCost ic;
  ic.linear_array = pu.array_cycles;
  ic.linear_stall = pu.stall_cycles;
  ic.collective = pus > 1 ? collective_cycles(plan, sys.mem, p.freq_hz, pus) : 0;
  ic.noc_bytes = pus > 1 ? collective_noc_bytes(plan, pus) : 0;
  if (op.nonlinear_follow != Nonlinear::None)
    ic.nonlinear = nonlinear_cycles(ceil_div(op.m * op.n, pus), sys.pu_vector_throughput());
  // Outputs of a weight chunk are final once it has passed the tree.
  const count_t w_half = sys.mem.double_buffered ? sys.mem.weight_buf_bytes / 2 : sys.mem.weight_buf_bytes;
  ic.tiles = std::max<count_t>(1, ceil_div(plan.per_pu_op.k * slice * op.elem_bytes, w_half));
  ic.credit = overlap_credit(op, Dataflow::OS, ic.tiles, ic.nonlinear, per_instance_linear(op, ic));
  ic.dram_bytes = pu.dram_bytes * pus;
  ic.busy_core_cycles = (ic.linear_array + ic.linear_stall) * pus;

  out.plan = plan;
  out.dataflow = Dataflow::OS;
  out.cost = fold_instances(op, ic, sys);
  return out;
}

}  // namespace

OpChoice schedule_operator(const GemmOp& op, const System& sys, const ScheduleOptions& opts) {
  if (sys.engine == Engine::RooflineOnly)
    throw ConfigError("system '" + sys.name + "' is roofline-only and cannot be scheduled");
  if (sys.engine == Engine::MacTree) return schedule_mac_tree(op, sys);

  const count_t P = sys.array.num_pus;
  OpChoice best;
  best.op = op;
  bool have = false;
  std::optional<OpChoice> forced;
  for (const auto& plan : partition_modes(op, P)) {
    if (!plan.feasible) continue;
    const InstanceCost ic = systolic_instance(op, plan, sys, P);
    OpChoice c;
    c.op = op;
    c.plan = plan;
    c.dataflow = ic.df;
    c.shape = ic.shape;
    c.cost = fold_instances(op, ic, sys);
    if (opts.fixed_mode && plan.mode == *opts.fixed_mode) forced = c;
    // Strict comparison keeps the earlier mode on ties.
    if (!have || c.cost.total_cycles < best.cost.total_cycles) {
      best = c;
      have = true;
    }
  }
  if (!have) {
    // Degenerate op: run it on one PU with its cores sharing N.
    PartitionPlan plan;
    plan.mode = PartitionMode::OS_S;
    plan.spatial_factor = 1;
    plan.per_pu_op = op;
    plan.per_pu_op.count = 1;
    plan.feasible = false;
    const GemmOp ex = plan.per_pu_op;
    const count_t chunk = ceil_div(ex.n, sys.array.cores_per_pu);
    GemmOp core_op = ex;
    core_op.n = chunk;
    const count_t active = ceil_div(ex.n, chunk);
    const CoreChoice cc = select_core_dataflow(core_op, sys.array, sys.mem, active, op.count);
    plan.mode = cc.dataflow == Dataflow::IS ? PartitionMode::IS_S : PartitionMode::OS_S;
    plan.collective = cc.dataflow == Dataflow::IS ? Collective::AllReduce : Collective::AllGather;
    InstanceCost ic;
    ic.df = cc.dataflow;
    ic.shape = cc.shape;
    ic.linear_array = cc.cost.array_cycles;
    ic.linear_stall = cc.cost.stall_cycles;
    if (op.nonlinear_follow != Nonlinear::None)
      ic.nonlinear = nonlinear_cycles(op.m * op.n, sys.pu_vector_throughput());
    ic.tiles = cc.plan.tiles_total;
    ic.credit = overlap_credit(op, ic.df, ic.tiles, ic.nonlinear, per_instance_linear(op, ic));
    ic.dram_bytes = cc.cost.dram_bytes * active;
    ic.busy_core_cycles = (ic.linear_array + ic.linear_stall) * active;
    best.plan = plan;
    best.dataflow = ic.df;
    best.shape = ic.shape;
    best.single_pu_fallback = true;
    best.cost = fold_instances(op, ic, sys);
    return best;
  }
  if (opts.fixed_mode) {
    if (forced) return *forced;
    best.forced_mode_infeasible = true;
  }
  return best;
}

AttentionReport schedule_attention(const ModelConfig& cfg, count_t batch, count_t seq_len, const System& sys) {
  if (sys.engine == Engine::RooflineOnly)
    throw ConfigError("system '" + sys.name + "' is roofline-only and cannot be scheduled");
  AttentionReport rep;
  const count_t groups = cfg.kv_heads;
  const count_t q_per_group = cfg.q_heads / cfg.kv_heads;
  const count_t hd = cfg.head_dim > 0 ? cfg.head_dim : cfg.hidden / cfg.q_heads;
  rep.head_tasks = batch * cfg.q_heads;
  rep.fused_tasks = batch * groups;

  // Heads sharing a KV head read the same cache slice, so they run as one
  // GEMM with M equal to the group size.
  GemmOp qk{q_per_group, seq_len, hd, "attn_qk", 0, Nonlinear::Softmax, 1, cfg.elem_bytes};
  GemmOp av{q_per_group, hd, seq_len, "attn_av", 0, Nonlinear::None, 1, cfg.elem_bytes};

  const count_t P = sys.num_pus();
  const count_t per_pu = ceil_div(rep.fused_tasks, P);
  rep.tasks_per_pu_max = per_pu;
  const count_t pus_used = std::min(P, rep.fused_tasks);

  // Linear totals cover every task on the busiest unit; same-shape GEMVs of
  // consecutive tasks chain through the pipeline like tiles.
  count_t lin_array = 0, lin_stall = 0, vec = 0, n_serial = 0, units = 0;
  count_t dram_per_unit = 0;
  double pe_per_unit = 0;
  if (sys.engine == Engine::MacTree) {
    n_serial = per_pu;
    const CostReport a = mac_tree_cycles(qk, sys.mem, sys.mac_tree, n_serial);
    const CostReport b = mac_tree_cycles(av, sys.mem, sys.mac_tree, n_serial);
    lin_array = a.array_cycles + b.array_cycles;
    lin_stall = a.stall_cycles + b.stall_cycles;
    vec = nonlinear_cycles(q_per_group * seq_len, sys.pu_vector_throughput());
    units = pus_used;
    dram_per_unit = a.dram_bytes + b.dram_bytes;
    pe_per_unit = static_cast<double>(sys.mac_tree.macs_per_cycle);
  } else {
    const count_t cores = sys.array.cores_per_pu;
    const count_t active = std::min(cores, per_pu);
    n_serial = ceil_div(per_pu, cores);
    const CoreChoice a = select_core_dataflow(qk, sys.array, sys.mem, active, n_serial);
    const CoreChoice b = select_core_dataflow(av, sys.array, sys.mem, active, n_serial);
    lin_array = a.cost.array_cycles + b.cost.array_cycles;
    lin_stall = a.cost.stall_cycles + b.cost.stall_cycles;
    vec = nonlinear_cycles(q_per_group * seq_len, static_cast<double>(sys.vector_lanes_per_core));
    units = pus_used * active;
    dram_per_unit = a.cost.dram_bytes + b.cost.dram_bytes;
    pe_per_unit = static_cast<double>(sys.array.pes());
  }
  const count_t lin = lin_array + lin_stall;
  const count_t lin_task = ceil_div(lin, n_serial);
  // Linear stages of one task interleave with the vector stage of another.
  const count_t busy = std::max(lin, n_serial * vec) + std::min(lin_task, vec);

  CostReport& r = rep.cost;
  r.array_cycles = lin_array;
  r.stall_cycles = lin_stall;
  r.vector_cycles = n_serial * vec;
  r.overlap_cycles = lin + n_serial * vec - busy;
  r.recompute_total();
  r.seconds = static_cast<double>(r.total_cycles) / sys.freq_hz();
  r.macs = rep.fused_tasks * (qk.macs() + av.macs());
  r.dram_bytes = static_cast<count_t>(std::llround(static_cast<double>(dram_per_unit) *
                                                  static_cast<double>(rep.fused_tasks) /
                                                  static_cast<double>(n_serial)));
  r.vector_elems = rep.fused_tasks * q_per_group * seq_len;
  r.core_active_cycles = busy * units;
  const double all_units = sys.engine == Engine::MacTree
                               ? static_cast<double>(P)
                               : static_cast<double>(P * sys.array.cores_per_pu);
  r.pe_capacity = static_cast<double>(r.total_cycles) * pe_per_unit * all_units;
  r.utilization = r.pe_capacity > 0 ? static_cast<double>(r.macs) / r.pe_capacity : 0.0;
  attach_energy(r, sys);
  return rep;
}

namespace {

using OpKey = std::tuple<count_t, count_t, count_t, std::string, int, count_t, count_t>;

OpKey key_of(const GemmOp& op) {
  return {op.m, op.n, op.k, op.tag, static_cast<int>(op.nonlinear_follow), op.count, op.elem_bytes};
}

ModelSchedule assemble(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys,
                       const std::vector<OpChoice>& evaluated, const std::map<OpKey, std::size_t>& index) {
  ModelSchedule s;
  s.model = cfg.name;
  s.batch = graph.batch;
  s.seq_len = graph.seq_len;
  std::optional<AttentionReport> attn;
  std::optional<std::pair<LogicalShape, Dataflow>> prev;
  for (const auto& op : graph.ops) {
    OpChoice c;
    if (op.is_attention()) {
      if (!attn) attn = schedule_attention(cfg, graph.batch, graph.seq_len, sys);
      c.op = op;
      c.attention = true;
      // The fused head-task schedule covers both attention GEMMs of a layer.
      if (op.tag == "attn_qk") {
        c.cost = attn->cost;
        s.head_tasks += attn->head_tasks;
      }
    } else {
      c = evaluated[index.at(key_of(op))];
      c.op = op;
      if (sys.engine == Engine::Systolic) {
        const std::pair<LogicalShape, Dataflow> cur{c.shape, c.dataflow};
        if (prev && *prev != cur) {
          c.cost.reconfig_cycles += 1;
          c.cost.recompute_total();
          c.cost.seconds = static_cast<double>(c.cost.total_cycles) / sys.freq_hz();
        }
        prev = cur;
      }
      if (c.single_pu_fallback)
        ++s.fallbacks;
      else
        ++s.mode_histogram[static_cast<std::size_t>(c.plan.mode)];
    }
    s.totals += c.cost;
    s.ops.push_back(std::move(c));
  }
  return s;
}

void collect_unique(const OperatorGraph& graph, std::vector<GemmOp>& unique, std::map<OpKey, std::size_t>& index) {
  for (const auto& op : graph.ops) {
    if (op.is_attention()) continue;
    const auto key = key_of(op);
    if (index.count(key)) continue;
    index.emplace(key, unique.size());
    unique.push_back(op);
  }
}

}  // namespace

ModelSchedule schedule_model(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys,
                             const ScheduleOptions& opts) {
  std::vector<GemmOp> unique;
  std::map<OpKey, std::size_t> index;
  collect_unique(graph, unique, index);
  std::vector<OpChoice> evaluated(unique.size());
  const auto n = static_cast<std::int64_t>(unique.size());
  // Exceptions may not cross the parallel region; rethrow the first afterwards.
  std::vector<std::exception_ptr> errors(unique.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      evaluated[u] = schedule_operator(unique[u], sys, opts);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return assemble(cfg, graph, sys, evaluated, index);
}

ModelSchedule schedule_model_serial(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys,
                                    const ScheduleOptions& opts) {
  std::vector<GemmOp> unique;
  std::map<OpKey, std::size_t> index;
  collect_unique(graph, unique, index);
  std::vector<OpChoice> evaluated;
  evaluated.reserve(unique.size());
  for (const auto& op : unique) evaluated.push_back(schedule_operator(op, sys, opts));
  return assemble(cfg, graph, sys, evaluated, index);
}

}  // namespace nmpsa
