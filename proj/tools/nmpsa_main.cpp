// Command-line front end: analyze, schedule, sweep and emulate-check.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nmpsa/analysis.hpp"
#include "nmpsa/emulator.hpp"
#include "nmpsa/report.hpp"

using namespace nmpsa;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<double> dram_bw, freq, noc_bw;
  std::optional<count_t> weight_buf, act_buf, vector_lanes;
  bool no_double_buffer = false;
  bool separate_writeback_port = false;
};

struct RunConfig {
  std::string model = "llama3-70b";
  std::vector<count_t> batches{8};
  count_t seq_len = 8192;
  std::string system = "default";
  std::vector<std::string> compare;
  std::string fixed_mode;
  bool per_op = false;
  std::string format = "csv";
  std::string output;
  Overrides ov;
};

void add_common(CLI::App* cmd, RunConfig& rc, bool with_seq) {
  cmd->add_option("--model", rc.model, "preset name, config path, or <system>-preset");
  cmd->add_option("--batch", rc.batches, "batch size list, e.g. 8,16,32")->delimiter(',');
  if (with_seq) cmd->add_option("--seq", rc.seq_len, "KV length of the decode step");
  cmd->add_option("--system", rc.system, "system preset");
  cmd->add_option("--format", rc.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--output", rc.output, "write the report to this path instead of stdout");
  cmd->add_option("--dram-bw", rc.ov.dram_bw, "total DRAM bandwidth, bytes/s");
  cmd->add_option("--freq", rc.ov.freq, "array clock, Hz");
  cmd->add_option("--noc-bw", rc.ov.noc_bw, "per-link NoC bandwidth, bytes/s");
  cmd->add_option("--weight-buf", rc.ov.weight_buf, "weight buffer bytes per core");
  cmd->add_option("--act-buf", rc.ov.act_buf, "activation-side buffer bytes per core");
  cmd->add_option("--vector-lanes", rc.ov.vector_lanes, "vector lanes per core");
  cmd->add_flag("--no-double-buffer", rc.ov.no_double_buffer, "serialize refill and compute");
  cmd->add_flag("--separate-writeback-port", rc.ov.separate_writeback_port,
                "output writeback does not share refill bandwidth");
}

void positive(const char* what, double v) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

// Bandwidth overrides describe the memory stack, so comparators inherit them;
// the remaining overrides only touch the system under study.
System build_system(const std::string& preset, const Overrides& ov, bool primary) {
  System s = make_system(preset);
  if (ov.dram_bw) positive("--dram-bw", *ov.dram_bw), s.mem.total_dram_bw = *ov.dram_bw;
  if (ov.noc_bw) positive("--noc-bw", *ov.noc_bw), s.mem.noc_link_bw = *ov.noc_bw;
  if (primary) {
    if (ov.freq) positive("--freq", *ov.freq), s.array.freq_hz = *ov.freq;
    if (ov.weight_buf) positive("--weight-buf", static_cast<double>(*ov.weight_buf)),
        s.mem.weight_buf_bytes = *ov.weight_buf;
    if (ov.act_buf) positive("--act-buf", static_cast<double>(*ov.act_buf)), s.mem.act_buf_bytes = *ov.act_buf;
    if (ov.vector_lanes) positive("--vector-lanes", static_cast<double>(*ov.vector_lanes)),
        s.vector_lanes_per_core = *ov.vector_lanes;
    if (ov.no_double_buffer) s.mem.double_buffered = false;
    if (ov.separate_writeback_port) s.mem.writeback_shares_bandwidth = false;
  }
  s.validate();
  s.calibrate_energy();
  return s;
}

void check_batches(const std::vector<count_t>& batches) {
  if (batches.empty()) throw ConfigError("--batch needs at least one value");
  for (count_t b : batches)
    if (b < 1 || b > 1024) throw ConfigError("batch " + std::to_string(b) + " outside [1, 1024]");
}

ModelConfig load_model(const std::string& name) { return load_model_config(resolve_model_path(name)); }

json run_config_json(const RunConfig& rc, const System& sys, const std::string& command) {
  json j = {{"command", command}, {"model", rc.model},   {"batch", rc.batches},
            {"seq_len", rc.seq_len}, {"system", to_json(sys)}};
  if (!rc.compare.empty()) j["compare"] = rc.compare;
  if (!rc.fixed_mode.empty()) j["fixed_mode"] = rc.fixed_mode;
  return j;
}

void emit(const RunConfig& rc, const json& config, const Table& table) {
  std::ofstream file;
  if (!rc.output.empty()) {
    file.open(rc.output);
    if (!file) throw ConfigError("cannot write report '" + rc.output + "'");
  }
  std::ostream& os = rc.output.empty() ? std::cout : file;
  if (rc.format == "json") {
    os << json{{"config", config}, {"rows", table.to_json()}}.dump(2) << '\n';
  } else {
    os << "# config=" << config.dump() << '\n';
    table.write_csv(os);
  }
}

// Unique operators of the first decoder layer, in graph order.
std::vector<GemmOp> layer_zero(const std::vector<GemmOp>& ops) {
  std::vector<GemmOp> out;
  for (const auto& op : ops)
    if (op.layer == 0) out.push_back(op);
  return out;
}

int cmd_analyze(RunConfig& rc) {
  check_batches(rc.batches);
  const std::string suffix = "-preset";
  if (rc.model.size() > suffix.size() && rc.model.ends_with(suffix)) {
    const System sys = build_system(rc.model.substr(0, rc.model.size() - suffix.size()), rc.ov, true);
    const RooflineSpec roof = ridge_point(sys);
    Table t({"system", "peak_flops", "bandwidth", "ridge"});
    t.add_row({roof.label, roof.peak_flops, roof.bandwidth, roof.ridge});
    emit(rc, run_config_json(rc, sys, "analyze"), t);
    return 0;
  }
  const System sys = build_system(rc.system, rc.ov, true);
  const ModelConfig cfg = load_model(rc.model);
  const RooflineSpec roof = ridge_point(sys);
  Table t({"model", "batch", "tag", "m", "n", "k", "count", "intensity", "ridge", "bound"});
  for (count_t b : rc.batches) {
    const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
    for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& op : layer_zero(g.ops)) {
      const OperatorIntensity c = classify(op, roof);
      t.add_row({cfg.name, b, op.tag, op.m, op.n, op.k, op.count, c.intensity, roof.ridge,
                 c.compute_bound ? "compute" : "memory"});
    }
  }
  emit(rc, run_config_json(rc, sys, "analyze"), t);
  return 0;
}

int cmd_schedule(RunConfig& rc) {
  check_batches(rc.batches);
  const System sys = build_system(rc.system, rc.ov, true);
  std::vector<System> comparators;
  for (const auto& c : rc.compare) {
    if (c != "mac-tree" && c != "fixed-48x48" && c != "fixed-8x288")
      throw ConfigError("unknown comparator '" + c + "' (mac-tree, fixed-48x48, fixed-8x288)");
    comparators.push_back(build_system(c, rc.ov, false));
  }
  ScheduleOptions fixed;
  if (!rc.fixed_mode.empty()) fixed.fixed_mode = parse_mode(rc.fixed_mode);
  const ModelConfig cfg = load_model(rc.model);

  if (rc.per_op) {
    Table t({"batch", "tag", "m", "n", "k", "count", "mode", "dataflow", "shape", "total_cycles",
             "forced_mode_infeasible", "single_pu_fallback"});
    for (count_t b : rc.batches) {
      const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
      const ModelSchedule s = schedule_model(cfg, g, sys, fixed);
      for (const auto& c : s.ops) {
        if (c.op.layer != 0) continue;
        t.add_row({b, c.op.tag, c.op.m, c.op.n, c.op.k, c.op.count,
                   c.attention ? std::string("attention") : to_string(c.plan.mode), to_string(c.dataflow),
                   c.attention ? std::string("-") : c.shape.str(), c.cost.total_cycles,
                   c.forced_mode_infeasible, c.single_pu_fallback});
      }
    }
    emit(rc, run_config_json(rc, sys, "schedule"), t);
    return 0;
  }

  std::vector<std::string> cols{"model",          "batch",        "seq_len",         "total_cycles",
                                "seconds",        "array_cycles", "stall_cycles",    "collective_cycles",
                                "reconfig_cycles", "vector_cycles", "overlap_cycles", "utilization",
                                "energy_j",       "dram_bytes",   "n_is_s",          "n_os_s",
                                "n_is_st",        "n_os_st",      "entropy_bits",    "fallbacks"};
  if (fixed.fixed_mode) {
    cols.push_back("fixed_total_cycles");
    cols.push_back("slowdown");
  }
  for (const auto& c : rc.compare) {
    cols.push_back(c + "_seconds");
    cols.push_back("speedup_vs_" + c);
    cols.push_back("energy_efficiency_vs_" + c);
  }
  Table t(cols);
  for (count_t b : rc.batches) {
    const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
    for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
    const ModelSchedule s = schedule_model(cfg, g, sys);
    const CostReport& r = s.totals;
    std::vector<json> row{cfg.name,          b,
                          rc.seq_len,        r.total_cycles,
                          r.seconds,         r.array_cycles,
                          r.stall_cycles,    r.collective_cycles,
                          r.reconfig_cycles, r.vector_cycles,
                          r.overlap_cycles,  r.utilization,
                          r.energy.total(),  r.dram_bytes,
                          s.mode_histogram[0], s.mode_histogram[1],
                          s.mode_histogram[2], s.mode_histogram[3],
                          mode_entropy(s.mode_histogram), s.fallbacks};
    if (fixed.fixed_mode) {
      const ModelSchedule f = schedule_model(cfg, g, sys, fixed);
      row.push_back(f.totals.total_cycles);
      row.push_back(static_cast<double>(f.totals.total_cycles) / static_cast<double>(r.total_cycles));
    }
    for (const auto& other : comparators) {
      const ModelSchedule o = schedule_model(cfg, g, other);
      row.push_back(o.totals.seconds);
      row.push_back(o.totals.seconds / r.seconds);
      row.push_back(o.totals.energy.total() / r.energy.total());
    }
    t.add_row(std::move(row));
  }
  emit(rc, run_config_json(rc, sys, "schedule"), t);
  return 0;
}

int cmd_sweep(const std::string& what, RunConfig& rc, std::vector<count_t> cols) {
  check_batches(rc.batches);
  const System sys = build_system(rc.system, rc.ov, true);
  const ModelConfig cfg = load_model(rc.model);
  const json config = run_config_json(rc, sys, "sweep " + what);

  if (what == "shapes") {
    Table t({"model", "batch", "shape", "instances", "share"});
    for (count_t b : rc.batches) {
      const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
      const auto demand = shape_demand(schedule_model(cfg, g, sys));
      count_t total = 0;
      for (const auto& [shape, n] : demand) total += n;
      for (const auto& [shape, n] : demand)
        t.add_row({cfg.name, b, shape, n, static_cast<double>(n) / static_cast<double>(total)});
    }
    emit(rc, config, t);
    return 0;
  }

  if (what == "buffers") {
    const AreaModel area;
    const auto cands = area_matched_candidates(cols, area, reference_area(sys, area));
    Table t({"model", "batch", "shape", "weight_buf_bytes", "act_buf_bytes", "array_cycles", "stall_cycles",
             "energy_j"});
    for (count_t b : rc.batches) {
      const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
      const auto work = layer_zero(single_core_workload(g, sys));
      for (const auto& r : buffer_compute_sweep(cands, work, sys))
        t.add_row({cfg.name, b, "8x" + std::to_string(r.cand.cols), r.cand.weight_buf_bytes, r.cand.act_buf_bytes,
                   r.array_cycles, r.stall_cycles, r.energy_j});
    }
    emit(rc, config, t);
    return 0;
  }

  // min-buffers: the largest per-operator requirement over the layer.
  Table t({"model", "batch", "shape", "dataflow", "weight_buf_bytes", "act_buf_bytes"});
  for (count_t b : rc.batches) {
    const OperatorGraph g = decode_operators(cfg, b, rc.seq_len);
    const auto work = layer_zero(single_core_workload(g, sys));
    for (const auto& shape : logical_shapes(sys.array)) {
      for (Dataflow df : {Dataflow::IS, Dataflow::OS}) {
        BufferNeed worst;
        for (const auto& op : work) {
          const BufferNeed need = min_buffers(shape, df, tile_gemm(op, shape, df, sys.array.phys_rows));
          worst.weight_buf_bytes = std::max(worst.weight_buf_bytes, need.weight_buf_bytes);
          worst.act_buf_bytes = std::max(worst.act_buf_bytes, need.act_buf_bytes);
        }
        t.add_row({cfg.name, b, shape.str(), to_string(df), worst.weight_buf_bytes, worst.act_buf_bytes});
      }
    }
  }
  emit(rc, config, t);
  return 0;
}

int cmd_emulate_check(const CheckGrid& grid) {
  for (count_t p : grid.phys_sizes)
    if (p < 1 || p % grid.granularity != 0)
      throw ConfigError("physical size " + std::to_string(p) + " is not a multiple of the granularity");
  if (grid.trials < 1) throw ConfigError("--trials must be >= 1");
  const CheckSummary s = run_emulation_grid(grid);
  std::cout << "cases " << s.cases << " output_failures " << s.output_failures << " cycle_failures "
            << s.cycle_failures << '\n';
  if (s.all_passed()) {
    std::cout << "all passed\n";
    return 0;
  }
  const CheckCase& c = s.failures.front();
  std::cout << "first counterexample: phys " << c.phys << "x" << c.phys << " shape " << c.shape.str() << " "
            << to_string(c.dataflow) << " gemm m=" << c.m << " n=" << c.n << " k=" << c.k
            << " output_ok=" << c.output_ok << " cycles emulated=" << c.emulated_cycles
            << " analytic=" << c.analytic_cycles << '\n';
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-memory reconfigurable systolic array decode model"};
  app.require_subcommand(1);

  RunConfig rc;
  auto* analyze = app.add_subcommand("analyze", "roofline and per-operator intensity");
  add_common(analyze, rc, true);

  auto* schedule = app.add_subcommand("schedule", "partition and schedule a decode step");
  add_common(schedule, rc, true);
  schedule->add_option("--compare", rc.compare, "comparators: mac-tree, fixed-48x48, fixed-8x288")->delimiter(',');
  schedule->add_option("--fixed-mode", rc.fixed_mode, "force one partition mode (is-s, os-s, is-st, os-st)");
  schedule->add_flag("--per-op", rc.per_op, "one row per layer-0 operator instead of totals");

  auto* sweep = app.add_subcommand("sweep", "buffer/compute and array-shape trade-offs");
  sweep->require_subcommand(1);
  std::vector<count_t> sweep_cols{128, 256, 384, 512, 640, 768};
  std::string sweep_kind;
  for (const char* kind : {"buffers", "shapes", "min-buffers"}) {
    auto* sub = sweep->add_subcommand(kind);
    add_common(sub, rc, true);
    if (std::string(kind) == "buffers")
      sub->add_option("--cols", sweep_cols, "candidate column counts of 8-row arrays")->delimiter(',');
    sub->callback([&sweep_kind, kind] { sweep_kind = kind; });
  }

  CheckGrid grid;
  auto* check = app.add_subcommand("emulate-check", "cycle-level emulator vs analytic model and matmul oracle");
  check->add_option("--sizes", grid.phys_sizes, "physical array sizes")->delimiter(',');
  check->add_option("--trials", grid.trials, "random GEMMs per configuration");
  check->add_option("--seed", grid.seed, "RNG seed");
  check->add_option("--granularity", grid.granularity, "reconfiguration granularity");
  check->add_flag("--inject-fault", grid.inject_fault, "corrupt one output element (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) return cmd_analyze(rc);
    if (*schedule) return cmd_schedule(rc);
    if (*sweep) return cmd_sweep(sweep_kind, rc, sweep_cols);
    if (*check) return cmd_emulate_check(grid);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
