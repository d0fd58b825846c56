#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "nmpsa/scheduler.hpp"

namespace nmpsa {

struct RooflineSpec {
  double peak_flops = 0;
  double bandwidth = 0;
  double ridge = 0;
  std::string label;
};

RooflineSpec ridge_point(const System& sys);

struct OperatorIntensity {
  double intensity = 0;  // FLOP per byte
  bool compute_bound = false;
};

double operator_intensity(const GemmOp& op);
OperatorIntensity classify(const GemmOp& op, const RooflineSpec& roof);

/// Per-core sub-operators of a decode graph when every projection is spread
/// over all cores of the stack. M is kept whole; N and K are cut evenly.
/// Attention GEMMs keep their per-head shape.
std::vector<GemmOp> single_core_workload(const OperatorGraph& graph, const System& sys);

struct DataflowTrendRow {
  GemmOp op;
  bool n_greater_k = false;
  Dataflow chosen = Dataflow::OS;
  count_t os_cycles = 0;
  count_t is_cycles = 0;
  bool follows_rule = false;  // IS when N > K, OS otherwise
};

struct DataflowTrend {
  std::vector<DataflowTrendRow> rows;  // one per tile instance class
  count_t tiles = 0;                   // weighted by instance count
  count_t tiles_following_rule = 0;
  double agreement() const { return tiles ? static_cast<double>(tiles_following_rule) / tiles : 1.0; }
};

DataflowTrend dataflow_trend(const std::vector<GemmOp>& workload, const System& sys);

/// Linear area model in PE-equivalents.
struct AreaModel {
  double pe_area = 1.0;
  double sram_byte_area = 1.0 / 512.0;
  double act_fraction = 0.2;  // share of SRAM given to the activation side
};

struct SweepCandidate {
  count_t rows = 8;
  count_t cols = 512;
  count_t weight_buf_bytes = 0;
  count_t act_buf_bytes = 0;
};

/// Candidates 8 x C sharing the area of the reference design (one 64x64 core
/// with its default buffers).
std::vector<SweepCandidate> area_matched_candidates(const std::vector<count_t>& cols, const AreaModel& area,
                                                    double area_budget);
double reference_area(const System& sys, const AreaModel& area);

struct SweepRow {
  SweepCandidate cand;
  count_t array_cycles = 0;
  count_t stall_cycles = 0;
  double energy_j = 0;
};

std::vector<SweepRow> buffer_compute_sweep(const std::vector<SweepCandidate>& cands,
                                           const std::vector<GemmOp>& workload, const System& sys);
std::vector<SweepRow> buffer_compute_sweep_serial(const std::vector<SweepCandidate>& cands,
                                                  const std::vector<GemmOp>& workload, const System& sys);

/// Shape picked per linear operator instance (attention excluded).
std::map<std::string, count_t> shape_demand(const ModelSchedule& s);

struct ScheduleReport {
  std::array<count_t, 4> histogram{};
  std::array<double, 4> share{};
  double entropy_bits = 0;
  double flexible_cycles = 0;
  std::array<double, 4> fixed_cycles{};
  std::array<double, 4> slowdown{};  // fixed / flexible
  count_t forced_fallbacks = 0;       // ops where a fixed mode was infeasible
};

double mode_entropy(const std::array<count_t, 4>& hist);

/// Flexible schedule plus one run per forced mode.
ScheduleReport report_schedule(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys);
ScheduleReport report_schedule(const ModelSchedule& flexible, const std::array<ModelSchedule, 4>& fixed);

}  // namespace nmpsa
