#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nmpsa/perf_model.hpp"
#include "nmpsa/system.hpp"
#include "nmpsa/workload.hpp"

namespace nmpsa {

// Enumeration order is the deterministic tie-break order.
enum class PartitionMode { IS_S, OS_S, IS_ST, OS_ST };
inline constexpr std::array<PartitionMode, 4> kAllModes{PartitionMode::IS_S, PartitionMode::OS_S,
                                                        PartitionMode::IS_ST, PartitionMode::OS_ST};

enum class Topology { Chain1x16, Mesh4x4 };
enum class Collective { AllReduce, AllGather };
enum class SplitDim { N, K };

std::string to_string(PartitionMode m);
std::string to_string(Topology t);
std::string to_string(Collective c);
PartitionMode parse_mode(const std::string& s);  // "is-s", "OS_ST", ...

Dataflow mode_dataflow(PartitionMode m);
bool is_spatio_temporal(PartitionMode m);

struct PartitionPlan {
  PartitionMode mode = PartitionMode::IS_S;
  Topology topology = Topology::Chain1x16;
  SplitDim spatial_dim = SplitDim::K;
  count_t spatial_factor = 16;
  count_t temporal_split = 1;
  Collective collective = Collective::AllReduce;
  count_t payload_bytes = 0;
  // Sub-operator as seen by one PU; under -ST modes its temporal dimension
  // is further cut into temporal_split blocks spread over the mesh.
  GemmOp per_pu_op;
  bool feasible = true;

  /// Work one PU actually executes (the largest slice).
  GemmOp executed_op() const;
  Dataflow dataflow() const { return mode_dataflow(mode); }
};

std::vector<PartitionPlan> partition_modes(const GemmOp& op, count_t num_pus);

/// Ring collective cost; mesh plans run a row ring then a column ring.
count_t collective_cycles(const PartitionPlan& plan, const MemorySystem& mem, double freq_hz,
                          count_t num_pus = 16);
/// Bytes put on NoC links by the same collective, summed over PUs.
count_t collective_noc_bytes(const PartitionPlan& plan, count_t num_pus = 16);

struct CoreChoice {
  Dataflow dataflow = Dataflow::OS;
  LogicalShape shape;
  CostReport cost;
  TilePlan plan;
};

/// Best dataflow for a single-core op; ties go to OS.
CoreChoice select_core_dataflow(const GemmOp& op, const ArrayConfig& cfg, const MemorySystem& mem,
                                count_t active_cores = 1, count_t instances = 1);
CoreChoice core_choice(const GemmOp& op, Dataflow df, const ArrayConfig& cfg, const MemorySystem& mem,
                       count_t active_cores, count_t instances = 1);

/// Nonlinear cycles hidden behind the linear stage of the same operator.
count_t overlap_credit(const GemmOp& op, Dataflow df, count_t tiles_total, count_t nonlinear_cycles,
                       count_t linear_cycles);
count_t nonlinear_cycles(count_t elements, double vector_throughput);

struct OpChoice {
  GemmOp op;
  bool attention = false;
  bool single_pu_fallback = false;
  bool forced_mode_infeasible = false;  // fixed-mode request fell back to the flexible plan
  PartitionPlan plan;
  Dataflow dataflow = Dataflow::OS;
  LogicalShape shape;
  CostReport cost;  // all `count` instances
};

struct ScheduleOptions {
  std::optional<PartitionMode> fixed_mode;
};

/// Evaluate all four modes of one multi-PU operator and keep the cheapest.
OpChoice schedule_operator(const GemmOp& op, const System& sys, const ScheduleOptions& opts = {});

struct AttentionReport {
  count_t head_tasks = 0;
  count_t fused_tasks = 0;  // one per (sequence, KV group)
  count_t tasks_per_pu_max = 0;
  CostReport cost;
};

AttentionReport schedule_attention(const ModelConfig& cfg, count_t batch, count_t seq_len, const System& sys);

struct ModelSchedule {
  std::string model;
  count_t batch = 0;
  count_t seq_len = 0;
  std::vector<OpChoice> ops;
  CostReport totals;
  std::array<count_t, 4> mode_histogram{};
  count_t head_tasks = 0;
  count_t fallbacks = 0;
};

/// Per-operator evaluation runs in parallel; assembly is a sequential fold.
ModelSchedule schedule_model(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys,
                             const ScheduleOptions& opts = {});
ModelSchedule schedule_model_serial(const ModelConfig& cfg, const OperatorGraph& graph, const System& sys,
                                    const ScheduleOptions& opts = {});

/// Fill in the energy breakdown of a report from its activity counts.
void attach_energy(CostReport& r, const System& sys);

}  // namespace nmpsa
