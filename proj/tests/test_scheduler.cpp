#include <doctest.h>

#include "nmpsa/scheduler.hpp"

using namespace nmpsa;

namespace {
const GemmOp ffn_gate{8, 28672, 8192, "ffn_gate", 0, Nonlinear::Activation};

const PartitionPlan& plan_for(const std::vector<PartitionPlan>& plans, PartitionMode m) {
  for (const auto& p : plans)
    if (p.mode == m) return p;
  FAIL("mode missing");
  return plans.front();
}
}  // namespace

TEST_CASE("partition modes of the FFN gate") {
  const auto plans = partition_modes(ffn_gate, 16);
  REQUIRE(plans.size() == 4);
  const PartitionPlan& is_s = plan_for(plans, PartitionMode::IS_S);
  CHECK(is_s.per_pu_op.m == 8);
  CHECK(is_s.per_pu_op.n == 28672);
  CHECK(is_s.per_pu_op.k == 512);
  CHECK(is_s.collective == Collective::AllReduce);
  CHECK(is_s.topology == Topology::Chain1x16);
  CHECK(is_s.payload_bytes == 8 * 28672 * 2);

  const PartitionPlan& os_st = plan_for(plans, PartitionMode::OS_ST);
  CHECK(os_st.per_pu_op.n == 7168);
  CHECK(os_st.per_pu_op.k == 8192);
  CHECK(os_st.temporal_split == 4);
  CHECK(os_st.executed_op().k == 2048);
  CHECK(os_st.collective == Collective::AllGather);
  CHECK(os_st.topology == Topology::Mesh4x4);
}

TEST_CASE("tiny ops make spatial splits infeasible") {
  const auto plans = partition_modes({8, 8, 8}, 16);
  CHECK_FALSE(plan_for(plans, PartitionMode::OS_S).feasible);
  CHECK_FALSE(plan_for(plans, PartitionMode::IS_S).feasible);
  CHECK(plan_for(plans, PartitionMode::OS_ST).feasible);
}

TEST_CASE("ring collective cost") {
  PartitionPlan p = partition_modes(ffn_gate, 16).front();
  MemorySystem mem;
  CHECK(collective_cycles(p, mem, 0.8e9) == 10752);
  PartitionPlan g = p;
  g.collective = Collective::AllGather;
  CHECK(2 * collective_cycles(g, mem, 0.8e9) == collective_cycles(p, mem, 0.8e9));
  p.payload_bytes = 0;
  CHECK(collective_cycles(p, mem, 0.8e9) == 0);
}

TEST_CASE("mode names round-trip") {
  for (PartitionMode m : kAllModes) CHECK(parse_mode(to_string(m)) == m);
  CHECK(parse_mode("os_st") == PartitionMode::OS_ST);
  CHECK_THROWS_AS(parse_mode("ws-s"), ConfigError);
}

TEST_CASE("overlap credit") {
  const count_t nl = nonlinear_cycles(8 * 28672, 64.0 * 4);
  CHECK(nl == 896);
  CHECK(overlap_credit(ffn_gate, Dataflow::OS, 56, nl, 1000000) == 880);
  CHECK(overlap_credit(ffn_gate, Dataflow::IS, 56, nl, 1000000) == 0);
  GemmOp plain = ffn_gate;
  plain.nonlinear_follow = Nonlinear::None;
  CHECK(overlap_credit(plain, Dataflow::OS, 56, 0, 1000000) == 0);
  // The credit never exceeds the linear stage it hides behind.
  CHECK(overlap_credit(ffn_gate, Dataflow::OS, 56, nl, 100) == 100);
}

TEST_CASE("single-core dataflow choice") {
  const System sys = make_system("default");
  CHECK(select_core_dataflow({8, 512, 8192}, sys.array, sys.mem, 4).dataflow == Dataflow::OS);
  CHECK(select_core_dataflow({8, 4096, 4096}, sys.array, sys.mem, 4).dataflow == Dataflow::OS);
  // N > K after an IS-S split. Both dataflows stream 28672 columns of work
  // through the same 512 columns, so the rule's preference for IS is not
  // reproduced: OS wins by about 1% on stalls. The choice must still be the
  // argmin of the two costs.
  const CoreChoice c = select_core_dataflow({8, 28672, 512}, sys.array, sys.mem, 4);
  const CoreChoice is = core_choice({8, 28672, 512}, Dataflow::IS, sys.array, sys.mem, 4);
  const CoreChoice os = core_choice({8, 28672, 512}, Dataflow::OS, sys.array, sys.mem, 4);
  CHECK(c.dataflow == (is.cost.total_cycles < os.cost.total_cycles ? Dataflow::IS : Dataflow::OS));
  CHECK(c.dataflow == Dataflow::OS);
}

TEST_CASE("flexible choice never loses to a forced mode") {
  const System sys = make_system("default");
  for (const GemmOp& op : {ffn_gate, GemmOp{8, 8192, 8192, "q_proj"}, GemmOp{64, 2048, 8192, "kv_proj"},
                           GemmOp{3, 768, 2048, "expert_up", 0, Nonlinear::None, 64}}) {
    const OpChoice flex = schedule_operator(op, sys);
    for (PartitionMode m : kAllModes) {
      const OpChoice forced = schedule_operator(op, sys, {m});
      CHECK(flex.cost.total_cycles <= forced.cost.total_cycles);
    }
  }
}

TEST_CASE("attention head tasks") {
  const System sys = make_system("default");
  ModelConfig cfg;
  cfg.name = "toy";
  cfg.layers = 1;
  cfg.hidden = 8192;
  cfg.ffn = 8192;
  cfg.q_heads = 64;
  cfg.kv_heads = 8;
  cfg.attn_kind = AttnKind::GQA;
  validate(cfg);
  const AttentionReport r = schedule_attention(cfg, 8, 1024, sys);
  CHECK(r.head_tasks == 512);
  CHECK(r.head_tasks / sys.num_pus() == 32);
  CHECK(r.fused_tasks == 64);

  // KV traffic is paid once per group, so GQA moves far fewer bytes than MHA.
  ModelConfig mha = cfg;
  mha.kv_heads = 64;
  mha.attn_kind = AttnKind::MHA;
  const AttentionReport m = schedule_attention(mha, 8, 1024, sys);
  CHECK(m.cost.dram_bytes > 4 * r.cost.dram_bytes);
}

TEST_CASE("one head task has no interleaving") {
  const System sys = make_system("default");
  ModelConfig cfg;
  cfg.name = "one";
  cfg.layers = 1;
  cfg.hidden = 128;
  cfg.ffn = 128;
  cfg.q_heads = 1;
  cfg.kv_heads = 1;
  validate(cfg);
  const AttentionReport r = schedule_attention(cfg, 1, 64, sys);
  CHECK(r.head_tasks == 1);
  CHECK(r.cost.overlap_cycles == 0);
}

TEST_CASE("empty graph schedules to zero") {
  const System sys = make_system("default");
  ModelConfig cfg;
  OperatorGraph g;
  const ModelSchedule s = schedule_model(cfg, g, sys);
  CHECK(s.totals.total_cycles == 0);
  CHECK(s.ops.empty());
}

TEST_CASE("roofline-only systems cannot be scheduled") {
  CHECK_THROWS_AS(schedule_operator(ffn_gate, make_system("duplex")), ConfigError);
}
