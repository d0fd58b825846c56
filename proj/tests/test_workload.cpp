#include <doctest.h>

#include "nmpsa/workload.hpp"

using namespace nmpsa;

namespace {
ModelConfig preset(const char* name) { return load_model_config(resolve_model_path(name)); }

const GemmOp& find(const OperatorGraph& g, const std::string& tag) {
  for (const auto& op : g.ops)
    if (op.tag == tag) return op;
  FAIL("missing op " << tag);
  return g.ops.front();
}
}  // namespace

TEST_CASE("presets load with their published dimensions") {
  const ModelConfig llama = preset("llama3-70b");
  CHECK(llama.layers == 80);
  CHECK(llama.hidden == 8192);
  CHECK(llama.ffn == 28672);
  CHECK(llama.q_heads == 64);
  CHECK(llama.kv_heads == 8);
  CHECK(llama.attn_kind == AttnKind::GQA);
  CHECK(llama.head_dim == 128);

  const ModelConfig qwen = preset("qwen3-30b");
  CHECK(qwen.layers == 48);
  CHECK(qwen.hidden == 2048);
  CHECK(qwen.ffn == 768);
  CHECK(qwen.q_heads == 32);
  CHECK(qwen.kv_heads == 4);
  REQUIRE(qwen.moe);
  CHECK(qwen.moe->experts == 128);
  CHECK(qwen.moe->top_k == 8);

  CHECK(model_preset_names().size() == 5);
}

TEST_CASE("config validation rejects inconsistent heads") {
  nlohmann::json j = {{"name", "bad"}, {"layers", 2},  {"hidden", 512},       {"ffn", 1024},
                      {"q_heads", 4},  {"kv_heads", 8}, {"attn_kind", "GQA"}};
  CHECK_THROWS_WITH_AS(parse_model_config(j), doctest::Contains("kv_heads exceeds q_heads"), ConfigError);
  j["kv_heads"] = 3;
  CHECK_THROWS_AS(parse_model_config(j), ConfigError);
  j["kv_heads"] = 2;
  j.erase("hidden");
  CHECK_THROWS_AS(parse_model_config(j), ConfigError);
}

TEST_CASE("missing config file names the path") {
  CHECK_THROWS_WITH_AS(load_model_config("/definitely/not/here.json"), doctest::Contains("/definitely/not/here.json"),
                       ConfigError);
}

TEST_CASE("decode projections of LLaMA3 70B at batch 8") {
  const OperatorGraph g = decode_operators(preset("llama3-70b"), 8, 8192);
  const GemmOp& q = find(g, "q_proj");
  CHECK(q.m == 8);
  CHECK(q.k == 8192);
  CHECK(q.n == 8192);
  const GemmOp& kv = find(g, "kv_proj");
  CHECK(kv.k == 8192);
  CHECK(kv.n == 2048);
  const GemmOp& gate = find(g, "ffn_gate");
  CHECK(gate.n == 28672);
  CHECK(gate.k == 8192);
}

TEST_CASE("single-token decode makes attention degenerate GEMVs") {
  for (const auto& name : model_preset_names()) {
    const OperatorGraph g = decode_operators(preset(name.c_str()), 1, 1);
    for (const auto& op : g.ops)
      if (op.is_attention()) CHECK((op.n == 1 || op.k == 1));
  }
}

TEST_CASE("uniform routing of Mixtral top-2 of 8 at batch 8") {
  const ModelConfig mix = preset("mixtral-8x22b");
  REQUIRE(mix.moe);
  const ExpertRouting r = uniform_routing(*mix.moe, 8);
  CHECK(r.tokens_per_expert == 2);
  CHECK(r.activated == 8);
}

TEST_CASE("batch and sequence must be positive") {
  CHECK_THROWS_AS(decode_operators(preset("opt-66b"), 0, 1), ConfigError);
  CHECK_THROWS_AS(decode_operators(preset("opt-66b"), 1, 0), ConfigError);
}
