#include "nmpsa/workload.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#ifndef NMPSA_MODEL_DIR
#define NMPSA_MODEL_DIR "configs/models"
#endif

namespace nmpsa {

namespace {

count_t require_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string("field '") + key + "' must be an integer");
  return v.get<count_t>();
}

AttnKind parse_attn(const std::string& s) {
  if (s == "MHA") return AttnKind::MHA;
  if (s == "GQA") return AttnKind::GQA;
  if (s == "MLA") return AttnKind::MLA;
  throw ConfigError("attn_kind must be one of MHA, GQA, MLA (got '" + s + "')");
}

}  // namespace

std::string to_string(AttnKind kind) {
  switch (kind) {
    case AttnKind::MHA: return "MHA";
    case AttnKind::GQA: return "GQA";
    case AttnKind::MLA: return "MLA";
  }
  return "?";
}

std::string to_string(Nonlinear nl) {
  switch (nl) {
    case Nonlinear::None: return "none";
    case Nonlinear::Softmax: return "softmax";
    case Nonlinear::Activation: return "activation";
    case Nonlinear::Norm: return "norm";
  }
  return "?";
}

ModelConfig parse_model_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig cfg;
  cfg.name = j.value("name", std::string("unnamed"));
  cfg.layers = require_count(j, "layers");
  cfg.hidden = require_count(j, "hidden");
  cfg.ffn = require_count(j, "ffn");
  cfg.q_heads = require_count(j, "q_heads");
  cfg.kv_heads = require_count(j, "kv_heads");
  cfg.attn_kind = parse_attn(j.value("attn_kind", std::string("MHA")));
  if (j.contains("moe") && !j.at("moe").is_null()) {
    const auto& m = j.at("moe");
    cfg.moe = MoeParams{require_count(m, "experts"), require_count(m, "top_k")};
  }
  if (j.contains("head_dim")) cfg.head_dim = require_count(j, "head_dim");
  if (j.contains("elem_bytes")) cfg.elem_bytes = require_count(j, "elem_bytes");
  if (j.contains("kv_lora_rank")) cfg.kv_lora_rank = require_count(j, "kv_lora_rank");
  cfg.ffn_gated = j.value("ffn_gated", true);
  validate(cfg);
  return cfg;
}

void validate(ModelConfig& cfg) {
  auto positive = [](count_t v, const char* field) {
    if (v < 1) throw ConfigError(std::string(field) + " must be >= 1");
  };
  positive(cfg.layers, "layers");
  positive(cfg.hidden, "hidden");
  positive(cfg.ffn, "ffn");
  positive(cfg.q_heads, "q_heads");
  positive(cfg.kv_heads, "kv_heads");
  positive(cfg.elem_bytes, "elem_bytes");
  if (cfg.kv_heads > cfg.q_heads) throw ConfigError("kv_heads exceeds q_heads");
  if (cfg.q_heads % cfg.kv_heads != 0) throw ConfigError("kv_heads must divide q_heads");
  if (cfg.head_dim == 0) {
    if (cfg.hidden % cfg.q_heads != 0) throw ConfigError("q_heads must divide hidden when head_dim is defaulted");
    cfg.head_dim = cfg.hidden / cfg.q_heads;
  }
  positive(cfg.head_dim, "head_dim");
  if (cfg.moe) {
    positive(cfg.moe->experts, "moe.experts");
    if (cfg.moe->top_k < 1 || cfg.moe->top_k > cfg.moe->experts)
      throw ConfigError("moe.top_k must satisfy 1 <= top_k <= experts");
  }
  if (cfg.kv_lora_rank) positive(*cfg.kv_lora_rank, "kv_lora_rank");
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("failed to parse '" + path.string() + "': " + e.what());
  }
  try {
    return parse_model_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json j{{"name", cfg.name},         {"layers", cfg.layers},   {"hidden", cfg.hidden},
                   {"ffn", cfg.ffn},           {"q_heads", cfg.q_heads}, {"kv_heads", cfg.kv_heads},
                   {"attn_kind", to_string(cfg.attn_kind)},              {"head_dim", cfg.head_dim},
                   {"elem_bytes", cfg.elem_bytes},                       {"ffn_gated", cfg.ffn_gated}};
  if (cfg.moe) j["moe"] = {{"experts", cfg.moe->experts}, {"top_k", cfg.moe->top_k}};
  if (cfg.kv_lora_rank) j["kv_lora_rank"] = *cfg.kv_lora_rank;
  return j;
}

static std::filesystem::path model_dir() {
  if (const char* env = std::getenv("NMPSA_MODEL_DIR")) return env;
  return NMPSA_MODEL_DIR;
}

std::vector<std::string> model_preset_names() {
  return {"opt-66b", "llama3-70b", "mixtral-8x22b", "qwen3-30b", "deepseek-236b"};
}

std::filesystem::path resolve_model_path(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::exists(p)) return p;
  auto preset = model_dir() / (name_or_path + ".json");
  if (std::filesystem::exists(preset)) return preset;
  return p;  // let the loader report the missing path
}

ExpertRouting uniform_routing(const MoeParams& moe, count_t batch) {
  const count_t assignments = batch * moe.top_k;
  ExpertRouting r;
  r.activated = std::min(moe.experts, assignments);
  r.tokens_per_expert = (assignments + r.activated - 1) / r.activated;
  return r;
}

count_t OperatorGraph::total_flops() const {
  count_t flops = 0;
  for (const auto& op : ops) flops += 2 * op.total_macs();
  return flops;
}

OperatorGraph decode_operators(const ModelConfig& cfg, count_t batch, count_t seq_len) {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");

  OperatorGraph g;
  g.batch = batch;
  g.seq_len = seq_len;
  const count_t H = cfg.hidden;
  const count_t hd = cfg.head_dim;
  const count_t q_width = cfg.q_heads * hd;
  count_t kv_width = 2 * hd * cfg.kv_heads;
  if (cfg.attn_kind == AttnKind::MLA) {
    if (cfg.kv_lora_rank) {
      kv_width = *cfg.kv_lora_rank;
    } else {
      g.warnings.push_back("MLA config '" + cfg.name +
                           "' has no kv_lora_rank; using MHA-shaped attention operators");
    }
  }
  const count_t eb = cfg.elem_bytes;

  auto emit = [&](count_t m, count_t k, count_t n, const char* tag, count_t layer, Nonlinear nl, count_t count) {
    g.ops.push_back(GemmOp{m, n, k, tag, layer, nl, count, eb});
  };

  for (count_t l = 0; l < cfg.layers; ++l) {
    emit(batch, H, q_width, "q_proj", l, Nonlinear::None, 1);
    emit(batch, H, kv_width, "kv_proj", l, Nonlinear::None, 1);
    emit(1, hd, seq_len, "attn_qk", l, Nonlinear::Softmax, batch * cfg.q_heads);
    emit(1, seq_len, hd, "attn_av", l, Nonlinear::None, batch * cfg.q_heads);
    emit(batch, q_width, H, "o_proj", l, Nonlinear::Norm, 1);
    if (!cfg.moe) {
      if (cfg.ffn_gated) {
        emit(batch, H, cfg.ffn, "ffn_gate", l, Nonlinear::Activation, 1);
        emit(batch, H, cfg.ffn, "ffn_up", l, Nonlinear::None, 1);
      } else {
        emit(batch, H, cfg.ffn, "ffn_up", l, Nonlinear::Activation, 1);
      }
      emit(batch, cfg.ffn, H, "ffn_down", l, Nonlinear::Norm, 1);
    } else {
      const auto route = uniform_routing(*cfg.moe, batch);
      const count_t me = route.tokens_per_expert;
      if (cfg.ffn_gated) {
        emit(me, H, cfg.ffn, "expert_gate", l, Nonlinear::Activation, route.activated);
        emit(me, H, cfg.ffn, "expert_up", l, Nonlinear::None, route.activated);
      } else {
        emit(me, H, cfg.ffn, "expert_up", l, Nonlinear::Activation, route.activated);
      }
      emit(me, cfg.ffn, H, "expert_down", l, Nonlinear::Norm, route.activated);
    }
  }
  return g;
}

}  // namespace nmpsa
