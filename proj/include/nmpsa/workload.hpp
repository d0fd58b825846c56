#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nmpsa {

using count_t = std::int64_t;

/// Raised for malformed or inconsistent model / system configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a valid configuration admits no executable schedule, e.g. a
/// single tile refill that cannot fit the buffers.
class InfeasibleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class AttnKind { MHA, GQA, MLA };

struct MoeParams {
  count_t experts = 1;
  count_t top_k = 1;
};

/// Architectural parameters of one decoder-only LLM.
struct ModelConfig {
  std::string name;
  count_t layers = 0;
  count_t hidden = 0;
  count_t ffn = 0;
  count_t q_heads = 0;
  count_t kv_heads = 0;
  AttnKind attn_kind = AttnKind::MHA;
  std::optional<MoeParams> moe;
  count_t head_dim = 0;    // 0 until validated; defaults to hidden / q_heads
  count_t elem_bytes = 2;  // FP16
  bool ffn_gated = true;   // SwiGLU-style gate + up; false for a single up projection
  // Optional MLA override: when set, the KV projection emits the compressed
  // latent width instead of 2 * head_dim * kv_heads.
  std::optional<count_t> kv_lora_rank;

  bool is_moe() const { return moe.has_value(); }
};

enum class Nonlinear { None, Softmax, Activation, Norm };

/// A decode linear operator as an M x K by K x N GEMM.
struct GemmOp {
  count_t m = 1;
  count_t n = 1;
  count_t k = 1;
  std::string tag;
  count_t layer = 0;
  Nonlinear nonlinear_follow = Nonlinear::None;
  count_t count = 1;
  count_t elem_bytes = 2;

  bool is_attention() const { return tag == "attn_qk" || tag == "attn_av"; }
  bool is_expert() const { return tag.rfind("expert_", 0) == 0; }
  count_t macs() const { return m * n * k; }
  count_t total_macs() const { return macs() * count; }

  bool operator==(const GemmOp&) const = default;
};

struct OperatorGraph {
  std::vector<GemmOp> ops;
  count_t batch = 1;
  count_t seq_len = 1;
  std::vector<std::string> warnings;

  count_t total_flops() const;
};

ModelConfig parse_model_config(const nlohmann::json& j);
ModelConfig load_model_config(const std::filesystem::path& path);
void validate(ModelConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);

/// Resolves a preset name (e.g. "llama3-70b") or a file path to a config file.
std::filesystem::path resolve_model_path(const std::string& name_or_path);
std::vector<std::string> model_preset_names();

/// Expected routing under a uniform distribution: activated experts and the
/// per-expert token count, rounded up to at least one.
struct ExpertRouting {
  count_t activated = 0;
  count_t tokens_per_expert = 0;
};
ExpertRouting uniform_routing(const MoeParams& moe, count_t batch);

OperatorGraph decode_operators(const ModelConfig& cfg, count_t batch, count_t seq_len);

std::string to_string(AttnKind kind);
std::string to_string(Nonlinear nl);

}  // namespace nmpsa
