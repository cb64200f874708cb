// Pipeline configuration: a TOML-style key/value file plus environment secrets.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "condinsight/agent.hpp"
#include "condinsight/alignment.hpp"
#include "condinsight/meter.hpp"
#include "condinsight/rules.hpp"

namespace condinsight {

/// WO_ONLY: work orders plus the asset profile; meter and FMEA blocks are emptied.
enum class EvidenceScope { WO_ONLY, ALL };
std::string_view to_string(EvidenceScope s);
EvidenceScope parse_evidence_scope(std::string_view s);  // "wo", "wo_only", "all"
std::string_view scope_label(EvidenceScope s);           // "WO" / "All"

enum class GatewayKind { MOCK, REMOTE, REPLAY };
std::string_view to_string(GatewayKind k);
GatewayKind parse_gateway_kind(std::string_view s);

struct GatewayConfig {
  GatewayKind kind = GatewayKind::MOCK;
  std::string endpoint;
  std::string model;
  std::string token;  // from the environment only, never from the file
  std::string replay_dir;
  std::string record_dir;  // when set, responses are also written as replay fixtures
  int timeout_seconds = 120;
  int max_in_flight = 4;
  int max_attempts = 3;
};

enum class EmbeddingKind { HASHED, REMOTE };

struct EmbeddingConfig {
  EmbeddingKind kind = EmbeddingKind::HASHED;
  std::string endpoint;
  int dimension = 64;
};

struct PipelineConfig {
  AbstractionConfig abstraction;
  UotConfig uot;
  RuleConfig rules;
  PromptMode prompt_mode = PromptMode::CONSTRAINED;
  EvidenceScope evidence_scope = EvidenceScope::ALL;
  GatewayConfig gateway;
  GatewayConfig judge_gateway;
  EmbeddingConfig embedding;
  int window_days = 365;
  int top_k_fmea = 5;
  int max_retries = 1;
  int min_support = 2;
  std::optional<double> recency_tau_days;
  /// Evaluation instant; defaults to the latest evidence timestamp in the store.
  std::optional<Timestamp> as_of;
  std::filesystem::path store_dir = "store";
  int workers = 4;

  void validate() const;  // throws ConfigError
};

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Values are quoted strings, numbers or true/false. Unknown keys are errors.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Reads GATEWAY_TOKEN and JUDGE_GATEWAY_TOKEN.
void apply_environment(PipelineConfig& cfg);

/// Everything that can change a run's output; secrets and paths excluded.
Json to_json(const PipelineConfig& cfg);
std::string config_digest(const PipelineConfig& cfg);

std::shared_ptr<LlmGateway> make_gateway(const GatewayConfig& cfg, const RuleConfig& rules,
                                         bool judge);
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg);

}  // namespace condinsight
