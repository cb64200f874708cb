// Insight agent: prompt rendering, gateways, output parsing and the
// generation / verification loop.
#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "condinsight/evidence.hpp"
#include "condinsight/rules.hpp"

namespace condinsight {

enum class PromptMode { CONSTRAINED, NAIVE };
std::string_view to_string(PromptMode m);
PromptMode parse_prompt_mode(std::string_view s);

struct Prompt {
  std::string system;
  std::string user;
  bool operator==(const Prompt&) const = default;
};

inline constexpr std::string_view kFactsBegin = "<asset_facts>";
inline constexpr std::string_view kFactsEnd = "</asset_facts>";
inline constexpr std::string_view kFeedbackBegin = "<feedback>";
inline constexpr std::string_view kFeedbackEnd = "</feedback>";
/// Section heading present only in CONSTRAINED system prompts.
inline constexpr std::string_view kConditionRulesHeading = "CONDITION SELECTION RULES";

/// Human-facing label used in the output schema ("Needs Attention").
std::string_view condition_label(ConditionCategory c);

Prompt render_prompt(const AssetFacts& facts, PromptMode mode,
                     const std::optional<std::string>& feedback = std::nullopt,
                     const RuleConfig& rules = {});

/// The asset_facts document embedded in a rendered user prompt.
std::optional<std::string> extract_facts_document(std::string_view user_prompt);

struct Confidence {
  double value = 0.0;
  std::string reasoning;
  bool operator==(const Confidence&) const = default;
};

struct ConditionInsightSummary {
  ConditionCategory overall_condition = ConditionCategory::NOT_ENOUGH_DATA;
  std::string overall_condition_explanation;
  std::vector<std::string> key_insights;
  std::vector<std::string> recommendations;
  Confidence overall_confidence;
  bool confidence_clamped = false;

  bool operator==(const ConditionInsightSummary&) const = default;
};

/// Every top-level JSON object embedded in free text, in order of appearance.
/// Text between objects (prose, code fences) is ignored.
std::vector<Json> extract_json_objects(std::string_view raw);

/// Finds the first JSON object carrying the output schema, tolerating prose and
/// code fences around it. Throws SchemaViolation or UnknownCondition.
ConditionInsightSummary parse_insight(std::string_view raw);

/// Renders the summary in the output schema.
Json to_json(const ConditionInsightSummary& s);
ConditionInsightSummary summary_from_json(const Json& j);  // stored form, strict

// ---------------------------------------------------------------------------
// Gateways

class LlmGateway {
 public:
  virtual ~LlmGateway() = default;
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                               double temperature) = 0;
  /// Label used in reports (backbone / judge column).
  virtual std::string name() const = 0;
};

/// Key used by replay fixtures: sha256 of system prompt, U+001F, user prompt.
std::string prompt_hash(const std::string& system_prompt, const std::string& user_prompt);

/// Offline agent. CONSTRAINED prompts are answered with the rule verdict;
/// NAIVE prompts with a simpler heuristic (any emergency order or active
/// warning/critical alert means attention, no orders and no meters means not
/// enough data, otherwise normal) that ignores delays and meter anomalies.
/// Insights are derived from the packet. Pure function of the prompt.
class MockGateway final : public LlmGateway {
 public:
  explicit MockGateway(RuleConfig rules = {}) : rules_(rules) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return "mock"; }

  static ConditionCategory naive_policy(const AssetFacts& facts);

 private:
  RuleConfig rules_;
};

/// Always answers with one well-formed summary carrying `category`.
class FixedConditionGateway final : public LlmGateway {
 public:
  explicit FixedConditionGateway(ConditionCategory category) : category_(category) {}
  std::string complete(const std::string&, const std::string&, double) override;
  std::string name() const override { return "fixed"; }

 private:
  ConditionCategory category_;
};

/// Returns canned responses in order; the last one repeats.
class ScriptedGateway final : public LlmGateway {
 public:
  explicit ScriptedGateway(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return "scripted"; }

  std::vector<Prompt> seen;

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  std::mutex mu_;
};

/// Reads `<prompt_hash>.txt` from a fixture directory.
class ReplayGateway final : public LlmGateway {
 public:
  explicit ReplayGateway(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return "replay"; }

 private:
  std::filesystem::path dir_;
};

/// Wraps another gateway and writes every response as a replay fixture.
class RecordingGateway final : public LlmGateway {
 public:
  RecordingGateway(std::shared_ptr<LlmGateway> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<LlmGateway> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

struct RemoteGatewayConfig {
  std::string endpoint;  // full URL of the chat-completion route
  std::string model;
  std::string token;
  int timeout_seconds = 120;
  int max_in_flight = 4;
  int max_attempts = 3;
  int backoff_ms = 500;  // doubled after every failed attempt
};

/// Chat-completion client: {"model", "messages", "temperature"}. Accepts an
/// OpenAI-style choices[0].message.content, a top-level "content"/"text"
/// field, or a plain-text body.
class RemoteGateway final : public LlmGateway {
 public:
  explicit RemoteGateway(RemoteGatewayConfig cfg);
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return cfg_.model.empty() ? "remote" : cfg_.model; }

 private:
  RemoteGatewayConfig cfg_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// ---------------------------------------------------------------------------
// Generation / verification loop

struct AttemptRecord {
  Prompt prompt;
  std::string response;
  std::optional<std::string> parse_error;
};

struct InsightOutcome {
  ConditionInsightSummary summary;
  VerificationResult verification;
  RuleVerdict verdict;
  std::vector<AttemptRecord> attempts;
};

/// Feedback text sent after a disagreement.
std::string disagreement_feedback(const RuleVerdict& verdict, ConditionCategory proposed);

InsightOutcome generate_insight(const AssetFacts& facts, PromptMode mode, LlmGateway& gateway,
                                const RuleConfig& rules, int max_retries);

}  // namespace condinsight
