// Deterministic condition classification and LLM/rule comparison.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condinsight/evidence.hpp"

namespace condinsight {

namespace rule_ids {
inline constexpr std::string_view kInsufficientData = "insufficient_evidence";
inline constexpr std::string_view kOpenEmergency = "open_emergency_wo";
inline constexpr std::string_view kDelayedWorkorders = "delayed_workorders";
inline constexpr std::string_view kCriticalAlert = "active_critical_alert";
inline constexpr std::string_view kMeterAnomaly = "meter_anomaly";
inline constexpr std::string_view kStatusInconsistency = "status_running_inconsistency";
}  // namespace rule_ids

/// Every identifier classify_condition can emit, in evaluation order.
inline constexpr std::string_view kAllRuleIds[] = {
    rule_ids::kInsufficientData, rule_ids::kOpenEmergency, rule_ids::kDelayedWorkorders,
    rule_ids::kCriticalAlert,    rule_ids::kMeterAnomaly,  rule_ids::kStatusInconsistency};

struct RuleConfig {
  int min_workorders_for_assessment = 3;
  int min_meters_for_assessment = 1;
  int delayed_wo_threshold = 2;
  int lookback_days = 200;

  void validate() const;
};

struct TriggeredRule {
  std::string id;
  std::string evidence;  // the values that fired it, human readable

  bool operator==(const TriggeredRule&) const = default;
};

struct RuleVerdict {
  ConditionCategory category = ConditionCategory::NORMAL;
  std::vector<TriggeredRule> triggered_rules;

  bool fired(std::string_view id) const;
  bool operator==(const RuleVerdict&) const = default;
};

enum class Resolution { ACCEPTED, RETRIED, OVERRIDDEN };
std::string_view to_string(Resolution r);
Resolution parse_resolution(std::string_view s);

struct VerificationResult {
  ConditionCategory rule_category = ConditionCategory::NORMAL;
  ConditionCategory llm_category = ConditionCategory::NORMAL;
  bool agree = false;
  Resolution resolution = Resolution::ACCEPTED;
  int attempt = 1;
  /// Agreement of the first attempt; CAR counts this, not the final outcome.
  bool first_attempt_agree = false;

  bool operator==(const VerificationResult&) const = default;
};

/// Attention rules win over data sufficiency: the packet is NEEDS_ATTENTION as
/// soon as any attention rule fires, NOT_ENOUGH_DATA when only the sufficiency
/// rule fires, NORMAL otherwise. triggered_rules lists every rule that fired
/// for the returned category.
RuleVerdict classify_condition(const AssetFacts& facts, const RuleConfig& rules);

/// `first_attempt_agree` is taken from this comparison when attempt == 1 and
/// from `first_attempt_agree` otherwise.
VerificationResult compare_conditions(const RuleVerdict& rule, ConditionCategory llm, int attempt,
                                      int max_retries,
                                      std::optional<bool> first_attempt_agree = std::nullopt);

/// First-attempt agreement rate. Throws EmptyInput.
double compute_car(const std::vector<VerificationResult>& results);

/// Agreement after retries (final llm_category vs rule category).
double compute_post_retry_agreement(const std::vector<VerificationResult>& results);

Json to_json(const RuleVerdict& v);
RuleVerdict rule_verdict_from_json(const Json& j);
Json to_json(const VerificationResult& v);
VerificationResult verification_from_json(const Json& j);

}  // namespace condinsight
