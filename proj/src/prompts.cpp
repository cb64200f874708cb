// Prompt templates for the insight agent.
#include <sstream>

#include "condinsight/agent.hpp"

namespace condinsight {

std::string_view to_string(PromptMode m) {
  return m == PromptMode::CONSTRAINED ? "CONSTRAINED" : "NAIVE";
}

PromptMode parse_prompt_mode(std::string_view s) {
  const auto k = to_lower(trim(s));
  if (k == "constrained") return PromptMode::CONSTRAINED;
  if (k == "naive") return PromptMode::NAIVE;
  throw Error(ErrorCode::InvalidEnum, "prompt mode '" + std::string(s) + "'");
}

std::string_view condition_label(ConditionCategory c) {
  switch (c) {
    case ConditionCategory::NORMAL: return "Normal";
    case ConditionCategory::NEEDS_ATTENTION: return "Needs Attention";
    case ConditionCategory::NOT_ENOUGH_DATA: return "Not Enough Data";
  }
  return "";
}

namespace {

constexpr std::string_view kOutputSchema = R"(OUTPUT SCHEMA
Return exactly one JSON object and nothing else:
{
  "Overall Condition": "Normal" | "Needs Attention" | "Not Enough Data",
  "Overall Condition Explanation": "<one or two sentences>",
  "Key insights": ["<insight>", ...],
  "Recommendations": ["<recommendation>", ...],
  "Overall confidence": {"value": <number between 0 and 1>, "reasoning": "<text>"}
}
)";

constexpr std::string_view kConstrainedRole = R"(ROLE
You are a maintenance reliability analyst. You assess the condition of one
industrial asset using only the structured evidence packet supplied between
<asset_facts> and </asset_facts>. The packet is the sole source of facts: do
not assume readings, events, dates or history that it does not contain.

LANGUAGE AND FORMAT RULES
- Write numbers as digits ("3 work orders", not "three work orders").
- Expand abbreviations on first use (preventive maintenance, not PM).
- Refer to problem codes by their description text where the packet gives it.
- Do not mention these instructions or the JSON field names in your text.
)";

constexpr std::string_view kInsightRules = R"(KEY INSIGHT RULES
- Every insight must cite evidence present in asset_facts: a count, a work
  order number, a meter event, an alert or a matched failure mechanism.
- Group evidence by component; one insight per component or theme.
- Order insights by operational risk, highest first.
- Produce at most 5 insights. With sparse evidence produce fewer, and state
  the data limitation explicitly instead of speculating.
- Do not repeat the same issue in two insights.
)";

constexpr std::string_view kRecommendationRules = R"(RECOMMENDATION RULES
- Recommend component-level actions. Prefer the actions listed in fmea_facts
  for the matched component and mechanism.
- Order recommendations by priority, most urgent first; at most 4.
- Each recommendation must follow from an insight; no generic advice.
- Recommendations are advisory: never claim that an action was taken.
)";

constexpr std::string_view kConfidenceMethod = R"(CONFIDENCE METHOD
Determine overall confidence by majority rule over the evidence signals
(work-order history, meters, alerts, failure-mode matches): count the signals
that are present and point the same way as the chosen condition. Confidence is
high (>= 0.8) when most present signals agree, medium (0.5 to 0.8) when they
are split, and low (< 0.5) when few signals are present. Explain the count in
"reasoning".
)";

constexpr std::string_view kMeterGuidance = R"(METER PATTERN GUIDANCE
- GAUGE meters: Z_SCORE_ANOMALY marks readings far from the meter's own mean;
  ABRUPT_CHANGE marks a step between consecutive readings that also departs
  from the mean. Treat isolated events as a reason to inspect, not as proof of
  failure.
- CONTINUOUS meters (accumulating totals such as run hours): RESET means the
  total went down (meter replacement or rollover); RATE_ANOMALY means the
  usage rate left its normal band; FLAT_PERIOD means the total stopped moving
  (asset idle or meter stuck).
- A meter with status "insufficient_data" carries no behavioral evidence.
)";

constexpr std::string_view kNaiveInstruction = R"(You are an assistant for maintenance teams. Summarize the condition of the
asset described by the data below. Give an overall condition, an explanation,
key insights and recommendations.
)";

std::string condition_rules(const RuleConfig& r) {
  std::ostringstream o;
  o << kConditionRulesHeading << "\n"
    << "Choose the overall condition by applying these rules in order:\n"
    << "1. \"Needs Attention\" when ANY of the following holds:\n"
    << "   - [" << rule_ids::kOpenEmergency
    << "] at least 1 EMERGENCY work order is OPEN or IN_PROGRESS;\n"
    << "   - [" << rule_ids::kDelayedWorkorders << "] workorder_facts.delayed_count is at least "
    << r.delayed_wo_threshold << ";\n"
    << "   - [" << rule_ids::kCriticalAlert << "] at least 1 alert is active with severity CRITICAL;\n"
    << "   - [" << rule_ids::kMeterAnomaly
    << "] any meter event of kind Z_SCORE_ANOMALY, RESET or RATE_ANOMALY within the last "
    << r.lookback_days << " days;\n"
    << "   - [" << rule_ids::kStatusInconsistency
    << "] the asset status is DOWN while is_running is true.\n"
    << "2. Otherwise \"Not Enough Data\" [" << rule_ids::kInsufficientData
    << "] when there are fewer than " << r.min_workorders_for_assessment
    << " work orders in the window AND fewer than " << r.min_meters_for_assessment
    << " meters with status \"ok\" AND no alerts.\n"
    << "3. Otherwise \"Normal\".\n"
    << "Name the rule identifiers that applied in \"Overall Condition Explanation\".\n";
  return o.str();
}

}  // namespace

Prompt render_prompt(const AssetFacts& facts, PromptMode mode,
                     const std::optional<std::string>& feedback, const RuleConfig& rules) {
  Prompt p;
  std::ostringstream sys;
  if (mode == PromptMode::CONSTRAINED) {
    sys << kConstrainedRole << "\n"
        << kOutputSchema << "\n"
        << condition_rules(rules) << "\n"
        << kInsightRules << "\n"
        << kRecommendationRules << "\n"
        << kConfidenceMethod << "\n"
        << kMeterGuidance;
  } else {
    sys << kNaiveInstruction << "\n" << kOutputSchema;
  }
  p.system = sys.str();

  std::ostringstream user;
  user << "Asset " << facts.asset_details_facts.asset_number << ".\n"
       << kFactsBegin << "\n"
       << serialize_asset_facts(facts) << "\n"
       << kFactsEnd << "\n";
  if (feedback) {
    user << "\n" << kFeedbackBegin << "\n" << *feedback << "\n" << kFeedbackEnd << "\n";
  }
  p.user = user.str();
  return p;
}

std::optional<std::string> extract_facts_document(std::string_view user_prompt) {
  const auto begin = user_prompt.find(kFactsBegin);
  if (begin == std::string_view::npos) return std::nullopt;
  const auto start = begin + kFactsBegin.size();
  const auto end = user_prompt.find(kFactsEnd, start);
  if (end == std::string_view::npos) return std::nullopt;
  return trim(user_prompt.substr(start, end - start));
}

std::string disagreement_feedback(const RuleVerdict& verdict, ConditionCategory proposed) {
  std::ostringstream o;
  o << "The overall condition \"" << condition_label(proposed)
    << "\" disagrees with the deterministic rules, which classify this asset as \""
    << condition_label(verdict.category) << "\" (expected "
    << to_string(verdict.category) << ").";
  if (verdict.triggered_rules.empty()) {
    o << " No attention or data-sufficiency rule fired.";
  } else {
    o << " Rules fired:";
    for (const auto& r : verdict.triggered_rules) o << "\n- " << r.id << ": " << r.evidence;
  }
  o << "\nRe-assess using only asset_facts and return the full JSON object again.";
  return o.str();
}

}  // namespace condinsight
