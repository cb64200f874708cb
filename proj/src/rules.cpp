#include "condinsight/rules.hpp"

#include <algorithm>

namespace condinsight {

void RuleConfig::validate() const {
  if (min_workorders_for_assessment < 0 || min_meters_for_assessment < 0 ||
      delayed_wo_threshold < 0 || lookback_days < 0)
    throw Error(ErrorCode::ConfigError, "rule thresholds must be >= 0");
}

bool RuleVerdict::fired(std::string_view id) const {
  return std::any_of(triggered_rules.begin(), triggered_rules.end(),
                     [&](const TriggeredRule& r) { return r.id == id; });
}

std::string_view to_string(Resolution r) {
  switch (r) {
    case Resolution::ACCEPTED: return "ACCEPTED";
    case Resolution::RETRIED: return "RETRIED";
    case Resolution::OVERRIDDEN: return "OVERRIDDEN";
  }
  return "";
}

Resolution parse_resolution(std::string_view s) {
  for (auto r : {Resolution::ACCEPTED, Resolution::RETRIED, Resolution::OVERRIDDEN})
    if (to_string(r) == s) return r;
  throw Error(ErrorCode::InvalidEnum, "resolution '" + std::string(s) + "'");
}

namespace {

bool is_open(WorkOrderStatus s) {
  return s == WorkOrderStatus::OPEN || s == WorkOrderStatus::IN_PROGRESS;
}

bool is_attention_event(MeterEventKind k) {
  return k == MeterEventKind::Z_SCORE_ANOMALY || k == MeterEventKind::RESET ||
         k == MeterEventKind::RATE_ANOMALY;
}

}  // namespace

RuleVerdict classify_condition(const AssetFacts& facts, const RuleConfig& rules) {
  const auto& wo = facts.workorder_facts;
  std::vector<TriggeredRule> attention;

  int open_emergency = 0;
  std::string emergency_ids;
  for (const auto& d : wo.corrective_and_other_workorders) {
    if (d.wo_type == WorkOrderType::EMERGENCY && is_open(d.status)) {
      ++open_emergency;
      emergency_ids += (emergency_ids.empty() ? "" : ",") + d.wonum;
    }
  }
  if (open_emergency >= 1)
    attention.push_back({std::string(rule_ids::kOpenEmergency),
                         "open emergency work orders=" + std::to_string(open_emergency) + " [" +
                             emergency_ids + "]"});

  if (wo.delayed_count >= rules.delayed_wo_threshold && wo.delayed_count > 0)
    attention.push_back({std::string(rule_ids::kDelayedWorkorders),
                         "delayed_count=" + std::to_string(wo.delayed_count) +
                             " >= " + std::to_string(rules.delayed_wo_threshold)});

  std::vector<std::string> critical;
  for (const auto& a : facts.alert_facts)
    if (a.active && a.severity == Severity::CRITICAL) critical.push_back(a.alert_id);
  if (!critical.empty()) {
    std::string ids;
    for (const auto& id : critical) ids += (ids.empty() ? "" : ",") + id;
    attention.push_back({std::string(rule_ids::kCriticalAlert),
                         "active critical alerts=" + std::to_string(critical.size()) + " [" + ids + "]"});
  }

  const Timestamp lookback_start = facts.generated_at.plus_days(-rules.lookback_days);
  std::string anomalies;
  int anomaly_count = 0;
  for (const auto& m : facts.meter_facts) {
    for (const auto& e : m.events) {
      if (!is_attention_event(e.kind) || e.timestamp < lookback_start ||
          e.timestamp > facts.generated_at)
        continue;
      if (anomaly_count++ < 5)
        anomalies += (anomalies.empty() ? "" : ",") + m.meter_name + ":" +
                     std::string(to_string(e.kind)) + "@" + std::to_string(e.index);
    }
  }
  if (anomaly_count > 0)
    attention.push_back({std::string(rule_ids::kMeterAnomaly),
                         "meter events=" + std::to_string(anomaly_count) + " [" + anomalies + "]"});

  const auto& details = facts.asset_details_facts;
  if (details.status == AssetStatus::DOWN && details.is_running)
    attention.push_back({std::string(rule_ids::kStatusInconsistency),
                         "data consistency check: status DOWN while is_running=true"});

  RuleVerdict verdict;
  if (!attention.empty()) {
    verdict.category = ConditionCategory::NEEDS_ATTENTION;
    verdict.triggered_rules = std::move(attention);
    return verdict;
  }

  const int wo_count = wo.total();
  const auto usable_meters = std::count_if(facts.meter_facts.begin(), facts.meter_facts.end(),
                                           [](const MeterFacts& m) { return !m.insufficient(); });
  if (wo_count < rules.min_workorders_for_assessment &&
      usable_meters < rules.min_meters_for_assessment && facts.alert_facts.empty()) {
    verdict.category = ConditionCategory::NOT_ENOUGH_DATA;
    verdict.triggered_rules.push_back(
        {std::string(rule_ids::kInsufficientData),
         "work orders=" + std::to_string(wo_count) + " < " +
             std::to_string(rules.min_workorders_for_assessment) + ", usable meters=" +
             std::to_string(usable_meters) + " < " + std::to_string(rules.min_meters_for_assessment) +
             ", alerts=0"});
    return verdict;
  }
  verdict.category = ConditionCategory::NORMAL;
  return verdict;
}

VerificationResult compare_conditions(const RuleVerdict& rule, ConditionCategory llm, int attempt,
                                      int max_retries, std::optional<bool> first_attempt_agree) {
  if (attempt < 1) throw Error(ErrorCode::InvalidValue, "attempt must be >= 1");
  VerificationResult r;
  r.rule_category = rule.category;
  r.llm_category = llm;
  r.agree = rule.category == llm;
  r.attempt = attempt;
  r.first_attempt_agree = attempt == 1 ? r.agree : first_attempt_agree.value_or(false);
  if (r.agree)
    r.resolution = Resolution::ACCEPTED;
  else if (attempt <= max_retries)
    r.resolution = Resolution::RETRIED;
  else
    r.resolution = Resolution::OVERRIDDEN;
  return r;
}

double compute_car(const std::vector<VerificationResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "CAR over zero results");
  const auto agree = std::count_if(results.begin(), results.end(),
                                   [](const VerificationResult& r) { return r.first_attempt_agree; });
  return static_cast<double>(agree) / static_cast<double>(results.size());
}

double compute_post_retry_agreement(const std::vector<VerificationResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "agreement over zero results");
  const auto agree = std::count_if(results.begin(), results.end(),
                                   [](const VerificationResult& r) { return r.agree; });
  return static_cast<double>(agree) / static_cast<double>(results.size());
}

Json to_json(const RuleVerdict& v) {
  Json rules = Json::array();
  for (const auto& r : v.triggered_rules) rules.push_back(Json{{"id", r.id}, {"evidence", r.evidence}});
  return Json{{"category", std::string(to_string(v.category))}, {"triggered_rules", std::move(rules)}};
}

RuleVerdict rule_verdict_from_json(const Json& j) {
  RuleVerdict v;
  v.category = parse_condition_category(j.at("category").get<std::string>());
  for (const auto& r : j.at("triggered_rules"))
    v.triggered_rules.push_back({r.at("id").get<std::string>(), r.at("evidence").get<std::string>()});
  return v;
}

Json to_json(const VerificationResult& v) {
  return Json{{"rule_category", std::string(to_string(v.rule_category))},
              {"llm_category", std::string(to_string(v.llm_category))},
              {"agree", v.agree},
              {"resolution", std::string(to_string(v.resolution))},
              {"attempt", v.attempt},
              {"first_attempt_agree", v.first_attempt_agree}};
}

VerificationResult verification_from_json(const Json& j) {
  VerificationResult v;
  v.rule_category = parse_condition_category(j.at("rule_category").get<std::string>());
  v.llm_category = parse_condition_category(j.at("llm_category").get<std::string>());
  v.agree = j.at("agree").get<bool>();
  v.resolution = parse_resolution(j.at("resolution").get<std::string>());
  v.attempt = j.at("attempt").get<int>();
  v.first_attempt_agree = j.at("first_attempt_agree").get<bool>();
  return v;
}

}  // namespace condinsight
