#include "condinsight/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "condinsight/hash.hpp"
#include "condinsight/http.hpp"

namespace condinsight {

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string key_norm(std::string_view key) {
  std::string out;
  for (char c : key)
    if (c != ' ' && c != '_' && c != '-') out.push_back(c);
  return to_lower(out);
}

const Json* find_key(const Json& obj, std::string_view wanted) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (key_norm(it.key()) == wanted) return &it.value();
  return nullptr;
}

/// End (exclusive) of the balanced {...} starting at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

std::string item_text(const Json& item) {
  if (item.is_string()) return item.get<std::string>();
  if (item.is_object()) {
    std::string joined;
    for (const auto& [k, v] : item.items())
      if (v.is_string()) joined += (joined.empty() ? "" : " ") + v.get<std::string>();
    return joined;
  }
  return item.dump();
}

std::vector<std::string> string_list(const Json& v, const char* field) {
  if (!v.is_array()) throw Error(ErrorCode::SchemaViolation, std::string(field) + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : v) out.push_back(trim(item_text(item)));
  return out;
}

double number_of(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = trim(v.get<std::string>());
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::SchemaViolation, "confidence value is not a number");
}

ConditionCategory condition_from_text(const std::string& raw) {
  const std::string k = key_norm(raw);
  if (k == "normal") return ConditionCategory::NORMAL;
  if (k == "needsattention") return ConditionCategory::NEEDS_ATTENTION;
  if (k == "notenoughdata") return ConditionCategory::NOT_ENOUGH_DATA;
  throw Error(ErrorCode::UnknownCondition, raw);
}

ConditionInsightSummary summary_from_object(const Json& obj) {
  static constexpr std::pair<const char*, const char*> kFields[] = {
      {"overallcondition", "Overall Condition"},
      {"overallconditionexplanation", "Overall Condition Explanation"},
      {"keyinsights", "Key insights"},
      {"recommendations", "Recommendations"},
      {"overallconfidence", "Overall confidence"}};
  const Json* found[5];
  for (int i = 0; i < 5; ++i) {
    found[i] = find_key(obj, kFields[i].first);
    if (!found[i] || found[i]->is_null())
      throw Error(ErrorCode::SchemaViolation, std::string("missing \"") + kFields[i].second + "\"");
  }
  ConditionInsightSummary s;
  if (!found[0]->is_string()) throw Error(ErrorCode::SchemaViolation, "Overall Condition must be text");
  s.overall_condition = condition_from_text(found[0]->get<std::string>());
  s.overall_condition_explanation = item_text(*found[1]);
  s.key_insights = string_list(*found[2], "Key insights");
  s.recommendations = string_list(*found[3], "Recommendations");
  const Json& conf = *found[4];
  double value = 0.0;
  if (conf.is_object()) {
    const Json* v = find_key(conf, "value");
    if (!v) throw Error(ErrorCode::SchemaViolation, "missing confidence value");
    value = number_of(*v);
    if (const Json* r = find_key(conf, "reasoning")) s.overall_confidence.reasoning = item_text(*r);
  } else {
    value = number_of(conf);
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::SchemaViolation, "confidence is not finite");
  s.overall_confidence.value = std::clamp(value, 0.0, 1.0);
  s.confidence_clamped = s.overall_confidence.value != value;
  return s;
}

}  // namespace

std::vector<Json> extract_json_objects(std::string_view raw) {
  std::vector<Json> out;
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    const std::size_t end = match_brace(raw, pos);
    if (end == std::string_view::npos) break;
    Json doc = Json::parse(raw.substr(pos, end - pos), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    out.push_back(std::move(doc));
    pos = end - 1;
  }
  return out;
}

ConditionInsightSummary parse_insight(std::string_view raw) {
  std::optional<Error> first_problem;
  for (const Json& doc : extract_json_objects(raw)) {
    try {
      return summary_from_object(doc);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownCondition) throw;
      if (!first_problem) first_problem = e;
    }
  }
  if (first_problem) throw *first_problem;
  throw Error(ErrorCode::SchemaViolation, "no JSON object found in response");
}

Json to_json(const ConditionInsightSummary& s) {
  return Json{{"Overall Condition", std::string(condition_label(s.overall_condition))},
              {"Overall Condition Explanation", s.overall_condition_explanation},
              {"Key insights", s.key_insights},
              {"Recommendations", s.recommendations},
              {"Overall confidence",
               Json{{"value", s.overall_confidence.value}, {"reasoning", s.overall_confidence.reasoning}}}};
}

ConditionInsightSummary summary_from_json(const Json& j) { return summary_from_object(j); }

// ---------------------------------------------------------------------------
// Gateways

std::string prompt_hash(const std::string& system_prompt, const std::string& user_prompt) {
  return sha256_hex(system_prompt + '\x1f' + user_prompt);
}

namespace {

std::string plural(std::size_t n, std::string_view word) {
  return std::to_string(n) + " " + std::string(word) + (n == 1 ? "" : "s");
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

int count_of(const WorkorderFacts& wo, WorkOrderType t) {
  auto it = wo.counts.find(t);
  return it == wo.counts.end() ? 0 : it->second;
}

std::string history_insight(const AssetFacts& f) {
  const auto& wo = f.workorder_facts;
  std::ostringstream o;
  o << "In the last " << wo.window_days << " days the asset recorded "
    << plural(static_cast<std::size_t>(wo.total()), "work order") << ": "
    << count_of(wo, WorkOrderType::PREVENTIVE) << " preventive, "
    << count_of(wo, WorkOrderType::CORRECTIVE) << " corrective, "
    << count_of(wo, WorkOrderType::EMERGENCY) << " emergency and "
    << count_of(wo, WorkOrderType::OTHER) << " other.";
  return o.str();
}

std::vector<std::string> open_emergencies(const AssetFacts& f) {
  std::vector<std::string> ids;
  for (const auto& d : f.workorder_facts.corrective_and_other_workorders)
    if (d.wo_type == WorkOrderType::EMERGENCY &&
        (d.status == WorkOrderStatus::OPEN || d.status == WorkOrderStatus::IN_PROGRESS))
      ids.push_back(d.wonum);
  return ids;
}

std::vector<std::string> evidence_insights(const AssetFacts& f) {
  std::vector<std::string> out;
  if (auto ids = open_emergencies(f); !ids.empty())
    out.push_back(plural(ids.size(), "emergency work order") + " still open (" + join(ids, ", ") + ").");
  if (f.workorder_facts.delayed_count > 0)
    out.push_back(plural(static_cast<std::size_t>(f.workorder_facts.delayed_count), "open work order") +
                  " past the target date.");
  for (const auto& a : f.alert_facts)
    if (a.active && a.severity != Severity::INFO)
      out.push_back("Active " + to_lower(to_string(a.severity)) + " alert " + a.alert_id + ": " +
                    a.message + ".");
  for (const auto& m : f.meter_facts) {
    for (const auto& e : m.events) {
      if (e.kind == MeterEventKind::FLAT_PERIOD || e.kind == MeterEventKind::ABRUPT_CHANGE) continue;
      out.push_back("Meter " + m.meter_name + " shows " + std::string(to_string(e.kind)) +
                    " at reading " + std::to_string(e.index) + " (" + e.timestamp.to_string() + ").");
      break;
    }
  }
  const auto& d = f.asset_details_facts;
  if (d.status == AssetStatus::DOWN && d.is_running)
    out.push_back("Asset status is DOWN while it is reported as running; the records disagree.");
  return out;
}

std::string fmea_insight(const FmeaFact& x) {
  const auto& ids = x.matched_workorders;
  std::vector<std::string> shown(ids.begin(), ids.begin() + static_cast<long>(std::min<std::size_t>(ids.size(), 3)));
  std::string who = (ids.size() == 1 ? "Work order " : "Work orders ") + join(shown, ", ");
  if (ids.size() > shown.size()) who += " and " + std::to_string(ids.size() - shown.size()) + " more";
  return who + (ids.size() == 1 ? " aligns" : " align") + " with " + x.component + " " + x.mechanism +
         (x.failure_mode.empty() ? "" : " (" + x.failure_mode + ")") + ".";
}

double majority_confidence(const AssetFacts& f) {
  int present = 0;
  present += f.workorder_facts.total() > 0;
  present += std::any_of(f.meter_facts.begin(), f.meter_facts.end(),
                         [](const MeterFacts& m) { return !m.insufficient(); });
  present += !f.alert_facts.empty();
  present += !f.fmea_facts.empty();
  return present == 0 ? 0.3 : 0.5 + 0.1 * present;
}

Json mock_summary(const AssetFacts& f, ConditionCategory category, bool constrained,
                  const RuleVerdict& verdict) {
  std::vector<std::string> insights, recs;
  const auto& wo = f.workorder_facts;
  if (category == ConditionCategory::NOT_ENOUGH_DATA && constrained) {
    const auto usable = std::count_if(f.meter_facts.begin(), f.meter_facts.end(),
                                      [](const MeterFacts& m) { return !m.insufficient(); });
    insights.push_back("Only " + plural(static_cast<std::size_t>(wo.total()), "work order") + " and " +
                       plural(static_cast<std::size_t>(usable), "usable meter") +
                       " are available, too few to assess condition.");
    recs.push_back("Record regular meter readings for this asset so its condition can be assessed.");
  } else {
    for (auto& s : evidence_insights(f)) insights.push_back(std::move(s));
    if (wo.total() > 0) insights.push_back(history_insight(f));
    if (!f.fmea_facts.empty()) insights.push_back(fmea_insight(f.fmea_facts.front()));
    if (auto ids = open_emergencies(f); !ids.empty())
      recs.push_back("Close out emergency work order " + ids.front() + " and confirm the root cause.");
    if (wo.delayed_count > 0)
      recs.push_back("Complete the " + plural(static_cast<std::size_t>(wo.delayed_count), "overdue work order") + ".");
    for (std::size_t i = 0; i < f.fmea_facts.size() && i < 2; ++i) {
      const auto& x = f.fmea_facts[i];
      if (!x.actions.empty())
        recs.push_back(x.actions.front() + " to address " + x.component + " " + x.mechanism + ".");
    }
  }
  if (!constrained) {
    const auto& d = f.asset_details_facts;
    insights.push_back("The asset is " + to_lower(to_string(d.status)) + " and " +
                       (d.is_running ? "running." : "not running."));
    insights.push_back("Overall maintenance activity appears typical for this type of equipment.");
    recs.push_back("Continue routine preventive maintenance.");
    recs.push_back("Monitor the asset closely.");
  }
  if (constrained && insights.size() > 5) insights.resize(5);
  if (constrained && recs.size() > 4) recs.resize(4);

  std::string explanation;
  if (constrained) {
    std::vector<std::string> ids;
    for (const auto& r : verdict.triggered_rules) ids.push_back(r.id);
    explanation = ids.empty() ? "No attention rule applies and the evidence is sufficient."
                              : "Rules applied: " + join(ids, ", ") + ".";
  } else {
    explanation = "Based on the available records the asset condition is " +
                  std::string(condition_label(category)) + ".";
  }
  const double conf = majority_confidence(f);
  return Json{{"Overall Condition", std::string(condition_label(category))},
              {"Overall Condition Explanation", explanation},
              {"Key insights", insights},
              {"Recommendations", recs},
              {"Overall confidence",
               Json{{"value", conf},
                    {"reasoning", "Majority of present evidence signals support the condition."}}}};
}

}  // namespace

ConditionCategory MockGateway::naive_policy(const AssetFacts& f) {
  const auto& wo = f.workorder_facts;
  if (wo.emergency_count > 0) return ConditionCategory::NEEDS_ATTENTION;
  for (const auto& a : f.alert_facts)
    if (a.active && a.severity != Severity::INFO) return ConditionCategory::NEEDS_ATTENTION;
  if (wo.total() == 0 && f.meter_facts.empty()) return ConditionCategory::NOT_ENOUGH_DATA;
  return ConditionCategory::NORMAL;
}

std::string MockGateway::complete(const std::string& system_prompt, const std::string& user_prompt,
                                  double) {
  const auto doc = extract_facts_document(user_prompt);
  if (!doc) return "I could not find an asset_facts block in the request.";
  const AssetFacts facts = parse_asset_facts(*doc);
  const bool constrained = system_prompt.find(kConditionRulesHeading) != std::string::npos;
  const RuleVerdict verdict = classify_condition(facts, rules_);
  const ConditionCategory category = constrained ? verdict.category : naive_policy(facts);
  return "```json\n" + mock_summary(facts, category, constrained, verdict).dump(2) + "\n```";
}

std::string FixedConditionGateway::complete(const std::string&, const std::string&, double) {
  ConditionInsightSummary s;
  s.overall_condition = category_;
  s.overall_condition_explanation = "The asset looks fine.";
  s.key_insights = {"No significant issues were identified."};
  s.recommendations = {"Continue routine maintenance."};
  s.overall_confidence = {0.9, "Fixed response."};
  return to_json(s).dump();
}

std::string ScriptedGateway::complete(const std::string& system_prompt,
                                      const std::string& user_prompt, double) {
  std::lock_guard lock(mu_);
  seen.push_back({system_prompt, user_prompt});
  if (responses_.empty()) return {};
  const std::string& r = responses_[std::min(next_, responses_.size() - 1)];
  ++next_;
  return r;
}

std::string ReplayGateway::complete(const std::string& system_prompt,
                                    const std::string& user_prompt, double) {
  const auto path = dir_ / (prompt_hash(system_prompt, user_prompt) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::GatewayUnavailable, "no recorded response at " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string RecordingGateway::complete(const std::string& system_prompt,
                                       const std::string& user_prompt, double temperature) {
  std::string response = inner_->complete(system_prompt, user_prompt, temperature);
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir_);
  std::ofstream out(dir_ / (prompt_hash(system_prompt, user_prompt) + ".txt"), std::ios::binary);
  out << response;
  return response;
}

RemoteGateway::RemoteGateway(RemoteGatewayConfig cfg)
    : cfg_(std::move(cfg)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(std::max(1, cfg_.max_in_flight))) {
  if (cfg_.endpoint.empty()) throw Error(ErrorCode::ConfigError, "remote gateway needs an endpoint");
  if (cfg_.max_attempts < 1) cfg_.max_attempts = 1;
}

std::string RemoteGateway::complete(const std::string& system_prompt,
                                    const std::string& user_prompt, double temperature) {
  const Json request{{"model", cfg_.model},
                     {"messages", Json::array({Json{{"role", "system"}, {"content", system_prompt}},
                                               Json{{"role", "user"}, {"content", user_prompt}}})},
                     {"temperature", temperature}};
  const std::string body = request.dump();
  std::string last_error;
  int backoff = cfg_.backoff_ms;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    HttpResponse res;
    {
      in_flight_->acquire();
      struct Release {
        std::counting_semaphore<>* s;
        ~Release() { s->release(); }
      } release{in_flight_.get()};
      res = http_post_json(cfg_.endpoint, body, cfg_.token, cfg_.timeout_seconds);
    }
    if (res.status == 200) {
      const Json doc = Json::parse(res.body, nullptr, false);
      if (!doc.is_discarded() && doc.is_object()) {
        if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
          const Json& c = doc["choices"][0];
          if (c.contains("message") && c["message"].contains("content") &&
              c["message"]["content"].is_string())
            return c["message"]["content"].get<std::string>();
          if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
        }
        for (const char* key : {"content", "completion", "text"})
          if (doc.contains(key) && doc[key].is_string()) return doc[key].get<std::string>();
      }
      return res.body;
    }
    last_error = "status " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
    const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
    if (!retryable) break;
    if (attempt < cfg_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw Error(ErrorCode::GatewayUnavailable, cfg_.endpoint + " (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Loop

InsightOutcome generate_insight(const AssetFacts& facts, PromptMode mode, LlmGateway& gateway,
                                const RuleConfig& rules, int max_retries) {
  if (max_retries < 0) throw Error(ErrorCode::InvalidValue, "max_retries must be >= 0");
  InsightOutcome out;
  out.verdict = classify_condition(facts, rules);
  std::optional<std::string> feedback;
  std::optional<ConditionInsightSummary> last_parsed;
  std::optional<bool> first_agree;
  const int total_attempts = max_retries + 1;

  for (int attempt = 1; attempt <= total_attempts; ++attempt) {
    AttemptRecord rec;
    rec.prompt = render_prompt(facts, mode, feedback, rules);
    rec.response = gateway.complete(rec.prompt.system, rec.prompt.user, 0.0);
    ConditionInsightSummary summary;
    try {
      summary = parse_insight(rec.response);
    } catch (const Error& e) {
      rec.parse_error = e.what();
      out.attempts.push_back(std::move(rec));
      if (attempt == 1) first_agree = false;
      feedback = std::string("The previous response could not be used (") + e.what() +
                 "). Return exactly one JSON object that follows the output schema.";
      continue;
    }
    out.attempts.push_back(std::move(rec));
    last_parsed = summary;
    out.verification = compare_conditions(out.verdict, summary.overall_condition, attempt,
                                          max_retries, first_agree);
    if (attempt == 1) first_agree = out.verification.agree;
    if (out.verification.resolution == Resolution::ACCEPTED) {
      out.summary = std::move(summary);
      return out;
    }
    if (out.verification.resolution == Resolution::OVERRIDDEN) break;
    feedback = disagreement_feedback(out.verdict, summary.overall_condition);
  }

  if (!last_parsed)
    throw Error(ErrorCode::PersistentSchemaViolation,
                "no parseable response in " + std::to_string(total_attempts) + " attempts");

  // Retries exhausted without agreement: the rule category is final.
  const ConditionCategory proposed = last_parsed->overall_condition;
  out.verification.rule_category = out.verdict.category;
  out.verification.llm_category = proposed;
  out.verification.agree = false;
  out.verification.resolution = Resolution::OVERRIDDEN;
  out.verification.attempt = static_cast<int>(out.attempts.size());
  out.verification.first_attempt_agree = first_agree.value_or(false);
  out.summary = *last_parsed;
  out.summary.overall_condition = out.verdict.category;
  out.summary.overall_condition_explanation =
      "[Overridden by deterministic rules: condition set to " +
      std::string(condition_label(out.verdict.category)) + "; the model proposed " +
      std::string(condition_label(proposed)) + ".] " + out.summary.overall_condition_explanation;
  return out;
}

}  // namespace condinsight
