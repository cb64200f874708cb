#include "condinsight/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace condinsight {

std::string_view to_string(StatementKind k) {
  return k == StatementKind::INSIGHT ? "INSIGHT" : "RECOMMENDATION";
}

StatementKind parse_statement_kind(std::string_view s) {
  const auto k = to_upper(trim(s));
  if (k == "INSIGHT") return StatementKind::INSIGHT;
  if (k == "RECOMMENDATION") return StatementKind::RECOMMENDATION;
  throw Error(ErrorCode::InvalidEnum, "statement kind '" + std::string(s) + "'");
}

namespace {

constexpr std::string_view kInsightsHeading = "=== CONDITION_INSIGHTS ===";
constexpr std::string_view kFactsHeading = "=== ASSET-FACTS ===";
constexpr std::string_view kSpecHeading = "=== AGENT-SPECIFICATIONS ===";
constexpr std::string_view kItemsHeading = "=== ITEMS TO SCORE ===";

constexpr std::string_view kJudgeSystem = R"(ROLE
You are a strict evaluator of maintenance condition reports. You judge a
report produced by an assistant against the structured evidence it was given.
Do not generate new insights or recommendations, do not rewrite the report and
do not add facts of your own. Score only what is written.

PER-ITEM RUBRICS (score every numbered item on a 1-3 scale)
- factuality: 3 = every claim is supported by ASSET-FACTS; 2 = partly
  supported or vague; 1 = contains a claim absent from or contradicted by
  ASSET-FACTS.
- coherence: 3 = consistent with the overall condition and the other items;
  2 = minor tension; 1 = contradicts the overall condition or another item.
- relevance: 3 = directly about this asset's condition; 2 = loosely related;
  1 = irrelevant.
- repetitiveness: 3 = adds new information; 2 = partial overlap; 1 = restates
  an earlier item.
- specificity: 3 = names concrete, asset-specific evidence (work order
  numbers, meters, alerts, components); 2 = somewhat specific; 1 = generic.
Give a one-sentence justification for every item.

GLOBAL METRICS
- overall_condition_valid: true when the overall condition follows from
  ASSET-FACTS under AGENT-SPECIFICATIONS.
- completeness: for insights and for recommendations, the produced count
  relative to the count the evidence warrants, on [0, 1].

OUTPUT
Return exactly one JSON object:
{"statements":[{"index":1,"kind":"INSIGHT","factuality":3,"coherence":3,
"relevance":3,"repetitiveness":3,"specificity":3,"justification":"..."}],
"overall_condition_valid":true,
"completeness":{"insights":1.0,"recommendations":1.0}}
)";

int score_field(const Json& item, const char* name) {
  if (!item.contains(name)) throw Error(ErrorCode::SchemaViolation, std::string("missing ") + name);
  const Json& v = item.at(name);
  if (!v.is_number()) throw Error(ErrorCode::SchemaViolation, std::string(name) + " is not a number");
  const double d = v.get<double>();
  if (d != std::floor(d) || d < 1 || d > 3)
    throw Error(ErrorCode::ScoreOutOfRange, std::string(name) + "=" + v.dump());
  return static_cast<int>(d);
}

std::string section(std::string_view text, std::string_view heading, std::string_view next) {
  const auto b = text.find(heading);
  if (b == std::string_view::npos) return {};
  const auto start = b + heading.size();
  const auto e = next.empty() ? std::string_view::npos : text.find(next, start);
  return trim(text.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start));
}

}  // namespace

std::string default_agent_specification() {
  std::ostringstream o;
  o << "The assistant assesses one asset from the asset_facts packet only.\n"
    << "Overall condition is one of Normal, Needs Attention, Not Enough Data and must agree\n"
    << "with these deterministic rules:\n"
    << "- Needs Attention when any open emergency work order exists, when delayed work\n"
    << "  orders reach the configured threshold, when a critical alert is active, when a\n"
    << "  meter reports a z-score anomaly, reset or rate anomaly in the lookback window, or\n"
    << "  when the asset is DOWN while reported as running.\n"
    << "- Otherwise Not Enough Data when work orders, usable meters and alerts are all\n"
    << "  below the sufficiency thresholds.\n"
    << "- Otherwise Normal.\n"
    << "At most 5 key insights, each citing packet evidence; at most 4 recommendations,\n"
    << "each following from an insight and preferring the matched FMEA actions.\n";
  return o.str();
}

Prompt render_judge_prompt(const ConditionInsightSummary& summary, const AssetFacts& facts,
                           const std::string& agent_spec, const std::string& summary_asset) {
  if (summary_asset != facts.asset_details_facts.asset_number)
    throw Error(ErrorCode::AssetMismatch,
                "summary for " + summary_asset + ", packet for " + facts.asset_details_facts.asset_number);
  Prompt p;
  p.system = std::string(kJudgeSystem);
  std::ostringstream u;
  u << kInsightsHeading << "\n" << to_json(summary).dump(2) << "\n\n"
    << kFactsHeading << "\n" << serialize_asset_facts(facts) << "\n\n"
    << kSpecHeading << "\n" << agent_spec << "\n\n"
    << kItemsHeading << "\n";
  int index = 1;
  for (const auto& s : summary.key_insights) u << index++ << ". [INSIGHT] " << s << "\n";
  for (const auto& s : summary.recommendations) u << index++ << ". [RECOMMENDATION] " << s << "\n";
  u << "Score all " << index - 1 << " items.\n";
  p.user = u.str();
  return p;
}

JudgeAudit parse_judge_output(std::string_view raw, int expected_statements) {
  if (expected_statements < 0) throw Error(ErrorCode::InvalidValue, "expected_statements < 0");
  const Json* doc = nullptr;
  const auto objects = extract_json_objects(raw);
  for (const auto& o : objects)
    if (o.contains("statements")) {
      doc = &o;
      break;
    }
  if (!doc) throw Error(ErrorCode::SchemaViolation, "no judge audit object in response");
  const Json& items = doc->at("statements");
  if (!items.is_array()) throw Error(ErrorCode::SchemaViolation, "statements must be a list");

  JudgeAudit audit;
  for (const auto& item : items) {
    if (!item.is_object()) throw Error(ErrorCode::SchemaViolation, "statement must be an object");
    StatementScore s;
    if (!item.contains("index") || !item["index"].is_number_integer())
      throw Error(ErrorCode::SchemaViolation, "statement index missing");
    s.statement_index = item["index"].get<int>();
    if (item.contains("kind") && item["kind"].is_string())
      s.kind = parse_statement_kind(item["kind"].get<std::string>());
    s.factuality = score_field(item, "factuality");
    s.coherence = score_field(item, "coherence");
    s.relevance = score_field(item, "relevance");
    s.repetitiveness = score_field(item, "repetitiveness");
    s.specificity = score_field(item, "specificity");
    if (item.contains("justification") && item["justification"].is_string())
      s.justification = item["justification"].get<std::string>();
    audit.statements.push_back(std::move(s));
  }
  if (static_cast<int>(audit.statements.size()) != expected_statements)
    throw Error(ErrorCode::StatementCountMismatch,
                std::to_string(audit.statements.size()) + " scores for " +
                    std::to_string(expected_statements) + " statements");
  std::vector<int> seen;
  for (const auto& s : audit.statements) seen.push_back(s.statement_index);
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < expected_statements; ++i)
    if (seen[static_cast<std::size_t>(i)] != i + 1)
      throw Error(ErrorCode::SchemaViolation, "statement indices must be 1.." + std::to_string(expected_statements));
  std::sort(audit.statements.begin(), audit.statements.end(),
            [](const StatementScore& a, const StatementScore& b) { return a.statement_index < b.statement_index; });

  if (doc->contains("overall_condition_valid")) {
    const Json& v = doc->at("overall_condition_valid");
    if (!v.is_boolean()) throw Error(ErrorCode::SchemaViolation, "overall_condition_valid must be boolean");
    audit.overall_condition_valid = v.get<bool>();
  }
  if (doc->contains("completeness")) {
    const Json& c = doc->at("completeness");
    auto read = [&](const char* key) {
      if (!c.contains(key)) return 0.0;
      if (!c[key].is_number()) throw Error(ErrorCode::SchemaViolation, std::string("completeness ") + key);
      return std::clamp(c[key].get<double>(), 0.0, 1.0);
    };
    audit.completeness_insights = read("insights");
    audit.completeness_recommendations = read("recommendations");
  }
  return audit;
}

MetricsReport aggregate_metrics(const std::vector<JudgeAudit>& audits,
                                const std::vector<VerificationResult>& verifications,
                                const std::vector<int>& insight_counts) {
  if (audits.empty() || verifications.empty() || insight_counts.empty())
    throw Error(ErrorCode::EmptyInput, "metrics over zero assets");
  if (audits.size() != verifications.size() || audits.size() != insight_counts.size())
    throw Error(ErrorCode::IndexMismatch,
                std::to_string(audits.size()) + " audits, " + std::to_string(verifications.size()) +
                    " verifications, " + std::to_string(insight_counts.size()) + " insight counts");

  long total = 0, unsupported = 0, specific = 0, redundant = 0, contradictory = 0;
  long insights = 0;
  for (const auto& a : audits) {
    bool contradiction = false;
    for (const auto& s : a.statements) {
      ++total;
      unsupported += s.factuality == 1;
      specific += s.specificity == 3;
      redundant += s.repetitiveness == 1;
      contradiction = contradiction || s.coherence == 1;
    }
    contradictory += contradiction;
  }
  for (int n : insight_counts) {
    if (n < 0) throw Error(ErrorCode::InvalidValue, "negative insight count");
    insights += n;
  }

  MetricsReport r;
  const auto n_assets = static_cast<double>(audits.size());
  // With no statements at all the per-statement rates are reported as 0.
  const double denom = total == 0 ? 1.0 : static_cast<double>(total);
  r.ucr = static_cast<double>(unsupported) / denom;
  r.hsr = static_cast<double>(specific) / denom;
  r.rr = static_cast<double>(redundant) / denom;
  r.cr = static_cast<double>(contradictory) / n_assets;
  r.mic = static_cast<double>(insights) / n_assets;
  r.car = compute_car(verifications);
  r.post_retry_agreement = compute_post_retry_agreement(verifications);
  r.n_assets = static_cast<int>(audits.size());
  r.n_statements = static_cast<int>(total);
  return r;
}

Json to_json(const JudgeAudit& a) {
  Json statements = Json::array();
  for (const auto& s : a.statements)
    statements.push_back(Json{{"index", s.statement_index},
                              {"kind", std::string(to_string(s.kind))},
                              {"factuality", s.factuality},
                              {"coherence", s.coherence},
                              {"relevance", s.relevance},
                              {"repetitiveness", s.repetitiveness},
                              {"specificity", s.specificity},
                              {"justification", s.justification}});
  return Json{{"asset_number", a.asset_number},
              {"statements", std::move(statements)},
              {"overall_condition_valid", a.overall_condition_valid},
              {"completeness",
               Json{{"insights", a.completeness_insights}, {"recommendations", a.completeness_recommendations}}}};
}

JudgeAudit judge_audit_from_json(const Json& j) {
  JudgeAudit a = parse_judge_output(j.dump(), static_cast<int>(j.at("statements").size()));
  a.asset_number = j.at("asset_number").get<std::string>();
  return a;
}

Json to_json(const MetricsReport& r) {
  return Json{{"ucr", r.ucr},
              {"hsr", r.hsr},
              {"cr", r.cr},
              {"rr", r.rr},
              {"mic", r.mic},
              {"car", r.car},
              {"post_retry_agreement", r.post_retry_agreement},
              {"n_assets", r.n_assets},
              {"n_statements", r.n_statements},
              {"prompt_mode", r.prompt_mode},
              {"evidence_scope", r.evidence_scope},
              {"backbone", r.backbone},
              {"judge", r.judge}};
}

MetricsReport metrics_report_from_json(const Json& j) {
  MetricsReport r;
  r.ucr = j.at("ucr").get<double>();
  r.hsr = j.at("hsr").get<double>();
  r.cr = j.at("cr").get<double>();
  r.rr = j.at("rr").get<double>();
  r.mic = j.at("mic").get<double>();
  r.car = j.at("car").get<double>();
  r.post_retry_agreement = j.value("post_retry_agreement", 0.0);
  r.n_assets = j.at("n_assets").get<int>();
  r.n_statements = j.at("n_statements").get<int>();
  r.prompt_mode = j.value("prompt_mode", "");
  r.evidence_scope = j.value("evidence_scope", "");
  r.backbone = j.value("backbone", "");
  r.judge = j.value("judge", "");
  return r;
}

std::string format_metrics_table(const std::vector<MetricsReport>& rows) {
  std::ostringstream o;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-6s %7s %7s %7s %7s %7s %7s\n", "Prompt", "Scope", "UCR",
                "HSR", "CAR", "MIC", "CR", "RR");
  o << line << std::string(68, '-') << "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %-6s %7.3f %7.3f %7.3f %7.2f %7.3f %7.3f\n",
                  r.prompt_mode.c_str(), r.evidence_scope.c_str(), r.ucr, r.hsr, r.car, r.mic, r.cr,
                  r.rr);
    o << line;
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Mock judge

namespace {

struct Item {
  StatementKind kind;
  std::string text;
};

std::vector<Item> parse_items(std::string_view block) {
  std::vector<Item> items;
  std::istringstream in{std::string(block)};
  std::string line;
  while (std::getline(in, line)) {
    const auto dot = line.find(". [");
    const auto close = line.find("] ", dot == std::string::npos ? 0 : dot);
    if (dot == std::string::npos || close == std::string::npos) continue;
    const auto kind = line.substr(dot + 3, close - dot - 3);
    if (kind != "INSIGHT" && kind != "RECOMMENDATION") continue;
    items.push_back({parse_statement_kind(kind), line.substr(close + 2)});
  }
  return items;
}

std::string number_text(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return format_real(v);
}

void collect_scalars(const Json& j, std::set<std::string>& numbers) {
  if (j.is_number()) {
    numbers.insert(number_text(j.get<double>()));
  } else if (j.is_structured()) {
    for (const auto& v : j) collect_scalars(v, numbers);
  }
}

std::string strip_punct(std::string token) {
  while (!token.empty() && std::string_view(".,;:()[]\"'").find(token.back()) != std::string_view::npos)
    token.pop_back();
  while (!token.empty() && std::string_view("([\"'").find(token.front()) != std::string_view::npos)
    token.erase(token.begin());
  return token;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;)
    if (auto t = strip_punct(w); !t.empty()) out.push_back(t);
  return out;
}

bool has_digit(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](unsigned char c) { return std::isdigit(c) || c == '.'; });
}

constexpr std::string_view kHedges[] = {"typical", "likely", "probably", "may have", "appears",
                                        "generally", "closely"};

bool contains_ci(const std::string& text, std::string_view needle) {
  return to_lower(text).find(needle) != std::string::npos;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

}  // namespace

std::string MockJudgeGateway::complete(const std::string&, const std::string& user_prompt, double) {
  const std::string insights_text = section(user_prompt, kInsightsHeading, kFactsHeading);
  const std::string facts_text = section(user_prompt, kFactsHeading, kSpecHeading);
  const auto items = parse_items(section(user_prompt, kItemsHeading, ""));
  const AssetFacts facts = parse_asset_facts(facts_text);
  const ConditionInsightSummary summary = parse_insight(insights_text);

  std::set<std::string> numbers;
  collect_scalars(Json::parse(facts_text), numbers);
  const auto& wo = facts.workorder_facts;
  numbers.insert(std::to_string(wo.total()));
  numbers.insert(std::to_string(std::count_if(facts.meter_facts.begin(), facts.meter_facts.end(),
                                              [](const MeterFacts& m) { return !m.insufficient(); })));
  numbers.insert(std::to_string(wo.open_count));

  std::set<std::string> identifiers{facts.asset_details_facts.asset_number};
  for (const auto* list : {&wo.preventive_workorders, &wo.corrective_and_other_workorders})
    for (const auto& d : *list) identifiers.insert(d.wonum);
  for (const auto& m : facts.meter_facts) identifiers.insert(m.meter_name);
  for (const auto& a : facts.alert_facts) identifiers.insert(a.alert_id);
  for (const auto& f : facts.fmea_facts) identifiers.insert(f.component);

  const RuleVerdict verdict = classify_condition(facts, RuleConfig{});
  const bool normal = summary.overall_condition == ConditionCategory::NORMAL;

  Json statements = Json::array();
  std::vector<std::vector<std::string>> previous;
  int index = 1;
  for (const auto& item : items) {
    const auto tokens = words(item.text);
    bool unsupported = false, cites = false;
    for (const auto& t : tokens) {
      if (!has_digit(t)) continue;
      const bool known = is_number(t) ? numbers.count(t) > 0 : facts_text.find(t) != std::string::npos;
      unsupported = unsupported || !known;
      cites = cites || known;
    }
    const bool named = std::any_of(identifiers.begin(), identifiers.end(), [&](const std::string& id) {
      return !id.empty() && item.text.find(id) != std::string::npos;
    });
    const bool hedged = std::any_of(std::begin(kHedges), std::end(kHedges),
                                    [&](std::string_view h) { return contains_ci(item.text, h); });

    const int factuality = (unsupported || hedged) ? 1 : (cites || named) ? 3 : 2;
    const int specificity = named ? 3 : cites ? 2 : 1;
    const int relevance = (named || cites) ? 3 : 2;
    const bool alarming = contains_ci(item.text, "still open") || contains_ci(item.text, "active critical") ||
                          contains_ci(item.text, "past the target");
    const int coherence = (normal && alarming) ? 1 : 3;
    int repetitiveness = 3;
    for (const auto& p : previous) {
      const double overlap = jaccard(tokens, p);
      if (overlap >= 0.8) repetitiveness = 1;
      else if (overlap >= 0.5) repetitiveness = std::min(repetitiveness, 2);
    }
    previous.push_back(tokens);

    std::string why = factuality == 1 ? "contains a claim not supported by the packet"
                      : factuality == 3 ? "cites packet evidence"
                                        : "consistent with the packet but vague";
    statements.push_back(Json{{"index", index++},
                              {"kind", std::string(to_string(item.kind))},
                              {"factuality", factuality},
                              {"coherence", coherence},
                              {"relevance", relevance},
                              {"repetitiveness", repetitiveness},
                              {"specificity", specificity},
                              {"justification", why}});
  }

  const double expected_insights =
      std::clamp(static_cast<double>(verdict.triggered_rules.size() + (wo.total() > 0) +
                                     !facts.fmea_facts.empty()),
                 1.0, 5.0);
  const double expected_recs =
      std::clamp(static_cast<double>(facts.fmea_facts.size() + verdict.triggered_rules.size()), 1.0, 4.0);
  const Json audit{
      {"statements", std::move(statements)},
      {"overall_condition_valid", summary.overall_condition == verdict.category},
      {"completeness",
       Json{{"insights", std::min(1.0, static_cast<double>(summary.key_insights.size()) / expected_insights)},
            {"recommendations",
             std::min(1.0, static_cast<double>(summary.recommendations.size()) / expected_recs)}}}};
  return audit.dump();
}

JudgeAudit judge_summary(const ConditionInsightSummary& summary, const AssetFacts& facts,
                         LlmGateway& judge, const std::string& agent_spec) {
  const auto& asset = facts.asset_details_facts.asset_number;
  const Prompt p = render_judge_prompt(summary, facts, agent_spec, asset);
  const int expected = static_cast<int>(summary.key_insights.size() + summary.recommendations.size());
  std::optional<Error> last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      JudgeAudit audit = parse_judge_output(judge.complete(p.system, p.user, 0.0), expected);
      audit.asset_number = asset;
      return audit;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SchemaViolation && e.code() != ErrorCode::StatementCountMismatch) throw;
      last = e;
    }
  }
  throw *last;
}

}  // namespace condinsight
