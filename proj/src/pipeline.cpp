#include "condinsight/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "condinsight/hash.hpp"

namespace condinsight {

// ---------------------------------------------------------------------------
// Evidence

Timestamp EvidenceSet::latest_timestamp() const {
  Timestamp t{};
  auto bump = [&](Timestamp x) {
    if (x > t) t = x;
  };
  for (const auto& [asset, list] : workorders)
    for (const auto& w : list) {
      bump(w.reported_date);
      if (w.completion_date) bump(*w.completion_date);
    }
  for (const auto& [asset, list] : meters)
    for (const auto& s : list)
      if (!s.readings.empty()) bump(s.readings.back().t);
  for (const auto& [asset, list] : alerts)
    for (const auto& a : list) bump(a.raised_at);
  return t;
}

namespace {

RawRecord raw_of(const Json& j) { return j.get<RawRecord>(); }

}  // namespace

EvidenceSet load_evidence(const Store& store) {
  EvidenceSet ev;
  for (const auto& [key, hash] : store.index(entity::kAssets)) {
    Asset a = validate_asset(raw_of(store.get(hash)));
    ev.assets.emplace(a.asset_number, std::move(a));
  }
  for (const auto& [key, hash] : store.index(entity::kWorkOrders)) {
    WorkOrder w = validate_work_order(raw_of(store.get(hash)));
    ev.workorders[w.asset_number].push_back(std::move(w));
  }
  for (const auto& [key, hash] : store.index(entity::kMeters)) {
    MeterSeries s = validate_meter_series(store.get(hash));
    ev.meters[s.asset_number].push_back(std::move(s));
  }
  for (const auto& [key, hash] : store.index(entity::kAlerts)) {
    Alert a = validate_alert(store.get(hash));
    ev.alerts[a.asset_number].push_back(std::move(a));
  }
  for (const auto& [key, hash] : store.index(entity::kFmea)) {
    FmeaEntry e = validate_fmea_entry(raw_of(store.get(hash)));
    ev.fmea_by_class[e.asset_class].push_back(std::move(e));
  }
  return ev;
}

AssetFacts build_facts_for(const std::string& asset_number, const EvidenceSet& evidence,
                           const PipelineConfig& cfg, Timestamp now,
                           const EmbeddingProvider& embedder) {
  const auto ait = evidence.assets.find(asset_number);
  if (ait == evidence.assets.end()) throw Error(ErrorCode::UnknownAsset, asset_number);
  const Asset& asset = ait->second;
  const Timestamp window_start = now.plus_days(-cfg.window_days);

  std::vector<WorkOrder> orders;
  if (auto it = evidence.workorders.find(asset_number); it != evidence.workorders.end()) orders = it->second;
  const WorkorderFacts wo = build_workorder_facts(orders, cfg.window_days, now, cfg.min_support);

  std::vector<MeterFacts> meters;
  if (cfg.evidence_scope == EvidenceScope::ALL) {
    if (auto it = evidence.meters.find(asset_number); it != evidence.meters.end()) {
      for (MeterSeries s : it->second) {
        std::erase_if(s.readings, [&](const Reading& r) { return r.t < window_start || r.t > now; });
        meters.push_back(abstract_meter(s, cfg.abstraction));
      }
    }
  }

  std::vector<Alert> alerts;
  if (auto it = evidence.alerts.find(asset_number); it != evidence.alerts.end())
    for (const auto& a : it->second)
      if (a.raised_at <= now && (a.active || a.raised_at >= window_start)) alerts.push_back(a);

  std::vector<FmeaMatch> matches;
  if (cfg.evidence_scope == EvidenceScope::ALL) {
    std::vector<WorkOrder> in_window;
    for (const auto& w : orders)
      if (w.reported_date >= window_start && w.reported_date <= now) in_window.push_back(w);
    std::sort(in_window.begin(), in_window.end(),
              [](const WorkOrder& a, const WorkOrder& b) { return a.wonum < b.wonum; });
    const auto fit = evidence.fmea_by_class.find(asset.asset_class);
    if (!in_window.empty() && fit != evidence.fmea_by_class.end() && !fit->second.empty()) {
      AlignmentConfig ac;
      ac.uot = cfg.uot;
      ac.top_k = cfg.top_k_fmea;
      ac.recency_tau_days = cfg.recency_tau_days;
      ac.now = now;
      matches = align_failure_modes(in_window, fit->second, embedder, ac);
    }
  }

  const auto scores = derive_health_scores(wo, meters);
  return build_asset_facts(asset, wo, std::move(meters), std::move(alerts), matches, scores,
                           cfg.window_days, now, static_cast<std::size_t>(cfg.top_k_fmea));
}

Timestamp resolve_now(const PipelineConfig& cfg, const EvidenceSet& evidence) {
  return cfg.as_of ? *cfg.as_of : evidence.latest_timestamp();
}

// ---------------------------------------------------------------------------
// Run records

std::string make_run_id(const std::string& asset_number, const std::string& digest,
                        const std::string& facts) {
  return sha256_hex(asset_number + '\x1f' + digest + '\x1f' + facts).substr(0, 32);
}

namespace {

template <typename T, typename F>
Json opt_json(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : Json(nullptr);
}

Json attempt_json(const AttemptRecord& a) {
  return Json{{"system_prompt", a.prompt.system},
              {"user_prompt", a.prompt.user},
              {"response", a.response},
              {"parse_error", a.parse_error ? Json(*a.parse_error) : Json(nullptr)}};
}

AttemptRecord attempt_from_json(const Json& j) {
  AttemptRecord a;
  a.prompt.system = j.at("system_prompt").get<std::string>();
  a.prompt.user = j.at("user_prompt").get<std::string>();
  a.response = j.at("response").get<std::string>();
  if (!j.at("parse_error").is_null()) a.parse_error = j.at("parse_error").get<std::string>();
  return a;
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string wall_clock_now() {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
  return Timestamp{static_cast<std::int64_t>(secs)}.to_string();
}

}  // namespace

Json reproducible_view(const RunRecord& r) {
  Json attempts = Json::array();
  for (const auto& a : r.attempts) attempts.push_back(attempt_json(a));
  return Json{{"run_id", r.run_id},
              {"asset_number", r.asset_number},
              {"config_digest", r.config_digest},
              {"config", r.config},
              {"facts", r.facts},
              {"prompt_mode", r.prompt_mode},
              {"evidence_scope", r.evidence_scope},
              {"backbone", r.backbone},
              {"verdict", opt_json(r.verdict, [](const RuleVerdict& v) { return to_json(v); })},
              {"attempts", std::move(attempts)},
              {"summary", opt_json(r.summary, [](const ConditionInsightSummary& s) { return to_json(s); })},
              {"verification", opt_json(r.verification, [](const VerificationResult& v) { return to_json(v); })},
              {"audit", opt_json(r.audit, [](const JudgeAudit& a) { return to_json(a); })},
              {"judge", r.judge},
              {"error", opt_json(r.error, [](const RunError& e) {
                 return Json{{"code", e.code}, {"message", e.message}};
               })}};
}

Json to_json(const RunRecord& r) {
  Json j = reproducible_view(r);
  j["timings"] = Json{{"started_at", r.timings.started_at},
                      {"facts_ms", r.timings.facts_ms},
                      {"generation_ms", r.timings.generation_ms},
                      {"total_ms", r.timings.total_ms}};
  return j;
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.asset_number = j.at("asset_number").get<std::string>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.config = j.at("config");
  r.facts = j.at("facts").get<std::string>();
  r.prompt_mode = j.at("prompt_mode").get<std::string>();
  r.evidence_scope = j.at("evidence_scope").get<std::string>();
  r.backbone = j.at("backbone").get<std::string>();
  if (!j.at("verdict").is_null()) r.verdict = rule_verdict_from_json(j.at("verdict"));
  for (const auto& a : j.at("attempts")) r.attempts.push_back(attempt_from_json(a));
  if (!j.at("summary").is_null()) r.summary = summary_from_json(j.at("summary"));
  if (!j.at("verification").is_null()) r.verification = verification_from_json(j.at("verification"));
  if (!j.at("audit").is_null()) r.audit = judge_audit_from_json(j.at("audit"));
  r.judge = j.value("judge", "");
  if (!j.at("error").is_null())
    r.error = RunError{j["error"].at("code").get<std::string>(), j["error"].at("message").get<std::string>()};
  if (j.contains("timings")) {
    const auto& t = j["timings"];
    r.timings.started_at = t.value("started_at", "");
    r.timings.facts_ms = t.value("facts_ms", 0.0);
    r.timings.generation_ms = t.value("generation_ms", 0.0);
    r.timings.total_ms = t.value("total_ms", 0.0);
  }
  return r;
}

RunRecord run_insight(const std::string& asset_number, const PipelineContext& ctx) {
  if (!ctx.store || !ctx.evidence || !ctx.gateway || !ctx.embedder)
    throw Error(ErrorCode::ConfigError, "pipeline context is incomplete");
  if (!ctx.evidence->assets.count(asset_number)) throw Error(ErrorCode::UnknownAsset, asset_number);

  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.asset_number = asset_number;
  rec.config = to_json(ctx.cfg);
  rec.config_digest = config_digest(ctx.cfg);
  rec.prompt_mode = std::string(to_string(ctx.cfg.prompt_mode));
  rec.evidence_scope = std::string(to_string(ctx.cfg.evidence_scope));
  rec.backbone = ctx.gateway->name();
  rec.timings.started_at = wall_clock_now();

  try {
    const AssetFacts facts = build_facts_for(asset_number, *ctx.evidence, ctx.cfg, ctx.now, *ctx.embedder);
    rec.facts = serialize_asset_facts(facts);
    rec.timings.facts_ms = ms_since(start);
    const auto gen_start = std::chrono::steady_clock::now();
    InsightOutcome out;
    try {
      out = generate_insight(facts, ctx.cfg.prompt_mode, *ctx.gateway, ctx.cfg.rules, ctx.cfg.max_retries);
    } catch (...) {
      rec.verdict = classify_condition(facts, ctx.cfg.rules);
      rec.timings.generation_ms = ms_since(gen_start);
      throw;
    }
    rec.timings.generation_ms = ms_since(gen_start);
    rec.verdict = out.verdict;
    rec.attempts = std::move(out.attempts);
    rec.summary = std::move(out.summary);
    rec.verification = out.verification;
  } catch (const Error& e) {
    rec.error = RunError{std::string(to_string(e.code())), e.what()};
  } catch (const std::exception& e) {
    rec.error = RunError{"Internal", e.what()};
  }
  rec.run_id = make_run_id(asset_number, rec.config_digest, rec.facts);
  rec.timings.total_ms = ms_since(start);
  ctx.store->commit(entity::kRuns, rec.run_id, to_json(rec));
  return rec;
}

RunRecord load_run(const Store& store, const std::string& run_id) {
  const auto hash = store.lookup(entity::kRuns, run_id);
  if (!hash) throw Error(ErrorCode::UnknownAsset, "no run " + run_id);
  return run_record_from_json(store.get(*hash));
}

// ---------------------------------------------------------------------------
// Portfolio

bool AssetFilter::matches(const Asset& a) const {
  return (!site || a.site_id == *site) && (!asset_class || a.asset_class == *asset_class);
}

PortfolioReport run_portfolio(const PipelineContext& ctx, const AssetFilter& filter) {
  std::vector<const Asset*> selected;
  for (const auto& [id, a] : ctx.evidence->assets)
    if (filter.matches(a)) selected.push_back(&a);
  if (selected.empty()) throw Error(ErrorCode::NoMatchingAssets, "no asset matches the filter");

  std::vector<PortfolioRow> rows(selected.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) {
      const Asset& a = *selected[i];
      PortfolioRow row{a.asset_number, a.site_id, a.asset_class, std::nullopt, "", "", ""};
      try {
        const RunRecord r = run_insight(a.asset_number, ctx);
        row.run_id = r.run_id;
        if (r.error) {
          row.error = r.error->message;
        } else {
          row.category = r.summary->overall_condition;
          row.resolution = std::string(to_string(r.verification->resolution));
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows[i] = std::move(row);
    }
  };
  const int n_threads = std::max(1, std::min<int>(ctx.cfg.workers, static_cast<int>(selected.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  PortfolioReport rep;
  for (auto c : kAllConditionCategories) rep.overall[c] = 0;
  for (const auto& row : rows) {
    if (!row.category) {
      ++rep.failed;
      continue;
    }
    ++rep.overall[*row.category];
    for (auto* dist : {&rep.by_site[row.site_id], &rep.by_class[row.asset_class]}) {
      for (auto c : kAllConditionCategories) dist->try_emplace(c, 0);
      ++(*dist)[*row.category];
    }
  }
  rep.rows = std::move(rows);
  return rep;
}

namespace {

Json distribution_json(const Distribution& d) {
  Json j = Json::object();
  for (const auto& [c, n] : d) j[std::string(to_string(c))] = n;
  return j;
}

int dist_total(const Distribution& d) {
  int n = 0;
  for (const auto& [c, k] : d) n += k;
  return n;
}

}  // namespace

Json to_json(const PortfolioReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"asset_number", row.asset_number},
                        {"site_id", row.site_id},
                        {"asset_class", row.asset_class},
                        {"category", row.category ? Json(std::string(to_string(*row.category))) : Json(nullptr)},
                        {"resolution", row.resolution},
                        {"run_id", row.run_id},
                        {"error", row.error}});
  Json sites = Json::object(), classes = Json::object();
  for (const auto& [k, d] : r.by_site) sites[k] = distribution_json(d);
  for (const auto& [k, d] : r.by_class) classes[k] = distribution_json(d);
  return Json{{"rows", std::move(rows)},
              {"overall", distribution_json(r.overall)},
              {"by_site", std::move(sites)},
              {"by_class", std::move(classes)},
              {"failed", r.failed}};
}

std::string format_distribution_table(const PortfolioReport& r) {
  std::ostringstream o;
  char line[200];
  auto table = [&](const std::string& title, const std::map<std::string, Distribution>& groups) {
    std::snprintf(line, sizeof line, "%-20s %6s %16s %10s %17s\n", title.c_str(), "Assets",
                  "Not Enough Data", "Normal", "Needs Attention");
    o << line;
    for (const auto& [name, d] : groups) {
      const int n = dist_total(d);
      auto pct = [&](ConditionCategory c) {
        const auto it = d.find(c);
        return n == 0 || it == d.end() ? 0.0 : 100.0 * it->second / n;
      };
      std::snprintf(line, sizeof line, "%-20s %6d %15.1f%% %9.1f%% %16.1f%%\n", name.c_str(), n,
                    pct(ConditionCategory::NOT_ENOUGH_DATA), pct(ConditionCategory::NORMAL),
                    pct(ConditionCategory::NEEDS_ATTENTION));
      o << line;
    }
    o << "\n";
  };
  table("Portfolio", {{"all", r.overall}});
  table("Site", r.by_site);
  table("Asset class", r.by_class);
  if (r.failed) o << r.failed << " run(s) failed\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Evaluation

MetricsReport run_evaluation(const std::vector<std::string>& run_ids, Store& store, LlmGateway& judge,
                             const std::string& agent_spec) {
  std::vector<RunRecord> runs;
  for (const auto& id : run_ids) {
    RunRecord r = load_run(store, id);
    if (r.summary && r.verification) runs.push_back(std::move(r));
  }
  std::sort(runs.begin(), runs.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.asset_number < b.asset_number; });

  std::vector<JudgeAudit> audits;
  std::vector<VerificationResult> verifications;
  std::vector<int> insight_counts;
  for (auto& r : runs) {
    const AssetFacts facts = parse_asset_facts(r.facts);
    r.audit = judge_summary(*r.summary, facts, judge, agent_spec);
    r.judge = judge.name();
    store.commit(entity::kRuns, r.run_id, to_json(r));
    audits.push_back(*r.audit);
    verifications.push_back(*r.verification);
    insight_counts.push_back(static_cast<int>(r.summary->key_insights.size()));
  }
  MetricsReport rep = aggregate_metrics(audits, verifications, insight_counts);
  if (!runs.empty()) {
    const auto& first = runs.front();
    rep.prompt_mode = first.prompt_mode == "CONSTRAINED" ? "Constrained" : "Naive";
    rep.evidence_scope = first.evidence_scope == "ALL" ? "All" : "WO";
    rep.backbone = first.backbone;
  }
  rep.judge = judge.name();
  return rep;
}

std::vector<MetricsReport> run_grid(const PipelineContext& base, LlmGateway& judge, const AssetFilter& filter) {
  std::vector<MetricsReport> rows;
  for (PromptMode mode : {PromptMode::NAIVE, PromptMode::CONSTRAINED}) {
    for (EvidenceScope scope : {EvidenceScope::WO_ONLY, EvidenceScope::ALL}) {
      PipelineContext ctx = base;
      ctx.cfg.prompt_mode = mode;
      ctx.cfg.evidence_scope = scope;
      const PortfolioReport p = run_portfolio(ctx, filter);
      std::vector<std::string> ids;
      for (const auto& row : p.rows)
        if (!row.run_id.empty() && row.error.empty()) ids.push_back(row.run_id);
      rows.push_back(run_evaluation(ids, *ctx.store, judge));
    }
  }
  return rows;
}

std::string format_insight_report(const RunRecord& r) {
  std::ostringstream o;
  o << "Asset " << r.asset_number << "  (run " << r.run_id << ")\n";
  if (r.error) {
    o << "Run failed: " << r.error->message << "\n";
    return o.str();
  }
  const auto& s = *r.summary;
  o << "Overall condition: " << condition_label(s.overall_condition);
  if (r.verification)
    o << "  [rules: " << condition_label(r.verification->rule_category) << ", "
      << to_string(r.verification->resolution) << " on attempt " << r.verification->attempt << "]";
  o << "\n" << s.overall_condition_explanation << "\n\n";
  o << "Evidence-based observations\n";
  for (std::size_t i = 0; i < s.key_insights.size(); ++i) o << "  " << i + 1 << ". " << s.key_insights[i] << "\n";
  if (s.key_insights.empty()) o << "  (none)\n";
  o << "\nPrioritized recommendations\n";
  for (std::size_t i = 0; i < s.recommendations.size(); ++i)
    o << "  " << i + 1 << ". " << s.recommendations[i] << "\n";
  if (s.recommendations.empty()) o << "  (none)\n";
  char conf[32];
  std::snprintf(conf, sizeof conf, "%.2f", s.overall_confidence.value);
  o << "\nConfidence: " << conf;
  if (!s.overall_confidence.reasoning.empty()) o << " (" << s.overall_confidence.reasoning << ")";
  o << "\n";
  return o.str();
}

}  // namespace condinsight
