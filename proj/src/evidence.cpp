#include "condinsight/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <tuple>

namespace condinsight {

AssetDetails AssetDetails::from(const Asset& a) {
  return {a.asset_number, a.description, a.site_id,          a.priority,    a.status,
          a.is_running,   a.failure_code, a.asset_age_in_years, a.manufacturer};
}

// ---------------------------------------------------------------------------
// Composition

std::vector<FmeaFact> group_fmea_matches(const std::vector<FmeaMatch>& matches, std::size_t limit) {
  std::vector<const FmeaMatch*> sorted;
  for (const auto& m : matches) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(), [](const FmeaMatch* a, const FmeaMatch* b) {
    return std::tie(a->component, a->mechanism, a->rank, a->wonum) <
           std::tie(b->component, b->mechanism, b->rank, b->wonum);
  });

  std::vector<FmeaFact> groups;
  std::vector<std::vector<double>> masses;
  for (const FmeaMatch* m : sorted) {
    if (groups.empty() || groups.back().component != m->component ||
        groups.back().mechanism != m->mechanism) {
      groups.push_back({m->component, m->mechanism, m->failure_mode, {}, {}, 0.0});
      masses.emplace_back();
    }
    FmeaFact& g = groups.back();
    if (g.failure_mode.empty()) g.failure_mode = m->failure_mode;
    for (const auto& action : m->recommended_actions)
      if (std::find(g.actions.begin(), g.actions.end(), action) == g.actions.end())
        g.actions.push_back(action);
    g.matched_workorders.push_back(m->wonum);
    masses.back().push_back(m->mass);
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& wonums = groups[i].matched_workorders;
    std::sort(wonums.begin(), wonums.end());
    wonums.erase(std::unique(wonums.begin(), wonums.end()), wonums.end());
    std::sort(masses[i].begin(), masses[i].end());
    double total = 0.0;
    for (double x : masses[i]) total += x;
    groups[i].mass = total;
  }
  std::stable_sort(groups.begin(), groups.end(), [](const FmeaFact& a, const FmeaFact& b) {
    return a.mass > b.mass;  // ties keep (component, mechanism) order
  });
  if (groups.size() > limit) groups.resize(limit);
  return groups;
}

std::map<std::string, HealthScore> derive_health_scores(const WorkorderFacts& wo,
                                                        const std::vector<MeterFacts>& meters) {
  std::map<std::string, HealthScore> scores;
  if (const int total = wo.total(); total > 0) {
    const auto it = wo.counts.find(WorkOrderType::PREVENTIVE);
    const int pm = it == wo.counts.end() ? 0 : it->second;
    scores["preventive_ratio"] = {"preventive_ratio",
                                  static_cast<double>(pm) / total,
                                  0.0,
                                  1.0,
                                  "share of in-window work orders that are preventive"};
  }
  if (!meters.empty()) {
    const auto usable = std::count_if(meters.begin(), meters.end(),
                                      [](const MeterFacts& m) { return !m.insufficient(); });
    scores["meter_data_coverage"] = {
        "meter_data_coverage", static_cast<double>(usable) / static_cast<double>(meters.size()), 0.0,
        1.0, "share of meters with enough readings for behavioral abstraction"};
  }
  return scores;
}

AssetFacts build_asset_facts(const Asset& asset, const WorkorderFacts& wo,
                             std::vector<MeterFacts> meters, std::vector<Alert> alerts,
                             const std::vector<FmeaMatch>& fmea,
                             const std::map<std::string, HealthScore>& scores, int window_days,
                             Timestamp now, std::size_t fmea_limit) {
  auto mismatch = [&](const std::string& what, const std::string& other) {
    throw Error(ErrorCode::AssetMismatch,
                what + " belongs to " + other + ", not " + asset.asset_number);
  };
  if (!wo.asset_number.empty() && wo.asset_number != asset.asset_number)
    mismatch("workorder_facts", wo.asset_number);
  for (const auto& m : meters)
    if (m.asset_number != asset.asset_number) mismatch("meter " + m.meter_name, m.asset_number);
  for (const auto& a : alerts)
    if (a.asset_number != asset.asset_number) mismatch("alert " + a.alert_id, a.asset_number);
  for (const auto& [name, s] : scores) validate_health_score(s);

  AssetFacts f;
  f.asset_details_facts = AssetDetails::from(asset);
  f.workorder_facts = wo;
  f.workorder_facts.asset_number = asset.asset_number;
  std::sort(meters.begin(), meters.end(), [](const MeterFacts& a, const MeterFacts& b) {
    return std::tie(a.meter_name, a.meter_type) < std::tie(b.meter_name, b.meter_type);
  });
  f.meter_facts = std::move(meters);
  std::sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
    return a.raised_at != b.raised_at ? a.raised_at > b.raised_at : a.alert_id < b.alert_id;
  });
  f.alert_facts = std::move(alerts);
  f.fmea_facts = group_fmea_matches(fmea, fmea_limit);
  f.health_scores = scores;
  f.generated_at = now;
  f.evidence_window_days = window_days;
  quantize_reals(f);
  return f;
}

double quantize_real(double value) {
  if (!std::isfinite(value) || value == 0.0) return value == 0.0 ? 0.0 : value;
  return std::strtod(format_real(value).c_str(), nullptr);
}

void quantize_reals(AssetFacts& f) {
  auto q = [](double& x) { x = quantize_real(x); };
  q(f.asset_details_facts.asset_age_in_years);
  for (auto& m : f.meter_facts) {
    if (auto* g = std::get_if<GaugeSummary>(&m.summary)) {
      for (double* x : {&g->mean, &g->std, &g->min, &g->max, &g->latest.v}) q(*x);
    } else if (auto* c = std::get_if<ContinuousSummary>(&m.summary)) {
      for (double* x : {&c->increment_mean, &c->increment_std, &c->band_lo, &c->band_hi, &c->total_delta}) q(*x);
    }
    for (auto& e : m.events) {
      q(e.value);
      q(e.magnitude);
    }
  }
  for (auto& fm : f.fmea_facts) q(fm.mass);
  for (auto& [name, s] : f.health_scores) {
    q(s.value);
    q(s.min);
    q(s.max);
  }
}

// ---------------------------------------------------------------------------
// Canonical text

std::string format_real(double value) {
  if (!std::isfinite(value)) return "null";
  if (value == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

namespace {

void write_string(std::string& out, const std::string& s) {
  out += Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
}

void write_value(std::string& out, const Json& v);

void write_object(std::string& out, const Json& obj, const std::vector<std::string>& first) {
  out += '{';
  bool comma = false;
  auto emit = [&](const std::string& key, const Json& val) {
    if (comma) out += ',';
    comma = true;
    write_string(out, key);
    out += ':';
    write_value(out, val);
  };
  for (const auto& key : first)
    if (obj.contains(key)) emit(key, obj.at(key));
  for (auto it = obj.begin(); it != obj.end(); ++it)  // std::map order: lexicographic
    if (std::find(first.begin(), first.end(), it.key()) == first.end()) emit(it.key(), it.value());
  out += '}';
}

void write_value(std::string& out, const Json& v) {
  switch (v.type()) {
    case Json::value_t::object:
      write_object(out, v, {});
      break;
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        write_value(out, v[i]);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float:
      out += format_real(v.get<double>());
      break;
    case Json::value_t::string:
      write_string(out, v.get_ref<const std::string&>());
      break;
    default:
      out += v.dump();
  }
}

Json opt(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::optional<std::string> opt_string(const Json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<std::string>();
}

const Json& field(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    throw Error(ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
  return doc.at(key);
}

template <typename T>
T get(const Json& doc, const char* key) {
  try {
    return field(doc, key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "': " + e.what());
  }
}

Json to_json(const WorkOrderDigest& d) {
  return Json{{"wonum", d.wonum},
              {"wo_type", std::string(to_string(d.wo_type))},
              {"status", std::string(to_string(d.status))},
              {"reported_date", d.reported_date.to_string()},
              {"days_delayed", d.days_delayed},
              {"description_excerpt", d.description_excerpt},
              {"problem_code", opt(d.problem_code)}};
}

WorkOrderDigest digest_from_json(const Json& j) {
  WorkOrderDigest d;
  d.wonum = get<std::string>(j, "wonum");
  d.wo_type = TypeCodeTable().lookup(get<std::string>(j, "wo_type"));
  d.status = parse_work_order_status(get<std::string>(j, "status"));
  d.reported_date = Timestamp::parse(get<std::string>(j, "reported_date"));
  d.days_delayed = get<std::int64_t>(j, "days_delayed");
  d.description_excerpt = get<std::string>(j, "description_excerpt");
  d.problem_code = opt_string(j, "problem_code");
  return d;
}

Json to_json(const MeterEvent& e) {
  return Json{{"kind", std::string(to_string(e.kind))},
              {"index", e.index},
              {"timestamp", e.timestamp.to_string()},
              {"value", e.value},
              {"magnitude", e.magnitude}};
}

MeterEvent event_from_json(const Json& j) {
  return {parse_meter_event_kind(get<std::string>(j, "kind")), get<std::size_t>(j, "index"),
          Timestamp::parse(get<std::string>(j, "timestamp")), get<double>(j, "value"),
          get<double>(j, "magnitude")};
}

Json to_json(const Alert& a) { return to_record(a); }

Json to_json(const FmeaFact& f) {
  return Json{{"component", f.component},
              {"mechanism", f.mechanism},
              {"failure_mode", f.failure_mode},
              {"actions", f.actions},
              {"matched_workorders", f.matched_workorders},
              {"mass", f.mass}};
}

FmeaFact fmea_fact_from_json(const Json& j) {
  return {get<std::string>(j, "component"), get<std::string>(j, "mechanism"),
          get<std::string>(j, "failure_mode"), get<std::vector<std::string>>(j, "actions"),
          get<std::vector<std::string>>(j, "matched_workorders"), get<double>(j, "mass")};
}

Json to_json(const AssetDetails& a) {
  return Json{{"asset_number", a.asset_number},
              {"description", a.description},
              {"site_ID", a.site_id},
              {"priority", a.priority},
              {"status", std::string(to_string(a.status))},
              {"is_running", a.is_running},
              {"failure_code", opt(a.failure_code)},
              {"asset_age_in_years", a.asset_age_in_years},
              {"manufacturer", opt(a.manufacturer)}};
}

AssetDetails asset_details_from_json(const Json& j) {
  AssetDetails a;
  a.asset_number = get<std::string>(j, "asset_number");
  a.description = get<std::string>(j, "description");
  a.site_id = get<std::string>(j, "site_ID");
  a.priority = get<int>(j, "priority");
  a.status = parse_asset_status(get<std::string>(j, "status"));
  a.is_running = get<bool>(j, "is_running");
  a.failure_code = opt_string(j, "failure_code");
  a.asset_age_in_years = get<double>(j, "asset_age_in_years");
  a.manufacturer = opt_string(j, "manufacturer");
  return a;
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  write_value(out, value);
  return out;
}

Json to_json(const WorkorderFacts& f) {
  Json counts = Json::object(), status_counts = Json::object();
  for (const auto& [t, c] : f.counts) counts[std::string(to_string(t))] = c;
  for (const auto& [s, c] : f.status_counts) status_counts[std::string(to_string(s))] = c;
  Json pm = Json::array(), other = Json::array(), patterns = Json::array();
  for (const auto& d : f.preventive_workorders) pm.push_back(to_json(d));
  for (const auto& d : f.corrective_and_other_workorders) other.push_back(to_json(d));
  for (const auto& p : f.recurring_patterns)
    patterns.push_back(Json{{"kind", p.kind == PatternKind::PROBLEM_CODE ? "problem_code" : "token"},
                            {"token_or_code", p.token_or_code},
                            {"occurrence_count", p.occurrence_count},
                            {"example_wonums", p.example_wonums}});
  return Json{{"asset_number", f.asset_number},
              {"counts", std::move(counts)},
              {"status_counts", std::move(status_counts)},
              {"open_count", f.open_count},
              {"delayed_count", f.delayed_count},
              {"emergency_count", f.emergency_count},
              {"preventive_workorders", std::move(pm)},
              {"corrective_and_other_workorders", std::move(other)},
              {"recurring_patterns", std::move(patterns)},
              {"window_days", f.window_days}};
}

WorkorderFacts workorder_facts_from_json(const Json& j) {
  WorkorderFacts f;
  f.asset_number = get<std::string>(j, "asset_number");
  const TypeCodeTable codes;
  for (const auto& [k, v] : field(j, "counts").items()) f.counts[codes.lookup(k)] = v.get<int>();
  for (const auto& [k, v] : field(j, "status_counts").items())
    f.status_counts[parse_work_order_status(k)] = v.get<int>();
  f.open_count = get<int>(j, "open_count");
  f.delayed_count = get<int>(j, "delayed_count");
  f.emergency_count = get<int>(j, "emergency_count");
  for (const auto& d : field(j, "preventive_workorders")) f.preventive_workorders.push_back(digest_from_json(d));
  for (const auto& d : field(j, "corrective_and_other_workorders"))
    f.corrective_and_other_workorders.push_back(digest_from_json(d));
  for (const auto& p : field(j, "recurring_patterns")) {
    MaintenancePattern mp;
    mp.kind = get<std::string>(p, "kind") == "problem_code" ? PatternKind::PROBLEM_CODE : PatternKind::TOKEN;
    mp.token_or_code = get<std::string>(p, "token_or_code");
    mp.occurrence_count = get<int>(p, "occurrence_count");
    mp.example_wonums = get<std::vector<std::string>>(p, "example_wonums");
    f.recurring_patterns.push_back(std::move(mp));
  }
  f.window_days = get<int>(j, "window_days");
  return f;
}

Json to_json(const MeterFacts& m) {
  Json summary = nullptr;
  if (const auto* g = std::get_if<GaugeSummary>(&m.summary)) {
    summary = Json{{"mean", g->mean},
                   {"std", g->std},
                   {"min", g->min},
                   {"max", g->max},
                   {"latest", Json{{"timestamp", g->latest.t.to_string()}, {"value", g->latest.v}}},
                   {"n", g->n}};
  } else if (const auto* c = std::get_if<ContinuousSummary>(&m.summary)) {
    summary = Json{{"increment_mean", c->increment_mean},
                   {"increment_std", c->increment_std},
                   {"normal_band", Json::array({c->band_lo, c->band_hi})},
                   {"total_delta", c->total_delta},
                   {"n_increments", c->n_increments}};
  }
  Json events = Json::array();
  for (const auto& e : m.events) events.push_back(to_json(e));
  return Json{{"asset_number", m.asset_number},
              {"meter_name", m.meter_name},
              {"meter_type", std::string(to_string(m.meter_type))},
              {"unit", m.unit},
              {"n", m.n},
              {"status", m.insufficient() ? "insufficient_data" : "ok"},
              {"summary", std::move(summary)},
              {"events", std::move(events)}};
}

MeterFacts meter_facts_from_json(const Json& j) {
  MeterFacts m;
  m.asset_number = get<std::string>(j, "asset_number");
  m.meter_name = get<std::string>(j, "meter_name");
  m.meter_type = parse_meter_type(get<std::string>(j, "meter_type"));
  m.unit = get<std::string>(j, "unit");
  m.n = get<std::size_t>(j, "n");
  const Json& s = field(j, "summary");
  if (!s.is_null()) {
    if (m.meter_type == MeterType::GAUGE) {
      const Json& latest = field(s, "latest");
      m.summary = GaugeSummary{get<double>(s, "mean"),
                               get<double>(s, "std"),
                               get<double>(s, "min"),
                               get<double>(s, "max"),
                               {Timestamp::parse(get<std::string>(latest, "timestamp")),
                                get<double>(latest, "value")},
                               get<std::size_t>(s, "n")};
    } else {
      const auto band = get<std::vector<double>>(s, "normal_band");
      if (band.size() != 2) throw Error(ErrorCode::SchemaViolation, "normal_band needs two values");
      m.summary = ContinuousSummary{get<double>(s, "increment_mean"), get<double>(s, "increment_std"),
                                    band[0],
                                    band[1],
                                    get<double>(s, "total_delta"),
                                    get<std::size_t>(s, "n_increments")};
    }
  }
  for (const auto& e : field(j, "events")) m.events.push_back(event_from_json(e));
  return m;
}

Json to_json(const AssetFacts& f) {
  Json meters = Json::array(), alerts = Json::array(), fmea = Json::array();
  for (const auto& m : f.meter_facts) meters.push_back(to_json(m));
  for (const auto& a : f.alert_facts) alerts.push_back(to_json(a));
  for (const auto& x : f.fmea_facts) fmea.push_back(to_json(x));
  Json scores = Json::object();
  for (const auto& [name, s] : f.health_scores)
    scores[name] = Json{{"value", s.value}, {"range", Json::array({s.min, s.max})}, {"meaning", s.meaning}};
  return Json{{"asset_facts", Json{{"asset_details_facts", to_json(f.asset_details_facts)},
                                   {"workorder_facts", to_json(f.workorder_facts)},
                                   {"meter_facts", std::move(meters)},
                                   {"alert_facts", std::move(alerts)},
                                   {"fmea_facts", std::move(fmea)},
                                   {"health_scores", std::move(scores)}}},
              {"generated_at", f.generated_at.to_string()},
              {"evidence_window_days", f.evidence_window_days},
              {"schema_version", f.schema_version}};
}

AssetFacts asset_facts_from_json(const Json& doc) {
  try {
    AssetFacts f;
    const Json& af = field(doc, "asset_facts");
    for (const char* key : kAssetFactsKeys) field(af, key);
    f.asset_details_facts = asset_details_from_json(af.at("asset_details_facts"));
    f.workorder_facts = workorder_facts_from_json(af.at("workorder_facts"));
    for (const auto& m : af.at("meter_facts")) f.meter_facts.push_back(meter_facts_from_json(m));
    for (const auto& a : af.at("alert_facts")) f.alert_facts.push_back(validate_alert(a));
    for (const auto& x : af.at("fmea_facts")) f.fmea_facts.push_back(fmea_fact_from_json(x));
    for (const auto& [name, s] : af.at("health_scores").items()) {
      const auto range = get<std::vector<double>>(s, "range");
      if (range.size() != 2) throw Error(ErrorCode::SchemaViolation, "range needs two values");
      f.health_scores[name] = {name, get<double>(s, "value"), range[0], range[1],
                               get<std::string>(s, "meaning")};
    }
    f.generated_at = Timestamp::parse(get<std::string>(doc, "generated_at"));
    f.evidence_window_days = get<int>(doc, "evidence_window_days");
    f.schema_version = get<std::string>(doc, "schema_version");
    return f;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaViolation) throw;
    throw Error(ErrorCode::SchemaViolation, e.what());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
}

std::string serialize_asset_facts(const AssetFacts& facts) {
  const Json doc = to_json(facts);
  std::string out = "{\"asset_facts\":";
  write_object(out, doc.at("asset_facts"),
               std::vector<std::string>(std::begin(kAssetFactsKeys), std::end(kAssetFactsKeys)));
  for (const char* key : {"evidence_window_days", "generated_at", "schema_version"}) {
    out += ',';
    write_string(out, key);
    out += ':';
    write_value(out, doc.at(key));
  }
  out += '}';
  return out;
}

AssetFacts parse_asset_facts(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  return asset_facts_from_json(doc);
}

}  // namespace condinsight
