#include "condinsight/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "condinsight/evidence.hpp"
#include "condinsight/hash.hpp"
#include "condinsight/judge.hpp"

namespace condinsight {

std::string_view to_string(EvidenceScope s) { return s == EvidenceScope::ALL ? "ALL" : "WO_ONLY"; }

EvidenceScope parse_evidence_scope(std::string_view s) {
  const auto k = to_lower(trim(s));
  if (k == "all") return EvidenceScope::ALL;
  if (k == "wo" || k == "wo_only") return EvidenceScope::WO_ONLY;
  throw Error(ErrorCode::InvalidEnum, "evidence scope '" + std::string(s) + "'");
}

std::string_view scope_label(EvidenceScope s) { return s == EvidenceScope::ALL ? "All" : "WO"; }

std::string_view to_string(GatewayKind k) {
  switch (k) {
    case GatewayKind::MOCK: return "mock";
    case GatewayKind::REMOTE: return "remote";
    case GatewayKind::REPLAY: return "replay";
  }
  return "";
}

GatewayKind parse_gateway_kind(std::string_view s) {
  const auto k = to_lower(trim(s));
  if (k == "mock") return GatewayKind::MOCK;
  if (k == "remote") return GatewayKind::REMOTE;
  if (k == "replay") return GatewayKind::REPLAY;
  throw Error(ErrorCode::InvalidEnum, "gateway '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
  abstraction.validate();
  uot.validate();
  rules.validate();
  if (window_days < 1) throw Error(ErrorCode::ConfigError, "window_days must be >= 1");
  if (top_k_fmea < 1) throw Error(ErrorCode::ConfigError, "top_k_fmea must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
  if (min_support < 1) throw Error(ErrorCode::ConfigError, "min_support must be >= 1");
  if (workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
  if (recency_tau_days && !(*recency_tau_days > 0))
    throw Error(ErrorCode::ConfigError, "recency_tau_days must be > 0");
  if (embedding.dimension < 1) throw Error(ErrorCode::ConfigError, "embedding dimension must be >= 1");
  for (const auto* g : {&gateway, &judge_gateway}) {
    if (g->kind == GatewayKind::REMOTE && g->endpoint.empty())
      throw Error(ErrorCode::ConfigError, "remote gateway needs an endpoint");
    if (g->kind == GatewayKind::REPLAY && g->replay_dir.empty())
      throw Error(ErrorCode::ConfigError, "replay gateway needs replay_dir");
    if (g->max_in_flight < 1) throw Error(ErrorCode::ConfigError, "max_in_flight must be >= 1");
  }
}

namespace {

using Value = std::variant<std::string, double, bool>;

Value parse_value(const std::string& raw, int line) {
  if (raw.size() >= 2 && (raw.front() == '"' || raw.front() == '\'') && raw.back() == raw.front()) {
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && raw.front() == '"' && i + 2 < raw.size()) {
        const char n = raw[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else {
        out.push_back(raw[i]);
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  try {
    std::size_t used = 0;
    const double d = std::stod(raw, &used);
    if (used == raw.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
}

/// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

struct Setter {
  std::function<void(PipelineConfig&, const Value&)> apply;
};

double num(const Value& v, const std::string& key) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorCode::ConfigError, key + " must be a number");
}

int integer(const Value& v, const std::string& key) {
  const double d = num(v, key);
  if (d != static_cast<double>(static_cast<long long>(d)))
    throw Error(ErrorCode::ConfigError, key + " must be an integer");
  return static_cast<int>(d);
}

std::size_t count(const Value& v, const std::string& key) {
  const int i = integer(v, key);
  if (i < 0) throw Error(ErrorCode::ConfigError, key + " must be >= 0");
  return static_cast<std::size_t>(i);
}

std::string text(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorCode::ConfigError, key + " must be a string");
}

bool flag(const Value& v, const std::string& key) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorCode::ConfigError, key + " must be true or false");
}

void add_gateway_keys(std::map<std::string, Setter>& t, const std::string& section,
                      GatewayConfig PipelineConfig::*member) {
  const std::string p = section + ".";
  t[p + "kind"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).kind = parse_gateway_kind(text(v, p + "kind")); }};
  t[p + "endpoint"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).endpoint = text(v, p + "endpoint"); }};
  t[p + "model"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).model = text(v, p + "model"); }};
  t[p + "replay_dir"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).replay_dir = text(v, p + "replay_dir"); }};
  t[p + "record_dir"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).record_dir = text(v, p + "record_dir"); }};
  t[p + "timeout_seconds"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).timeout_seconds = integer(v, p + "timeout_seconds"); }};
  t[p + "max_in_flight"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).max_in_flight = integer(v, p + "max_in_flight"); }};
  t[p + "max_attempts"] = {[=](PipelineConfig& c, const Value& v) { (c.*member).max_attempts = integer(v, p + "max_attempts"); }};
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["abstraction.z_thresh"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.z_thresh = num(v, "z_thresh"); }};
    t["abstraction.k"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.k = num(v, "k"); }};
    t["abstraction.eps_flat"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.eps_flat = num(v, "eps_flat"); }};
    t["abstraction.min_points"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.min_points = count(v, "min_points"); }};
    t["abstraction.baseline_window"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.baseline_window = count(v, "baseline_window"); }};
    t["abstraction.flat_run_min"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.flat_run_min = count(v, "flat_run_min"); }};
    t["abstraction.exclude_resets_from_band"] = {[](PipelineConfig& c, const Value& v) { c.abstraction.exclude_resets_from_band = flag(v, "exclude_resets_from_band"); }};

    t["uot.epsilon"] = {[](PipelineConfig& c, const Value& v) { c.uot.epsilon = num(v, "epsilon"); }};
    t["uot.rho_source"] = {[](PipelineConfig& c, const Value& v) { c.uot.rho_source = num(v, "rho_source"); }};
    t["uot.rho_target"] = {[](PipelineConfig& c, const Value& v) { c.uot.rho_target = num(v, "rho_target"); }};
    t["uot.max_iter"] = {[](PipelineConfig& c, const Value& v) { c.uot.max_iter = integer(v, "max_iter"); }};
    t["uot.tol"] = {[](PipelineConfig& c, const Value& v) { c.uot.tol = num(v, "tol"); }};
    t["uot.log_domain_below"] = {[](PipelineConfig& c, const Value& v) { c.uot.log_domain_below = num(v, "log_domain_below"); }};

    t["rules.min_workorders_for_assessment"] = {[](PipelineConfig& c, const Value& v) { c.rules.min_workorders_for_assessment = integer(v, "min_workorders_for_assessment"); }};
    t["rules.min_meters_for_assessment"] = {[](PipelineConfig& c, const Value& v) { c.rules.min_meters_for_assessment = integer(v, "min_meters_for_assessment"); }};
    t["rules.delayed_wo_threshold"] = {[](PipelineConfig& c, const Value& v) { c.rules.delayed_wo_threshold = integer(v, "delayed_wo_threshold"); }};
    t["rules.lookback_days"] = {[](PipelineConfig& c, const Value& v) { c.rules.lookback_days = integer(v, "lookback_days"); }};

    t["pipeline.prompt_mode"] = {[](PipelineConfig& c, const Value& v) { c.prompt_mode = parse_prompt_mode(text(v, "prompt_mode")); }};
    t["pipeline.evidence_scope"] = {[](PipelineConfig& c, const Value& v) { c.evidence_scope = parse_evidence_scope(text(v, "evidence_scope")); }};
    t["pipeline.window_days"] = {[](PipelineConfig& c, const Value& v) { c.window_days = integer(v, "window_days"); }};
    t["pipeline.top_k_fmea"] = {[](PipelineConfig& c, const Value& v) { c.top_k_fmea = integer(v, "top_k_fmea"); }};
    t["pipeline.max_retries"] = {[](PipelineConfig& c, const Value& v) { c.max_retries = integer(v, "max_retries"); }};
    t["pipeline.min_support"] = {[](PipelineConfig& c, const Value& v) { c.min_support = integer(v, "min_support"); }};
    t["pipeline.recency_tau_days"] = {[](PipelineConfig& c, const Value& v) { c.recency_tau_days = num(v, "recency_tau_days"); }};
    t["pipeline.as_of"] = {[](PipelineConfig& c, const Value& v) { c.as_of = Timestamp::parse(text(v, "as_of")); }};
    t["pipeline.store_dir"] = {[](PipelineConfig& c, const Value& v) { c.store_dir = text(v, "store_dir"); }};
    t["pipeline.workers"] = {[](PipelineConfig& c, const Value& v) { c.workers = integer(v, "workers"); }};

    t["embedding.kind"] = {[](PipelineConfig& c, const Value& v) {
      const auto k = to_lower(text(v, "embedding.kind"));
      if (k == "hashed") c.embedding.kind = EmbeddingKind::HASHED;
      else if (k == "remote") c.embedding.kind = EmbeddingKind::REMOTE;
      else throw Error(ErrorCode::ConfigError, "embedding.kind must be hashed or remote");
    }};
    t["embedding.endpoint"] = {[](PipelineConfig& c, const Value& v) { c.embedding.endpoint = text(v, "embedding.endpoint"); }};
    t["embedding.dimension"] = {[](PipelineConfig& c, const Value& v) { c.embedding.dimension = integer(v, "embedding.dimension"); }};

    add_gateway_keys(t, "gateway", &PipelineConfig::gateway);
    add_gateway_keys(t, "judge_gateway", &PipelineConfig::judge_gateway);
    return t;
  }();
  return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text_in) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text_in)};
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end())
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second.apply(cfg, parse_value(trim(line.substr(eq + 1)), line_no));
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_environment(PipelineConfig& cfg) {
  if (const char* t = std::getenv("GATEWAY_TOKEN")) cfg.gateway.token = t;
  if (const char* t = std::getenv("JUDGE_GATEWAY_TOKEN")) cfg.judge_gateway.token = t;
}

namespace {

Json gateway_json(const GatewayConfig& g) {
  return Json{{"kind", std::string(to_string(g.kind))}, {"model", g.model}, {"endpoint", g.endpoint}};
}

}  // namespace

Json to_json(const PipelineConfig& c) {
  const auto& a = c.abstraction;
  Json abstraction{{"z_thresh", a.z_thresh},
                   {"k", a.k},
                   {"eps_flat", a.eps_flat},
                   {"min_points", a.min_points},
                   {"flat_run_min", a.flat_run_min},
                   {"exclude_resets_from_band", a.exclude_resets_from_band},
                   {"baseline_window", a.baseline_window ? Json(*a.baseline_window) : Json(nullptr)}};
  Json uot{{"epsilon", c.uot.epsilon},     {"rho_source", c.uot.rho_source},
           {"rho_target", c.uot.rho_target}, {"max_iter", c.uot.max_iter},
           {"tol", c.uot.tol},             {"log_domain_below", c.uot.log_domain_below}};
  Json rules{{"min_workorders_for_assessment", c.rules.min_workorders_for_assessment},
             {"min_meters_for_assessment", c.rules.min_meters_for_assessment},
             {"delayed_wo_threshold", c.rules.delayed_wo_threshold},
             {"lookback_days", c.rules.lookback_days}};
  return Json{{"abstraction", abstraction},
              {"uot", uot},
              {"rules", rules},
              {"prompt_mode", std::string(to_string(c.prompt_mode))},
              {"evidence_scope", std::string(to_string(c.evidence_scope))},
              {"gateway", gateway_json(c.gateway)},
              {"embedding",
               Json{{"kind", c.embedding.kind == EmbeddingKind::HASHED ? "hashed" : "remote"},
                    {"endpoint", c.embedding.endpoint},
                    {"dimension", c.embedding.dimension}}},
              {"window_days", c.window_days},
              {"top_k_fmea", c.top_k_fmea},
              {"max_retries", c.max_retries},
              {"min_support", c.min_support},
              {"recency_tau_days", c.recency_tau_days ? Json(*c.recency_tau_days) : Json(nullptr)},
              {"as_of", c.as_of ? Json(c.as_of->to_string()) : Json(nullptr)}};
}

std::string config_digest(const PipelineConfig& cfg) { return sha256_hex(canonical_dump(to_json(cfg))); }

std::shared_ptr<LlmGateway> make_gateway(const GatewayConfig& g, const RuleConfig& rules, bool judge) {
  std::shared_ptr<LlmGateway> gw;
  switch (g.kind) {
    case GatewayKind::MOCK:
      if (judge) gw = std::make_shared<MockJudgeGateway>();
      else gw = std::make_shared<MockGateway>(rules);
      break;
    case GatewayKind::REPLAY:
      gw = std::make_shared<ReplayGateway>(g.replay_dir);
      break;
    case GatewayKind::REMOTE: {
      RemoteGatewayConfig rc;
      rc.endpoint = g.endpoint;
      rc.model = g.model;
      rc.token = g.token;
      rc.timeout_seconds = g.timeout_seconds;
      rc.max_in_flight = g.max_in_flight;
      rc.max_attempts = g.max_attempts;
      gw = std::make_shared<RemoteGateway>(rc);
      break;
    }
  }
  if (!g.record_dir.empty()) gw = std::make_shared<RecordingGateway>(gw, g.record_dir);
  return gw;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const PipelineConfig& cfg) {
  if (cfg.embedding.kind == EmbeddingKind::REMOTE)
    return std::make_shared<RemoteEmbeddingProvider>(cfg.embedding.endpoint, cfg.gateway.token,
                                                     cfg.embedding.dimension);
  return std::make_shared<HashedEmbeddingProvider>(cfg.embedding.dimension);
}

}  // namespace condinsight
