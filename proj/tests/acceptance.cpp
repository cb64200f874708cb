// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance [path-to-condinsight-cli]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "golden_rules.hpp"
#include "metrics_oracle.hpp"
#include "pipeline_support.hpp"

using namespace condinsight;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// 1 -------------------------------------------------------------------------

Outcome meter_oracle_suite() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  AbstractionConfig loose;
  loose.z_thresh = 1.5;
  loose.k = 1.0;
  loose.min_points = 3;
  int checked = 0;
  for (const AbstractionConfig& cfg : {AbstractionConfig{}, loose}) {
    for (int i = 0; i < 300; ++i) {
      const auto type = i % 2 ? MeterType::CONTINUOUS : MeterType::GAUGE;
      const auto values = random_values(rng, type, 1 + rng() % 10);
      const auto facts = abstract_meter(make_series(values, type), cfg);
      const auto diff = compare_with_oracle(facts, oracle_meter(values, type, cfg));
      if (!diff.empty()) o.fail("series " + std::to_string(checked) + ": " + diff);
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 5.0) o.fail("took " + fmt("%.2f", secs) + " s");
  if (o.pass) o.detail = std::to_string(checked) + " series match the direct evaluation in " + fmt("%.3f", secs) + " s";
  return o;
}

// 2 -------------------------------------------------------------------------

std::vector<std::pair<MeterEventKind, std::size_t>> index_set(const MeterFacts& f) {
  std::vector<std::pair<MeterEventKind, std::size_t>> out;
  for (const auto& e : f.events) out.emplace_back(e.kind, e.index);
  return out;
}

Outcome meter_invariants() {
  Outcome o;
  std::mt19937_64 rng(2002);
  AbstractionConfig cfg;
  cfg.z_thresh = 1.5;
  cfg.k = 1.0;
  cfg.min_points = 3;
  int gauges = 0, counters = 0;
  for (int i = 0; i < 1200; ++i) {
    const std::size_t n = 3 + rng() % 8;
    // Integer readings keep shifted sums exact.
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng() % 40);
    if (rng() % 2) v[rng() % n] += 200;
    const auto base = abstract_meter(make_series(v, MeterType::GAUGE), cfg);

    const double shift = static_cast<double>(static_cast<int>(rng() % 2001) - 1000);
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += shift;
    if (index_set(abstract_meter(make_series(shifted, MeterType::GAUGE), cfg)) != index_set(base))
      o.fail("shift by " + fmt("%g", shift) + " changed the anomaly set of series " + std::to_string(i));

    const double scale = std::ldexp(1.0, static_cast<int>(rng() % 13) - 6);
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= scale;
    if (index_set(abstract_meter(make_series(scaled, MeterType::GAUGE), cfg)) != index_set(base))
      o.fail("scale by " + fmt("%g", scale) + " changed the anomaly set of series " + std::to_string(i));
    ++gauges;
  }
  for (int i = 0; i < 1200; ++i) {
    const auto values = random_values(rng, MeterType::CONTINUOUS, 2 + rng() % 9);
    const auto series = make_series(values, MeterType::CONTINUOUS);
    const auto f = abstract_meter(series, cfg);
    const auto d = increments(series);
    long double sum = 0;
    for (double x : d) sum += x;
    const double expected = values.back() - values.front();
    const double scale = std::max(std::fabs(values.back()), std::fabs(values.front())) + 1.0;
    if (std::fabs(static_cast<double>(sum) - expected) > 1e-12 * scale)
      o.fail("increment sum differs from v_N - v_1 on series " + std::to_string(i));
    if (const auto* c = std::get_if<ContinuousSummary>(&f.summary); c && c->total_delta != expected)
      o.fail("total_delta differs from v_N - v_1 on series " + std::to_string(i));
    std::set<std::size_t> resets, rates;
    for (const auto& e : f.events) {
      if (e.kind == MeterEventKind::RESET) resets.insert(e.index);
      if (e.kind == MeterEventKind::RATE_ANOMALY) rates.insert(e.index);
    }
    for (auto idx : resets)
      if (rates.count(idx)) o.fail("index " + std::to_string(idx) + " is both a reset and a rate anomaly");
    ++counters;
  }
  if (o.pass)
    o.detail = std::to_string(gauges) + " gauge and " + std::to_string(counters) + " continuous series satisfy all four";
  return o;
}

// 3 -------------------------------------------------------------------------

// Near-degenerate draws, where another vertex costs almost the same, are not
// compared entrywise: the entropic term pulls the regularized minimiser off
// the vertex. They still have to beat the vertex on the objective.
Outcome uot_balanced_limit() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  UotConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.rho_source = cfg.rho_target = 1e4;
  cfg.max_iter = 200000;
  const double min_sharpness = 10 * cfg.epsilon;
  double worst = 0, worst_degenerate = 0;
  int compared = 0, degenerate = 0, drawn = 0;
  while (compared < 60) {
    const int n = 2 + drawn % 2;
    ++drawn;
    const auto c = random_matrix(rng, n, n);
    const auto w = random_mass(rng, n, true), m = random_mass(rng, n, true);
    const auto p = solve_uot(c, w, m, cfg);
    std::vector<std::vector<double>> cc(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cc[i][j] = c(i, j);
    const auto exact = exact_balanced_ot(cc, {w.data(), w.data() + n}, {m.data(), m.data() + n});
    Mat<double> vertex(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) vertex(i, j) = exact.plan[i][j];
    const double err = (p.matrix - vertex).cwiseAbs().maxCoeff();
    if (exact.sharpness >= min_sharpness) {
      worst = std::max(worst, err);
      ++compared;
    } else {
      worst_degenerate = std::max(worst_degenerate, err);
      ++degenerate;
    }
    const Mat<double> uniform = Mat<double>::Constant(n, n, w.sum() * m.sum() / (n * n));
    if (p.objective > uot_objective(c, uniform, w, m, cfg) + 1e-6)
      o.fail("instance " + std::to_string(drawn) + " is worse than the uniform plan");
    if (p.objective > uot_objective(c, vertex, w, m, cfg) + 1e-6)
      o.fail("instance " + std::to_string(drawn) + " is worse than the exact vertex");
  }
  if (worst > 1e-2) o.fail("max entry error " + fmt("%.3g", worst));
  const double secs = seconds_since(t0);
  if (secs >= 30.0) o.fail("took " + fmt("%.2f", secs) + " s");
  if (o.pass)
    o.detail = std::to_string(compared) + " instances within " + fmt("%.2e", worst) + " of the vertex; " +
               std::to_string(degenerate) + " near-degenerate draws (max deviation " + fmt("%.3f", worst_degenerate) +
               ") beat it on the objective; " + fmt("%.2f", secs) + " s";
  return o;
}

// 4 -------------------------------------------------------------------------

Outcome uot_structure() {
  Outcome o;
  std::mt19937_64 rng(4004);
  int monotone = 0;
  const int instances = 100;
  for (int t = 0; t < instances; ++t) {
    const int n = 2 + static_cast<int>(rng() % 3), k = 2 + static_cast<int>(rng() % 3);
    const auto c = random_matrix(rng, n, k);
    const auto w = random_mass(rng, n, false), m = random_mass(rng, k, false);
    double prev = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (double rho : {0.1, 1.0, 10.0, 100.0}) {
      UotConfig cfg;
      cfg.rho_source = cfg.rho_target = rho;
      cfg.max_iter = 10000;
      const auto p = solve_uot(c, w, m, cfg);
      if (!(p.matrix.array() >= 0).all()) o.fail("negative plan entry");
      const double kl = kl_divergence(p.source_marginal, w) + kl_divergence(p.target_marginal, m);
      ok = ok && kl <= prev + 1e-12;
      prev = kl;
    }
    monotone += ok;

    // Row permutation: reversing the sources must reverse the plan rows bit for bit.
    UotConfig cfg;
    cfg.epsilon = t % 2 ? 0.05 : 0.005;
    Mat<double> cp = c.colwise().reverse();
    Vec<double> wp = w.reverse();
    const auto a = solve_uot(c, w, m, cfg), b = solve_uot(cp, wp, m, cfg);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j)
        if (b.matrix(i, j) != a.matrix(n - 1 - i, j)) o.fail("row permutation is not exact on instance " + std::to_string(t));
  }
  if (monotone < 90) o.fail("marginal KL monotone on only " + std::to_string(monotone) + " of 100");
  if (o.pass) o.detail = "non-negative, permutation exact, KL monotone on " + std::to_string(monotone) + "/100";
  return o;
}

// 5 -------------------------------------------------------------------------

Outcome golden_table() {
  Outcome o;
  const auto cases = golden_rule_cases();
  std::set<std::string> ids;
  std::set<ConditionCategory> cats;
  int multi = 0;
  for (const auto& c : cases) {
    const auto v = classify_condition(c.facts, RuleConfig{});
    std::vector<std::string> got;
    for (const auto& r : v.triggered_rules) got.push_back(r.id);
    if (v.category != c.expected || got != c.expected_ids) o.fail("case '" + c.name + "'");
    ids.insert(got.begin(), got.end());
    cats.insert(v.category);
    multi += got.size() > 1;
  }
  if (cases.size() < 15) o.fail("only " + std::to_string(cases.size()) + " cases");
  for (auto id : kAllRuleIds)
    if (!ids.count(std::string(id))) o.fail(std::string("rule ") + std::string(id) + " never fires");
  if (cats.size() != 3) o.fail("not every category covered");
  if (multi == 0) o.fail("no multi-rule case");
  if (o.pass)
    o.detail = std::to_string(cases.size()) + " packets, " + std::to_string(ids.size()) + " rules, " +
               std::to_string(multi) + " multi-rule";
  return o;
}

// 6 -------------------------------------------------------------------------

Outcome governance() {
  Outcome o;
  FixedConditionGateway always_normal(ConditionCategory::NORMAL);
  int attention = 0;
  for (const auto& c : golden_rule_cases()) {
    if (c.expected != ConditionCategory::NEEDS_ATTENTION) continue;
    ++attention;
    const auto out = generate_insight(c.facts, PromptMode::CONSTRAINED, always_normal, RuleConfig{}, 1);
    if (out.summary.overall_condition != ConditionCategory::NEEDS_ATTENTION ||
        out.verification.resolution != Resolution::OVERRIDDEN)
      o.fail("case '" + c.name + "' was not overridden");
  }
  int runs = 0;
  const std::string mixes[] = {"sparse=0.2,emergency=0.2,delayed_pm=0.2,anomalous_meter=0.2", "emergency=0.5",
                               "sparse=0.6,anomalous_meter=0.3"};
  for (int i = 0; i < 3; ++i) {
    auto w = make_world("acceptance_gov" + std::to_string(i), synth_spec(100 + i, 15, mixes[i]));
    const auto rep = run_portfolio(w.context());
    std::vector<VerificationResult> vs;
    for (const auto& row : rep.rows) vs.push_back(*load_run(*w.store, row.run_id).verification);
    const double car = compute_car(vs);
    if (car != 1.0) o.fail("faithful mock CAR " + fmt("%.3f", car) + " on portfolio " + std::to_string(i));
    runs += static_cast<int>(vs.size());
  }
  if (o.pass)
    o.detail = std::to_string(attention) + "/" + std::to_string(attention) + " overridden; CAR 1.0 over " +
               std::to_string(runs) + " synthetic assets";
  return o;
}

// 7 -------------------------------------------------------------------------

Outcome metric_aggregation() {
  Outcome o;
  std::mt19937_64 rng(7007);
  const auto s = random_audits(rng, 20);
  const auto got = aggregate_metrics(s.audits, s.verifications, s.insight_counts);
  const auto want = naive_recount(s);
  if (got.ucr != want.ucr || got.hsr != want.hsr || got.cr != want.cr || got.rr != want.rr || got.mic != want.mic ||
      got.car != want.car)
    o.fail("aggregate differs from the naive recount");
  const auto row = table_one_constrained_all();
  const auto r = aggregate_metrics(row.audits, row.verifications, row.insight_counts);
  if (r.ucr != 0.008 || r.hsr != 0.71 || r.car != 0.91 || r.mic != 3.3)
    o.fail("constructed row gave UCR " + fmt("%g", r.ucr) + " HSR " + fmt("%g", r.hsr) + " CAR " + fmt("%g", r.car) +
           " MIC " + fmt("%g", r.mic));
  if (o.pass) o.detail = "20 audits match; constructed row gives 0.008 / 0.71 / 0.91 / 3.3";
  return o;
}

// 8 -------------------------------------------------------------------------

Outcome ablation_grid() {
  Outcome o;
  auto w = make_world("acceptance_grid", synth_spec(1, 20, "sparse=0.2,emergency=0.2,delayed_pm=0.2,anomalous_meter=0.2"));
  MockJudgeGateway judge;
  const auto rows = run_grid(w.context(), judge);
  const auto table = format_metrics_table(rows);
  if (rows.size() != 4) o.fail(std::to_string(rows.size()) + " rows");
  double naive = 0, constrained = 0;
  for (const auto& r : rows) {
    if (r.prompt_mode == "Constrained") {
      if (r.car != 1.0) o.fail("constrained CAR " + fmt("%g", r.car));
      constrained = r.car;
    } else {
      naive = std::max(naive, r.car);
    }
  }
  if (!(naive < constrained)) o.fail("naive CAR is not below constrained CAR");
  std::cout << table;
  if (o.pass) o.detail = "four rows; CAR naive " + fmt("%.2f", naive) + " < constrained " + fmt("%.2f", constrained);
  return o;
}

// 9 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::map<std::string, std::string> reproducible_runs(const fs::path& store_dir) {
  Store store(store_dir);
  std::map<std::string, std::string> out;
  for (const auto& [id, hash] : store.index(entity::kRuns)) out[id] = reproducible_view(load_run(store, id)).dump();
  return out;
}

Outcome end_to_end(const std::string& cli) {
  Outcome o;
  if (cli.empty()) {
    o.fail("no CLI path given");
    return o;
  }
  const auto dir = fresh_dir("acceptance_e2e");
  const std::string q = "\"" + cli + "\"";
  if (run(q + " --seed 1 synth --out \"" + (dir / "data").string() + "\"") != 0) o.fail("synth failed");
  for (const char* name : {"s1", "s2"}) {
    const std::string store = "\"" + (dir / name).string() + "\"";
    if (run(q + " --store " + store + " ingest \"" + (dir / "data").string() + "\"") != 0) o.fail("ingest failed");
    if (run(q + " --store " + store + " --gateway mock portfolio --output \"" +
            (dir / (std::string(name) + ".json")).string() + "\"") != 0)
      o.fail("portfolio failed");
  }
  if (!o.pass) return o;
  const auto r1 = reproducible_runs(dir / "s1"), r2 = reproducible_runs(dir / "s2");
  if (r1.empty() || r1 != r2) o.fail("run records differ between the two runs");
  if (slurp(dir / "s1.json") != slurp(dir / "s2.json")) o.fail("portfolio reports differ");

  const auto t0 = std::chrono::steady_clock::now();
  auto w = make_world("acceptance_100", synth_spec(9, 100, "sparse=0.2,emergency=0.1,delayed_pm=0.1,anomalous_meter=0.1"));
  const auto rep = run_portfolio(w.context());
  const double secs = seconds_since(t0);
  if (rep.rows.size() != 100 || rep.failed != 0) o.fail("100-asset portfolio incomplete");
  if (secs >= 60.0) o.fail("100-asset portfolio took " + fmt("%.1f", secs) + " s");
  if (o.pass)
    o.detail = std::to_string(r1.size()) + " identical run records across two stores; 100 assets in " +
               fmt("%.2f", secs) + " s";
  return o;
}

// 10 ------------------------------------------------------------------------

Outcome round_trip() {
  Outcome o;
  std::mt19937_64 rng(10010);
  const int n = 300;
  for (int i = 0; i < n; ++i) {
    const auto f = random_packet(rng);
    const auto text = serialize_asset_facts(f);
    const auto back = parse_asset_facts(text);
    if (!(back == f)) o.fail("packet " + std::to_string(i) + " does not round-trip");
    if (serialize_asset_facts(back) != text || serialize_asset_facts(f) != text)
      o.fail("packet " + std::to_string(i) + " serializes unstably");
  }
  if (o.pass) o.detail = std::to_string(n) + " random packets round-trip byte-stably";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"meter abstraction matches the direct evaluation", meter_oracle_suite},
      {"meter invariants", meter_invariants},
      {"UOT balanced limit", uot_balanced_limit},
      {"UOT structural properties", uot_structure},
      {"rule engine golden table", golden_table},
      {"governance guarantee", governance},
      {"metric aggregation", metric_aggregation},
      {"ablation grid", ablation_grid},
      {"end-to-end determinism", [&] { return end_to_end(cli); }},
      {"serialization round trip", round_trip},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.fail(std::string("exception: ") + e.what());
    }
    failures += !out.pass;
    std::cout << "criterion " << i + 1 << ": " << (out.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << "  ("
              << out.detail << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
