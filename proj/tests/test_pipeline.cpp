#include <gtest/gtest.h>

#include <fstream>

#include "pipeline_support.hpp"

using namespace condinsight;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidValue;
}

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const char* kAssetsCsv =
    "asset_number,description,site_id,asset_class,priority,status,is_running\n"
    "P1,Feed pump,S1,PUMP,2,OPERATING,true\n";

const char* kOrdersCsv =
    "wonum,asset_number,wo_type,status,reported_date,completion_date,description\n"
    "W1,P1,PM,COMPLETED,2024-01-05,2024-01-06,lubricate bearing\n"
    "W2,P1,CM,COMPLETED,2024-02-05,2024-02-07,\"replace seal, north side\"\n"
    "W3,P1,EM,OPEN,2024-03-01,,\"motor \"\"tripped\"\"\"\n";

}  // namespace

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
  const auto cfg = parse_config(
      "# comment\n[abstraction]\nz_thresh = 2.5\n[pipeline]\nprompt_mode = \"naive\"  # trailing\n"
      "evidence_scope = \"wo\"\nas_of = \"2024-05-01\"\n[rules]\ndelayed_wo_threshold = 3\n");
  EXPECT_DOUBLE_EQ(cfg.abstraction.z_thresh, 2.5);
  EXPECT_EQ(cfg.prompt_mode, PromptMode::NAIVE);
  EXPECT_EQ(cfg.evidence_scope, EvidenceScope::WO_ONLY);
  EXPECT_EQ(cfg.rules.delayed_wo_threshold, 3);
  ASSERT_TRUE(cfg.as_of.has_value());
  EXPECT_EQ(code_of([] { parse_config("[pipeline]\nbogus = 1\n"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("[rules]\nlookback_days = \"x\"\n"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("[pipeline\n"); }), ErrorCode::ConfigError);
}

TEST(Config, DigestTracksBehaviourButNotSecrets) {
  PipelineConfig a, b;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.prompt_mode = PromptMode::NAIVE;
  EXPECT_NE(config_digest(a), config_digest(b));
  PipelineConfig c;
  c.gateway.token = "secret";
  c.store_dir = "/elsewhere";
  EXPECT_EQ(config_digest(a), config_digest(c));
  EXPECT_EQ(to_json(c).dump().find("secret"), std::string::npos);
}

TEST(Csv, QuotesAndLineNumbers) {
  const auto rows = parse_csv("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\"multi\nline\",z\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x,1", "say \"hi\""}));
  EXPECT_EQ(rows[2].fields[0], "multi\nline");
  EXPECT_EQ(rows[2].line, 3);
  for (std::string s : {"plain", "a,b", "q\"q", "n\nl"})
    EXPECT_EQ(parse_csv(csv_escape(s) + "\n").at(0).fields.at(0), s);
}

TEST(Store, ContentAddressedAndIdempotent) {
  Store s(fresh_dir("store_basic"));
  const Json doc{{"b", 1}, {"a", "x"}};
  const auto h = s.put(doc);
  EXPECT_EQ(s.put(Json{{"a", "x"}, {"b", 1}}), h);
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(s.get(h), doc);
  s.bind("things", "k", h);
  EXPECT_EQ(s.lookup("things", "k"), h);
  EXPECT_FALSE(s.lookup("things", "missing"));
  Store reopened(s.root());
  EXPECT_EQ(reopened.lookup("things", "k"), h);
  EXPECT_EQ(code_of([&] { s.get(std::string(64, '0')); }), ErrorCode::UnreadableFile);
}

TEST(Ingest, AcceptsRejectsAndSkipsDuplicates) {
  const auto dir = fresh_dir("ingest");
  Store store(dir / "store");
  const auto assets = write(dir / "assets.csv", kAssetsCsv);
  const auto orders = write(dir / "orders.csv", kOrdersCsv);
  auto r = ingest({assets, orders}, store);
  ASSERT_EQ(r.files.size(), 2u);
  EXPECT_EQ(r.files[0].kind, InputKind::ASSETS);
  EXPECT_EQ(r.files[1].kind, InputKind::WORK_ORDERS);
  EXPECT_EQ(r.files[1].accepted, 3);
  EXPECT_EQ(r.rejected(), 0);

  r = ingest({orders}, store);
  EXPECT_EQ(r.files[0].accepted, 0);
  EXPECT_EQ(r.files[0].duplicates_skipped, 3);

  const auto evidence = load_evidence(store);
  ASSERT_EQ(evidence.workorders.at("P1").size(), 3u);
  EXPECT_EQ(evidence.workorders.at("P1")[2].description, "motor \"tripped\"");

  const auto bad = write(dir / "bad.csv",
                         "wonum,asset_number,wo_type,status,reported_date,completion_date,description\n"
                         "B1,P1,PM,COMPLETED,2024-01-05,2024-01-06,ok\n"
                         "B2,P1,PM,OPEN,2024-13-45,,bad date\n"
                         "B3,P1,PM,COMPLETED,2024-01-07,2024-01-08,ok\n");
  r = ingest({bad}, store);
  EXPECT_EQ(r.files[0].accepted, 2);
  ASSERT_EQ(r.files[0].rejects.size(), 1u);
  EXPECT_EQ(r.files[0].rejects[0].line, 3);
  EXPECT_FALSE(r.files[0].rejects[0].reason.empty());
  EXPECT_TRUE(fs::exists(store.rejects_dir() / "bad.csv.jsonl"));
}

TEST(Ingest, UnreadableAndUnrecognisedFiles) {
  const auto dir = fresh_dir("ingest_bad");
  Store store(dir / "store");
  EXPECT_EQ(code_of([&] { ingest({dir / "missing.csv"}, store); }), ErrorCode::UnreadableFile);
  const auto odd = write(dir / "odd.csv", "foo,bar\n1,2\n");
  EXPECT_EQ(code_of([&] { ingest({odd}, store); }), ErrorCode::FormatError);
}

TEST(RunInsight, MockRunIsAcceptedAndStored) {
  auto w = make_world("run_insight", synth_spec(3, 5, "emergency=0.4"));
  const auto ctx = w.context();
  const auto& truth = w.portfolio.truth.front();
  const auto rec = run_insight(truth.asset_number, ctx);
  ASSERT_FALSE(rec.error) << rec.error->message;
  ASSERT_TRUE(rec.verification.has_value());
  EXPECT_EQ(rec.verification->resolution, Resolution::ACCEPTED);
  EXPECT_EQ(rec.summary->overall_condition, truth.expected);
  EXPECT_EQ(rec.run_id, make_run_id(truth.asset_number, rec.config_digest, rec.facts));
  EXPECT_EQ(reproducible_view(load_run(*w.store, rec.run_id)), reproducible_view(rec));
  EXPECT_EQ(reproducible_view(run_record_from_json(to_json(rec))), reproducible_view(rec));
  EXPECT_FALSE(format_insight_report(rec).empty());
  EXPECT_EQ(code_of([&] { run_insight("NO_SUCH_ASSET", ctx); }), ErrorCode::UnknownAsset);
}

TEST(RunInsight, WorkOrderScopeDropsMetersAndFmea) {
  PipelineConfig cfg;
  cfg.evidence_scope = EvidenceScope::WO_ONLY;
  auto w = make_world("wo_scope", synth_spec(4, 5, "anomalous_meter=1"), cfg);
  const auto ctx = w.context();
  const auto f = build_facts_for(w.portfolio.truth[0].asset_number, w.evidence, ctx.cfg, ctx.now, *w.embedder);
  EXPECT_TRUE(f.meter_facts.empty());
  EXPECT_TRUE(f.fmea_facts.empty());

  PipelineConfig all;
  auto w2 = make_world("all_scope", synth_spec(4, 5, "anomalous_meter=1"), all);
  const auto ctx2 = w2.context();
  EXPECT_FALSE(
      build_facts_for(w2.portfolio.truth[0].asset_number, w2.evidence, ctx2.cfg, ctx2.now, *w2.embedder)
          .meter_facts.empty());
}

TEST(Portfolio, SparseFractionGivesNotEnoughData) {
  auto w = make_world("portfolio_sparse", synth_spec(1, 10, "sparse=0.4"));
  const auto rep = run_portfolio(w.context());
  EXPECT_EQ(rep.rows.size(), 10u);
  EXPECT_EQ(rep.failed, 0);
  EXPECT_EQ(rep.overall.at(ConditionCategory::NOT_ENOUGH_DATA), 4);
  for (const auto& row : rep.rows) {
    const auto it = std::find_if(w.portfolio.truth.begin(), w.portfolio.truth.end(),
                                 [&](const GroundTruth& t) { return t.asset_number == row.asset_number; });
    ASSERT_NE(it, w.portfolio.truth.end());
    EXPECT_EQ(row.category, it->expected) << row.asset_number;
  }
  EXPECT_TRUE(std::is_sorted(rep.rows.begin(), rep.rows.end(),
                             [](const auto& a, const auto& b) { return a.asset_number < b.asset_number; }));
  EXPECT_FALSE(format_distribution_table(rep).empty());
}

TEST(Portfolio, SymmetricSitesHaveIdenticalDistributions) {
  auto w = make_world("portfolio_sites", synth_spec(2, 20, "sparse=0.2,emergency=0.2,delayed_pm=0.2,anomalous_meter=0.2"));
  const auto rep = run_portfolio(w.context());
  ASSERT_EQ(rep.by_site.size(), 2u);
  EXPECT_EQ(rep.by_site.begin()->second, std::next(rep.by_site.begin())->second);
}

TEST(Portfolio, IndependentOfWorkerCountAndFilter) {
  auto w = make_world("portfolio_workers", synth_spec(6, 12, "emergency=0.25,sparse=0.25"));
  auto ctx = w.context();
  ctx.cfg.workers = 1;
  const auto one = run_portfolio(ctx);
  ctx.cfg.workers = 4;
  const auto four = run_portfolio(ctx);
  EXPECT_EQ(to_json(one), to_json(four));

  AssetFilter site;
  site.site = one.rows.front().site_id;
  const auto part = run_portfolio(ctx, site);
  for (const auto& row : part.rows) EXPECT_EQ(row.site_id, *site.site);
  AssetFilter none;
  none.site = "NOWHERE";
  EXPECT_EQ(code_of([&] { run_portfolio(ctx, none); }), ErrorCode::NoMatchingAssets);
}

TEST(Evaluation, DeterministicWithMockJudge) {
  auto w = make_world("evaluation", synth_spec(7, 6, "emergency=0.5"));
  const auto rep = run_portfolio(w.context());
  std::vector<std::string> ids;
  for (const auto& row : rep.rows) ids.push_back(row.run_id);
  MockJudgeGateway judge;
  const auto a = run_evaluation(ids, *w.store, judge);
  const auto b = run_evaluation(ids, *w.store, judge);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.n_assets, 6);
  EXPECT_DOUBLE_EQ(a.car, 1.0);
  EXPECT_TRUE(load_run(*w.store, ids[0]).audit.has_value());
}

TEST(Evaluation, GridHasFourCellsAndConstrainedWins) {
  auto w = make_world("grid", synth_spec(1, 10, "delayed_pm=0.3,anomalous_meter=0.3"));
  MockJudgeGateway judge;
  const auto rows = run_grid(w.context(), judge);
  ASSERT_EQ(rows.size(), 4u);
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& r : rows) cells.insert({r.prompt_mode, r.evidence_scope});
  EXPECT_EQ(cells.size(), 4u);
  for (const auto& r : rows) {
    if (r.prompt_mode == "Constrained") EXPECT_DOUBLE_EQ(r.car, 1.0);
    else EXPECT_LT(r.car, 1.0);
  }
}

TEST(Synth, DeterministicAndMixCounts) {
  const auto spec = synth_spec(11, 9, "emergency=0.5,sparse=0.25");
  const auto a = generate_synthetic_portfolio(spec), b = generate_synthetic_portfolio(spec);
  EXPECT_EQ(a.files, b.files);
  EXPECT_NE(generate_synthetic_portfolio(synth_spec(12, 9, "emergency=0.5,sparse=0.25")).files, a.files);
  const auto counts = spec.mix.counts(9);
  int total = 0;
  for (const auto& [s, n] : counts) total += n;
  EXPECT_EQ(total, 9);
  EXPECT_EQ(counts.at(Scenario::EMERGENCY), 5);  // 4.5 and 2.25 floor to 4 and 2; 0.5 wins the spare
  EXPECT_EQ(counts.at(Scenario::SPARSE), 2);
  EXPECT_THROW(ScenarioMix::parse("emergency"), Error);
  EXPECT_THROW(ScenarioMix::parse("emergency=0.8,sparse=0.5"), Error);
}

TEST(Synth, AllEmergencyIsAllAttention) {
  auto w = make_world("synth_emergency", synth_spec(5, 8, "emergency=1.0"));
  const auto rep = run_portfolio(w.context());
  EXPECT_EQ(rep.overall.at(ConditionCategory::NEEDS_ATTENTION), 8);
}
