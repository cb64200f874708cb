// condinsight command-line interface.
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "condinsight/pipeline.hpp"
#include "condinsight/synth.hpp"

namespace fs = std::filesystem;
using namespace condinsight;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string store;
  std::string mode;
  std::string scope;
  std::string gateway;
  std::string replay_dir;
  std::string as_of;
  std::uint64_t seed = 1;
  int workers = 0;
};

PipelineConfig make_config(const GlobalOptions& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
  if (!g.store.empty()) cfg.store_dir = g.store;
  if (!g.mode.empty()) cfg.prompt_mode = parse_prompt_mode(g.mode);
  if (!g.scope.empty()) cfg.evidence_scope = parse_evidence_scope(g.scope);
  if (!g.gateway.empty()) cfg.gateway.kind = parse_gateway_kind(g.gateway);
  if (!g.replay_dir.empty()) cfg.gateway.replay_dir = g.replay_dir;
  if (!g.as_of.empty()) cfg.as_of = Timestamp::parse(g.as_of);
  if (g.workers > 0) cfg.workers = g.workers;
  apply_environment(cfg);
  cfg.validate();
  return cfg;
}

/// Owns everything a PipelineContext points at.
struct Session {
  explicit Session(const PipelineConfig& cfg)
      : store(cfg.store_dir),
        evidence(load_evidence(store)),
        gateway(make_gateway(cfg.gateway, cfg.rules, false)),
        embedder(make_embedding_provider(cfg)) {
    ctx.cfg = cfg;
    ctx.store = &store;
    ctx.evidence = &evidence;
    ctx.gateway = gateway.get();
    ctx.embedder = embedder.get();
    ctx.now = resolve_now(cfg, evidence);
  }
  Store store;
  EvidenceSet evidence;
  std::shared_ptr<LlmGateway> gateway;
  std::shared_ptr<EmbeddingProvider> embedder;
  PipelineContext ctx;
};

void write_output(const std::string& path, const Json& doc) {
  if (path.empty()) return;
  write_file_atomic(path, doc.dump(2) + "\n");
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (!fs::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(p)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".csv" || ext == ".jsonl")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Condition insight pipeline for maintenance evidence"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Configuration file (TOML-style key = value)");
  app.add_option("--store", g.store, "Store directory");
  app.add_option("--mode", g.mode, "Prompt mode")->check(CLI::IsMember({"constrained", "naive"}, CLI::ignore_case));
  app.add_option("--scope", g.scope, "Evidence scope")->check(CLI::IsMember({"wo", "all"}, CLI::ignore_case));
  app.add_option("--gateway", g.gateway, "Completion gateway")
      ->check(CLI::IsMember({"remote", "mock", "replay"}, CLI::ignore_case));
  app.add_option("--replay-dir", g.replay_dir, "Fixture directory for --gateway replay");
  app.add_option("--as-of", g.as_of, "Evaluation instant (RFC 3339); default: latest evidence");
  app.add_option("--seed", g.seed, "Seed for synthetic data");
  app.add_option("--workers", g.workers, "Concurrent asset runs");

  auto* ingest_cmd = app.add_subcommand("ingest", "Validate and store input files");
  std::vector<std::string> inputs;
  ingest_cmd->add_option("paths", inputs, "Files or directories (*.csv, *.jsonl)")->required();

  auto* facts_cmd = app.add_subcommand("facts", "Print the asset_facts packet of one asset");
  std::string asset;
  facts_cmd->add_option("asset", asset, "Asset number")->required();

  auto* insight_cmd = app.add_subcommand("insight", "Generate and verify an insight for one asset");
  insight_cmd->add_option("asset", asset, "Asset number")->required();
  bool as_json = false;
  insight_cmd->add_flag("--json", as_json, "Print the full run record");

  auto* portfolio_cmd = app.add_subcommand("portfolio", "Run every matching asset");
  AssetFilter filter;
  std::string site, asset_class, output;
  portfolio_cmd->add_option("--site", site, "Only this site");
  portfolio_cmd->add_option("--class", asset_class, "Only this asset class");
  portfolio_cmd->add_option("--output", output, "Write the portfolio report as JSON");
  portfolio_cmd->add_flag("--json", as_json, "Print the report as JSON");

  auto* eval_cmd = app.add_subcommand("evaluate", "Judge stored runs and aggregate metrics");
  bool grid = false;
  std::vector<std::string> run_ids;
  eval_cmd->add_flag("--grid", grid, "Run the 2x2 prompt-mode x evidence-scope grid");
  eval_cmd->add_option("--runs", run_ids, "Run ids (default: all runs of the current configuration)");
  eval_cmd->add_option("--site", site, "Grid: only this site");
  eval_cmd->add_option("--class", asset_class, "Grid: only this asset class");
  eval_cmd->add_option("--output", output, "Write the metrics report as JSON");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic portfolio");
  SynthSpec spec;
  std::string out_dir = "synthetic", mix;
  synth_cmd->add_option("--out", out_dir, "Output directory");
  synth_cmd->add_option("--assets", spec.n_assets, "Number of assets")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sites", spec.n_sites, "Number of sites")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--mix", mix, "Scenario fractions, e.g. sparse=0.4,emergency=0.2");

  auto* report_cmd = app.add_subcommand("report", "Print a stored run");
  std::string run_id;
  report_cmd->add_option("run_id", run_id, "Run id")->required();
  report_cmd->add_flag("--json", as_json, "Print the full run record");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      spec.seed = g.seed;
      if (!mix.empty()) spec.mix = ScenarioMix::parse(mix);
      const auto portfolio = generate_synthetic_portfolio(spec);
      for (const auto& p : write_portfolio(portfolio, out_dir)) std::cout << p.string() << "\n";
      std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
      return 0;
    }

    const PipelineConfig cfg = make_config(g);

    if (*ingest_cmd) {
      Store store(cfg.store_dir);
      const auto rep = ingest(expand_inputs(inputs), store);
      for (const auto& f : rep.files) {
        std::cout << f.path << " (" << to_string(f.kind) << "): accepted " << f.accepted << ", updated "
                  << f.updated << ", rejected " << f.rejects.size() << ", duplicates skipped "
                  << f.duplicates_skipped << "\n";
        for (const auto& r : f.rejects) std::cout << "  line " << r.line << ": " << r.reason << "\n";
      }
      return 0;
    }

    if (*report_cmd) {
      Store store(cfg.store_dir);
      const RunRecord r = load_run(store, run_id);
      std::cout << (as_json ? to_json(r).dump(2) + "\n" : format_insight_report(r));
      return 0;
    }

    Session s(cfg);
    if (*facts_cmd) {
      std::cout << serialize_asset_facts(build_facts_for(asset, s.evidence, cfg, s.ctx.now, *s.embedder)) << "\n";
    } else if (*insight_cmd) {
      const RunRecord r = run_insight(asset, s.ctx);
      std::cout << (as_json ? to_json(r).dump(2) + "\n" : format_insight_report(r));
      if (r.error) return 1;
    } else if (*portfolio_cmd) {
      if (!site.empty()) filter.site = site;
      if (!asset_class.empty()) filter.asset_class = asset_class;
      const PortfolioReport rep = run_portfolio(s.ctx, filter);
      write_output(output, to_json(rep));
      if (as_json) {
        std::cout << to_json(rep).dump(2) << "\n";
      } else {
        for (const auto& row : rep.rows)
          std::cout << row.asset_number << "  " << row.site_id << "  " << row.asset_class << "  "
                    << (row.category ? std::string(condition_label(*row.category)) : "FAILED: " + row.error)
                    << "  " << row.resolution << "  " << row.run_id << "\n";
        std::cout << "\n" << format_distribution_table(rep);
      }
    } else if (*eval_cmd) {
      auto judge = make_gateway(cfg.judge_gateway, cfg.rules, true);
      std::vector<MetricsReport> rows;
      if (grid) {
        if (!site.empty()) filter.site = site;
        if (!asset_class.empty()) filter.asset_class = asset_class;
        rows = run_grid(s.ctx, *judge, filter);
      } else {
        if (run_ids.empty()) {
          const std::string digest = config_digest(cfg);
          for (const auto& [id, hash] : s.store.index(entity::kRuns))
            if (s.store.get(hash).at("config_digest") == digest) run_ids.push_back(id);
        }
        if (run_ids.empty()) throw Error(ErrorCode::EmptyInput, "no stored runs for this configuration");
        rows.push_back(run_evaluation(run_ids, s.store, *judge));
      }
      Json doc = Json::array();
      for (const auto& r : rows) doc.push_back(to_json(r));
      write_output(output, doc);
      std::cout << format_metrics_table(rows);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
