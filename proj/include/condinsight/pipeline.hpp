// Pipeline orchestration over the store: evidence loading, packet
// construction, insight runs, portfolio runs and judge evaluation.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "condinsight/config.hpp"
#include "condinsight/judge.hpp"
#include "condinsight/store.hpp"

namespace condinsight {

/// Every committed record, grouped per asset.
struct EvidenceSet {
  std::map<std::string, Asset> assets;
  std::map<std::string, std::vector<WorkOrder>> workorders;
  std::map<std::string, std::vector<MeterSeries>> meters;
  std::map<std::string, std::vector<Alert>> alerts;
  std::map<std::string, std::vector<FmeaEntry>> fmea_by_class;

  /// Latest reported/completion date, reading or alert time; epoch when empty.
  Timestamp latest_timestamp() const;
};

EvidenceSet load_evidence(const Store& store);

/// Builds the packet for one asset. Throws UnknownAsset.
AssetFacts build_facts_for(const std::string& asset_number, const EvidenceSet& evidence,
                           const PipelineConfig& cfg, Timestamp now,
                           const EmbeddingProvider& embedder);

struct RunError {
  std::string code;
  std::string message;
  bool operator==(const RunError&) const = default;
};

struct RunTimings {
  std::string started_at;
  double facts_ms = 0.0;
  double generation_ms = 0.0;
  double total_ms = 0.0;
};

struct RunRecord {
  std::string run_id;
  std::string asset_number;
  std::string config_digest;
  Json config;  // the digested fields
  std::string facts;  // canonical asset_facts document
  std::string prompt_mode;
  std::string evidence_scope;
  std::string backbone;
  std::optional<RuleVerdict> verdict;
  std::vector<AttemptRecord> attempts;
  std::optional<ConditionInsightSummary> summary;
  std::optional<VerificationResult> verification;
  std::optional<JudgeAudit> audit;
  std::string judge;
  std::optional<RunError> error;
  RunTimings timings;
};

Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);
/// The record without its timings; equal across repeated runs.
Json reproducible_view(const RunRecord& r);

/// sha256 over asset, config digest and packet.
std::string make_run_id(const std::string& asset_number, const std::string& digest,
                        const std::string& facts);

struct PipelineContext {
  PipelineConfig cfg;
  Store* store = nullptr;
  const EvidenceSet* evidence = nullptr;
  LlmGateway* gateway = nullptr;
  const EmbeddingProvider* embedder = nullptr;
  Timestamp now;
};

/// Creates a context whose `now` is cfg.as_of or the latest evidence timestamp.
Timestamp resolve_now(const PipelineConfig& cfg, const EvidenceSet& evidence);

/// Pipeline errors after the asset lookup are captured in the record, which
/// is committed either way. Throws UnknownAsset before anything is written.
RunRecord run_insight(const std::string& asset_number, const PipelineContext& ctx);

RunRecord load_run(const Store& store, const std::string& run_id);  // throws UnknownAsset

struct AssetFilter {
  std::optional<std::string> site;
  std::optional<std::string> asset_class;
  bool matches(const Asset& a) const;
};

struct PortfolioRow {
  std::string asset_number;
  std::string site_id;
  std::string asset_class;
  std::optional<ConditionCategory> category;  // empty when the run failed
  std::string resolution;
  std::string run_id;
  std::string error;
};

using Distribution = std::map<ConditionCategory, int>;

struct PortfolioReport {
  std::vector<PortfolioRow> rows;  // sorted by asset number
  Distribution overall;
  std::map<std::string, Distribution> by_site;
  std::map<std::string, Distribution> by_class;
  int failed = 0;
};

/// Runs matching assets on `cfg.workers` threads. Throws NoMatchingAssets.
PortfolioReport run_portfolio(const PipelineContext& ctx, const AssetFilter& filter = {});

Json to_json(const PortfolioReport& r);
/// Percentages per category, rounded to one decimal.
std::string format_distribution_table(const PortfolioReport& r);

/// Judges every run, stores the audits in the run records and aggregates.
MetricsReport run_evaluation(const std::vector<std::string>& run_ids, Store& store, LlmGateway& judge,
                             const std::string& agent_spec = default_agent_specification());

/// {CONSTRAINED, NAIVE} x {WO_ONLY, ALL}: portfolio plus evaluation per cell.
std::vector<MetricsReport> run_grid(const PipelineContext& base, LlmGateway& judge,
                                    const AssetFilter& filter = {});

/// Two-part insight report: observations, then prioritized recommendations.
std::string format_insight_report(const RunRecord& r);

}  // namespace condinsight
