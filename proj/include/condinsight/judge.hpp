// Judge audits of insight summaries and metric aggregation.
#pragma once

#include <string>
#include <vector>

#include "condinsight/agent.hpp"

namespace condinsight {

enum class StatementKind { INSIGHT, RECOMMENDATION };
std::string_view to_string(StatementKind k);
StatementKind parse_statement_kind(std::string_view s);

struct StatementScore {
  int statement_index = 0;  // 1-based over insights then recommendations
  StatementKind kind = StatementKind::INSIGHT;
  int factuality = 3;
  int coherence = 3;
  int relevance = 3;
  int repetitiveness = 3;
  int specificity = 3;
  std::string justification;

  bool operator==(const StatementScore&) const = default;
};

struct JudgeAudit {
  std::string asset_number;
  std::vector<StatementScore> statements;
  bool overall_condition_valid = true;
  double completeness_insights = 0.0;
  double completeness_recommendations = 0.0;

  bool operator==(const JudgeAudit&) const = default;
};

struct MetricsReport {
  double ucr = 0.0;  // unsupported claim rate
  double hsr = 0.0;  // high specificity rate
  double cr = 0.0;   // contradiction rate (per output)
  double rr = 0.0;   // redundancy rate
  double mic = 0.0;  // mean insight count
  double car = 0.0;  // first-attempt condition agreement
  double post_retry_agreement = 0.0;
  int n_assets = 0;
  int n_statements = 0;
  std::string prompt_mode;
  std::string evidence_scope;
  std::string backbone;
  std::string judge;

  bool operator==(const MetricsReport&) const = default;
};

/// Default description of the agent handed to the judge.
std::string default_agent_specification();

/// Throws AssetMismatch when `summary_asset` differs from the packet's asset.
Prompt render_judge_prompt(const ConditionInsightSummary& summary, const AssetFacts& facts,
                           const std::string& agent_spec, const std::string& summary_asset);

/// Throws SchemaViolation, ScoreOutOfRange or StatementCountMismatch.
JudgeAudit parse_judge_output(std::string_view raw, int expected_statements);

/// Throws EmptyInput for empty lists and IndexMismatch when the three lists
/// differ in length or audits and verifications are out of step.
MetricsReport aggregate_metrics(const std::vector<JudgeAudit>& audits,
                                const std::vector<VerificationResult>& verifications,
                                const std::vector<int>& insight_counts);

Json to_json(const JudgeAudit& a);
JudgeAudit judge_audit_from_json(const Json& j);
Json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const Json& j);

/// Prompt | Scope | UCR | HSR | CAR | MIC | CR | RR
std::string format_metrics_table(const std::vector<MetricsReport>& rows);

/// Offline judge. Scores each statement from the packet embedded in the
/// prompt: statements quoting identifiers or numbers absent from the packet
/// lose factuality, generic wording loses specificity, duplicates are flagged.
class MockJudgeGateway final : public LlmGateway {
 public:
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       double temperature) override;
  std::string name() const override { return "mock-judge"; }
};

/// Runs one audit through a gateway.
JudgeAudit judge_summary(const ConditionInsightSummary& summary, const AssetFacts& facts,
                         LlmGateway& judge, const std::string& agent_spec = default_agent_specification());

}  // namespace condinsight
