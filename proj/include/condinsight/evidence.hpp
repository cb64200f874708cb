// The asset_facts evidence packet and its canonical text form.
//
// Canonical form: {"asset_facts": {...}, "evidence_window_days", "generated_at",
// "schema_version"}. Inside asset_facts the six blocks appear in the fixed
// order asset_details_facts, workorder_facts, meter_facts, alert_facts,
// fmea_facts, health_scores; every other object has lexicographic keys. No
// whitespace, reals printed with at most 6 significant digits, timestamps as
// RFC 3339 UTC.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "condinsight/alignment.hpp"
#include "condinsight/core.hpp"
#include "condinsight/meter.hpp"
#include "condinsight/workorder.hpp"

namespace condinsight {

inline constexpr std::string_view kSchemaVersion = "asset_facts/1";
inline constexpr const char* kAssetFactsKeys[] = {"asset_details_facts", "workorder_facts",
                                                  "meter_facts",         "alert_facts",
                                                  "fmea_facts",          "health_scores"};

struct AssetDetails {
  std::string asset_number;
  std::string description;
  std::string site_id;
  int priority = 3;
  AssetStatus status = AssetStatus::OPERATING;
  bool is_running = true;
  std::optional<std::string> failure_code;
  double asset_age_in_years = 0.0;
  std::optional<std::string> manufacturer;

  static AssetDetails from(const Asset& asset);
  bool operator==(const AssetDetails&) const = default;
};

/// FMEA hypotheses grouped by (component, mechanism).
struct FmeaFact {
  std::string component;
  std::string mechanism;
  std::string failure_mode;
  std::vector<std::string> actions;
  std::vector<std::string> matched_workorders;
  double mass = 0.0;

  bool operator==(const FmeaFact&) const = default;
};

struct AssetFacts {
  AssetDetails asset_details_facts;
  WorkorderFacts workorder_facts;
  std::vector<MeterFacts> meter_facts;
  std::vector<Alert> alert_facts;
  std::vector<FmeaFact> fmea_facts;
  std::map<std::string, HealthScore> health_scores;
  Timestamp generated_at;
  int evidence_window_days = 0;
  std::string schema_version{kSchemaVersion};

  bool operator==(const AssetFacts&) const = default;
};

/// Throws AssetMismatch when any component names a different asset. Reals are
/// stored at canonical precision.
AssetFacts build_asset_facts(const Asset& asset, const WorkorderFacts& wo,
                             std::vector<MeterFacts> meters, std::vector<Alert> alerts,
                             const std::vector<FmeaMatch>& fmea,
                             const std::map<std::string, HealthScore>& scores, int window_days,
                             Timestamp now, std::size_t fmea_limit = 5);

/// Groups matches by (component, mechanism), sums mass, merges actions and
/// keeps the `limit` heaviest groups.
std::vector<FmeaFact> group_fmea_matches(const std::vector<FmeaMatch>& matches, std::size_t limit);

/// preventive_ratio (when any order is in window) and meter_data_coverage
/// (when any meter exists), both on [0, 1].
std::map<std::string, HealthScore> derive_health_scores(const WorkorderFacts& wo,
                                                        const std::vector<MeterFacts>& meters);

Json to_json(const AssetFacts& facts);
AssetFacts asset_facts_from_json(const Json& doc);  // throws SchemaViolation

std::string serialize_asset_facts(const AssetFacts& facts);
AssetFacts parse_asset_facts(std::string_view text);

/// Canonical writer used for every stored document: lexicographic keys, no
/// whitespace, reals with <= 6 significant digits.
std::string canonical_dump(const Json& value);
std::string format_real(double value);
/// The value its canonical text parses back to.
double quantize_real(double value);
/// Rounds every real in the packet to its canonical value, so that valid
/// packets survive a text round trip unchanged. build_asset_facts applies it.
void quantize_reals(AssetFacts& facts);

// Nested block converters, shared with the store.
Json to_json(const MeterFacts& facts);
MeterFacts meter_facts_from_json(const Json& doc);
Json to_json(const WorkorderFacts& facts);
WorkorderFacts workorder_facts_from_json(const Json& doc);

}  // namespace condinsight
