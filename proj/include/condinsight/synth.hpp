// Seeded synthetic portfolios with known rule categories.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "condinsight/core.hpp"

namespace condinsight {

enum class Scenario { HEALTHY, EMERGENCY, DELAYED_PM, ANOMALOUS_METER, SPARSE };
inline constexpr Scenario kAllScenarios[] = {Scenario::HEALTHY, Scenario::EMERGENCY, Scenario::DELAYED_PM,
                                             Scenario::ANOMALOUS_METER, Scenario::SPARSE};
std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view s);  // "healthy", "emergency", "delayed_pm", ...

/// Category the default rule configuration assigns to each scenario.
ConditionCategory expected_category(Scenario s);

/// Fractions per scenario; whatever is left below 1 goes to HEALTHY.
struct ScenarioMix {
  std::map<Scenario, double> fractions;

  /// "sparse=0.4,emergency=0.1". Throws InvalidValue.
  static ScenarioMix parse(std::string_view text);
  /// Asset counts summing to n: floor of fraction * n, the shortfall handed
  /// out by largest fractional remainder (ties in scenario order).
  std::map<Scenario, int> counts(int n) const;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_assets = 10;
  ScenarioMix mix;
  int n_sites = 2;
  Timestamp base_date = Timestamp::from_civil(2024, 6, 30);
};

struct GroundTruth {
  std::string asset_number;
  Scenario scenario = Scenario::HEALTHY;
  std::string site_id;
  std::string asset_class;
  ConditionCategory expected = ConditionCategory::NORMAL;
};

struct SyntheticPortfolio {
  std::map<std::string, std::string> files;  // file name -> content
  std::vector<GroundTruth> truth;
};

/// Assets are laid out scenario by scenario; within a scenario the k-th asset
/// goes to site k mod n_sites, so sites get identical mixes whenever every
/// scenario count is a multiple of n_sites. Throws InvalidValue.
SyntheticPortfolio generate_synthetic_portfolio(const SynthSpec& spec);

/// Writes the data files plus manifest.json; returns the data file paths.
std::vector<std::filesystem::path> write_portfolio(const SyntheticPortfolio& p,
                                                   const std::filesystem::path& dir);

}  // namespace condinsight
