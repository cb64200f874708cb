#include "condinsight/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "condinsight/store.hpp"

namespace condinsight {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::HEALTHY: return "healthy";
    case Scenario::EMERGENCY: return "emergency";
    case Scenario::DELAYED_PM: return "delayed_pm";
    case Scenario::ANOMALOUS_METER: return "anomalous_meter";
    case Scenario::SPARSE: return "sparse";
  }
  return "";
}

Scenario parse_scenario(std::string_view s) {
  const auto k = to_lower(trim(s));
  for (auto sc : kAllScenarios)
    if (to_string(sc) == k) return sc;
  throw Error(ErrorCode::InvalidEnum, "scenario '" + std::string(s) + "'");
}

ConditionCategory expected_category(Scenario s) {
  switch (s) {
    case Scenario::HEALTHY: return ConditionCategory::NORMAL;
    case Scenario::SPARSE: return ConditionCategory::NOT_ENOUGH_DATA;
    default: return ConditionCategory::NEEDS_ATTENTION;
  }
}

ScenarioMix ScenarioMix::parse(std::string_view text) {
  ScenarioMix mix;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidValue, "mix entry '" + item + "' needs name=fraction");
      double f = 0;
      try {
        f = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidValue, "mix fraction in '" + item + "'");
      }
      mix.fractions[parse_scenario(item.substr(0, eq))] = f;
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  mix.counts(0);  // validates the fractions
  return mix;
}

std::map<Scenario, int> ScenarioMix::counts(int n) const {
  double assigned = 0;
  for (const auto& [s, f] : fractions) {
    if (!(f >= 0) || f > 1) throw Error(ErrorCode::InvalidValue, "scenario fraction must lie in [0, 1]");
    assigned += f;
  }
  if (assigned > 1 + 1e-9) throw Error(ErrorCode::InvalidValue, "scenario fractions sum above 1");
  std::map<Scenario, double> full = fractions;
  full[Scenario::HEALTHY] += std::max(0.0, 1.0 - assigned);

  std::map<Scenario, int> out;
  std::vector<std::pair<double, int>> remainders;  // (remainder, scenario order)
  int total = 0;
  for (int i = 0; i < static_cast<int>(std::size(kAllScenarios)); ++i) {
    const Scenario s = kAllScenarios[i];
    // Nudge values like 0.4 * 10 = 3.9999999 onto the integer they denote.
    const double exact = full.count(s) ? full[s] * n + 1e-9 : 0.0;
    const int base = static_cast<int>(std::floor(exact));
    out[s] = base;
    total += base;
    remainders.emplace_back(exact - base, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; total < n && i < remainders.size(); ++i, ++total)
    ++out[kAllScenarios[remainders[i].second]];
  while (total > n) {  // only reachable through the nudge above
    for (auto it = out.rbegin(); it != out.rend() && total > n; ++it)
      if (it->second > 0) --it->second, --total;
  }
  return out;
}

namespace {

struct FmeaRow {
  const char* component;
  const char* failure_mode;
  const char* mechanism;
  const char* actions;
};

struct ClassProfile {
  const char* name;
  const char* description;
  const char* manufacturer;
  std::vector<FmeaRow> fmea;
  std::vector<const char*> corrective;  // corrective / emergency descriptions
  std::vector<const char*> preventive;
  const char* gauge_name;
  const char* gauge_unit;
  double gauge_level;
};

const std::vector<ClassProfile>& profiles() {
  static const std::vector<ClassProfile> p = {
      {"PUMP", "Centrifugal pump", "Flowserve",
       {{"mechanical seal", "seal leak", "face wear", "Replace mechanical seal;Check shaft alignment"},
        {"bearing", "bearing failure", "lubrication breakdown", "Regrease bearings;Measure vibration spectrum"},
        {"impeller", "reduced flow", "erosion", "Inspect impeller;Check suction pressure"},
        {"motor", "overheating", "winding insulation degradation", "Megger test motor windings;Clean cooling fins"}},
       {"Mechanical seal leaking at pump shaft, replace seal",
        "High vibration and bearing noise on pump drive end",
        "Reduced discharge flow, impeller erosion suspected",
        "Pump motor tripped on overheating"},
       {"Quarterly lubrication and vibration check", "Annual pump alignment inspection"},
       "VIBRATION", "mm/s", 4.0},
      {"COMPRESSOR", "Reciprocating air compressor", "Atlas Copco",
       {{"valve", "valve leakage", "fatigue cracking", "Replace valve plates;Inspect valve seats"},
        {"piston ring", "loss of compression", "ring wear", "Replace piston rings;Check cylinder liner"},
        {"cooler", "high discharge temperature", "fouling", "Clean intercooler;Check coolant flow"}},
       {"Compressor discharge temperature high, cooler fouling",
        "Loss of compression, piston ring wear found",
        "Valve leakage causing pressure drop",
        "Compressor tripped on high temperature"},
       {"Monthly oil change and filter replacement", "Semiannual valve inspection"},
       "DISCHARGE_TEMP", "degC", 85.0},
      {"FAN", "Cooling tower fan", "Howden",
       {{"gearbox", "gear tooth damage", "pitting", "Inspect gear teeth;Sample gearbox oil"},
        {"blade", "imbalance", "blade erosion", "Balance fan blades;Inspect blade pitch"},
        {"belt", "belt slip", "belt wear", "Replace drive belt;Retension belt"}},
       {"Fan gearbox noise, gear pitting on inspection",
        "Fan imbalance with high vibration",
        "Drive belt slipping, belt worn",
        "Fan stopped, gearbox seized"},
       {"Monthly belt tension check", "Quarterly gearbox oil sample"},
       "CURRENT", "A", 42.0},
  };
  return p;
}

/// Raw mt19937_64 output only, so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(g_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 g_;
};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

struct Writer {
  std::string assets = "asset_number,description,site_id,asset_class,priority,status,is_running,failure_code,asset_age_in_years,manufacturer\n";
  std::string workorders = "wonum,asset_number,wo_type,status,reported_date,target_date,completion_date,problem_code,description\n";
  std::string meters;
  std::string alerts;
  int wo_counter = 0;

  void work_order(const std::string& asset, const char* type, const char* status, Timestamp reported,
                  std::optional<Timestamp> target, std::optional<Timestamp> completed,
                  const std::string& problem, const std::string& description) {
    char wonum[32];
    std::snprintf(wonum, sizeof wonum, "WO-%06d", ++wo_counter);
    workorders += std::string(wonum) + "," + asset + "," + type + "," + status + "," + reported.to_string() +
                  "," + (target ? target->to_string() : "") + "," + (completed ? completed->to_string() : "") +
                  "," + problem + "," + csv_escape(description) + "\n";
  }
};

}  // namespace

SyntheticPortfolio generate_synthetic_portfolio(const SynthSpec& spec) {
  if (spec.n_assets < 1) throw Error(ErrorCode::InvalidValue, "n_assets must be >= 1");
  if (spec.n_sites < 1) throw Error(ErrorCode::InvalidValue, "n_sites must be >= 1");
  const auto counts = spec.mix.counts(spec.n_assets);
  Rng rng(spec.seed);
  Writer w;
  SyntheticPortfolio out;
  const Timestamp base = spec.base_date;
  const auto& classes = profiles();

  int asset_index = 0;
  for (Scenario sc : kAllScenarios) {
    const int n = counts.at(sc);
    for (int k = 0; k < n; ++k) {
      ++asset_index;
      char id[16];
      std::snprintf(id, sizeof id, "A%04d", asset_index);
      const std::string asset = id;
      const ClassProfile& cls = classes[static_cast<std::size_t>(asset_index - 1) % classes.size()];
      const std::string site = "SITE-" + std::string(1, static_cast<char>('A' + k % spec.n_sites));
      out.truth.push_back({asset, sc, site, cls.name, expected_category(sc)});

      char age[16];
      std::snprintf(age, sizeof age, "%.1f", 1.0 + rng.uniform_int(0, 150) / 10.0);
      w.assets += asset + "," + csv_escape(std::string(cls.description) + " " + asset) + "," + site + "," +
                  cls.name + "," + std::to_string(rng.uniform_int(1, 5)) + ",OPERATING,true,," + age + "," +
                  cls.manufacturer + "\n";

      // Every asset has a preventive order completed on the base date, which
      // pins the latest evidence timestamp of any portfolio to base_date.
      w.work_order(asset, "PM", "COMPLETED", base, base.plus_days(7), base, "",
                   cls.preventive[0]);
      if (sc == Scenario::SPARSE) continue;

      const int n_pm = rng.uniform_int(3, 6);
      for (int i = 1; i <= n_pm; ++i) {
        const Timestamp reported = base.plus_days(-30 * i - rng.uniform_int(0, 5));
        w.work_order(asset, "PM", "COMPLETED", reported, reported.plus_days(7),
                     reported.plus_days(rng.uniform_int(0, 5)), "",
                     cls.preventive[static_cast<std::size_t>(i) % cls.preventive.size()]);
      }
      const int n_cm = rng.uniform_int(0, 2);
      for (int i = 0; i < n_cm; ++i) {
        const Timestamp reported = base.plus_days(-rng.uniform_int(40, 300));
        const auto& text = cls.corrective[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        w.work_order(asset, "CM", "COMPLETED", reported, reported.plus_days(14),
                     reported.plus_days(rng.uniform_int(1, 10)), "MECH", text);
      }
      if (sc == Scenario::EMERGENCY) {
        const int n_em = rng.uniform_int(1, 2);
        for (int i = 0; i < n_em; ++i) {
          const Timestamp reported = base.plus_days(-rng.uniform_int(1, 30));
          w.work_order(asset, "EM", "OPEN", reported, reported.plus_days(60), std::nullopt, "TRIP",
                       cls.corrective[3]);
        }
      }
      if (sc == Scenario::DELAYED_PM) {
        const int n_late = rng.uniform_int(2, 3);
        for (int i = 0; i < n_late; ++i) {
          const Timestamp reported = base.plus_days(-rng.uniform_int(60, 120));
          w.work_order(asset, "PM", i % 2 ? "INPRG" : "OPEN", reported, reported.plus_days(14), std::nullopt, "",
                       cls.preventive[1]);
        }
      }

      // Gauge: bounded sinusoid (|z| < 1.5, no abrupt steps) plus an optional spike.
      const double phase = rng.unit() * 6.283185307179586;
      const double amp = cls.gauge_level * 0.05;
      Json readings = Json::array();
      constexpr int kReadings = 12;
      for (int i = 0; i < kReadings; ++i) {
        double v = cls.gauge_level + amp * std::sin(phase + i);
        if (sc == Scenario::ANOMALOUS_METER && i == kReadings - 3) v += amp * 12.0;
        readings.push_back(Json::array({base.plus_days(-7 * (kReadings - 1 - i)).to_string(), round2(v)}));
      }
      w.meters += Json{{"asset_number", asset}, {"meter_name", cls.gauge_name}, {"meter_type", "GAUGE"},
                       {"unit", cls.gauge_unit}, {"readings", readings}}.dump() + "\n";

      // Run hours: weekly increments near 150 h with a bounded wobble.
      Json hours = Json::array();
      double total = 1000.0 + rng.uniform_int(0, 20000);
      const double hphase = rng.unit() * 6.283185307179586;
      for (int i = 0; i < kReadings; ++i) {
        if (i > 0) total += 150.0 + 6.0 * std::sin(hphase + i);
        hours.push_back(Json::array({base.plus_days(-7 * (kReadings - 1 - i)).to_string(), round2(total)}));
      }
      w.meters += Json{{"asset_number", asset}, {"meter_name", "RUN_HOURS"}, {"meter_type", "CONTINUOUS"},
                       {"unit", "h"}, {"readings", hours}}.dump() + "\n";

      if (rng.uniform_int(0, 1) == 1) {
        w.alerts += Json{{"alert_id", "AL-" + asset + "-1"}, {"asset_number", asset}, {"severity", "INFO"},
                         {"raised_at", base.plus_days(-rng.uniform_int(20, 200)).to_string()},
                         {"active", false}, {"message", "Scheduled inspection reminder acknowledged"}}
                        .dump() + "\n";
      }
    }
  }

  std::string fmea = "asset_class,component,failure_mode,mechanism,recommended_actions\n";
  for (const auto& cls : classes)
    for (const auto& r : cls.fmea)
      fmea += std::string(cls.name) + "," + csv_escape(r.component) + "," + csv_escape(r.failure_mode) + "," +
              csv_escape(r.mechanism) + "," + csv_escape(r.actions) + "\n";

  out.files["assets.csv"] = w.assets;
  out.files["workorders.csv"] = w.workorders;
  out.files["fmea.csv"] = fmea;
  if (!w.meters.empty()) out.files["meters.jsonl"] = w.meters;
  if (!w.alerts.empty()) out.files["alerts.jsonl"] = w.alerts;
  return out;
}

std::vector<std::filesystem::path> write_portfolio(const SyntheticPortfolio& p,
                                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  // Assets first so a plain directory ingest sees them before their evidence.
  for (const char* name : {"assets.csv", "fmea.csv", "workorders.csv", "meters.jsonl", "alerts.jsonl"}) {
    const auto it = p.files.find(name);
    if (it == p.files.end()) continue;
    write_file_atomic(dir / name, it->second);
    written.push_back(dir / name);
  }
  Json manifest = Json::array();
  for (const auto& t : p.truth)
    manifest.push_back(Json{{"asset_number", t.asset_number},
                            {"scenario", std::string(to_string(t.scenario))},
                            {"site_id", t.site_id},
                            {"asset_class", t.asset_class},
                            {"expected_category", std::string(to_string(t.expected))}});
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return written;
}

}  // namespace condinsight
