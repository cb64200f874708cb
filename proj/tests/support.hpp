// Fixture builders and independent oracles shared by the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "condinsight/alignment.hpp"
#include "condinsight/evidence.hpp"
#include "condinsight/meter.hpp"
#include "condinsight/rules.hpp"
#include "condinsight/workorder.hpp"

namespace testsupport {

using namespace condinsight;

inline Timestamp base_day() { return Timestamp::from_civil(2024, 1, 1); }
inline Timestamp day(int d) { return base_day().plus_days(d); }

inline MeterSeries make_series(const std::vector<double>& values, MeterType type,
                               const std::string& name = "M1", const std::string& asset = "A1",
                               Timestamp start = base_day(), int step_days = 1) {
  MeterSeries s;
  s.asset_number = asset;
  s.meter_name = name;
  s.meter_type = type;
  s.unit = type == MeterType::GAUGE ? "degC" : "h";
  for (std::size_t i = 0; i < values.size(); ++i)
    s.readings.push_back({start.plus_days(static_cast<std::int64_t>(i) * step_days), values[i]});
  return s;
}

inline WorkOrder make_wo(const std::string& wonum, WorkOrderType type, WorkOrderStatus status,
                         Timestamp reported, const std::string& description = "routine inspection",
                         std::optional<Timestamp> target = std::nullopt, const std::string& asset = "A1") {
  WorkOrder w;
  w.wonum = wonum;
  w.asset_number = asset;
  w.wo_type = type;
  w.status = status;
  w.reported_date = reported;
  w.target_date = target;
  if (status == WorkOrderStatus::COMPLETED) w.completion_date = reported.plus_days(1);
  w.description = description;
  return w;
}

inline Asset make_asset(const std::string& number = "A1") {
  Asset a;
  a.asset_number = number;
  a.description = "Centrifugal pump";
  a.site_id = "SITE-A";
  a.asset_class = "PUMP";
  a.priority = 2;
  a.asset_age_in_years = 7.5;
  a.manufacturer = "Acme";
  return a;
}

inline Alert make_alert(const std::string& id, Severity sev, bool active, Timestamp at,
                        const std::string& asset = "A1") {
  return {id, asset, sev, at, active, "vibration high"};
}

/// Packet assembled through the public builders; generated_at = `now`.
inline AssetFacts make_packet(const std::vector<WorkOrder>& orders, const std::vector<MeterSeries>& meters,
                              const std::vector<Alert>& alerts, Timestamp now, const Asset& asset = make_asset(),
                              int window = 365) {
  const auto wo = build_workorder_facts(orders, window, now, 2);
  std::vector<MeterFacts> mf;
  for (const auto& s : meters) mf.push_back(abstract_meter(s, AbstractionConfig{}));
  auto facts = build_asset_facts(asset, wo, mf, alerts, {}, derive_health_scores(wo, mf), window, now);
  return facts;
}

// ---------------------------------------------------------------------------
// Meter oracle: direct textbook evaluation, written independently of the
// library (long double accumulation, explicit loops, no shared helpers).

struct OracleEvent {
  std::string kind;
  std::size_t index;
  double magnitude;
};

struct OracleMeter {
  bool sufficient = false;
  double mean = 0, std = 0, min = 0, max = 0;  // gauge
  double dmean = 0, dstd = 0, lo = 0, hi = 0, total = 0;  // continuous
  std::vector<OracleEvent> events;
};

inline void oracle_stats(const std::vector<double>& x, double& mean, double& sd) {
  long double s = 0;
  for (double v : x) s += v;
  long double m = s / x.size();
  long double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
  m = std::min(std::max(m, lo), hi);
  long double q = 0;
  for (double v : x) q += (v - m) * (v - m);
  mean = static_cast<double>(m);
  sd = x.size() > 1 ? static_cast<double>(std::sqrt(q / (x.size() - 1))) : 0.0;
}

inline OracleMeter oracle_meter(const std::vector<double>& v, MeterType type, const AbstractionConfig& c) {
  OracleMeter o;
  const std::size_t n = v.size();
  if (n < c.min_points) return o;
  o.sufficient = true;
  if (type == MeterType::GAUGE) {
    oracle_stats(v, o.mean, o.std);
    o.min = *std::min_element(v.begin(), v.end());
    o.max = *std::max_element(v.begin(), v.end());
    if (o.std == 0) return o;
    for (std::size_t i = 1; i <= n; ++i) {
      const double z = (v[i - 1] - o.mean) / o.std;
      if (std::fabs(z) > c.z_thresh) o.events.push_back({"Z_SCORE_ANOMALY", i, z});
      if (i >= 2) {
        const double d = v[i - 1] - v[i - 2];
        if (std::fabs(d) > c.k * o.std && std::fabs(v[i - 1] - o.mean) > o.std)
          o.events.push_back({"ABRUPT_CHANGE", i, d});
      }
    }
    return o;
  }
  std::vector<double> d;
  for (std::size_t i = 1; i < n; ++i) d.push_back(v[i] - v[i - 1]);
  oracle_stats(d, o.dmean, o.dstd);
  o.lo = o.dmean - c.k * o.dstd;
  o.hi = o.dmean + c.k * o.dstd;
  o.total = v[n - 1] - v[0];
  for (std::size_t i = 2; i <= n; ++i) {
    const double di = d[i - 2];
    if (di < 0) o.events.push_back({"RESET", i, di});
    else if (di < o.lo || di > o.hi) o.events.push_back({"RATE_ANOMALY", i, di});
  }
  // Flat runs: maximal stretches of |d| <= eps, reported at the first flat increment.
  std::size_t i = 0;
  while (i < d.size()) {
    if (std::fabs(d[i]) > c.eps_flat) { ++i; continue; }
    std::size_t j = i;
    while (j < d.size() && std::fabs(d[j]) <= c.eps_flat) ++j;
    if (j - i >= c.flat_run_min) o.events.push_back({"FLAT_PERIOD", i + 2, static_cast<double>(j - i)});
    i = j;
  }
  static const std::map<std::string, int> order{{"Z_SCORE_ANOMALY", 0}, {"ABRUPT_CHANGE", 1},
                                                {"RESET", 2}, {"RATE_ANOMALY", 3}, {"FLAT_PERIOD", 4}};
  std::stable_sort(o.events.begin(), o.events.end(), [&](const OracleEvent& a, const OracleEvent& b) {
    return a.index != b.index ? a.index < b.index : order.at(a.kind) < order.at(b.kind);
  });
  return o;
}

inline bool rel_close(double a, double b, double tol = 1e-12) {
  if (a == b) return true;
  return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

/// Empty string when the library result matches the oracle.
inline std::string compare_with_oracle(const MeterFacts& f, const OracleMeter& o) {
  if (f.insufficient() != !o.sufficient) return "sufficiency differs";
  if (!o.sufficient) return f.events.empty() ? "" : "events on insufficient series";
  if (const auto* g = std::get_if<GaugeSummary>(&f.summary)) {
    if (!rel_close(g->mean, o.mean) || !rel_close(g->std, o.std) || g->min != o.min || g->max != o.max)
      return "gauge summary differs";
  } else if (const auto* c = std::get_if<ContinuousSummary>(&f.summary)) {
    // The band edges can cancel towards zero, so compare them on the band's own scale.
    const double band_scale = std::fabs(o.dmean) + std::fabs(o.hi - o.dmean) + 1e-300;
    if (!rel_close(c->increment_mean, o.dmean) || !rel_close(c->increment_std, o.dstd) ||
        std::fabs(c->band_lo - o.lo) > 1e-12 * band_scale || std::fabs(c->band_hi - o.hi) > 1e-12 * band_scale ||
        !rel_close(c->total_delta, o.total))
      return "continuous summary differs";
  }
  if (f.events.size() != o.events.size())
    return "event count " + std::to_string(f.events.size()) + " vs " + std::to_string(o.events.size());
  for (std::size_t i = 0; i < o.events.size(); ++i) {
    const auto& e = f.events[i];
    if (std::string(to_string(e.kind)) != o.events[i].kind || e.index != o.events[i].index ||
        !rel_close(e.magnitude, o.events[i].magnitude))
      return "event " + std::to_string(i) + " differs";
  }
  return "";
}

/// Random short series; values are drawn from a mix of smooth noise, spikes,
/// plateaus and (for CONTINUOUS) resets.
inline std::vector<double> random_values(std::mt19937_64& rng, MeterType type, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  if (type == MeterType::GAUGE) {
    const double level = 50 * u(rng), spread = 0.1 + 5 * u(rng);
    for (auto& x : v) x = level + spread * (u(rng) - 0.5);
    if (n > 0 && u(rng) < 0.5) v[static_cast<std::size_t>(u(rng) * n) % n] += spread * (5 + 20 * u(rng));
  } else {
    double total = 1000 * u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = u(rng);
      if (r < 0.1 && i > 0) total = 10 * u(rng);          // reset
      else if (r < 0.3) total += 0.0;                       // flat
      else if (r < 0.4) total += 50 + 100 * u(rng);         // burst
      else total += 5 + 2 * u(rng);
      v[i] = total;
    }
  }
  return v;
}

/// Random but valid packet built through the public builders. Strings include
/// quotes, escapes and multi-byte characters.
inline AssetFacts random_packet(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  static const std::vector<std::string> words{"bearing", "seal", "leak \"major\"", "vibraci\xC3\xB3n",
                                              "tab\tand\nnewline", "motor", "impeller", "\xE2\x9A\xA0 alarm",
                                              "back\\slash", "coupling"};
  auto text = [&](int n) {
    std::string t;
    for (int i = 0; i < n; ++i) t += (i ? " " : "") + words[static_cast<std::size_t>(pick(10))];
    return t;
  };
  const Timestamp now = day(300 + pick(200));
  Asset a = make_asset("A" + std::to_string(pick(1000)));
  a.description = text(3);
  a.priority = 1 + pick(5);
  a.status = static_cast<AssetStatus>(pick(3));
  a.is_running = pick(2) == 0;
  a.asset_age_in_years = 30 * u(rng);
  if (pick(2)) a.failure_code.reset(); else a.failure_code = "FC-" + std::to_string(pick(99));
  if (pick(3) == 0) a.manufacturer.reset();

  std::vector<WorkOrder> orders;
  for (int i = 0, n = pick(8); i < n; ++i) {
    const auto type = static_cast<WorkOrderType>(pick(4));
    const auto status = static_cast<WorkOrderStatus>(pick(4));
    std::optional<Timestamp> target;
    if (pick(2)) target = now.plus_days(-pick(60) + 20);
    auto wo = make_wo("W" + std::to_string(100 + i), type, status, now.plus_days(-pick(500)), text(1 + pick(4)),
                      target, a.asset_number);
    if (pick(3) == 0) wo.problem_code = "PC" + std::to_string(pick(3));
    orders.push_back(wo);
  }
  std::vector<MeterFacts> meters;
  for (int i = 0, n = pick(4); i < n; ++i) {
    const auto type = pick(2) ? MeterType::GAUGE : MeterType::CONTINUOUS;
    const auto values = random_values(rng, type, static_cast<std::size_t>(pick(12)));
    meters.push_back(abstract_meter(
        make_series(values, type, "M" + std::to_string(i), a.asset_number, now.plus_days(-30)), AbstractionConfig{}));
  }
  std::vector<Alert> alerts;
  for (int i = 0, n = pick(4); i < n; ++i) {
    Alert al = make_alert("AL" + std::to_string(i), static_cast<Severity>(pick(3)), pick(2) == 0,
                          now.plus_days(-pick(100)), a.asset_number);
    al.message = text(2);
    alerts.push_back(al);
  }
  std::vector<FmeaMatch> matches;
  for (const auto& wo : orders)
    for (int r = 1; r <= 1 + pick(3); ++r)
      matches.push_back({wo.wonum, words[static_cast<std::size_t>(pick(4))], "mode " + std::to_string(pick(3)),
                         "mech " + std::to_string(pick(3)), {"Inspect", text(2)}, u(rng) / 3, r});
  const auto wf = build_workorder_facts(orders, 365, now, 2);
  return build_asset_facts(a, wf, meters, alerts, matches, derive_health_scores(wf, meters), 365, now);
}

// ---------------------------------------------------------------------------
// Exact balanced OT by enumeration of the vertices of the transportation
// polytope. Vertices are basic feasible solutions: spanning trees of the
// bipartite graph with n + m - 1 edges, solved by leaf elimination.

struct BalancedOt {
  std::vector<std::vector<double>> plan;
  double cost = std::numeric_limits<double>::infinity();
  /// Least cost increase per unit of plan change (max norm) when moving to
  /// any other vertex. Small values mean a nearly degenerate optimum.
  double sharpness = std::numeric_limits<double>::infinity();
};

inline bool solve_tree(std::vector<std::pair<int, int>> edges, std::vector<double> a, std::vector<double> b,
                       std::vector<std::vector<double>>& x) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  x.assign(n, std::vector<double>(m, 0.0));
  std::vector<bool> used(edges.size(), false);
  for (std::size_t step = 0; step < edges.size(); ++step) {
    bool progressed = false;
    for (int node = 0; node < n + m && !progressed; ++node) {
      int count = 0, which = -1;
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (used[e]) continue;
        if ((node < n && edges[e].first == node) || (node >= n && edges[e].second == node - n)) {
          ++count;
          which = static_cast<int>(e);
        }
      }
      if (count != 1) continue;
      const auto [i, j] = edges[which];
      const double flow = node < n ? a[i] : b[j];
      x[i][j] = flow;
      a[i] -= flow;
      b[j] -= flow;
      used[which] = true;
      progressed = true;
    }
    if (!progressed) return false;  // cycle: not a tree
  }
  for (double r : a) if (std::fabs(r) > 1e-12) return false;
  for (double r : b) if (std::fabs(r) > 1e-12) return false;
  for (const auto& row : x)
    for (double v : row) if (v < -1e-12) return false;
  return true;
}

inline BalancedOt exact_balanced_ot(const std::vector<std::vector<double>>& c, const std::vector<double>& a,
                                    const std::vector<double>& b) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) all.push_back({i, j});
  const int k = n + m - 1;
  BalancedOt best;
  std::vector<std::pair<double, std::vector<std::vector<double>>>> vertices;
  // Iterate all k-subsets of the n*m cells.
  std::vector<bool> mask(all.size(), false);
  std::fill(mask.begin(), mask.begin() + k, true);
  do {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t e = 0; e < all.size(); ++e) if (mask[e]) edges.push_back(all[e]);
    std::vector<std::vector<double>> x;
    if (!solve_tree(edges, a, b, x)) continue;
    double cost = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost += c[i][j] * x[i][j];
    vertices.emplace_back(cost, x);
    if (cost < best.cost - 1e-12) {
      best.plan = x;
      best.cost = cost;
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));
  for (const auto& [cost, x] : vertices) {
    double diff = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) diff = std::max(diff, std::fabs(x[i][j] - best.plan[i][j]));
    if (diff > 1e-12) best.sharpness = std::min(best.sharpness, (cost - best.cost) / diff);
  }
  return best;
}

// ---------------------------------------------------------------------------

/// Maps each distinct text to its own basis vector, in first-seen order
/// across calls (deterministic for a fixed call sequence).
class OrthogonalStubProvider final : public EmbeddingProvider {
 public:
  explicit OrthogonalStubProvider(Eigen::Index dim = 32) : dim_(dim) {}
  Mat<double> embed(const std::vector<std::string>& texts) const override {
    Mat<double> out = Mat<double>::Zero(static_cast<Eigen::Index>(texts.size()), dim_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto [it, inserted] = ids_.emplace(texts[i], static_cast<Eigen::Index>(ids_.size()));
      out(static_cast<Eigen::Index>(i), it->second % dim_) = 1.0;
    }
    return out;
  }
  Eigen::Index dimension() const override { return dim_; }
  /// Pre-assigns a text to the same slot as another text.
  void alias(const std::string& text, const std::string& same_as) const {
    embed({same_as});
    ids_[text] = ids_.at(same_as);
  }

 private:
  Eigen::Index dim_;
  mutable std::map<std::string, Eigen::Index> ids_;
};

inline Mat<double> random_matrix(std::mt19937_64& rng, int rows, int cols, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat<double> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Vec<double> random_mass(std::mt19937_64& rng, int n, bool normalize) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vec<double> v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  if (normalize) v /= v.sum();
  return v;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("condinsight_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
