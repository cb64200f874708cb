#include "condinsight/meter.hpp"

#include <algorithm>
#include <cmath>

namespace condinsight {

void AbstractionConfig::validate() const {
  if (!(z_thresh > 0)) throw Error(ErrorCode::ConfigError, "z_thresh must be > 0");
  if (!(k > 0)) throw Error(ErrorCode::ConfigError, "k must be > 0");
  if (!(eps_flat >= 0)) throw Error(ErrorCode::ConfigError, "eps_flat must be >= 0");
  if (min_points < 2) throw Error(ErrorCode::ConfigError, "min_points must be >= 2");
  if (baseline_window && *baseline_window < 2)
    throw Error(ErrorCode::ConfigError, "baseline_window must be >= 2");
  if (flat_run_min < 1) throw Error(ErrorCode::ConfigError, "flat_run_min must be >= 1");
}

std::string_view to_string(MeterEventKind kind) {
  switch (kind) {
    case MeterEventKind::Z_SCORE_ANOMALY: return "Z_SCORE_ANOMALY";
    case MeterEventKind::ABRUPT_CHANGE: return "ABRUPT_CHANGE";
    case MeterEventKind::RESET: return "RESET";
    case MeterEventKind::RATE_ANOMALY: return "RATE_ANOMALY";
    case MeterEventKind::FLAT_PERIOD: return "FLAT_PERIOD";
  }
  return "";
}

MeterEventKind parse_meter_event_kind(std::string_view s) {
  for (auto k : {MeterEventKind::Z_SCORE_ANOMALY, MeterEventKind::ABRUPT_CHANGE,
                 MeterEventKind::RESET, MeterEventKind::RATE_ANOMALY, MeterEventKind::FLAT_PERIOD})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidEnum, "meter event kind '" + std::string(s) + "'");
}

namespace {

void require_type(const MeterSeries& s, MeterType type) {
  if (s.meter_type != type)
    throw Error(ErrorCode::InvalidValue, s.meter_name + " is not a " + std::string(to_string(type)) +
                                             " meter");
}

void require_points(const MeterSeries& s, const AbstractionConfig& cfg) {
  if (s.size() < cfg.min_points)
    throw Error(ErrorCode::NotEnoughData, s.meter_name + " has N=" + std::to_string(s.size()) +
                                              " < min_points=" + std::to_string(cfg.min_points));
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Two-pass mean and (n-1) sample deviation; a single value has std 0.
MeanStd mean_std(const double* first, std::size_t n) {
  MeanStd r;
  if (n == 0) return r;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += first[i];
  // Rounding can push the mean of identical values a few ulps outside them.
  const auto [lo, hi] = std::minmax_element(first, first + n);
  r.mean = std::clamp(sum / static_cast<double>(n), *lo, *hi);
  if (n < 2) return r;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = first[i] - r.mean;
    ss += d * d;
  }
  r.std = std::sqrt(ss / static_cast<double>(n - 1));
  return r;
}

std::vector<double> values(const MeterSeries& s) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& r : s.readings) v.push_back(r.v);
  return v;
}

MeanStd gauge_baseline(const std::vector<double>& v, const AbstractionConfig& cfg) {
  std::size_t start = 0;
  if (cfg.baseline_window && *cfg.baseline_window < v.size()) start = v.size() - *cfg.baseline_window;
  return mean_std(v.data() + start, v.size() - start);
}

MeanStd increment_stats(const std::vector<double>& deltas, const AbstractionConfig& cfg) {
  if (!cfg.exclude_resets_from_band) return mean_std(deltas.data(), deltas.size());
  std::vector<double> kept;
  std::copy_if(deltas.begin(), deltas.end(), std::back_inserter(kept),
               [](double d) { return d >= 0; });
  if (kept.empty()) return mean_std(deltas.data(), deltas.size());
  return mean_std(kept.data(), kept.size());
}

MeterEvent make_event(const MeterSeries& s, MeterEventKind kind, std::size_t pos0,
                      double magnitude) {
  return {kind, pos0 + 1, s.readings[pos0].t, s.readings[pos0].v, magnitude};
}

}  // namespace

std::vector<double> increments(const MeterSeries& series) {
  std::vector<double> d;
  if (series.size() < 2) return d;
  d.reserve(series.size() - 1);
  for (std::size_t i = 1; i < series.size(); ++i)
    d.push_back(series.readings[i].v - series.readings[i - 1].v);
  return d;
}

GaugeSummary summarize_gauge(const MeterSeries& series, const AbstractionConfig& cfg) {
  require_type(series, MeterType::GAUGE);
  require_points(series, cfg);
  const auto v = values(series);
  const auto stats = gauge_baseline(v, cfg);
  GaugeSummary g;
  g.mean = stats.mean;
  g.std = stats.std;
  g.min = *std::min_element(v.begin(), v.end());
  g.max = *std::max_element(v.begin(), v.end());
  g.latest = series.readings.back();
  g.n = series.size();
  return g;
}

std::vector<MeterEvent> detect_gauge_anomalies(const MeterSeries& series,
                                               const AbstractionConfig& cfg) {
  require_type(series, MeterType::GAUGE);
  require_points(series, cfg);
  const auto v = values(series);
  const auto stats = gauge_baseline(v, cfg);
  std::vector<MeterEvent> events;
  if (!(stats.std > 0)) return events;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double deviation = v[i] - stats.mean;
    const double z = deviation / stats.std;
    if (std::abs(z) > cfg.z_thresh) events.push_back(make_event(series, MeterEventKind::Z_SCORE_ANOMALY, i, z));
    if (i >= 1) {
      const double delta = v[i] - v[i - 1];
      if (std::abs(delta) > cfg.k * stats.std && std::abs(deviation) > stats.std)
        events.push_back(make_event(series, MeterEventKind::ABRUPT_CHANGE, i, delta));
    }
  }
  return events;
}

ContinuousSummary summarize_continuous(const MeterSeries& series, const AbstractionConfig& cfg) {
  require_type(series, MeterType::CONTINUOUS);
  require_points(series, cfg);
  const auto deltas = increments(series);
  const auto stats = increment_stats(deltas, cfg);
  ContinuousSummary c;
  c.increment_mean = stats.mean;
  c.increment_std = stats.std;
  c.band_lo = stats.mean - cfg.k * stats.std;
  c.band_hi = stats.mean + cfg.k * stats.std;
  c.total_delta = series.readings.back().v - series.readings.front().v;
  c.n_increments = deltas.size();
  return c;
}

std::vector<MeterEvent> detect_continuous_events(const MeterSeries& series,
                                                 const AbstractionConfig& cfg) {
  const auto summary = summarize_continuous(series, cfg);
  const auto deltas = increments(series);
  std::vector<MeterEvent> events;
  std::size_t run_start = 0, run_len = 0;
  auto close_run = [&] {
    if (run_len >= cfg.flat_run_min)
      events.push_back(make_event(series, MeterEventKind::FLAT_PERIOD, run_start + 1,
                                  static_cast<double>(run_len)));
    run_len = 0;
  };
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    const double d = deltas[j];
    const std::size_t pos0 = j + 1;  // reading that ends this increment
    if (std::abs(d) <= cfg.eps_flat) {
      if (run_len == 0) run_start = j;
      ++run_len;
    } else {
      close_run();
    }
    if (d < 0) {
      events.push_back(make_event(series, MeterEventKind::RESET, pos0, d));
    } else if (d < summary.band_lo || d > summary.band_hi) {
      events.push_back(make_event(series, MeterEventKind::RATE_ANOMALY, pos0, d));
    }
  }
  close_run();
  std::stable_sort(events.begin(), events.end(), [](const MeterEvent& a, const MeterEvent& b) {
    return a.index != b.index ? a.index < b.index : a.kind < b.kind;
  });
  return events;
}

MeterFacts abstract_meter(const MeterSeries& series, const AbstractionConfig& cfg) {
  MeterFacts f;
  f.asset_number = series.asset_number;
  f.meter_name = series.meter_name;
  f.meter_type = series.meter_type;
  f.unit = series.unit;
  f.n = series.size();
  if (series.size() < cfg.min_points) return f;
  if (series.meter_type == MeterType::GAUGE) {
    f.summary = summarize_gauge(series, cfg);
    f.events = detect_gauge_anomalies(series, cfg);
  } else {
    f.summary = summarize_continuous(series, cfg);
    f.events = detect_continuous_events(series, cfg);
  }
  return f;
}

}  // namespace condinsight
