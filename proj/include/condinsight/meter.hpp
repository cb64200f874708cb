// Deterministic behavioral abstraction of meter histories.
//
// GAUGE meters get mean / sample standard deviation and two detectors:
// z-score outliers (|z_i| > z_thresh) and abrupt steps (|v_i - v_{i-1}| > k*s,
// kept only when v_i also sits more than one s from the mean). CONTINUOUS
// meters are summarized by their increments: resets (negative increments),
// rate anomalies (non-negative increments outside the mean +/- k*s band) and
// flat runs. Event indices are 1-based positions in the reading list, so an
// increment event at index i refers to v_i - v_{i-1}.
#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "condinsight/core.hpp"

namespace condinsight {

struct AbstractionConfig {
  double z_thresh = 2.0;
  double k = 2.0;
  double eps_flat = 0.0;
  std::size_t min_points = 5;
  std::optional<std::size_t> baseline_window;  // trailing readings used for gauge stats
  std::size_t flat_run_min = 3;
  bool exclude_resets_from_band = false;

  void validate() const;  // throws Error(ConfigError)
};

struct GaugeSummary {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  Reading latest;
  std::size_t n = 0;

  bool operator==(const GaugeSummary&) const = default;
};

struct ContinuousSummary {
  double increment_mean = 0.0;
  double increment_std = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double total_delta = 0.0;
  std::size_t n_increments = 0;

  bool operator==(const ContinuousSummary&) const = default;
};

enum class MeterEventKind { Z_SCORE_ANOMALY, ABRUPT_CHANGE, RESET, RATE_ANOMALY, FLAT_PERIOD };
std::string_view to_string(MeterEventKind kind);
MeterEventKind parse_meter_event_kind(std::string_view s);

struct MeterEvent {
  MeterEventKind kind = MeterEventKind::Z_SCORE_ANOMALY;
  std::size_t index = 0;  // 1-based
  Timestamp timestamp;
  double value = 0.0;
  double magnitude = 0.0;  // z_i, delta_i, or flat-run length

  bool operator==(const MeterEvent&) const = default;
};

using MeterSummary = std::variant<std::monostate, GaugeSummary, ContinuousSummary>;

struct MeterFacts {
  std::string asset_number;
  std::string meter_name;
  MeterType meter_type = MeterType::GAUGE;
  std::string unit;
  std::size_t n = 0;
  MeterSummary summary;  // monostate <=> insufficient data
  std::vector<MeterEvent> events;

  bool insufficient() const { return std::holds_alternative<std::monostate>(summary); }
  bool operator==(const MeterFacts&) const = default;
};

/// Increments v_i - v_{i-1} for i = 2..N.
std::vector<double> increments(const MeterSeries& series);

GaugeSummary summarize_gauge(const MeterSeries& series, const AbstractionConfig& cfg);
std::vector<MeterEvent> detect_gauge_anomalies(const MeterSeries& series,
                                               const AbstractionConfig& cfg);
ContinuousSummary summarize_continuous(const MeterSeries& series, const AbstractionConfig& cfg);
std::vector<MeterEvent> detect_continuous_events(const MeterSeries& series,
                                                 const AbstractionConfig& cfg);

/// Never throws on short series; insufficiency is encoded in the result.
MeterFacts abstract_meter(const MeterSeries& series, const AbstractionConfig& cfg);

}  // namespace condinsight
