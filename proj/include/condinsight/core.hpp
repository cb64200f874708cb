// Shared domain vocabulary: assets, work orders, meters, alerts, FMEA rows.
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace condinsight {

using Json = nlohmann::json;

enum class ErrorCode {
  MissingField,
  InvalidEnum,
  InconsistentDates,
  InvalidTimestamp,
  InvalidValue,
  DuplicateTimestamp,
  NonNumericValue,
  NotEnoughData,
  DimensionMismatch,
  NumericalOverflow,
  NonPositiveMass,
  EmptyInput,
  AssetMismatch,
  SchemaViolation,
  UnknownCondition,
  GatewayUnavailable,
  PersistentSchemaViolation,
  ScoreOutOfRange,
  StatementCountMismatch,
  IndexMismatch,
  UnreadableFile,
  FormatError,
  UnknownAsset,
  NoMatchingAssets,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// UTC instant at second resolution.
struct Timestamp {
  std::int64_t seconds = 0;  // since 1970-01-01T00:00:00Z

  static Timestamp parse(std::string_view rfc3339);  // throws Error(InvalidTimestamp)
  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                              int second = 0);
  std::string to_string() const;  // YYYY-MM-DDTHH:MM:SSZ

  Timestamp plus_days(std::int64_t days) const { return {seconds + days * 86400}; }
  auto operator<=>(const Timestamp&) const = default;
};

/// Whole days from `from` to `to`, floored.
std::int64_t whole_days_between(Timestamp from, Timestamp to);

enum class AssetStatus { OPERATING, DOWN, DECOMMISSIONED };
enum class WorkOrderType { PREVENTIVE, CORRECTIVE, EMERGENCY, OTHER };
enum class WorkOrderStatus { OPEN, IN_PROGRESS, COMPLETED, CANCELLED };
enum class MeterType { GAUGE, CONTINUOUS };
enum class Severity { INFO, WARNING, CRITICAL };
enum class ConditionCategory { NORMAL, NEEDS_ATTENTION, NOT_ENOUGH_DATA };

std::string_view to_string(AssetStatus v);
std::string_view to_string(WorkOrderType v);
std::string_view to_string(WorkOrderStatus v);
std::string_view to_string(MeterType v);
std::string_view to_string(Severity v);
std::string_view to_string(ConditionCategory v);

// Case-insensitive parsers over the canonical names (plus common CMMS aliases
// for statuses). Throw Error(InvalidEnum).
AssetStatus parse_asset_status(std::string_view s);
WorkOrderStatus parse_work_order_status(std::string_view s);
MeterType parse_meter_type(std::string_view s);
Severity parse_severity(std::string_view s);
ConditionCategory parse_condition_category(std::string_view s);

inline constexpr WorkOrderType kAllWorkOrderTypes[] = {
    WorkOrderType::PREVENTIVE, WorkOrderType::CORRECTIVE, WorkOrderType::EMERGENCY,
    WorkOrderType::OTHER};
inline constexpr WorkOrderStatus kAllWorkOrderStatuses[] = {
    WorkOrderStatus::OPEN, WorkOrderStatus::IN_PROGRESS, WorkOrderStatus::COMPLETED,
    WorkOrderStatus::CANCELLED};
inline constexpr ConditionCategory kAllConditionCategories[] = {
    ConditionCategory::NORMAL, ConditionCategory::NEEDS_ATTENTION,
    ConditionCategory::NOT_ENOUGH_DATA};

struct Asset {
  std::string asset_number;
  std::string description;
  std::string site_id;
  std::string asset_class;
  int priority = 3;  // 1..5
  AssetStatus status = AssetStatus::OPERATING;
  bool is_running = true;
  std::optional<std::string> failure_code;
  double asset_age_in_years = 0.0;
  std::optional<std::string> manufacturer;

  bool operator==(const Asset&) const = default;
};

struct WorkOrder {
  std::string wonum;
  std::string asset_number;
  WorkOrderType wo_type = WorkOrderType::OTHER;
  WorkOrderStatus status = WorkOrderStatus::OPEN;
  Timestamp reported_date;
  std::optional<Timestamp> target_date;
  std::optional<Timestamp> completion_date;
  std::string description;
  std::optional<std::string> problem_code;

  bool operator==(const WorkOrder&) const = default;
};

struct Reading {
  Timestamp t;
  double v = 0.0;
  bool operator==(const Reading&) const = default;
};

struct MeterSeries {
  std::string asset_number;
  std::string meter_name;
  MeterType meter_type = MeterType::GAUGE;
  std::string unit;
  std::vector<Reading> readings;  // strictly increasing in t
  bool empty_flagged = false;     // set when ingested with zero readings

  std::size_t size() const { return readings.size(); }
  bool operator==(const MeterSeries&) const = default;
};

struct FmeaEntry {
  std::string asset_class;
  std::string component;
  std::string failure_mode;
  std::string mechanism;
  std::vector<std::string> recommended_actions;

  bool operator==(const FmeaEntry&) const = default;
};

struct Alert {
  std::string alert_id;
  std::string asset_number;
  Severity severity = Severity::INFO;
  Timestamp raised_at;
  bool active = false;
  std::string message;

  bool operator==(const Alert&) const = default;
};

struct HealthScore {
  std::string score_name;
  double value = 0.0;
  double min = 0.0;
  double max = 1.0;
  std::string meaning;

  bool operator==(const HealthScore&) const = default;
};

/// Maps CMMS work-order type codes onto WorkOrderType. Unknown codes map to OTHER.
class TypeCodeTable {
 public:
  TypeCodeTable();  // PM, CM, EM plus the canonical names
  void set(std::string code, WorkOrderType type);
  WorkOrderType lookup(std::string_view code) const;

 private:
  std::map<std::string, WorkOrderType> codes_;  // upper-cased keys
};

using RawRecord = std::map<std::string, std::string>;

WorkOrder validate_work_order(const RawRecord& record, const TypeCodeTable& codes = {});
RawRecord to_record(const WorkOrder& wo);

/// Accepts {"asset_number","meter_name","meter_type","unit","readings":[[ts, v], ...]}.
/// Readings are sorted; an empty list is accepted with `empty_flagged` set.
MeterSeries validate_meter_series(const Json& record);
Json to_record(const MeterSeries& series);

Asset validate_asset(const RawRecord& record);
RawRecord to_record(const Asset& asset);

FmeaEntry validate_fmea_entry(const RawRecord& record);
RawRecord to_record(const FmeaEntry& entry);

Alert validate_alert(const Json& record);
Json to_record(const Alert& alert);

void validate_health_score(const HealthScore& score);

// Small string helpers shared across modules.
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string trim(std::string_view s);

}  // namespace condinsight
