#include "condinsight/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace condinsight {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidEnum: return "InvalidEnum";
    case ErrorCode::InconsistentDates: return "InconsistentDates";
    case ErrorCode::InvalidTimestamp: return "InvalidTimestamp";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::DuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::NotEnoughData: return "NotEnoughData";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::AssetMismatch: return "AssetMismatch";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownCondition: return "UnknownCondition";
    case ErrorCode::GatewayUnavailable: return "GatewayUnavailable";
    case ErrorCode::PersistentSchemaViolation: return "PersistentSchemaViolation";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::StatementCountMismatch: return "StatementCountMismatch";
    case ErrorCode::IndexMismatch: return "IndexMismatch";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UnknownAsset: return "UnknownAsset";
    case ErrorCode::NoMatchingAssets: return "NoMatchingAssets";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// Time

namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

int read_digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return -1;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return -1;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute,
                                int second) {
  return {days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second};
}

// Accepts YYYY-MM-DD, YYYY-MM-DDTHH:MM[:SS[.fff]] with Z, +hh:mm / -hh:mm, or no
// offset (taken as UTC). Fractional seconds are truncated.
Timestamp Timestamp::parse(std::string_view text) {
  const std::string s = trim(text);
  auto fail = [&]() -> Timestamp {
    throw Error(ErrorCode::InvalidTimestamp, "cannot parse '" + s + "'");
  };
  const int year = read_digits(s, 0, 4);
  if (year < 0 || s.size() < 10 || s[4] != '-' || s[7] != '-') return fail();
  const int month = read_digits(s, 5, 2);
  const int day = read_digits(s, 8, 2);
  if (month < 1 || month > 12 || day < 1 ||
      static_cast<unsigned>(day) > days_in_month(year, static_cast<unsigned>(month)))
    return fail();
  int hour = 0, minute = 0, second = 0;
  std::int64_t offset = 0;
  std::size_t pos = 10;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return fail();
    hour = read_digits(s, pos + 1, 2);
    if (hour < 0 || hour > 23 || pos + 3 >= s.size() || s[pos + 3] != ':') return fail();
    minute = read_digits(s, pos + 4, 2);
    if (minute < 0 || minute > 59) return fail();
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      second = read_digits(s, pos + 1, 2);
      if (second < 0 || second > 60) return fail();
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == start) return fail();
      }
    }
    if (pos < s.size()) {
      if ((s[pos] == 'Z' || s[pos] == 'z') && pos + 1 == s.size()) {
        pos = s.size();
      } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
        const int oh = read_digits(s, pos + 1, 2);
        const int om = read_digits(s, pos + 4, 2);
        if (oh < 0 || oh > 23 || om < 0 || om > 59) return fail();
        offset = (oh * 3600 + om * 60) * (s[pos] == '+' ? 1 : -1);
        pos = s.size();
      } else {
        return fail();
      }
    }
  }
  Timestamp ts = from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour,
                            minute, second);
  ts.seconds -= offset;
  return ts;
}

std::string Timestamp::to_string() const {
  std::int64_t days = seconds / 86400;
  std::int64_t rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>(rem / 60 % 60), static_cast<long long>(rem % 60));
  return buf;
}

std::int64_t whole_days_between(Timestamp from, Timestamp to) {
  const std::int64_t diff = to.seconds - from.seconds;
  return diff >= 0 ? diff / 86400 : -((-diff + 86399) / 86400);
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(AssetStatus v) {
  switch (v) {
    case AssetStatus::OPERATING: return "OPERATING";
    case AssetStatus::DOWN: return "DOWN";
    case AssetStatus::DECOMMISSIONED: return "DECOMMISSIONED";
  }
  return "";
}

std::string_view to_string(WorkOrderType v) {
  switch (v) {
    case WorkOrderType::PREVENTIVE: return "PREVENTIVE";
    case WorkOrderType::CORRECTIVE: return "CORRECTIVE";
    case WorkOrderType::EMERGENCY: return "EMERGENCY";
    case WorkOrderType::OTHER: return "OTHER";
  }
  return "";
}

std::string_view to_string(WorkOrderStatus v) {
  switch (v) {
    case WorkOrderStatus::OPEN: return "OPEN";
    case WorkOrderStatus::IN_PROGRESS: return "IN_PROGRESS";
    case WorkOrderStatus::COMPLETED: return "COMPLETED";
    case WorkOrderStatus::CANCELLED: return "CANCELLED";
  }
  return "";
}

std::string_view to_string(MeterType v) {
  return v == MeterType::GAUGE ? "GAUGE" : "CONTINUOUS";
}

std::string_view to_string(Severity v) {
  switch (v) {
    case Severity::INFO: return "INFO";
    case Severity::WARNING: return "WARNING";
    case Severity::CRITICAL: return "CRITICAL";
  }
  return "";
}

std::string_view to_string(ConditionCategory v) {
  switch (v) {
    case ConditionCategory::NORMAL: return "NORMAL";
    case ConditionCategory::NEEDS_ATTENTION: return "NEEDS_ATTENTION";
    case ConditionCategory::NOT_ENOUGH_DATA: return "NOT_ENOUGH_DATA";
  }
  return "";
}

namespace {

std::string enum_key(std::string_view s) {
  std::string out;
  for (char c : trim(s)) out.push_back(c == ' ' || c == '-' ? '_' : c);
  return to_upper(out);
}

[[noreturn]] void invalid_enum(std::string_view what, std::string_view value) {
  throw Error(ErrorCode::InvalidEnum, std::string(what) + " '" + std::string(value) + "'");
}

}  // namespace

AssetStatus parse_asset_status(std::string_view s) {
  const auto k = enum_key(s);
  if (k == "OPERATING" || k == "ACTIVE") return AssetStatus::OPERATING;
  if (k == "DOWN" || k == "BROKEN") return AssetStatus::DOWN;
  if (k == "DECOMMISSIONED") return AssetStatus::DECOMMISSIONED;
  invalid_enum("asset status", s);
}

WorkOrderStatus parse_work_order_status(std::string_view s) {
  const auto k = enum_key(s);
  if (k == "OPEN" || k == "WAPPR" || k == "APPR") return WorkOrderStatus::OPEN;
  if (k == "IN_PROGRESS" || k == "INPRG") return WorkOrderStatus::IN_PROGRESS;
  if (k == "COMPLETED" || k == "COMP" || k == "CLOSED" || k == "CLOSE")
    return WorkOrderStatus::COMPLETED;
  if (k == "CANCELLED" || k == "CANCELED" || k == "CAN") return WorkOrderStatus::CANCELLED;
  invalid_enum("work order status", s);
}

MeterType parse_meter_type(std::string_view s) {
  const auto k = enum_key(s);
  if (k == "GAUGE") return MeterType::GAUGE;
  if (k == "CONTINUOUS") return MeterType::CONTINUOUS;
  invalid_enum("meter type", s);
}

Severity parse_severity(std::string_view s) {
  const auto k = enum_key(s);
  if (k == "INFO") return Severity::INFO;
  if (k == "WARNING" || k == "WARN") return Severity::WARNING;
  if (k == "CRITICAL") return Severity::CRITICAL;
  invalid_enum("severity", s);
}

ConditionCategory parse_condition_category(std::string_view s) {
  const auto k = enum_key(s);
  if (k == "NORMAL") return ConditionCategory::NORMAL;
  if (k == "NEEDS_ATTENTION") return ConditionCategory::NEEDS_ATTENTION;
  if (k == "NOT_ENOUGH_DATA") return ConditionCategory::NOT_ENOUGH_DATA;
  invalid_enum("condition", s);
}

// ---------------------------------------------------------------------------
// Type codes

TypeCodeTable::TypeCodeTable() {
  codes_ = {{"PM", WorkOrderType::PREVENTIVE},      {"CM", WorkOrderType::CORRECTIVE},
            {"EM", WorkOrderType::EMERGENCY},       {"PREVENTIVE", WorkOrderType::PREVENTIVE},
            {"CORRECTIVE", WorkOrderType::CORRECTIVE}, {"EMERGENCY", WorkOrderType::EMERGENCY},
            {"OTHER", WorkOrderType::OTHER}};
}

void TypeCodeTable::set(std::string code, WorkOrderType type) {
  codes_[to_upper(trim(code))] = type;
}

WorkOrderType TypeCodeTable::lookup(std::string_view code) const {
  auto it = codes_.find(to_upper(trim(code)));
  return it == codes_.end() ? WorkOrderType::OTHER : it->second;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

const std::string& required(const RawRecord& r, const std::string& key) {
  auto it = r.find(key);
  if (it == r.end() || trim(it->second).empty())
    throw Error(ErrorCode::MissingField, "field '" + key + "' is required");
  return it->second;
}

std::optional<std::string> optional_field(const RawRecord& r, const std::string& key) {
  auto it = r.find(key);
  if (it == r.end()) return std::nullopt;
  auto v = trim(it->second);
  if (v.empty()) return std::nullopt;
  return v;
}

double parse_real(std::string_view text, std::string_view field) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::NonNumericValue,
                std::string(field) + " '" + s + "' is not a finite number");
  return v;
}

bool parse_bool(std::string_view text, std::string_view field) {
  const auto k = to_lower(trim(text));
  if (k == "true" || k == "1" || k == "yes" || k == "y") return true;
  if (k == "false" || k == "0" || k == "no" || k == "n") return false;
  throw Error(ErrorCode::InvalidValue, std::string(field) + " '" + std::string(text) +
                                           "' is not a boolean");
}

const Json& json_required(const Json& r, const char* key) {
  if (!r.is_object() || !r.contains(key) || r.at(key).is_null())
    throw Error(ErrorCode::MissingField, std::string("field '") + key + "' is required");
  return r.at(key);
}

std::string json_string(const Json& r, const char* key) {
  const Json& v = json_required(r, key);
  if (!v.is_string()) throw Error(ErrorCode::InvalidValue, std::string(key) + " must be a string");
  auto s = trim(v.get<std::string>());
  if (s.empty()) throw Error(ErrorCode::MissingField, std::string("field '") + key + "' is empty");
  return s;
}

}  // namespace

WorkOrder validate_work_order(const RawRecord& r, const TypeCodeTable& codes) {
  WorkOrder wo;
  wo.wonum = trim(required(r, "wonum"));
  wo.asset_number = trim(required(r, "asset_number"));
  wo.wo_type = codes.lookup(required(r, "wo_type"));
  wo.status = parse_work_order_status(required(r, "status"));
  wo.reported_date = Timestamp::parse(required(r, "reported_date"));
  if (auto v = optional_field(r, "target_date")) wo.target_date = Timestamp::parse(*v);
  if (auto v = optional_field(r, "completion_date")) wo.completion_date = Timestamp::parse(*v);
  if (auto it = r.find("description"); it != r.end()) wo.description = trim(it->second);
  wo.problem_code = optional_field(r, "problem_code");

  if (wo.completion_date && *wo.completion_date < wo.reported_date)
    throw Error(ErrorCode::InconsistentDates, wo.wonum + ": completion before report");
  const bool completed = wo.status == WorkOrderStatus::COMPLETED;
  if (completed && !wo.completion_date)
    throw Error(ErrorCode::InconsistentDates, wo.wonum + ": COMPLETED without completion_date");
  if (!completed && wo.completion_date)
    throw Error(ErrorCode::InconsistentDates,
                wo.wonum + ": completion_date present but status is " +
                    std::string(to_string(wo.status)));
  return wo;
}

RawRecord to_record(const WorkOrder& wo) {
  RawRecord r{{"wonum", wo.wonum},
              {"asset_number", wo.asset_number},
              {"wo_type", std::string(to_string(wo.wo_type))},
              {"status", std::string(to_string(wo.status))},
              {"reported_date", wo.reported_date.to_string()},
              {"description", wo.description}};
  if (wo.target_date) r["target_date"] = wo.target_date->to_string();
  if (wo.completion_date) r["completion_date"] = wo.completion_date->to_string();
  if (wo.problem_code) r["problem_code"] = *wo.problem_code;
  return r;
}

MeterSeries validate_meter_series(const Json& r) {
  MeterSeries s;
  s.asset_number = json_string(r, "asset_number");
  s.meter_name = json_string(r, "meter_name");
  s.meter_type = parse_meter_type(json_string(r, "meter_type"));
  if (r.contains("unit") && r.at("unit").is_string()) s.unit = trim(r.at("unit").get<std::string>());
  const Json& readings = json_required(r, "readings");
  if (!readings.is_array()) throw Error(ErrorCode::InvalidValue, "readings must be an array");
  s.readings.reserve(readings.size());
  for (const auto& pair : readings) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string())
      throw Error(ErrorCode::InvalidValue, "each reading must be [timestamp, value]");
    Reading rd;
    rd.t = Timestamp::parse(pair[0].get<std::string>());
    if (pair[1].is_number()) {
      rd.v = pair[1].get<double>();
    } else if (pair[1].is_string()) {
      rd.v = parse_real(pair[1].get<std::string>(), "reading");
    } else {
      throw Error(ErrorCode::NonNumericValue, "reading value is not numeric");
    }
    if (!std::isfinite(rd.v)) throw Error(ErrorCode::NonNumericValue, "reading is not finite");
    s.readings.push_back(rd);
  }
  std::stable_sort(s.readings.begin(), s.readings.end(),
                   [](const Reading& a, const Reading& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < s.readings.size(); ++i) {
    if (s.readings[i].t == s.readings[i - 1].t)
      throw Error(ErrorCode::DuplicateTimestamp,
                  s.meter_name + " has two readings at " + s.readings[i].t.to_string());
  }
  s.empty_flagged = s.readings.empty();
  return s;
}

Json to_record(const MeterSeries& s) {
  Json readings = Json::array();
  for (const auto& rd : s.readings) readings.push_back(Json::array({rd.t.to_string(), rd.v}));
  return Json{{"asset_number", s.asset_number},
              {"meter_name", s.meter_name},
              {"meter_type", std::string(to_string(s.meter_type))},
              {"unit", s.unit},
              {"readings", std::move(readings)}};
}

Asset validate_asset(const RawRecord& r) {
  Asset a;
  a.asset_number = trim(required(r, "asset_number"));
  if (auto v = optional_field(r, "description")) a.description = *v;
  if (auto v = optional_field(r, "site_id")) a.site_id = *v;
  if (auto v = optional_field(r, "asset_class")) a.asset_class = *v;
  if (auto v = optional_field(r, "priority")) {
    const double p = parse_real(*v, "priority");
    if (p != std::floor(p) || p < 1 || p > 5)
      throw Error(ErrorCode::InvalidValue, "priority must be an integer in 1..5");
    a.priority = static_cast<int>(p);
  }
  if (auto v = optional_field(r, "status")) a.status = parse_asset_status(*v);
  if (auto v = optional_field(r, "is_running")) a.is_running = parse_bool(*v, "is_running");
  a.failure_code = optional_field(r, "failure_code");
  if (auto v = optional_field(r, "asset_age_in_years")) {
    a.asset_age_in_years = parse_real(*v, "asset_age_in_years");
    if (a.asset_age_in_years < 0)
      throw Error(ErrorCode::InvalidValue, "asset_age_in_years must be >= 0");
  }
  a.manufacturer = optional_field(r, "manufacturer");
  return a;
}

RawRecord to_record(const Asset& a) {
  char age[32];
  std::snprintf(age, sizeof age, "%.17g", a.asset_age_in_years);
  RawRecord r{{"asset_number", a.asset_number},
              {"description", a.description},
              {"site_id", a.site_id},
              {"asset_class", a.asset_class},
              {"priority", std::to_string(a.priority)},
              {"status", std::string(to_string(a.status))},
              {"is_running", a.is_running ? "true" : "false"},
              {"asset_age_in_years", age}};
  if (a.failure_code) r["failure_code"] = *a.failure_code;
  if (a.manufacturer) r["manufacturer"] = *a.manufacturer;
  return r;
}

FmeaEntry validate_fmea_entry(const RawRecord& r) {
  FmeaEntry e;
  if (auto v = optional_field(r, "asset_class")) e.asset_class = *v;
  e.component = trim(required(r, "component"));
  e.mechanism = trim(required(r, "mechanism"));
  if (auto v = optional_field(r, "failure_mode")) e.failure_mode = *v;
  if (auto v = optional_field(r, "recommended_actions")) {
    std::size_t start = 0;
    while (start <= v->size()) {
      auto end = v->find(';', start);
      if (end == std::string::npos) end = v->size();
      auto action = trim(std::string_view(*v).substr(start, end - start));
      if (!action.empty()) e.recommended_actions.push_back(std::move(action));
      start = end + 1;
    }
  }
  return e;
}

RawRecord to_record(const FmeaEntry& e) {
  std::string actions;
  for (std::size_t i = 0; i < e.recommended_actions.size(); ++i) {
    if (i) actions += ';';
    actions += e.recommended_actions[i];
  }
  return {{"asset_class", e.asset_class},
          {"component", e.component},
          {"failure_mode", e.failure_mode},
          {"mechanism", e.mechanism},
          {"recommended_actions", actions}};
}

Alert validate_alert(const Json& r) {
  Alert a;
  a.alert_id = json_string(r, "alert_id");
  a.asset_number = json_string(r, "asset_number");
  a.severity = parse_severity(json_string(r, "severity"));
  a.raised_at = Timestamp::parse(json_string(r, "raised_at"));
  if (r.contains("active")) {
    const Json& v = r.at("active");
    if (v.is_boolean()) {
      a.active = v.get<bool>();
    } else if (v.is_string()) {
      a.active = parse_bool(v.get<std::string>(), "active");
    } else {
      throw Error(ErrorCode::InvalidValue, "active must be a boolean");
    }
  }
  if (r.contains("message") && r.at("message").is_string()) a.message = r.at("message").get<std::string>();
  return a;
}

Json to_record(const Alert& a) {
  return Json{{"alert_id", a.alert_id},
              {"asset_number", a.asset_number},
              {"severity", std::string(to_string(a.severity))},
              {"raised_at", a.raised_at.to_string()},
              {"active", a.active},
              {"message", a.message}};
}

void validate_health_score(const HealthScore& s) {
  if (s.score_name.empty()) throw Error(ErrorCode::MissingField, "score_name is required");
  if (!(s.min <= s.value && s.value <= s.max))
    throw Error(ErrorCode::InvalidValue, "health score " + s.score_name + " outside its range");
}

}  // namespace condinsight
