#include <gtest/gtest.h>

#include "support.hpp"

using namespace condinsight;
using namespace testsupport;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::ConfigError;
}

RawRecord minimal_wo() {
  return {{"wonum", "W1"},
          {"asset_number", "A1"},
          {"wo_type", "EMERGENCY"},
          {"status", "OPEN"},
          {"reported_date", "2024-01-01T00:00:00Z"}};
}

}  // namespace

TEST(Timestamp, ParsesAndNormalizesToUtc) {
  EXPECT_EQ(Timestamp::parse("2024-01-01T00:00:00Z").seconds, 1704067200);
  EXPECT_EQ(Timestamp::parse("2024-01-01T02:00:00+02:00"), Timestamp::parse("2024-01-01T00:00:00Z"));
  EXPECT_EQ(Timestamp::from_civil(2024, 2, 29, 12, 30, 5).to_string(), "2024-02-29T12:30:05Z");
  EXPECT_EQ(code_of([] { Timestamp::parse("2024-13-01T00:00:00Z"); }), ErrorCode::InvalidTimestamp);
  EXPECT_EQ(code_of([] { Timestamp::parse("yesterday"); }), ErrorCode::InvalidTimestamp);
}

TEST(Timestamp, RoundTripsThroughText) {
  for (std::int64_t s : {0LL, 86399LL, 951782400LL, 1719705600LL, 4102444799LL}) {
    const Timestamp t{s};
    EXPECT_EQ(Timestamp::parse(t.to_string()), t);
  }
  EXPECT_EQ(whole_days_between(day(0), day(10)), 10);
  EXPECT_EQ(whole_days_between(day(10), day(0)), -10);
}

TEST(ValidateWorkOrder, MinimalRecord) {
  const auto wo = validate_work_order(minimal_wo());
  EXPECT_EQ(wo.wonum, "W1");
  EXPECT_EQ(wo.wo_type, WorkOrderType::EMERGENCY);
  EXPECT_EQ(wo.status, WorkOrderStatus::OPEN);
  EXPECT_FALSE(wo.completion_date.has_value());
  EXPECT_EQ(validate_work_order(to_record(wo)), wo);
}

TEST(ValidateWorkOrder, CompletedWithoutDateIsInconsistent) {
  auto r = minimal_wo();
  r["status"] = "COMPLETED";
  EXPECT_EQ(code_of([&] { validate_work_order(r); }), ErrorCode::InconsistentDates);
  r["completion_date"] = "2023-12-31T00:00:00Z";
  EXPECT_EQ(code_of([&] { validate_work_order(r); }), ErrorCode::InconsistentDates);
  r["completion_date"] = "2024-01-02T00:00:00Z";
  EXPECT_NO_THROW(validate_work_order(r));
}

TEST(ValidateWorkOrder, TypeCodesFollowTheMappingTable) {
  const std::map<std::string, WorkOrderType> table{{"PM", WorkOrderType::PREVENTIVE},
                                                   {"CM", WorkOrderType::CORRECTIVE},
                                                   {"EM", WorkOrderType::EMERGENCY},
                                                   {"pm", WorkOrderType::PREVENTIVE},
                                                   {"CAL", WorkOrderType::OTHER},
                                                   {"", WorkOrderType::OTHER}};
  for (const auto& [code, expected] : table) {
    if (code.empty()) continue;
    auto r = minimal_wo();
    r["wo_type"] = code;
    EXPECT_EQ(validate_work_order(r).wo_type, expected) << code;
  }
  TypeCodeTable custom;
  custom.set("CAL", WorkOrderType::PREVENTIVE);
  auto r = minimal_wo();
  r["wo_type"] = "cal";
  EXPECT_EQ(validate_work_order(r, custom).wo_type, WorkOrderType::PREVENTIVE);
}

TEST(ValidateWorkOrder, MissingFieldAndBadEnums) {
  auto r = minimal_wo();
  r.erase("wonum");
  EXPECT_EQ(code_of([&] { validate_work_order(r); }), ErrorCode::MissingField);
  r = minimal_wo();
  r["status"] = "SOMETIMES";
  EXPECT_EQ(code_of([&] { validate_work_order(r); }), ErrorCode::InvalidEnum);
  r = minimal_wo();
  r["status"] = "INPRG";
  EXPECT_EQ(validate_work_order(r).status, WorkOrderStatus::IN_PROGRESS);
}

TEST(ValidateMeterSeries, SortsReadings) {
  const Json j = {{"asset_number", "A1"}, {"meter_name", "TEMP"}, {"meter_type", "GAUGE"}, {"unit", "C"},
                  {"readings", Json::array({Json::array({"2024-01-02T00:00:00Z", 5}),
                                            Json::array({"2024-01-01T00:00:00Z", 3})})}};
  const auto s = validate_meter_series(j);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.readings[0].v, 3);
  EXPECT_EQ(s.readings[1].v, 5);
  EXPECT_LT(s.readings[0].t, s.readings[1].t);
  EXPECT_EQ(validate_meter_series(to_record(s)), s);
}

TEST(ValidateMeterSeries, DuplicateTimestampAndEmpty) {
  Json j = {{"asset_number", "A1"}, {"meter_name", "TEMP"}, {"meter_type", "GAUGE"}, {"unit", "C"},
            {"readings", Json::array({Json::array({"2024-01-01T00:00:00Z", 5}),
                                      Json::array({"2024-01-01T00:00:00Z", 3})})}};
  EXPECT_EQ(code_of([&] { validate_meter_series(j); }), ErrorCode::DuplicateTimestamp);
  j["readings"] = Json::array({Json::array({"2024-01-01T00:00:00Z", "hot"})});
  EXPECT_EQ(code_of([&] { validate_meter_series(j); }), ErrorCode::NonNumericValue);
  j["readings"] = Json::array();
  const auto s = validate_meter_series(j);
  EXPECT_EQ(s.size(), 0u);
  EXPECT_TRUE(s.empty_flagged);
}

TEST(ValidateOthers, AssetFmeaAlert) {
  const auto a = validate_asset({{"asset_number", "P-1"}, {"priority", "2"}, {"status", "DOWN"},
                                 {"is_running", "false"}, {"asset_age_in_years", "3.5"}});
  EXPECT_EQ(a.status, AssetStatus::DOWN);
  EXPECT_FALSE(a.is_running);
  EXPECT_EQ(validate_asset(to_record(a)), a);
  EXPECT_EQ(code_of([] { validate_asset({{"asset_number", "P-1"}, {"priority", "9"}}); }),
            ErrorCode::InvalidValue);

  const auto f = validate_fmea_entry({{"asset_class", "PUMP"}, {"component", "Bearing"},
                                      {"failure_mode", "Seizure"}, {"mechanism", "Fatigue"},
                                      {"recommended_actions", "Lubricate;Replace bearing"}});
  EXPECT_EQ(f.recommended_actions, (std::vector<std::string>{"Lubricate", "Replace bearing"}));
  EXPECT_EQ(validate_fmea_entry(to_record(f)), f);

  const auto al = validate_alert({{"alert_id", "AL1"}, {"asset_number", "P-1"}, {"severity", "critical"},
                                  {"raised_at", "2024-01-01T00:00:00Z"}, {"active", true}, {"message", "x"}});
  EXPECT_EQ(al.severity, Severity::CRITICAL);
  EXPECT_EQ(validate_alert(to_record(al)), al);
}

TEST(HealthScore, RangeIsEnforced) {
  EXPECT_NO_THROW(validate_health_score({"s", 0.5, 0, 1, "m"}));
  EXPECT_EQ(code_of([] { validate_health_score({"s", 1.5, 0, 1, "m"}); }), ErrorCode::InvalidValue);
}

// ---------------------------------------------------------------------------

TEST(WorkorderFacts, EmptyInput) {
  const auto f = build_workorder_facts({}, 365, day(100));
  EXPECT_EQ(f.total(), 0);
  EXPECT_EQ(f.open_count, 0);
  EXPECT_TRUE(f.preventive_workorders.empty());
  EXPECT_TRUE(f.corrective_and_other_workorders.empty());
  EXPECT_TRUE(f.recurring_patterns.empty());
  for (auto t : kAllWorkOrderTypes) EXPECT_EQ(f.counts.at(t), 0);
}

TEST(WorkorderFacts, TwoHundredDayWindowCounts) {
  const Timestamp now = day(400);
  std::vector<WorkOrder> orders{
      make_wo("W1", WorkOrderType::PREVENTIVE, WorkOrderStatus::COMPLETED, now.plus_days(-10)),
      make_wo("W2", WorkOrderType::PREVENTIVE, WorkOrderStatus::COMPLETED, now.plus_days(-80)),
      make_wo("W3", WorkOrderType::PREVENTIVE, WorkOrderStatus::COMPLETED, now.plus_days(-150)),
      make_wo("W4", WorkOrderType::EMERGENCY, WorkOrderStatus::COMPLETED, now.plus_days(-30)),
      make_wo("W0", WorkOrderType::CORRECTIVE, WorkOrderStatus::COMPLETED, now.plus_days(-300)),
  };
  const auto f = build_workorder_facts(orders, 200, now);
  EXPECT_EQ(f.counts.at(WorkOrderType::PREVENTIVE), 3);
  EXPECT_EQ(f.counts.at(WorkOrderType::EMERGENCY), 1);
  EXPECT_EQ(f.counts.at(WorkOrderType::CORRECTIVE), 0);
  EXPECT_EQ(f.total(), 4);
  EXPECT_EQ(f.emergency_count, 1);
  ASSERT_EQ(f.preventive_workorders.size(), 3u);
  EXPECT_EQ(f.preventive_workorders[0].wonum, "W1");  // newest first
}

TEST(WorkorderFacts, DelayDefinition) {
  const Timestamp now = day(100);
  auto wo = make_wo("W1", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(50), "pump leak", now.plus_days(-10));
  const auto f = build_workorder_facts({wo}, 365, now);
  EXPECT_EQ(f.delayed_count, 1);
  EXPECT_EQ(f.open_count, 1);
  EXPECT_EQ(f.corrective_and_other_workorders.at(0).days_delayed, 10);
  EXPECT_EQ(days_delayed(wo, now), 10);

  wo.status = WorkOrderStatus::COMPLETED;
  wo.completion_date = now.plus_days(-4);
  EXPECT_EQ(days_delayed(wo, now), 6);
  EXPECT_FALSE(is_delayed(wo, now));
}

TEST(WorkorderFacts, InputOrderDoesNotMatter) {
  const Timestamp now = day(100);
  std::vector<WorkOrder> orders;
  for (int i = 0; i < 6; ++i)
    orders.push_back(make_wo("W" + std::to_string(i), i % 2 ? WorkOrderType::PREVENTIVE : WorkOrderType::CORRECTIVE,
                             WorkOrderStatus::OPEN, day(90 - i * 5 + (i == 3 ? 5 : 0)), "bearing noise check"));
  auto shuffled = orders;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(build_workorder_facts(orders, 365, now), build_workorder_facts(shuffled, 365, now));
}

TEST(WorkorderFacts, MixedAssetsAreRejected) {
  auto a = make_wo("W1", WorkOrderType::PREVENTIVE, WorkOrderStatus::OPEN, day(1));
  auto b = make_wo("W2", WorkOrderType::PREVENTIVE, WorkOrderStatus::OPEN, day(1), "x", std::nullopt, "A2");
  EXPECT_EQ(code_of([&] { build_workorder_facts({a, b}, 365, day(10)); }), ErrorCode::AssetMismatch);
}

TEST(Patterns, SharedProblemCode) {
  std::vector<WorkOrder> orders;
  for (int i = 0; i < 3; ++i) {
    orders.push_back(make_wo("W" + std::to_string(i), WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(i),
                             "item " + std::to_string(i)));
    orders.back().problem_code = "BRG-FAIL";
  }
  const auto p = extract_patterns(orders, 2);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].kind, PatternKind::PROBLEM_CODE);
  EXPECT_EQ(p[0].token_or_code, "BRG-FAIL");
  EXPECT_EQ(p[0].occurrence_count, 3);
}

TEST(Patterns, NothingRepeats) {
  std::vector<WorkOrder> orders{
      make_wo("W1", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(1), "motor overheating"),
      make_wo("W2", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(2), "valve stuck"),
  };
  EXPECT_TRUE(extract_patterns(orders, 2).empty());
}

TEST(Patterns, TokenCountsMatchExhaustiveRecount) {
  std::vector<WorkOrder> orders{
      make_wo("W1", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(1), "bearing noise"),
      make_wo("W2", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(2), "bearing vibration"),
      make_wo("W3", WorkOrderType::CORRECTIVE, WorkOrderStatus::OPEN, day(3), "loud bearing"),
  };
  // Oracle: per-order token sets, then document frequency.
  std::map<std::string, int> df;
  for (const auto& o : orders) {
    std::set<std::string> seen;
    std::string cur;
    for (char c : o.description + " ") {
      if (std::isalnum(static_cast<unsigned char>(c))) cur += static_cast<char>(std::tolower(c));
      else {
        if (cur.size() >= 4) seen.insert(cur);
        cur.clear();
      }
    }
    for (const auto& t : seen) ++df[t];
  }
  const auto p = extract_patterns(orders, 2);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].token_or_code, "bearing");
  EXPECT_EQ(p[0].occurrence_count, df["bearing"]);
  EXPECT_EQ(p[0].example_wonums, (std::vector<std::string>{"W1", "W2", "W3"}));
}

TEST(Excerpt, CutsAtWhitespaceWithoutSplittingUtf8) {
  EXPECT_EQ(excerpt("short text"), "short text");
  EXPECT_EQ(excerpt("alpha beta gamma", 12), "alpha beta");
  const std::string accented = "caf\xC3\xA9\xC3\xA9\xC3\xA9";  // 10 bytes, no spaces
  const auto cut = excerpt(accented, 6);
  EXPECT_LE(cut.size(), 6u);
  EXPECT_NE(static_cast<unsigned char>(cut.back()), 0xC3);
  EXPECT_TRUE(std::is_sorted(stopwords().begin(), stopwords().end()));
  EXPECT_FALSE(stopwords_version().empty());
}
