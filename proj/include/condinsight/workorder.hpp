// Work-order history digests, counts and recurring-pattern extraction.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "condinsight/core.hpp"

namespace condinsight {

inline constexpr std::size_t kExcerptLimit = 300;

struct WorkOrderDigest {
  std::string wonum;
  WorkOrderType wo_type = WorkOrderType::OTHER;
  WorkOrderStatus status = WorkOrderStatus::OPEN;
  Timestamp reported_date;
  std::int64_t days_delayed = 0;
  std::string description_excerpt;
  std::optional<std::string> problem_code;

  bool operator==(const WorkOrderDigest&) const = default;
};

enum class PatternKind { PROBLEM_CODE, TOKEN };

struct MaintenancePattern {
  PatternKind kind = PatternKind::TOKEN;
  std::string token_or_code;
  int occurrence_count = 0;
  std::vector<std::string> example_wonums;  // at most 3, lexicographic

  bool operator==(const MaintenancePattern&) const = default;
};

struct WorkorderFacts {
  std::string asset_number;  // empty when no orders were given
  std::map<WorkOrderType, int> counts;
  std::map<WorkOrderStatus, int> status_counts;
  int open_count = 0;
  int delayed_count = 0;
  int emergency_count = 0;
  std::vector<WorkOrderDigest> preventive_workorders;
  std::vector<WorkOrderDigest> corrective_and_other_workorders;
  std::vector<MaintenancePattern> recurring_patterns;
  int window_days = 0;

  int total() const;
  bool operator==(const WorkorderFacts&) const = default;
};

/// Truncates at the last whitespace at or before `limit` bytes, never splitting
/// a UTF-8 sequence.
std::string excerpt(std::string_view text, std::size_t limit = kExcerptLimit);

/// max(0, (completion or now) - target) in whole days; 0 without a target date.
std::int64_t days_delayed(const WorkOrder& wo, Timestamp now);

/// An order counts as delayed while it is still open (OPEN / IN_PROGRESS) and
/// past its target date.
bool is_delayed(const WorkOrder& wo, Timestamp now);

/// Orders must all belong to one asset (AssetMismatch otherwise).
WorkorderFacts build_workorder_facts(const std::vector<WorkOrder>& orders, int window_days,
                                     Timestamp now, int min_support = 2);

/// Lowercased alphanumeric tokens of length >= 4 that are not stop-words.
std::vector<std::string> normalize_tokens(std::string_view text);

std::vector<MaintenancePattern> extract_patterns(const std::vector<WorkOrder>& orders,
                                                 int min_support);

/// The versioned stop-word list used by normalize_tokens.
const std::vector<std::string>& stopwords();
std::string_view stopwords_version();

}  // namespace condinsight
