#include "condinsight/workorder.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace condinsight {

int WorkorderFacts::total() const {
  int n = 0;
  for (const auto& [type, c] : counts) n += c;
  return n;
}

std::string excerpt(std::string_view text, std::size_t limit) {
  std::string s = trim(text);
  if (s.size() <= limit) return s;
  std::size_t cut = limit;
  // Prefer a word boundary: the char right after the cut must be a space.
  std::size_t space = std::string::npos;
  for (std::size_t i = limit + 1; i-- > 0;) {
    if (std::isspace(static_cast<unsigned char>(s[i]))) {
      space = i;
      break;
    }
  }
  if (space != std::string::npos && space > 0) {
    cut = space;
  } else {
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  }
  return trim(std::string_view(s).substr(0, cut));
}

std::int64_t days_delayed(const WorkOrder& wo, Timestamp now) {
  if (!wo.target_date) return 0;
  const Timestamp end = wo.completion_date.value_or(now);
  return std::max<std::int64_t>(0, whole_days_between(*wo.target_date, end));
}

bool is_delayed(const WorkOrder& wo, Timestamp now) {
  const bool open =
      wo.status == WorkOrderStatus::OPEN || wo.status == WorkOrderStatus::IN_PROGRESS;
  return open && wo.target_date && now > *wo.target_date;
}

WorkorderFacts build_workorder_facts(const std::vector<WorkOrder>& orders, int window_days,
                                     Timestamp now, int min_support) {
  WorkorderFacts f;
  f.window_days = window_days;
  for (const auto& wo : orders) {
    if (f.asset_number.empty()) f.asset_number = wo.asset_number;
    if (wo.asset_number != f.asset_number)
      throw Error(ErrorCode::AssetMismatch, "work orders span assets " + f.asset_number + " and " +
                                                wo.asset_number);
  }
  for (auto t : kAllWorkOrderTypes) f.counts[t] = 0;
  for (auto s : kAllWorkOrderStatuses) f.status_counts[s] = 0;

  const Timestamp start = now.plus_days(-window_days);
  std::vector<WorkOrder> in_window;
  for (const auto& wo : orders)
    if (wo.reported_date >= start && wo.reported_date <= now) in_window.push_back(wo);
  // newest first, wonum as tie-break so input order never matters
  std::sort(in_window.begin(), in_window.end(), [](const WorkOrder& a, const WorkOrder& b) {
    return a.reported_date != b.reported_date ? a.reported_date > b.reported_date
                                              : a.wonum < b.wonum;
  });

  for (const auto& wo : in_window) {
    ++f.counts[wo.wo_type];
    ++f.status_counts[wo.status];
    if (wo.status == WorkOrderStatus::OPEN || wo.status == WorkOrderStatus::IN_PROGRESS)
      ++f.open_count;
    if (is_delayed(wo, now)) ++f.delayed_count;
    if (wo.wo_type == WorkOrderType::EMERGENCY) ++f.emergency_count;

    WorkOrderDigest d{wo.wonum,
                      wo.wo_type,
                      wo.status,
                      wo.reported_date,
                      days_delayed(wo, now),
                      excerpt(wo.description),
                      wo.problem_code};
    if (wo.wo_type == WorkOrderType::PREVENTIVE)
      f.preventive_workorders.push_back(std::move(d));
    else
      f.corrective_and_other_workorders.push_back(std::move(d));
  }
  f.recurring_patterns = extract_patterns(in_window, std::max(2, min_support));
  return f;
}

std::vector<std::string> normalize_tokens(std::string_view text) {
  const auto& stop = stopwords();
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 4 && !std::binary_search(stop.begin(), stop.end(), cur))
      tokens.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u))
      cur.push_back(static_cast<char>(std::tolower(u)));
    else
      flush();
  }
  flush();
  return tokens;
}

std::vector<MaintenancePattern> extract_patterns(const std::vector<WorkOrder>& orders,
                                                 int min_support) {
  // Support is counted once per order (document frequency).
  std::map<std::pair<PatternKind, std::string>, std::set<std::string>> hits;
  for (const auto& wo : orders) {
    if (wo.problem_code)
      hits[{PatternKind::PROBLEM_CODE, *wo.problem_code}].insert(wo.wonum);
    for (auto& tok : normalize_tokens(wo.description))
      hits[{PatternKind::TOKEN, std::move(tok)}].insert(wo.wonum);
  }
  std::vector<MaintenancePattern> out;
  for (auto& [key, wonums] : hits) {
    if (static_cast<int>(wonums.size()) < min_support) continue;
    MaintenancePattern p;
    p.kind = key.first;
    p.token_or_code = key.second;
    p.occurrence_count = static_cast<int>(wonums.size());
    for (const auto& w : wonums) {
      if (p.example_wonums.size() == 3) break;
      p.example_wonums.push_back(w);
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const MaintenancePattern& a, const MaintenancePattern& b) {
    if (a.occurrence_count != b.occurrence_count) return a.occurrence_count > b.occurrence_count;
    if (a.token_or_code != b.token_or_code) return a.token_or_code < b.token_or_code;
    return a.kind < b.kind;
  });
  return out;
}

}  // namespace condinsight
