// Content-addressed file store and record ingestion.
//
// Layout under the store root:
//   objects/<sha256>.json   one canonical JSON document per record
//   index/<entity>.json     natural key -> object hash, per entity type
//   rejects/<file>.jsonl    rows refused by the last ingestion of <file>
#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "condinsight/core.hpp"

namespace condinsight {

namespace entity {
inline constexpr const char* kAssets = "assets";
inline constexpr const char* kWorkOrders = "workorders";
inline constexpr const char* kMeters = "meters";
inline constexpr const char* kAlerts = "alerts";
inline constexpr const char* kFmea = "fmea";
inline constexpr const char* kRuns = "runs";
}  // namespace entity

class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Writes the canonical form of `doc` and returns its hash. Idempotent.
  std::string put(const Json& doc);
  Json get(const std::string& hash) const;  // throws UnreadableFile

  std::optional<std::string> lookup(const std::string& entity, const std::string& key) const;
  void bind(const std::string& entity, const std::string& key, const std::string& hash);
  /// Binds many keys with a single index write.
  void bind_all(const std::string& entity, const std::map<std::string, std::string>& entries);
  std::map<std::string, std::string> index(const std::string& entity) const;

  /// put + bind under one lock.
  std::string commit(const std::string& entity, const std::string& key, const Json& doc);

  std::filesystem::path rejects_dir() const { return root_ / "rejects"; }

 private:
  std::map<std::string, std::string>& cached_index(const std::string& entity) const;
  void write_index(const std::string& entity) const;

  std::filesystem::path root_;
  mutable std::recursive_mutex mu_;
  mutable std::map<std::string, std::map<std::string, std::string>> indexes_;
};

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);  // throws UnreadableFile

// ---------------------------------------------------------------------------
// CSV

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
/// Each row carries the 1-based line number it started on.
struct CsvRow {
  int line = 0;
  std::vector<std::string> fields;
};
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

// ---------------------------------------------------------------------------
// Ingestion

enum class InputKind { ASSETS, WORK_ORDERS, METERS, ALERTS, FMEA };
std::string_view to_string(InputKind k);

/// Detects the kind from the CSV header or the keys of the first JSON line.
/// Throws FormatError.
InputKind detect_input_kind(const std::filesystem::path& path, std::string_view content);

struct RejectedRow {
  int line = 0;
  std::string reason;
};

struct FileReport {
  std::string path;
  InputKind kind = InputKind::WORK_ORDERS;
  int accepted = 0;
  int updated = 0;              // natural key present with different content
  int duplicates_skipped = 0;   // natural key present with identical content
  std::vector<RejectedRow> rejects;
};

struct IngestReport {
  std::vector<FileReport> files;
  int accepted() const;
  int rejected() const;
  int duplicates() const;
};

Json to_json(const IngestReport& r);

/// Throws UnreadableFile for missing files and FormatError (with line number)
/// for structurally broken files; bad rows are rejected, never fatal.
IngestReport ingest(const std::vector<std::filesystem::path>& paths, Store& store,
                    const TypeCodeTable& codes = {});

/// Natural keys used by the indexes.
std::string meter_key(const std::string& asset_number, const std::string& meter_name);
std::string fmea_key(const FmeaEntry& e);

}  // namespace condinsight
