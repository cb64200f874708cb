#include "condinsight/store.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "condinsight/evidence.hpp"
#include "condinsight/hash.hpp"

namespace condinsight {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::UnreadableFile, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "objects");
  fs::create_directories(root_ / "index");
}

std::string Store::put(const Json& doc) {
  const std::string text = canonical_dump(doc);
  const std::string hash = sha256_hex(text);
  const fs::path path = root_ / "objects" / (hash + ".json");
  std::lock_guard lock(mu_);
  if (!fs::exists(path)) write_file_atomic(path, text);
  return hash;
}

Json Store::get(const std::string& hash) const {
  return Json::parse(read_file(root_ / "objects" / (hash + ".json")));
}

std::map<std::string, std::string>& Store::cached_index(const std::string& entity) const {
  auto it = indexes_.find(entity);
  if (it != indexes_.end()) return it->second;
  std::map<std::string, std::string> loaded;
  const fs::path path = root_ / "index" / (entity + ".json");
  if (fs::exists(path)) loaded = Json::parse(read_file(path)).get<std::map<std::string, std::string>>();
  return indexes_.emplace(entity, std::move(loaded)).first->second;
}

void Store::write_index(const std::string& entity) const {
  write_file_atomic(root_ / "index" / (entity + ".json"), canonical_dump(Json(indexes_.at(entity))));
}

std::optional<std::string> Store::lookup(const std::string& entity, const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto& idx = cached_index(entity);
  const auto it = idx.find(key);
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

void Store::bind(const std::string& entity, const std::string& key, const std::string& hash) {
  bind_all(entity, {{key, hash}});
}

void Store::bind_all(const std::string& entity, const std::map<std::string, std::string>& entries) {
  std::lock_guard lock(mu_);
  auto& idx = cached_index(entity);
  for (const auto& [k, h] : entries) idx[k] = h;
  write_index(entity);
}

std::map<std::string, std::string> Store::index(const std::string& entity) const {
  std::lock_guard lock(mu_);
  return cached_index(entity);
}

std::string Store::commit(const std::string& entity, const std::string& key, const Json& doc) {
  std::lock_guard lock(mu_);
  const std::string hash = put(doc);
  bind(entity, key, hash);
  return hash;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false, field_started = false;
  int line = 1, quote_line = 0;
  row.line = 1;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    row.line = line;
  };
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // byte order mark
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
      quote_line = line;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      ++line;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::FormatError, "line " + std::to_string(quote_line) + ": unterminated quote");
  if (field_started || !row.fields.empty() || !field.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

std::string_view to_string(InputKind k) {
  switch (k) {
    case InputKind::ASSETS: return "assets";
    case InputKind::WORK_ORDERS: return "workorders";
    case InputKind::METERS: return "meters";
    case InputKind::ALERTS: return "alerts";
    case InputKind::FMEA: return "fmea";
  }
  return "";
}

int IngestReport::accepted() const {
  int n = 0;
  for (const auto& f : files) n += f.accepted;
  return n;
}
int IngestReport::rejected() const {
  int n = 0;
  for (const auto& f : files) n += static_cast<int>(f.rejects.size());
  return n;
}
int IngestReport::duplicates() const {
  int n = 0;
  for (const auto& f : files) n += f.duplicates_skipped;
  return n;
}

Json to_json(const IngestReport& r) {
  Json files = Json::array();
  for (const auto& f : r.files) {
    Json rejects = Json::array();
    for (const auto& x : f.rejects) rejects.push_back(Json{{"line", x.line}, {"reason", x.reason}});
    files.push_back(Json{{"path", f.path},
                         {"kind", std::string(to_string(f.kind))},
                         {"accepted", f.accepted},
                         {"updated", f.updated},
                         {"duplicates_skipped", f.duplicates_skipped},
                         {"rejected", f.rejects.size()},
                         {"rejects", std::move(rejects)}});
  }
  return Json{{"files", std::move(files)},
              {"accepted", r.accepted()},
              {"rejected", r.rejected()},
              {"duplicates_skipped", r.duplicates()}};
}

std::string meter_key(const std::string& asset_number, const std::string& meter_name) {
  return asset_number + "|" + meter_name;
}

std::string fmea_key(const FmeaEntry& e) {
  return e.asset_class + "|" + e.component + "|" + e.failure_mode + "|" + e.mechanism;
}

namespace {

std::string first_line(std::string_view content) {
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) return trim(line);
  return {};
}

const char* entity_of(InputKind k) {
  switch (k) {
    case InputKind::ASSETS: return entity::kAssets;
    case InputKind::WORK_ORDERS: return entity::kWorkOrders;
    case InputKind::METERS: return entity::kMeters;
    case InputKind::ALERTS: return entity::kAlerts;
    case InputKind::FMEA: return entity::kFmea;
  }
  return "";
}

Json record_json(const RawRecord& r) { return Json(r); }

struct Parsed {
  std::string key;
  Json doc;
};

Parsed validate_row(InputKind kind, const RawRecord& rec, const TypeCodeTable& codes) {
  switch (kind) {
    case InputKind::ASSETS: {
      const Asset a = validate_asset(rec);
      return {a.asset_number, record_json(to_record(a))};
    }
    case InputKind::WORK_ORDERS: {
      const WorkOrder w = validate_work_order(rec, codes);
      return {w.wonum, record_json(to_record(w))};
    }
    case InputKind::FMEA: {
      const FmeaEntry e = validate_fmea_entry(rec);
      return {fmea_key(e), record_json(to_record(e))};
    }
    default: break;
  }
  throw Error(ErrorCode::FormatError, "not a CSV kind");
}

Parsed validate_json_row(InputKind kind, const Json& j) {
  if (kind == InputKind::METERS) {
    const MeterSeries s = validate_meter_series(j);
    return {meter_key(s.asset_number, s.meter_name), to_record(s)};
  }
  const Alert a = validate_alert(j);
  return {a.alert_id, to_record(a)};
}

}  // namespace

InputKind detect_input_kind(const fs::path& path, std::string_view content) {
  const std::string head = first_line(content);
  if (head.empty()) throw Error(ErrorCode::FormatError, path.string() + ": empty file");
  if (head.front() == '{') {
    const Json j = Json::parse(head, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error(ErrorCode::FormatError, path.string() + " line 1: not a JSON object");
    if (j.contains("readings")) return InputKind::METERS;
    if (j.contains("alert_id")) return InputKind::ALERTS;
    throw Error(ErrorCode::FormatError, path.string() + ": unrecognized JSON-lines record");
  }
  std::set<std::string> cols;
  const auto header = parse_csv(head);
  for (const auto& f : header.at(0).fields) cols.insert(to_lower(trim(f)));
  if (cols.count("wonum")) return InputKind::WORK_ORDERS;
  if (cols.count("failure_mode") && cols.count("mechanism")) return InputKind::FMEA;
  if (cols.count("asset_number")) return InputKind::ASSETS;
  throw Error(ErrorCode::FormatError, path.string() + " line 1: unrecognized header");
}

IngestReport ingest(const std::vector<fs::path>& paths, Store& store, const TypeCodeTable& codes) {
  IngestReport report;
  for (const auto& path : paths) {
    const std::string content = read_file(path);
    FileReport fr;
    fr.path = path.string();
    fr.kind = detect_input_kind(path, content);
    const std::string ent = entity_of(fr.kind);

    std::vector<std::pair<int, Parsed>> good;
    Json reject_lines = Json::array();
    auto reject = [&](int line, const std::string& reason) {
      fr.rejects.push_back({line, reason});
      reject_lines.push_back(Json{{"line", line}, {"reason", reason}});
    };

    if (fr.kind == InputKind::METERS || fr.kind == InputKind::ALERTS) {
      std::istringstream in(content);
      std::string line;
      int n = 0;
      while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
          reject(n, "FormatError: not a JSON object");
          continue;
        }
        try {
          good.emplace_back(n, validate_json_row(fr.kind, j));
        } catch (const Error& e) {
          reject(n, e.what());
        }
      }
    } else {
      const auto rows = parse_csv(content);
      std::vector<std::string> header;
      for (const auto& h : rows.at(0).fields) header.push_back(to_lower(trim(h)));
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != header.size()) {
          reject(row.line, "FormatError: expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(row.fields.size()));
          continue;
        }
        RawRecord rec;
        for (std::size_t c = 0; c < header.size(); ++c)
          if (!trim(row.fields[c]).empty()) rec[header[c]] = row.fields[c];
        try {
          good.emplace_back(row.line, validate_row(fr.kind, rec, codes));
        } catch (const Error& e) {
          reject(row.line, e.what());
        }
      }
    }

    std::map<std::string, std::string> bindings;
    for (const auto& [line, p] : good) {
      const std::string hash = store.put(p.doc);
      std::optional<std::string> existing;
      if (auto it = bindings.find(p.key); it != bindings.end()) existing = it->second;
      else existing = store.lookup(ent, p.key);
      if (existing && *existing == hash) {
        ++fr.duplicates_skipped;
        continue;
      }
      if (existing) ++fr.updated;
      else ++fr.accepted;
      bindings[p.key] = hash;
    }
    if (!bindings.empty()) store.bind_all(ent, bindings);

    const fs::path reject_path = store.rejects_dir() / (path.filename().string() + ".jsonl");
    if (fr.rejects.empty()) {
      fs::remove(reject_path);
    } else {
      std::string text;
      for (const auto& r : reject_lines) text += r.dump() + "\n";
      write_file_atomic(reject_path, text);
    }
    report.files.push_back(std::move(fr));
  }
  return report;
}

}  // namespace condinsight
