// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/store.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fcntl.h>
#include <sqlite3.h>
#include <unistd.h>

#include "curb/csv.hpp"
#include "curb/digest.hpp"
#include "curb/parse.hpp"

namespace curb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> out;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

// Minimal RAII statement wrapper.
class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK) {
      throw StoreError(std::string("sqlite prepare failed: ") + sqlite3_errmsg(db) + " in: " + sql);
    }
  }
  ~Stmt() { sqlite3_finalize(st_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, const std::string& v) {
    sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Stmt& bind(int i, const char* v) { return bind(i, std::string(v)); }
  Stmt& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(st_, i, v);
    return *this;
  }
  Stmt& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
  Stmt& bind(int i, double v) {
    sqlite3_bind_double(st_, i, v);
    return *this;
  }
  Stmt& bind_null(int i) {
    sqlite3_bind_null(st_, i);
    return *this;
  }
  template <typename T>
  Stmt& bind_opt(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }

  bool step() {
    const int rc = sqlite3_step(st_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StoreError(std::string("sqlite step failed: ") + sqlite3_errmsg(db_));
  }
  void run() {
    while (step()) {
    }
  }

  std::string text(int c) const {
    const auto* p = sqlite3_column_text(st_, c);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(st_, c)))
             : std::string();
  }
  std::optional<std::string> opt_text(int c) const {
    if (sqlite3_column_type(st_, c) == SQLITE_NULL) return std::nullopt;
    return text(c);
  }
  std::int64_t i64(int c) const { return sqlite3_column_int64(st_, c); }
  double real(int c) const { return sqlite3_column_double(st_, c); }
  std::optional<double> opt_real(int c) const {
    if (sqlite3_column_type(st_, c) == SQLITE_NULL) return std::nullopt;
    return real(c);
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* st_ = nullptr;
};

constexpr const char* kSchema = R"SQL(
CREATE TABLE IF NOT EXISTS sources (
  digest TEXT PRIMARY KEY, kind TEXT NOT NULL, path TEXT NOT NULL,
  ingested_at TEXT NOT NULL, accepted INTEGER NOT NULL, rejected INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS properties (
  image_id TEXT PRIMARY KEY, image_source TEXT NOT NULL, address TEXT,
  latitude REAL, longitude REAL, city TEXT, state TEXT, source_digest TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS human_ratings (
  image_id TEXT NOT NULL, rater_id TEXT NOT NULL, rating INTEGER NOT NULL,
  source_digest TEXT NOT NULL, PRIMARY KEY (image_id, rater_id));
CREATE TABLE IF NOT EXISTS rating_lineage (
  image_id TEXT NOT NULL, rater_id TEXT NOT NULL, old_rating INTEGER NOT NULL,
  new_rating INTEGER NOT NULL, old_source TEXT NOT NULL, new_source TEXT NOT NULL,
  recorded_at TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS judgments (
  run_set TEXT NOT NULL, image_id TEXT NOT NULL, model_id TEXT NOT NULL,
  run_index INTEGER NOT NULL, attribute_id TEXT NOT NULL, option_index INTEGER NOT NULL,
  raw_response_ref TEXT NOT NULL, attribute_order_seed INTEGER NOT NULL, timestamp TEXT NOT NULL,
  PRIMARY KEY (run_set, image_id, model_id, run_index, attribute_id));
CREATE TABLE IF NOT EXISTS run_items (
  run_set TEXT NOT NULL, image_id TEXT NOT NULL, model_id TEXT NOT NULL, run_index INTEGER NOT NULL,
  status TEXT NOT NULL, error_kind TEXT NOT NULL, error_detail TEXT NOT NULL,
  raw_response_ref TEXT NOT NULL, seed INTEGER NOT NULL, latency_s REAL NOT NULL,
  attempts INTEGER NOT NULL, from_cache INTEGER NOT NULL, timestamp TEXT NOT NULL,
  PRIMARY KEY (run_set, image_id, model_id, run_index));
CREATE TABLE IF NOT EXISTS run_meta (run_id TEXT PRIMARY KEY, meta TEXT NOT NULL);
)SQL";

std::int64_t to_db(std::uint64_t v) { return std::bit_cast<std::int64_t>(v); }
std::uint64_t from_db(std::int64_t v) { return std::bit_cast<std::uint64_t>(v); }

void fsync_path(const fs::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec("COMMIT");
    done_ = true;
  }

 private:
  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw StoreError(std::string("sqlite: ") + sql + ": " + msg);
    }
  }
  sqlite3* db_;
  bool done_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// BlobStore
// ---------------------------------------------------------------------------

BlobStore::BlobStore(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string BlobStore::put(std::string_view content) const {
  const std::string ref = sha256_hex(content);
  const fs::path dir = fs::path(dir_) / ref.substr(0, 2);
  const fs::path target = dir / ref;
  if (fs::exists(target)) return ref;
  fs::create_directories(dir);
  const fs::path tmp = dir / (ref + ".tmp." + std::to_string(::getpid()) + "." +
                              std::to_string(std::hash<std::string_view>{}(content) ^ reinterpret_cast<std::uintptr_t>(&content)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw StoreError("cannot write blob " + tmp.string());
  }
  fsync_path(tmp);
  fs::rename(tmp, target);
  fsync_path(dir);
  return ref;
}

std::optional<std::string> BlobStore::get(const std::string& ref) const {
  if (ref.size() < 2) return std::nullopt;
  std::ifstream in(fs::path(dir_) / ref.substr(0, 2) / ref, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool BlobStore::contains(const std::string& ref) const {
  return ref.size() >= 2 && fs::exists(fs::path(dir_) / ref.substr(0, 2) / ref);
}

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

json judgment_to_json(const Judgment& j, bool include_timestamp) {
  json o = {{"image_id", j.image_id},
            {"model_id", j.model_id},
            {"run_set", j.run_set},
            {"run_index", j.run_index},
            {"attribute_id", j.attribute_id},
            {"option_index", j.option_index},
            {"raw_response_ref", j.raw_response_ref},
            {"attribute_order_seed", j.attribute_order_seed}};
  if (include_timestamp) o["timestamp"] = j.timestamp;
  return o;
}

Judgment judgment_from_json(const json& o) {
  Judgment j;
  j.image_id = o.at("image_id").get<std::string>();
  j.model_id = o.at("model_id").get<std::string>();
  j.run_set = o.at("run_set").get<std::string>();
  j.run_index = o.at("run_index").get<int>();
  j.attribute_id = o.at("attribute_id").get<std::string>();
  j.option_index = o.at("option_index").get<int>();
  j.raw_response_ref = o.at("raw_response_ref").get<std::string>();
  j.attribute_order_seed = o.at("attribute_order_seed").get<std::uint64_t>();
  j.timestamp = o.value("timestamp", "");
  return j;
}

json property_to_json(const PropertyRecord& p) {
  json o = {{"image_id", p.image_id}, {"image_source", p.image_source}};
  o["address"] = p.address ? json(*p.address) : json(nullptr);
  o["latitude"] = p.latitude ? json(*p.latitude) : json(nullptr);
  o["longitude"] = p.longitude ? json(*p.longitude) : json(nullptr);
  o["city"] = p.city ? json(*p.city) : json(nullptr);
  o["state"] = p.state ? json(*p.state) : json(nullptr);
  return o;
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

Store::Store(const std::string& path) : path_(path), blobs_(path + ".blobs") {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw StoreError("cannot open store " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 10000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=FULL");
  exec(kSchema);
}

Store::~Store() {
  if (db_) sqlite3_close(db_);
}

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw StoreError(std::string("sqlite exec failed: ") + msg);
  }
}

bool Store::source_seen(const std::string& digest) const {
  Stmt s(db_, "SELECT 1 FROM sources WHERE digest = ?");
  s.bind(1, digest);
  return s.step();
}

void Store::record_source(const std::string& digest, const std::string& kind, const std::string& path,
                          const IngestResult& r) {
  Stmt s(db_, "INSERT OR IGNORE INTO sources VALUES (?, ?, ?, ?, ?, ?)");
  s.bind(1, digest).bind(2, kind).bind(3, path).bind(4, utc_timestamp_now());
  s.bind(5, static_cast<std::int64_t>(r.accepted)).bind(6, static_cast<std::int64_t>(r.rejects.size()));
  s.run();
}

IngestResult Store::ingest_properties(const std::string& manifest_path) {
  const std::string content = read_file(manifest_path);
  IngestResult r;
  r.source_digest = sha256_hex(content);
  std::lock_guard lock(mu_);
  if (source_seen(r.source_digest)) {
    r.already_ingested = true;
    return r;
  }
  Transaction tx(db_);
  std::map<std::string, std::size_t> seen_in_file;
  const auto lines = lines_of(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::size_t lineno = i + 1;
    PropertyRecord p;
    try {
      const json o = json::parse(line);
      if (!o.is_object()) throw std::runtime_error("not a JSON object");
      if (!o.contains("image_id") || !o["image_id"].is_string()) throw std::runtime_error("missing string image_id");
      p.image_id = o["image_id"].get<std::string>();
      if (!o.contains("image_source") || !o["image_source"].is_string()) {
        throw std::runtime_error("missing string image_source");
      }
      p.image_source = o["image_source"].get<std::string>();
      auto opt_str = [&](const char* k) -> std::optional<std::string> {
        if (!o.contains(k) || o[k].is_null()) return std::nullopt;
        if (!o[k].is_string()) throw std::runtime_error(std::string(k) + " must be a string");
        return o[k].get<std::string>();
      };
      auto opt_num = [&](const char* k) -> std::optional<double> {
        if (!o.contains(k) || o[k].is_null()) return std::nullopt;
        if (!o[k].is_number()) throw std::runtime_error(std::string(k) + " must be a number");
        return o[k].get<double>();
      };
      p.address = opt_str("address");
      p.city = opt_str("city");
      p.state = opt_str("state");
      p.latitude = opt_num("latitude");
      p.longitude = opt_num("longitude");
    } catch (const std::exception& e) {
      r.rejects.push_back({lineno, p.image_id, std::string("malformed: ") + e.what()});
      continue;
    }
    if (const auto v = p.violations(); !v.empty()) {
      std::string reason = "range: " + v.front();
      for (std::size_t k = 1; k < v.size(); ++k) reason += "; " + v[k];
      r.rejects.push_back({lineno, p.image_id, reason});
      continue;
    }
    if (seen_in_file.count(p.image_id)) {
      r.rejects.push_back({lineno, p.image_id,
                           "duplicate: image_id already on line " + std::to_string(seen_in_file[p.image_id])});
      continue;
    }
    seen_in_file[p.image_id] = lineno;
    if (const auto existing = property(p.image_id)) {
      const bool same = property_to_json(*existing) == property_to_json(p);
      if (same) {
        ++r.unchanged;
      } else {
        r.rejects.push_back({lineno, p.image_id, "duplicate: image_id already stored with different fields"});
      }
      continue;
    }
    Stmt s(db_, "INSERT INTO properties VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
    s.bind(1, p.image_id).bind(2, p.image_source).bind_opt(3, p.address).bind_opt(4, p.latitude);
    s.bind_opt(5, p.longitude).bind_opt(6, p.city).bind_opt(7, p.state).bind(8, r.source_digest);
    s.run();
    ++r.accepted;
  }
  record_source(r.source_digest, "properties", manifest_path, r);
  tx.commit();
  return r;
}

IngestResult Store::ingest_human_ratings(const std::string& csv_path, bool supersede) {
  const std::string content = read_file(csv_path);
  IngestResult r;
  r.source_digest = sha256_hex(content);
  std::lock_guard lock(mu_);
  if (source_seen(r.source_digest)) {
    r.already_ingested = true;
    return r;
  }
  const auto lines = lines_of(content);
  if (lines.empty() || csv::split_record(lines[0]) != std::vector<std::string>{"image_id", "rater_id", "rating"}) {
    throw StoreError("human ratings CSV must start with header image_id,rater_id,rating");
  }
  Transaction tx(db_);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t lineno = i + 1;
    const auto f = csv::split_record(lines[i]);
    if (f.size() != 3) {
      r.rejects.push_back({lineno, f.empty() ? "" : f[0], "malformed: expected 3 fields"});
      continue;
    }
    const std::string image_id = trim(f[0]);
    const std::string rater_id = trim(f[1]);
    int rating = 0;
    try {
      std::size_t used = 0;
      rating = std::stoi(trim(f[2]), &used);
      if (used != trim(f[2]).size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      r.rejects.push_back({lineno, image_id, "malformed: rating is not an integer"});
      continue;
    }
    if (rating < ConditionScale::kMin || rating > ConditionScale::kMax) {
      r.rejects.push_back({lineno, image_id, "range: rating " + std::to_string(rating) + " outside 1..5"});
      continue;
    }
    if (rater_id.empty()) {
      r.rejects.push_back({lineno, image_id, "malformed: empty rater_id"});
      continue;
    }
    if (!property(image_id)) {
      r.rejects.push_back({lineno, image_id, "unknown image_id"});
      continue;
    }
    Stmt q(db_, "SELECT rating, source_digest FROM human_ratings WHERE image_id = ? AND rater_id = ?");
    q.bind(1, image_id).bind(2, rater_id);
    if (q.step()) {
      const int old = static_cast<int>(q.i64(0));
      if (old == rating) {
        ++r.unchanged;
      } else if (!supersede) {
        r.rejects.push_back({lineno, image_id,
                             "immutable: rater '" + rater_id + "' already rated this image " + std::to_string(old)});
      } else {
        Stmt l(db_, "INSERT INTO rating_lineage VALUES (?, ?, ?, ?, ?, ?, ?)");
        l.bind(1, image_id).bind(2, rater_id).bind(3, old).bind(4, rating).bind(5, q.text(1));
        l.bind(6, r.source_digest).bind(7, utc_timestamp_now());
        l.run();
        Stmt u(db_, "UPDATE human_ratings SET rating = ?, source_digest = ? WHERE image_id = ? AND rater_id = ?");
        u.bind(1, rating).bind(2, r.source_digest).bind(3, image_id).bind(4, rater_id);
        u.run();
        ++r.accepted;
      }
      continue;
    }
    Stmt s(db_, "INSERT INTO human_ratings VALUES (?, ?, ?, ?)");
    s.bind(1, image_id).bind(2, rater_id).bind(3, rating).bind(4, r.source_digest);
    s.run();
    ++r.accepted;
  }
  record_source(r.source_digest, "human_ratings", csv_path, r);
  tx.commit();
  return r;
}

IngestResult Store::ingest_expert_labels(const std::string& csv_path, const AttributeCatalog& catalog) {
  const std::string content = read_file(csv_path);
  IngestResult r;
  r.source_digest = sha256_hex(content);
  std::lock_guard lock(mu_);
  if (source_seen(r.source_digest)) {
    r.already_ingested = true;
    return r;
  }
  const auto lines = lines_of(content);
  if (lines.empty() ||
      csv::split_record(lines[0]) != std::vector<std::string>{"image_id", "rater_id", "attribute_id", "label"}) {
    throw StoreError("expert labels CSV must start with header image_id,rater_id,attribute_id,label");
  }
  const std::string raw_ref = blobs_.put(content);
  Transaction tx(db_);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t lineno = i + 1;
    const auto f = csv::split_record(lines[i]);
    if (f.size() != 4) {
      r.rejects.push_back({lineno, f.empty() ? "" : f[0], "malformed: expected 4 fields"});
      continue;
    }
    const std::string image_id = trim(f[0]);
    const std::string rater = trim(f[1]);
    const AttributeSpec* attr = catalog.find(trim(f[2]));
    if (!attr) {
      r.rejects.push_back({lineno, image_id, "unknown attribute_id '" + trim(f[2]) + "'"});
      continue;
    }
    const auto idx = resolve_label(*attr, f[3]);
    if (!idx) {
      r.rejects.push_back({lineno, image_id, "unknown label '" + f[3] + "' for " + attr->id});
      continue;
    }
    if (!property(image_id)) {
      r.rejects.push_back({lineno, image_id, "unknown image_id"});
      continue;
    }
    const std::string model = std::string(kExpertPrefix) + rater;
    Stmt q(db_,
           "SELECT option_index FROM judgments WHERE run_set = ? AND image_id = ? AND model_id = ? AND "
           "run_index = 0 AND attribute_id = ?");
    q.bind(1, std::string(kAttributeQaRunSet)).bind(2, image_id).bind(3, model).bind(4, attr->id);
    if (q.step()) {
      if (q.i64(0) == *idx) {
        ++r.unchanged;
      } else {
        r.rejects.push_back({lineno, image_id, "immutable: expert label already stored"});
      }
      continue;
    }
    Stmt s(db_, "INSERT INTO judgments VALUES (?, ?, ?, 0, ?, ?, ?, 0, ?)");
    s.bind(1, std::string(kAttributeQaRunSet)).bind(2, image_id).bind(3, model).bind(4, attr->id);
    s.bind(5, *idx).bind(6, raw_ref).bind(7, utc_timestamp_now());
    s.run();
    ++r.accepted;
  }
  record_source(r.source_digest, "expert_labels", csv_path, r);
  tx.commit();
  return r;
}

namespace {

PropertyRecord read_property(const Stmt& s) {
  PropertyRecord p;
  p.image_id = s.text(0);
  p.image_source = s.text(1);
  p.address = s.opt_text(2);
  p.latitude = s.opt_real(3);
  p.longitude = s.opt_real(4);
  p.city = s.opt_text(5);
  p.state = s.opt_text(6);
  return p;
}

RunItem read_item(const Stmt& s) {
  RunItem it;
  it.run_set = s.text(0);
  it.image_id = s.text(1);
  it.model_id = s.text(2);
  it.run_index = static_cast<int>(s.i64(3));
  it.status = s.text(4);
  it.error_kind = s.text(5);
  it.error_detail = s.text(6);
  it.raw_response_ref = s.text(7);
  it.seed = from_db(s.i64(8));
  it.latency_s = s.real(9);
  it.attempts = static_cast<int>(s.i64(10));
  it.from_cache = s.i64(11) != 0;
  it.timestamp = s.text(12);
  return it;
}

}  // namespace

std::optional<PropertyRecord> Store::property(const std::string& image_id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT image_id, image_source, address, latitude, longitude, city, state FROM properties WHERE image_id = ?");
  s.bind(1, image_id);
  if (!s.step()) return std::nullopt;
  return read_property(s);
}

std::vector<PropertyRecord> Store::properties(const PropertyFilter& filter) const {
  std::lock_guard lock(mu_);
  std::string sql = "SELECT image_id, image_source, address, latitude, longitude, city, state FROM properties WHERE 1=1";
  if (filter.city) sql += " AND city = ?1";
  if (filter.bbox) sql += " AND longitude BETWEEN ?2 AND ?4 AND latitude BETWEEN ?3 AND ?5";
  sql += " ORDER BY image_id";
  Stmt s(db_, sql.c_str());
  if (filter.city) s.bind(1, *filter.city);
  if (filter.bbox) {
    s.bind(2, filter.bbox->min_lon).bind(3, filter.bbox->min_lat).bind(4, filter.bbox->max_lon);
    s.bind(5, filter.bbox->max_lat);
  }
  std::vector<PropertyRecord> out;
  while (s.step()) out.push_back(read_property(s));
  return out;
}

std::vector<HumanRating> Store::human_ratings(const std::optional<std::string>& image_id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, image_id ? "SELECT image_id, rater_id, rating FROM human_ratings WHERE image_id = ? ORDER BY image_id, rater_id"
                       : "SELECT image_id, rater_id, rating FROM human_ratings ORDER BY image_id, rater_id");
  if (image_id) s.bind(1, *image_id);
  std::vector<HumanRating> out;
  while (s.step()) out.push_back({s.text(0), s.text(1), static_cast<int>(s.i64(2))});
  return out;
}

std::vector<std::string> Store::model_ids(const std::string& run_set) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT DISTINCT model_id FROM judgments WHERE run_set = ? ORDER BY model_id");
  s.bind(1, run_set);
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.text(0));
  return out;
}

std::optional<RunItem> Store::run_item(const std::string& run_set, const std::string& image_id,
                                       const std::string& model_id, int run_index) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT * FROM run_items WHERE run_set = ? AND image_id = ? AND model_id = ? AND run_index = ?");
  s.bind(1, run_set).bind(2, image_id).bind(3, model_id).bind(4, run_index);
  if (!s.step()) return std::nullopt;
  return read_item(s);
}

std::vector<RunItem> Store::run_items(const std::string& run_set, const std::optional<std::string>& model_id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, model_id ? "SELECT * FROM run_items WHERE run_set = ? AND model_id = ? ORDER BY image_id, model_id, run_index"
                       : "SELECT * FROM run_items WHERE run_set = ? ORDER BY image_id, model_id, run_index");
  s.bind(1, run_set);
  if (model_id) s.bind(2, *model_id);
  std::vector<RunItem> out;
  while (s.step()) out.push_back(read_item(s));
  return out;
}

namespace {

void upsert_item(sqlite3* db, const RunItem& it) {
  Stmt s(db, "INSERT OR REPLACE INTO run_items VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
  s.bind(1, it.run_set).bind(2, it.image_id).bind(3, it.model_id).bind(4, it.run_index).bind(5, it.status);
  s.bind(6, it.error_kind).bind(7, it.error_detail).bind(8, it.raw_response_ref).bind(9, to_db(it.seed));
  s.bind(10, it.latency_s).bind(11, it.attempts).bind(12, static_cast<int>(it.from_cache)).bind(13, it.timestamp);
  s.run();
}

}  // namespace

void Store::commit_success(const RunItem& item, const std::vector<Judgment>& judgments) {
  for (const auto& j : judgments) {
    if (!blobs_.contains(j.raw_response_ref)) {
      throw StoreError("judgment raw_response_ref does not resolve: " + j.raw_response_ref);
    }
  }
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  for (const auto& j : judgments) {
    Stmt s(db_, "INSERT INTO judgments VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)");
    s.bind(1, j.run_set).bind(2, j.image_id).bind(3, j.model_id).bind(4, j.run_index).bind(5, j.attribute_id);
    s.bind(6, j.option_index).bind(7, j.raw_response_ref).bind(8, to_db(j.attribute_order_seed)).bind(9, j.timestamp);
    s.run();
  }
  upsert_item(db_, item);
  tx.commit();
}

void Store::commit_failure(const RunItem& item) {
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  upsert_item(db_, item);
  tx.commit();
}

std::vector<Judgment> Store::query(const JudgmentFilter& f) const {
  std::lock_guard lock(mu_);
  std::string sql =
      "SELECT j.run_set, j.image_id, j.model_id, j.run_index, j.attribute_id, j.option_index, "
      "j.raw_response_ref, j.attribute_order_seed, j.timestamp FROM judgments j";
  if (f.city) sql += " JOIN properties p ON p.image_id = j.image_id";
  sql += " WHERE 1=1";
  if (f.image_id) sql += " AND j.image_id = ?1";
  if (f.model_id) sql += " AND j.model_id = ?2";
  if (f.run_set) sql += " AND j.run_set = ?3";
  if (f.run_index) sql += " AND j.run_index = ?4";
  if (f.attribute_id) sql += " AND j.attribute_id = ?5";
  if (f.city) sql += " AND p.city = ?6";
  if (f.model_prefix) sql += " AND substr(j.model_id, 1, length(?7)) = ?7";
  sql += " ORDER BY j.image_id, j.model_id, j.run_index, j.attribute_id, j.run_set";
  Stmt s(db_, sql.c_str());
  if (f.image_id) s.bind(1, *f.image_id);
  if (f.model_id) s.bind(2, *f.model_id);
  if (f.run_set) s.bind(3, *f.run_set);
  if (f.run_index) s.bind(4, *f.run_index);
  if (f.attribute_id) s.bind(5, *f.attribute_id);
  if (f.city) s.bind(6, *f.city);
  if (f.model_prefix) s.bind(7, *f.model_prefix);
  std::vector<Judgment> out;
  while (s.step()) {
    Judgment j;
    j.run_set = s.text(0);
    j.image_id = s.text(1);
    j.model_id = s.text(2);
    j.run_index = static_cast<int>(s.i64(3));
    j.attribute_id = s.text(4);
    j.option_index = static_cast<int>(s.i64(5));
    j.raw_response_ref = s.text(6);
    j.attribute_order_seed = from_db(s.i64(7));
    j.timestamp = s.text(8);
    out.push_back(std::move(j));
  }
  return out;
}

std::string Store::export_judgments_jsonl(const JudgmentFilter& filter, bool include_timestamps) const {
  std::string out;
  for (const auto& j : query(filter)) {
    out += judgment_to_json(j, include_timestamps).dump();
    out += '\n';
  }
  return out;
}

void Store::put_run_meta(const std::string& run_id, const json& meta) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "INSERT OR REPLACE INTO run_meta VALUES (?, ?)");
  s.bind(1, run_id).bind(2, meta.dump());
  s.run();
}

std::optional<json> Store::run_meta(const std::string& run_id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT meta FROM run_meta WHERE run_id = ?");
  s.bind(1, run_id);
  if (!s.step()) return std::nullopt;
  return json::parse(s.text(0));
}

}  // namespace curb
