#include "sketchfuzz/connector/sqlite_connector.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>

#include <sqlite3.h>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             Clock::now().time_since_epoch())
      .count();
}

std::string render_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc())
    return std::to_string(v);
  std::string s(buf, end);
  // Keep a decimal marker so reals never render like integers.
  if (s.find_first_of(".eEn") == std::string::npos)
    s += ".0";
  return s;
}

std::string render_cell(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
  case SQLITE_NULL:
    return std::string(kNullMarker);
  case SQLITE_INTEGER:
    return std::to_string(sqlite3_column_int64(stmt, col));
  case SQLITE_FLOAT:
    return render_double(sqlite3_column_double(stmt, col));
  case SQLITE_BLOB: {
    const auto* data =
        static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
    const int n = sqlite3_column_bytes(stmt, col);
    std::string out = "x'";
    char hex[3];
    for (int i = 0; i < n; ++i) {
      std::snprintf(hex, sizeof hex, "%02x", data[i]);
      out += hex;
    }
    return out + "'";
  }
  default: {
    const auto* t =
        reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
    return t ? std::string(t, static_cast<std::size_t>(
                                  sqlite3_column_bytes(stmt, col)))
             : std::string();
  }
  }
}

} // namespace

SqliteConnector::SqliteConnector(ConnectorConfig cfg, std::string path)
    : Connector(std::move(cfg)), path_(std::move(path)) {
  if (cfg_.statement_timeout.count() <= 0)
    throw Error("statement_timeout_ms must be > 0");
  open();
}

SqliteConnector::~SqliteConnector() { close(); }

void SqliteConnector::open() {
  if (sqlite3_open(path_.c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    close();
    throw Error("cannot open SQLite database " + path_ + ": " + msg);
  }
  sqlite3_progress_handler(db_, 1000, &SqliteConnector::progress_callback,
                           this);
}

void SqliteConnector::close() {
  if (db_) {
    sqlite3_close_v2(db_);
    db_ = nullptr;
  }
}

int SqliteConnector::progress_callback(void* self) {
  auto* conn = static_cast<SqliteConnector*>(self);
  const std::int64_t deadline = conn->deadline_ns_.load();
  return deadline != 0 && now_ns() > deadline ? 1 : 0;
}

ExecOutcome SqliteConnector::execute(std::string_view statement) {
  std::lock_guard lock(mutex_);
  ExecOutcome out;
  const auto start = Clock::now();
  deadline_ns_ = now_ns() + std::chrono::duration_cast<std::chrono::nanoseconds>(
                                cfg_.statement_timeout)
                                .count();
  const std::string sql(statement);
  const char* tail = sql.c_str();
  const char* end = sql.c_str() + sql.size();
  bool produced_rows = false;
  Rows rows;
  while (tail < end) {
    sqlite3_stmt* stmt = nullptr;
    const char* next = nullptr;
    int rc = sqlite3_prepare_v2(db_, tail, static_cast<int>(end - tail),
                                &stmt, &next);
    if (rc != SQLITE_OK) {
      out.status = rc == SQLITE_INTERRUPT ? ExecStatus::Timeout
                                          : ExecStatus::SqlError;
      out.message = sqlite3_errmsg(db_);
      break;
    }
    tail = next;
    if (!stmt)
      continue; // whitespace or comment only
    const int ncols = sqlite3_column_count(stmt);
    if (ncols > 0) {
      produced_rows = true;
      rows.clear();
    }
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
      Row row;
      row.reserve(static_cast<std::size_t>(ncols));
      for (int c = 0; c < ncols; ++c)
        row.push_back(render_cell(stmt, c));
      rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
      out.status = rc == SQLITE_INTERRUPT ? ExecStatus::Timeout
                                          : ExecStatus::SqlError;
      out.message = sqlite3_errmsg(db_);
      sqlite3_finalize(stmt);
      break;
    }
    sqlite3_finalize(stmt);
  }
  deadline_ns_ = 0;
  out.elapsed = Clock::now() - start;
  if (out.status == ExecStatus::Timeout && out.elapsed < cfg_.statement_timeout)
    out.elapsed = cfg_.statement_timeout;
  if (out.status == ExecStatus::Ok && produced_rows)
    out.rows = std::move(rows);
  return out;
}

std::vector<std::string> SqliteConnector::list_relations() {
  auto res = execute("SELECT name FROM sqlite_master WHERE type IN "
                     "('table','view') AND name NOT LIKE 'sqlite_%' "
                     "ORDER BY name");
  std::vector<std::string> names;
  if (res.rows)
    for (const auto& r : *res.rows)
      names.push_back(r[0]);
  return names;
}

void SqliteConnector::reset_database() {
  if (cfg_.reset_mode == ResetMode::FreshDatabase) {
    std::lock_guard lock(mutex_);
    close();
    if (path_ != ":memory:" && !path_.empty())
      std::filesystem::remove(path_);
    open();
    return;
  }
  auto res = execute("SELECT type, name FROM sqlite_master WHERE type IN "
                     "('view','table') ORDER BY type DESC, name");
  if (!res.ok())
    throw Error("reset failed: " + res.message.value_or(""));
  // Views sort before tables with DESC.
  for (const auto& r : *res.rows) {
    const std::string& name = r[1];
    if (text::starts_with_ci(name, "sqlite_") && name != "sqlite_stat1" &&
        name != "sqlite_stat4")
      continue;
    std::string quoted = "\"";
    for (char c : name) {
      if (c == '"')
        quoted += '"';
      quoted += c;
    }
    quoted += '"';
    auto drop = execute("DROP " + text::to_upper(r[0]) + " IF EXISTS " + quoted);
    if (!drop.ok())
      throw Error("reset failed: " + drop.message.value_or(""));
  }
}

Liveness SqliteConnector::probe_alive() {
  std::unique_lock lock(mutex_, std::defer_lock);
  if (!lock.try_lock_for(cfg_.statement_timeout))
    return Liveness::Unresponsive;
  if (!db_)
    return Liveness::Dead;
  lock.unlock();
  auto res = execute("SELECT 1");
  if (res.ok())
    return Liveness::Alive;
  return res.status == ExecStatus::Timeout ? Liveness::Unresponsive
                                           : Liveness::Dead;
}

void SqliteConnector::restart() {
  std::lock_guard lock(mutex_);
  close();
  if (path_ != ":memory:" && !path_.empty())
    std::filesystem::remove(path_);
  open();
}

std::string SqliteConnector::engine_version() const {
  return std::string("SQLite ") + sqlite3_libversion();
}

} // namespace sketchfuzz
