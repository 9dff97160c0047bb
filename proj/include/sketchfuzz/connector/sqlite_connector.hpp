#pragma once

#include <atomic>
#include <mutex>

#include "sketchfuzz/connector/connector.hpp"

struct sqlite3;

namespace sketchfuzz {

// In-process SQLite adapter. Statement timeouts are enforced through the
// progress handler, which interrupts the running statement.
class SqliteConnector final : public Connector {
public:
  // `path` is a database file or ":memory:".
  SqliteConnector(ConnectorConfig cfg, std::string path);
  ~SqliteConnector() override;

  ExecOutcome execute(std::string_view statement) override;
  void reset_database() override;
  Liveness probe_alive() override;
  void restart() override;
  std::string engine_version() const override;
  std::vector<std::string> list_relations() override;

private:
  void open();
  void close();
  static int progress_callback(void* self);

  std::string path_;
  sqlite3* db_ = nullptr;
  std::timed_mutex mutex_;
  std::atomic<std::int64_t> deadline_ns_{0};
};

} // namespace sketchfuzz
