#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

// Rendering of SQL NULL inside canonical result rows.
inline constexpr std::string_view kNullMarker = "\xE2\x9F\xA8NULL\xE2\x9F\xA9";

using Row = std::vector<std::string>;
using Rows = std::vector<Row>;

enum class ExecStatus { Ok, SqlError, Timeout, ConnectionLost };
std::string_view to_string(ExecStatus status);

struct ExecOutcome {
  ExecStatus status = ExecStatus::Ok;
  // Present iff status == Ok and the statement produced a result set.
  std::optional<Rows> rows;
  std::optional<std::string> message;
  std::chrono::nanoseconds elapsed{0};

  bool ok() const { return status == ExecStatus::Ok; }
};

enum class ResetMode { DropAll, FreshDatabase };

enum class Liveness { Alive, Dead, Unresponsive };
std::string_view to_string(Liveness liveness);

struct ConnectorConfig {
  // "embedded:<path>" (":memory:" allowed) or "mock:<fault>[,<fault>...]".
  std::string target = "embedded::memory:";
  std::chrono::milliseconds statement_timeout{5000};
  ResetMode reset_mode = ResetMode::DropAll;
};

// Uniform execution interface to one target database. Not shared between
// threads, except that probe_alive() may be called from a supervisor while
// a worker executes.
class Connector {
public:
  explicit Connector(ConnectorConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Connector() = default;

  virtual ExecOutcome execute(std::string_view statement) = 0;
  // Afterwards the catalog lists no user tables or views.
  virtual void reset_database() = 0;
  virtual Liveness probe_alive() = 0;
  // Restarts a crashed or hung engine with an empty database.
  virtual void restart() = 0;
  virtual std::string engine_version() const = 0;
  // Names of user tables and views, sorted.
  virtual std::vector<std::string> list_relations() = 0;

  const ConnectorConfig& config() const { return cfg_; }

protected:
  ConnectorConfig cfg_;
};

// Selects the adapter by target scheme; throws Error on an unknown scheme.
std::unique_ptr<Connector> make_connector(const ConnectorConfig& cfg);

// Grace period on top of the statement timeout that execute() may take.
inline constexpr std::chrono::milliseconds kTimeoutGrace{250};

} // namespace sketchfuzz
