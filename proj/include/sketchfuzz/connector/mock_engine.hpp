#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "sketchfuzz/connector/connector.hpp"

namespace sketchfuzz {

// Injectable misbehaviours of the mock engine.
enum class MockFault {
  // `expr IS NULL` on a non-column operand is FALSE inside WHERE.
  NullDrop,
  // A top-level WHERE comparison against a boundary integer literal uses the
  // literal incremented with 32-bit wrap-around.
  BoundaryInt,
  // A WHERE clause containing `IN (...)` whose list holds a CAST returns no
  // rows at all.
  InCast,
  // CREATE TABLE ... WITH (number_of_replicas = N) with N >= 2^31-1 kills
  // the engine.
  WithCrash,
  // A WHERE clause multiplying by the literal -1 never finishes.
  SlowHang,
  // A top-level `NOT (...)` WHERE clause skips the last scanned row.
  NotDrop,
};

std::string_view to_string(MockFault fault);
std::optional<MockFault> parse_mock_fault(std::string_view name);
// The shipped fault catalog.
std::vector<MockFault> all_mock_faults();

// A tiny strictly typed SQL engine: INT, VARCHAR and BOOLEAN columns,
// CREATE TABLE/VIEW/INDEX, DROP, INSERT, single-block SELECT with comma
// joins, COUNT(*), SUM, CASE, IN, CAST and a few scalar functions. Implicit
// text-to-integer conversion only succeeds for numeric text.
class MockConnector final : public Connector {
public:
  MockConnector(ConnectorConfig cfg, std::set<MockFault> faults);
  ~MockConnector() override;

  ExecOutcome execute(std::string_view statement) override;
  void reset_database() override;
  Liveness probe_alive() override;
  void restart() override;
  std::string engine_version() const override;
  std::vector<std::string> list_relations() override;

  // Simulates the engine process dying.
  void kill();
  // Makes every subsequent statement hang until restart().
  void stall();

  const std::set<MockFault>& faults() const { return faults_; }

  struct Database;

private:
  ExecOutcome hang();

  std::set<MockFault> faults_;
  std::unique_ptr<Database> db_;
  std::mutex mutex_;
  std::atomic<bool> dead_{false};
  std::atomic<bool> hung_{false};
};

} // namespace sketchfuzz
