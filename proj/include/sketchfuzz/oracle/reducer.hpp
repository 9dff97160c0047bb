#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sketchfuzz/connector/connector.hpp"
#include "sketchfuzz/oracle/oracles.hpp"

namespace sketchfuzz {

using ReplayCheck = std::function<bool(const std::vector<std::string>&)>;

struct ReduceResult {
  std::vector<std::string> statements;
  // The check did not hold on the original input; nothing was removed.
  bool flaky = false;
  std::size_t checks = 0;
};

// Statement-level ddmin followed by single-deletion passes until no single
// statement can be removed.
ReduceResult reduce_testcase(const std::vector<std::string>& statements,
                             const ReplayCheck& check);

// Replays a verdict's script on a fresh database and reports whether the
// same verdict kind shows up again. For oracle verdicts the last statement
// must be the oracle's base query; for Crash/Hang the engine is restarted
// before the script runs.
bool reproduces(const Verdict& original, const std::vector<std::string>& statements,
                Connector& connector);

// Everything needed to write and replay a bug script file.
struct BugReport {
  Verdict verdict;
  std::string engine;
  // Connector target the bug was found on, e.g. "mock:null-drop".
  std::string target;
  std::uint64_t seed = 0;
};

std::string render_report(const BugReport& report);
// Throws Error on malformed input.
BugReport parse_report(std::string_view text);

// Base query that closes an oracle script: SELECT * FROM <from> WHERE <p>.
std::string closing_query(const Verdict& v);

// Key used to suppress duplicate reports.
std::string dedup_key(const Verdict& v);

} // namespace sketchfuzz
