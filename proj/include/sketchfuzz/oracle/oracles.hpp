#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sketchfuzz/connector/connector.hpp"

namespace sketchfuzz {

enum class VerdictKind { Pass, LogicBug, ExpectedError, Crash, Hang };
std::string_view to_string(VerdictKind kind);
std::optional<VerdictKind> parse_verdict_kind(std::string_view text);

enum class OracleKind { TLP, NoREC, Execution };
std::string_view to_string(OracleKind kind);
std::optional<OracleKind> parse_oracle_kind(std::string_view text);

struct OracleQuery {
  std::string sql;
  ExecOutcome outcome;
};

struct Verdict {
  VerdictKind kind = VerdictKind::Pass;
  OracleKind oracle = OracleKind::TLP;
  // Reproducing script; filled by the caller that knows the database state.
  std::vector<std::string> statements;
  std::vector<std::string> from;
  std::string predicate;
  // Queries issued by the oracle and what they returned.
  std::vector<OracleQuery> queries;
  // For LogicBug: both sides; for failures: the error text.
  std::string details;
  // Crash/Hang: the statement that was running.
  std::string last_statement;
};

// Multiset equality over canonical rows. Cells that both parse as floating
// point numbers with a decimal point or exponent are compared with a
// relative tolerance of 1e-9.
bool rows_equivalent(Rows a, Rows b);
// Sorted copy; the NULL marker sorts first.
Rows canonical_sort(Rows rows);

// Maps a failed execution to a verdict kind. probe is only consulted for
// Timeout and ConnectionLost.
VerdictKind classify_failure(const ExecOutcome& outcome, Liveness probe);

// Ternary logic partitioning, WHERE variant.
Verdict tlp_check(const std::vector<std::string>& from, const std::string& predicate,
                  Connector& connector);
// Optimized COUNT(*) against an unoptimizable SUM(CASE ...) form.
Verdict norec_check(const std::vector<std::string>& from, const std::string& predicate,
                    Connector& connector);

std::string tlp_query(const std::vector<std::string>& from, int partition,
                      const std::string& predicate);
std::string norec_optimized(const std::vector<std::string>& from, const std::string& predicate);
std::string norec_unoptimized(const std::vector<std::string>& from, const std::string& predicate);

Verdict run_oracle(OracleKind oracle, const std::vector<std::string>& from,
                   const std::string& predicate, Connector& connector);

} // namespace sketchfuzz
