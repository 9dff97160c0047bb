#include "sketchfuzz/oracle/oracles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "sketchfuzz/gen/generator.hpp"

namespace sketchfuzz {

std::string_view to_string(VerdictKind kind) {
  switch (kind) {
  case VerdictKind::Pass: return "Pass";
  case VerdictKind::LogicBug: return "LogicBug";
  case VerdictKind::ExpectedError: return "ExpectedError";
  case VerdictKind::Crash: return "Crash";
  case VerdictKind::Hang: return "Hang";
  }
  return "?";
}

std::optional<VerdictKind> parse_verdict_kind(std::string_view t) {
  for (auto k : {VerdictKind::Pass, VerdictKind::LogicBug, VerdictKind::ExpectedError,
                 VerdictKind::Crash, VerdictKind::Hang})
    if (to_string(k) == t)
      return k;
  return std::nullopt;
}

std::string_view to_string(OracleKind kind) {
  switch (kind) {
  case OracleKind::TLP: return "TLP";
  case OracleKind::NoREC: return "NoREC";
  case OracleKind::Execution: return "Execution";
  }
  return "?";
}

std::optional<OracleKind> parse_oracle_kind(std::string_view t) {
  for (auto k : {OracleKind::TLP, OracleKind::NoREC, OracleKind::Execution})
    if (to_string(k) == t)
      return k;
  return std::nullopt;
}

namespace {

std::optional<double> as_float(const std::string& cell) {
  if (cell.find_first_of(".eE") == std::string::npos)
    return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    return std::nullopt;
  return v;
}

bool cells_close(const std::string& a, const std::string& b) {
  if (a == b)
    return true;
  auto x = as_float(a), y = as_float(b);
  if (!x || !y)
    return false;
  if (std::isnan(*x) || std::isnan(*y))
    return std::isnan(*x) && std::isnan(*y);
  const double scale = std::max({1.0, std::fabs(*x), std::fabs(*y)});
  return std::fabs(*x - *y) <= 1e-9 * scale;
}

std::string describe(const Rows& rows) {
  std::string out = std::to_string(rows.size()) + " rows:";
  for (const auto& r : canonical_sort(rows)) {
    out += " (";
    for (std::size_t i = 0; i < r.size(); ++i)
      out += (i ? ", " : "") + r[i];
    out += ")";
  }
  return out;
}

// Runs one oracle query; returns false when the check must stop.
bool issue(Verdict& v, Connector& c, const std::string& sql) {
  OracleQuery q{sql, c.execute(sql)};
  const bool ok = q.outcome.ok();
  if (!ok) {
    const Liveness probe = q.outcome.status == ExecStatus::SqlError ? Liveness::Alive
                                                                    : c.probe_alive();
    v.kind = classify_failure(q.outcome, probe);
    v.details = std::string(to_string(q.outcome.status)) + ": " +
                q.outcome.message.value_or("");
    v.last_statement = sql;
  }
  v.queries.push_back(std::move(q));
  return ok;
}

} // namespace

Rows canonical_sort(Rows rows) {
  const std::string null_marker(kNullMarker);
  auto key_less = [&](const Row& a, const Row& b) {
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      if (a[i] == b[i])
        continue;
      if (a[i] == null_marker)
        return true;
      if (b[i] == null_marker)
        return false;
      return a[i] < b[i];
    }
    return a.size() < b.size();
  };
  std::sort(rows.begin(), rows.end(), key_less);
  return rows;
}

bool rows_equivalent(Rows a, Rows b) {
  if (a.size() != b.size())
    return false;
  a = canonical_sort(std::move(a));
  b = canonical_sort(std::move(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size())
      return false;
    for (std::size_t j = 0; j < a[i].size(); ++j)
      if (!cells_close(a[i][j], b[i][j]))
        return false;
  }
  return true;
}

VerdictKind classify_failure(const ExecOutcome& outcome, Liveness probe) {
  switch (outcome.status) {
  case ExecStatus::Ok:
    return VerdictKind::Pass;
  case ExecStatus::SqlError:
    return VerdictKind::ExpectedError;
  case ExecStatus::Timeout:
  case ExecStatus::ConnectionLost:
    if (probe == Liveness::Dead)
      return VerdictKind::Crash;
    if (probe == Liveness::Unresponsive)
      return VerdictKind::Hang;
    return VerdictKind::ExpectedError;
  }
  return VerdictKind::ExpectedError;
}

std::string tlp_query(const std::vector<std::string>& from, int partition,
                      const std::string& p) {
  std::string q = "SELECT * FROM " + render_from(from);
  switch (partition) {
  case 1: return q + " WHERE " + p;
  case 2: return q + " WHERE NOT (" + p + ")";
  case 3: return q + " WHERE (" + p + ") IS NULL";
  default: return q;
  }
}

std::string norec_optimized(const std::vector<std::string>& from, const std::string& p) {
  return "SELECT COUNT(*) FROM " + render_from(from) + " WHERE " + p;
}

std::string norec_unoptimized(const std::vector<std::string>& from, const std::string& p) {
  return "SELECT SUM(CASE WHEN (" + p + ") THEN 1 ELSE 0 END) FROM " + render_from(from);
}

Verdict tlp_check(const std::vector<std::string>& from, const std::string& predicate,
                  Connector& connector) {
  Verdict v;
  v.oracle = OracleKind::TLP;
  v.from = from;
  v.predicate = predicate;
  for (int part = 0; part < 4; ++part)
    if (!issue(v, connector, tlp_query(from, part, predicate)))
      return v;
  Rows whole = *v.queries[0].outcome.rows;
  Rows parts;
  for (int part = 1; part < 4; ++part)
    for (auto& r : *v.queries[part].outcome.rows)
      parts.push_back(r);
  if (!rows_equivalent(whole, parts)) {
    v.kind = VerdictKind::LogicBug;
    v.details = "original: " + describe(whole) + "\npartitions: " + describe(parts);
  }
  return v;
}

Verdict norec_check(const std::vector<std::string>& from, const std::string& predicate,
                    Connector& connector) {
  Verdict v;
  v.oracle = OracleKind::NoREC;
  v.from = from;
  v.predicate = predicate;
  if (!issue(v, connector, norec_optimized(from, predicate)) ||
      !issue(v, connector, norec_unoptimized(from, predicate)))
    return v;
  auto scalar = [](const ExecOutcome& o) -> std::string {
    if (!o.rows || o.rows->empty() || o.rows->front().empty())
      return "0";
    const std::string& c = o.rows->front().front();
    return c == kNullMarker ? "0" : c;
  };
  const std::string optimized = scalar(v.queries[0].outcome);
  const std::string unoptimized = scalar(v.queries[1].outcome);
  if (!cells_close(optimized, unoptimized)) {
    v.kind = VerdictKind::LogicBug;
    v.details = "optimized count: " + optimized + "\nunoptimized count: " + unoptimized;
  }
  return v;
}

Verdict run_oracle(OracleKind oracle, const std::vector<std::string>& from,
                   const std::string& predicate, Connector& connector) {
  switch (oracle) {
  case OracleKind::TLP: return tlp_check(from, predicate, connector);
  case OracleKind::NoREC: return norec_check(from, predicate, connector);
  case OracleKind::Execution: break;
  }
  throw Error("run_oracle: execution verdicts have no oracle queries");
}

} // namespace sketchfuzz
