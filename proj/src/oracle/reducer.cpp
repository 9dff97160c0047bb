#include "sketchfuzz/oracle/reducer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/generator.hpp"

namespace sketchfuzz {

namespace {

std::vector<std::string> without(const std::vector<std::string>& s, std::size_t begin,
                                 std::size_t end) {
  std::vector<std::string> out(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(begin));
  out.insert(out.end(), s.begin() + static_cast<std::ptrdiff_t>(end), s.end());
  return out;
}

std::vector<std::string> slice(const std::vector<std::string>& s, std::size_t begin,
                               std::size_t end) {
  return {s.begin() + static_cast<std::ptrdiff_t>(begin),
          s.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

} // namespace

ReduceResult reduce_testcase(const std::vector<std::string>& statements,
                             const ReplayCheck& check) {
  ReduceResult res;
  auto test = [&](const std::vector<std::string>& s) {
    ++res.checks;
    return check(s);
  };
  if (!test(statements)) {
    res.flaky = true;
    res.statements = statements;
    return res;
  }

  std::vector<std::string> cur = statements;
  std::size_t n = 2;
  while (cur.size() >= 2) {
    const std::size_t chunk = (cur.size() + n - 1) / n;
    bool reduced = false;
    // Try each subset, then each complement.
    for (std::size_t start = 0; start < cur.size() && !reduced; start += chunk) {
      const std::size_t end = std::min(cur.size(), start + chunk);
      auto sub = slice(cur, start, end);
      if (sub.size() < cur.size() && test(sub)) {
        cur = std::move(sub);
        n = 2;
        reduced = true;
      }
    }
    for (std::size_t start = 0; start < cur.size() && !reduced; start += chunk) {
      const std::size_t end = std::min(cur.size(), start + chunk);
      auto comp = without(cur, start, end);
      if (!comp.empty() && test(comp)) {
        cur = std::move(comp);
        n = std::max<std::size_t>(n - 1, 2);
        reduced = true;
      }
    }
    if (reduced)
      continue;
    if (n >= cur.size())
      break;
    n = std::min(cur.size(), n * 2);
  }

  // ddmin ends 1-minimal in theory; re-check since replays may interact.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      auto cand = without(cur, i, i + 1);
      if (test(cand)) {
        cur = std::move(cand);
        changed = true;
        break;
      }
    }
  }
  res.statements = std::move(cur);
  return res;
}

std::string closing_query(const Verdict& v) {
  return "SELECT * FROM " + render_from(v.from) + " WHERE " + v.predicate;
}

bool reproduces(const Verdict& original, const std::vector<std::string>& statements,
                Connector& connector) {
  if (statements.empty())
    return false;
  if (connector.probe_alive() != Liveness::Alive)
    connector.restart();
  connector.reset_database();

  if (original.oracle == OracleKind::Execution) {
    bool hit = false;
    for (const auto& s : statements) {
      ExecOutcome r = connector.execute(s);
      if (r.ok() || r.status == ExecStatus::SqlError)
        continue;
      hit = classify_failure(r, connector.probe_alive()) == original.kind;
      break;
    }
    if (connector.probe_alive() != Liveness::Alive)
      connector.restart();
    return hit;
  }

  if (statements.back() != closing_query(original))
    return false;
  for (std::size_t i = 0; i + 1 < statements.size(); ++i) {
    ExecOutcome r = connector.execute(statements[i]);
    if (r.status == ExecStatus::ConnectionLost || r.status == ExecStatus::Timeout) {
      connector.restart();
      return false;
    }
  }
  Verdict v = run_oracle(original.oracle, original.from, original.predicate, connector);
  if (v.kind == VerdictKind::Crash || v.kind == VerdictKind::Hang)
    connector.restart();
  return v.kind == original.kind;
}

std::string dedup_key(const Verdict& v) {
  std::string key = std::string(to_string(v.oracle)) + "|" + std::string(to_string(v.kind)) + "|";
  if (v.kind != VerdictKind::LogicBug)
    return key + v.details.substr(0, 48);
  // Operators and keywords of the predicate, without order, nesting,
  // literals or column references.
  std::set<std::string> ops;
  const std::string& p = v.predicate;
  for (std::size_t i = 0; i < p.size();) {
    const char c = p[i];
    if (c == '\'') {
      std::size_t j = i + 1;
      while (j < p.size()) {
        if (p[j] == '\'' && j + 1 < p.size() && p[j + 1] == '\'')
          j += 2;
        else if (p[j] == '\'')
          break;
        else
          ++j;
      }
      i = j + 1;
    } else if (text::is_ident_char(c)) {
      std::size_t j = i;
      while (j < p.size() && (text::is_ident_char(p[j]) || p[j] == '.'))
        ++j;
      const std::string w = p.substr(i, j - i);
      const bool word = std::isalpha(static_cast<unsigned char>(w[0])) &&
                        w.find('.') == std::string::npos;
      if (word)
        ops.insert(text::to_upper(w));
      i = j;
    } else if (std::string_view("<>=!|+-*/%&~^").find(c) != std::string_view::npos) {
      std::size_t j = i;
      while (j < p.size() && std::string_view("<>=!|").find(p[j]) != std::string_view::npos &&
             j - i < 3)
        ++j;
      ops.insert(p.substr(i, std::max<std::size_t>(j - i, 1)));
      i += std::max<std::size_t>(j - i, 1);
    } else {
      ++i;
    }
  }
  for (const auto& op : ops)
    key += op + " ";
  return key;
}

std::string render_report(const BugReport& r) {
  const Verdict& v = r.verdict;
  std::ostringstream out;
  out << "-- verdict: " << to_string(v.kind) << "\n";
  out << "-- oracle: " << to_string(v.oracle) << "\n";
  out << "-- engine: " << one_line(r.engine) << "\n";
  if (!r.target.empty())
    out << "-- target: " << one_line(r.target) << "\n";
  out << "-- seed: " << r.seed << "\n";
  if (!v.from.empty())
    out << "-- from: " << render_from(v.from) << "\n";
  if (!v.predicate.empty())
    out << "-- predicate: " << one_line(v.predicate) << "\n";
  if (!v.last_statement.empty())
    out << "-- last: " << one_line(v.last_statement) << "\n";
  for (const auto& line : text::split_lines(v.details))
    out << "-- details: " << line << "\n";
  for (const auto& s : v.statements)
    out << one_line(s) << ";\n";
  for (const auto& q : v.queries) {
    out << "-- query: " << one_line(q.sql) << "\n";
    std::string result;
    if (q.outcome.rows) {
      result = std::to_string(q.outcome.rows->size()) + " rows:";
      for (const auto& row : canonical_sort(*q.outcome.rows)) {
        result += " (";
        for (std::size_t i = 0; i < row.size(); ++i)
          result += (i ? ", " : "") + row[i];
        result += ")";
      }
    } else {
      result = std::string(to_string(q.outcome.status));
      if (q.outcome.message)
        result += ": " + *q.outcome.message;
    }
    out << "-- result: " << one_line(result) << "\n";
  }
  return out.str();
}

BugReport parse_report(std::string_view input) {
  BugReport r;
  bool have_kind = false, have_oracle = false;
  for (const auto& raw : text::split_lines(input)) {
    std::string line = text::trim(raw);
    if (line.empty())
      continue;
    if (line.starts_with("--")) {
      const auto colon = line.find(':');
      if (colon == std::string::npos)
        continue;
      const std::string key = text::trim(line.substr(2, colon - 2));
      const std::string value = text::trim(line.substr(colon + 1));
      if (key == "verdict") {
        auto k = parse_verdict_kind(value);
        if (!k)
          throw Error("unknown verdict kind: " + value);
        r.verdict.kind = *k;
        have_kind = true;
      } else if (key == "oracle") {
        auto o = parse_oracle_kind(value);
        if (!o)
          throw Error("unknown oracle: " + value);
        r.verdict.oracle = *o;
        have_oracle = true;
      } else if (key == "engine") {
        r.engine = value;
      } else if (key == "target") {
        r.target = value;
      } else if (key == "seed") {
        try {
          r.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw Error("malformed seed: " + value);
        }
      } else if (key == "from") {
        r.verdict.from.clear();
        std::string part;
        std::istringstream ss(value);
        while (std::getline(ss, part, ','))
          if (!text::trim(part).empty())
            r.verdict.from.push_back(text::trim(part));
      } else if (key == "predicate") {
        r.verdict.predicate = value;
      } else if (key == "last") {
        r.verdict.last_statement = value;
      } else if (key == "details") {
        if (!r.verdict.details.empty())
          r.verdict.details += "\n";
        r.verdict.details += value;
      }
      continue;
    }
    if (line.back() == ';')
      line.pop_back();
    r.verdict.statements.push_back(text::trim(line));
  }
  if (!have_kind || !have_oracle)
    throw Error("report lacks a verdict or oracle header");
  if (r.verdict.statements.empty())
    throw Error("report contains no statements");
  if (r.verdict.oracle != OracleKind::Execution &&
      (r.verdict.from.empty() || r.verdict.predicate.empty()))
    throw Error("oracle report lacks from/predicate headers");
  return r;
}

} // namespace sketchfuzz
