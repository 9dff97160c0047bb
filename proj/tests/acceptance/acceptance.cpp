// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// select criteria by number.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sketchfuzz/campaign/campaign.hpp"
#include "sketchfuzz/cli/cli.hpp"
#include "sketchfuzz/connector/mock_engine.hpp"
#include "sketchfuzz/core/text.hpp"

using namespace sketchfuzz;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kFixtures = SKETCHFUZZ_FIXTURE_DIR;
const fs::path kBinary = SKETCHFUZZ_BINARY;
const fs::path kNetDeny = SKETCHFUZZ_NETDENY;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int digits = 1) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() /
             ("sketchfuzz-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sketchfuzz");
  std::ostringstream out, err;
  const int code = run_cli(args, {}, out, err);
  return {code, out.str(), err.str()};
}

std::optional<double> summary_value(const std::string& summary, const std::string& key) {
  for (const auto& line : text::split_lines(summary))
    if (line.starts_with(key + ": "))
      return std::stod(line.substr(key.size() + 2));
  return std::nullopt;
}

std::unique_ptr<Connector> connect(const std::string& target, int timeout_ms = 5000) {
  ConnectorConfig cfg;
  cfg.target = target;
  cfg.statement_timeout = std::chrono::milliseconds(timeout_ms);
  return make_connector(cfg);
}

// Fragments that put the IN-over-CAST and WITH-option code paths within the
// generator's reach; learning would supply them on a real target.
void seed_trigger_fragments(FragmentStore& store) {
  auto add = [&](FeatureLevel level, const char* feature, HoleKind hole, const char* text) {
    Fragment f;
    f.feature = store.upsert_feature(level, feature);
    f.hole = hole;
    f.text = text;
    f.validity = Validity::Valid;
    store.add(f);
  };
  add(FeatureLevel::Expression, "IN", HoleKind::LeafExpression,
      "COL IN (CAST(<RANDOM_INT> AS INT), <RANDOM_INT>)");
  add(FeatureLevel::Clause, "WITH", HoleKind::StatementSuffix,
      "WITH (number_of_replicas = <RANDOM_INT>)");
}

VerdictKind expected_kind(MockFault f) {
  switch (f) {
  case MockFault::WithCrash: return VerdictKind::Crash;
  case MockFault::SlowHang: return VerdictKind::Hang;
  default: return VerdictKind::LogicBug;
  }
}

// ---------------------------------------------------------------- 1

Outcome oracle_soundness() {
  constexpr std::uint64_t kChecks = 100'000;
  const auto start = Clock::now();
  auto conn = connect("embedded::memory:");
  Generator gen(GenConfig{}, nullptr);
  Rng rng(2024);
  std::uint64_t tlp = 0, norec = 0, bugs = 0, errors = 0;
  std::string example;
  while (tlp < kChecks || norec < kChecks) {
    conn->reset_database();
    const auto ctx = gen.generate_context(rng);
    for (const auto& s : ctx.statements)
      conn->execute(s.text);
    for (int q = 0; q < 500 && (tlp < kChecks || norec < kChecks); ++q) {
      const auto gq = gen.generate_query(ctx.schema, rng);
      for (OracleKind o : {OracleKind::TLP, OracleKind::NoREC}) {
        auto& count = o == OracleKind::TLP ? tlp : norec;
        if (count >= kChecks)
          continue;
        ++count;
        const Verdict v = run_oracle(o, gq.from, gq.predicate, *conn);
        errors += v.kind == VerdictKind::ExpectedError;
        if (v.kind == VerdictKind::LogicBug || v.kind == VerdictKind::Crash ||
            v.kind == VerdictKind::Hang) {
          ++bugs;
          if (example.empty())
            example = std::string(to_string(o)) + " " + gq.predicate;
        }
      }
    }
  }
  Outcome out;
  out.pass = bugs == 0;
  out.detail = std::to_string(tlp) + " TLP + " + std::to_string(norec) + " NoREC checks, " +
               std::to_string(bugs) + " bug verdicts, " +
               fmt(100.0 * static_cast<double>(errors) / static_cast<double>(tlp + norec)) +
               "% expected errors, " + fmt(seconds_since(start)) + " s";
  if (!example.empty())
    out.detail += "; first: " + example;
  return out;
}

// ---------------------------------------------------------------- 2

Outcome oracle_completeness() {
  const auto start = Clock::now();
  std::vector<std::string> misses;
  std::uint64_t detected = 0, runs = 0, worst = 0;
  for (MockFault fault : all_mock_faults()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ++runs;
      FragmentStore store;
      seed_trigger_fragments(store);
      CampaignConfig cfg;
      cfg.learning_enabled = false;
      cfg.max_statements = 10'000;
      cfg.stop_on_bug = true;
      cfg.reduce = false;
      cfg.seed = seed;
      cfg.connector.target = "mock:" + std::string(to_string(fault));
      cfg.connector.statement_timeout = std::chrono::milliseconds(200);
      NullBackend none;
      const auto rep = run_campaign(cfg, none, store);
      const VerdictKind want = expected_kind(fault);
      std::uint64_t wanted = 0, other = 0;
      for (auto [k, n] : rep.totals.verdicts) {
        if (k == want)
          wanted += n;
        else if (k == VerdictKind::LogicBug || k == VerdictKind::Crash || k == VerdictKind::Hang)
          other += n;
      }
      if (wanted > 0 && other == 0) {
        ++detected;
        worst = std::max(worst, rep.totals.statements);
      } else {
        misses.push_back(std::string(to_string(fault)) + "/seed " + std::to_string(seed) +
                         (other ? " (misclassified)" : " (missed)"));
      }
    }
  }
  Outcome out;
  out.pass = misses.empty();
  out.detail = std::to_string(detected) + "/" + std::to_string(runs) +
               " fault/seed runs detected with the right kind, worst case " +
               std::to_string(worst) + " test cases, " + fmt(seconds_since(start)) + " s";
  for (const auto& m : misses)
    out.detail += "; " + m;
  return out;
}

// ---------------------------------------------------------------- 3

// Independent three-valued evaluator over a tiny predicate grammar.
enum class Tv { False, True, Null };

struct Pred {
  enum class Op { Less, And, Not } op;
  int lhs = 0, rhs = 0;           // atom indices for Less
  std::shared_ptr<Pred> a, b;     // operands for And/Not
};

constexpr const char* kAtoms[] = {"c0", "c1", "0", "1", "NULL"};
using Cell = std::optional<int>;
using SmallRow = std::pair<Cell, Cell>;

Cell atom_value(int atom, const SmallRow& r) {
  switch (atom) {
  case 0: return r.first;
  case 1: return r.second;
  case 2: return 0;
  case 3: return 1;
  default: return std::nullopt;
  }
}

Tv eval(const Pred& p, const SmallRow& r) {
  switch (p.op) {
  case Pred::Op::Less: {
    const Cell x = atom_value(p.lhs, r), y = atom_value(p.rhs, r);
    if (!x || !y)
      return Tv::Null;
    return *x < *y ? Tv::True : Tv::False;
  }
  case Pred::Op::Not: {
    const Tv v = eval(*p.a, r);
    return v == Tv::Null ? Tv::Null : v == Tv::True ? Tv::False : Tv::True;
  }
  case Pred::Op::And: {
    const Tv x = eval(*p.a, r), y = eval(*p.b, r);
    if (x == Tv::False || y == Tv::False)
      return Tv::False;
    if (x == Tv::Null || y == Tv::Null)
      return Tv::Null;
    return Tv::True;
  }
  }
  return Tv::Null;
}

std::string render(const Pred& p) {
  switch (p.op) {
  case Pred::Op::Less:
    return std::string("(") + kAtoms[p.lhs] + " < " + kAtoms[p.rhs] + ")";
  case Pred::Op::Not: return "(NOT " + render(*p.a) + ")";
  case Pred::Op::And: return "(" + render(*p.a) + " AND " + render(*p.b) + ")";
  }
  return "";
}

std::vector<Pred> small_predicates() {
  std::vector<std::shared_ptr<Pred>> cmp;
  for (int l = 0; l < 5; ++l)
    for (int r = 0; r < 5; ++r)
      cmp.push_back(std::make_shared<Pred>(Pred{Pred::Op::Less, l, r, nullptr, nullptr}));
  std::vector<Pred> out;
  for (const auto& c : cmp) {
    out.push_back(*c);
    out.push_back({Pred::Op::Not, 0, 0, c, nullptr});
  }
  for (const auto& x : cmp)
    for (const auto& y : cmp) {
      auto conj = std::make_shared<Pred>(Pred{Pred::Op::And, 0, 0, x, y});
      out.push_back(*conj);
      out.push_back({Pred::Op::Not, 0, 0, conj, nullptr});
    }
  return out;
}

std::vector<std::vector<SmallRow>> small_tables() {
  const Cell values[] = {std::nullopt, 0, 1};
  std::vector<SmallRow> kinds;
  for (auto a : values)
    for (auto b : values)
      kinds.emplace_back(a, b);
  std::vector<std::vector<SmallRow>> out;
  std::vector<std::size_t> idx;
  // Multisets of size 0..4 as non-decreasing index sequences.
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    std::vector<SmallRow> t;
    for (auto i : idx)
      t.push_back(kinds[i]);
    out.push_back(std::move(t));
    if (idx.size() == 4)
      return;
    for (std::size_t i = from; i < kinds.size(); ++i) {
      idx.push_back(i);
      rec(i);
      idx.pop_back();
    }
  };
  rec(0);
  return out;
}

std::string cell_sql(const Cell& c) { return c ? std::to_string(*c) : "NULL"; }

Outcome small_instance_equivalence() {
  const auto start = Clock::now();
  const auto preds = small_predicates();
  const auto tables = small_tables();
  std::uint64_t checked = 0, mismatches = 0;
  std::string example;
  // The null-drop mock answers `(p) IS NULL` with FALSE, so TLP loses exactly
  // the rows on which p is NULL; NoREC never uses IS NULL.
  for (const std::string target : {"embedded::memory:", "mock:null-drop"}) {
    const bool faulty = target == "mock:null-drop";
    auto conn = connect(target);
    for (const auto& table : tables) {
      conn->reset_database();
      conn->execute("CREATE TABLE t0 (c0 INT, c1 INT)");
      for (const auto& [a, b] : table)
        conn->execute("INSERT INTO t0 (c0, c1) VALUES (" + cell_sql(a) + ", " + cell_sql(b) + ")");
      for (const auto& p : preds) {
        bool any_null = false;
        for (const auto& r : table)
          any_null |= eval(p, r) == Tv::Null;
        const VerdictKind want_tlp =
            faulty && any_null ? VerdictKind::LogicBug : VerdictKind::Pass;
        const std::string sql = render(p);
        const VerdictKind got_tlp = tlp_check({"t0"}, sql, *conn).kind;
        const VerdictKind got_norec = norec_check({"t0"}, sql, *conn).kind;
        checked += 2;
        if (got_tlp != want_tlp || got_norec != VerdictKind::Pass) {
          ++mismatches;
          if (example.empty())
            example = target + " " + sql + " on " + std::to_string(table.size()) + " rows";
        }
      }
    }
  }
  Outcome out;
  out.pass = mismatches == 0 && seconds_since(start) <= 300;
  out.detail = std::to_string(preds.size()) + " predicates x " + std::to_string(tables.size()) +
               " tables x 2 engines, " + std::to_string(checked) + " verdicts, " +
               std::to_string(mismatches) + " mismatches, " + fmt(seconds_since(start)) + " s";
  if (!example.empty())
    out.detail += "; first: " + example;
  return out;
}

// ---------------------------------------------------------------- 4

struct Filling {
  HoleKind hole;
  std::string text;
  // Concrete statements that use the filling directly on the engine.
  std::vector<std::string> probe;
  // Distinctive text expected in the transcript, if any.
  std::string marker;
};

bool engine_supports(const std::vector<std::string>& probe) {
  auto conn = connect("embedded::memory:");
  for (const auto& s : probe)
    if (!conn->execute(s).ok())
      return false;
  return true;
}

Outcome learning_loop() {
  const auto start = Clock::now();
  const auto dir = scratch("learn");
  const std::string replay = "replay:" + (kFixtures / "table3").string();
  const std::vector<Filling> fillings = {
      {HoleKind::WholeStatement, "ANALYZE", {"CREATE TABLE t (c INT)", "ANALYZE"}, "ANALYZE"},
      {HoleKind::TableOption, "IF NOT EXISTS", {"CREATE TABLE IF NOT EXISTS t (c INT)"},
       "IF NOT EXISTS"},
      {HoleKind::TableOption, "IF NOT EXIST", {"CREATE TABLE IF NOT EXIST t (c INT)"}, ""},
      {HoleKind::ColumnConstraint, "NOT NULL", {"CREATE TABLE t (c INT NOT NULL)"}, "NOT NULL"},
      {HoleKind::ColumnConstraint, "PRIMARY KEY", {"CREATE TABLE t (c INT PRIMARY KEY)"}, ""},
      {HoleKind::TableConstraint, "PRIMARY KEY (COL)",
       {"CREATE TABLE t (c INT, PRIMARY KEY (c))"}, ", PRIMARY KEY ("},
      {HoleKind::TableConstraint, "PRIMARY KEY COL", {"CREATE TABLE t (c INT, PRIMARY KEY c)"}, ""},
      {HoleKind::FunctionName, "CEIL", {"SELECT CEIL(1)"}, "CEIL("},
      {HoleKind::DataTypeName, "ARRAY", {"CREATE TABLE t (c ARRAY)"}, " ARRAY"},
      {HoleKind::TypedLiteral, "[1, <RANDOM_INT>]",
       {"CREATE TABLE t (c ARRAY)", "INSERT INTO t (c) VALUES ([1, 5])"}, ""},
  };

  auto learn = cli({"learn", "--backend", replay, "--out-dir", dir.string(), "--seed", "1"});
  if (learn.code != 0)
    return {false, "learn exited " + std::to_string(learn.code) + ": " + learn.err};
  FragmentStore learned;
  learned.load_records(slurp(dir / "fragments.jsonl"));
  auto find = [](const FragmentStore& s, const Filling& f) -> std::optional<Fragment> {
    for (const auto& fr : s.lookup(f.hole, false))
      if (fr.text == f.text)
        return fr;
    return std::nullopt;
  };

  std::vector<std::string> problems;
  std::size_t supported = 0;
  for (const auto& f : fillings) {
    const bool ok = engine_supports(f.probe);
    supported += ok;
    const auto fr = find(learned, f);
    const bool valid = fr && fr->validity == Validity::Valid;
    if (ok != valid)
      problems.push_back(f.text + (ok ? " supported but not Valid" : " unsupported but Valid"));
  }

  auto fuzz = cli({"fuzz", "--no-learn", "--num-statements", "50000", "--seed", "2",
                   "--out-dir", dir.string()});
  if (fuzz.code != 0)
    problems.push_back("fuzz exited " + std::to_string(fuzz.code));
  FragmentStore after;
  after.load_records(slurp(dir / "fragments.jsonl"));
  const std::string transcript = slurp(dir / "statements.sql");
  for (const auto& f : fillings) {
    if (!engine_supports(f.probe))
      continue;
    const auto before = find(learned, f);
    const auto now = find(after, f);
    const bool used = before && now && now->stats.total() > before->stats.total();
    const bool seen = f.marker.empty() || transcript.find(f.marker) != std::string::npos;
    if (!used || !seen)
      problems.push_back(f.text + " not emitted in 50000 statements");
  }
  Outcome out;
  out.pass = problems.empty();
  out.detail = std::to_string(supported) + " of " + std::to_string(fillings.size()) +
               " fillings supported by the engine, learned as Valid and reused offline, " +
               fmt(seconds_since(start)) + " s";
  for (const auto& p : problems)
    out.detail += "; " + p;
  return out;
}

// ---------------------------------------------------------------- 5

// Half of the proposed fragments are hallucinated.
void write_half_invalid_fixtures(const fs::path& dir) {
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / (name + ".txt")) << body;
  };
  put("features-statement", "VACUUM\n");
  put("features-clause", "UNIQUE\n");
  put("features-expression", "ABS\n");
  put("features-datatype", "INT\n");
  put("synth-statement-vacuum",
      "0,ANALYZE\n0,VACUUM\n0,REINDEX\n0,PRAGMA optimize\n"
      "0,OPTIMIZE TABLE TAB\n0,FLUSH TABLES\n0,SHOW TABLES\n0,REFRESH TABLE TAB\n");
  put("synth-clause-unique",
      "0,IF NOT EXISTS\n1,UNIQUE\n1,DEFAULT 0\n1,CHECK (COL > -10000)\n"
      "0,IF NOT EXIST\n1,AUTO_INCREMENT\n1,UNSIGNED\n1,ZEROFILL\n");
  put("synth-expression-abs",
      "0,ABS\n0,SIGN\n0,CEIL\n0,FLOOR\n0,ROUND\n"
      "0,TO_DAYS\n0,BITAND\n0,ARRAY_LENGTH\n0,DAYOFWEEK\n0,STRCMP_CI\n");
}

Outcome validation_effect() {
  const auto start = Clock::now();
  const auto fixtures = scratch("half-invalid-fixtures");
  write_half_invalid_fixtures(fixtures);
  const std::string replay = "replay:" + fixtures.string();
  auto rate = [&](bool validate) -> std::optional<double> {
    const auto dir = scratch(validate ? "validated" : "unvalidated");
    const std::string v = validate ? "--validate" : "--no-validate";
    if (cli({"learn", "--backend", replay, v, "--out-dir", dir.string(), "--seed", "3"}).code)
      return std::nullopt;
    auto r = cli({"fuzz", "--no-learn", v, "--num-statements", "100000", "--seed", "4",
                  "--out-dir", dir.string()});
    if (r.code != 0)
      return std::nullopt;
    return summary_value(r.out, "validity_rate");
  };
  const auto with = rate(true);
  const auto without = rate(false);
  if (!with || !without)
    return {false, "a run failed"};
  const double gain = (*with - *without) * 100;
  return {gain >= 20, "validity " + fmt(*with * 100) + "% with validation vs " +
                          fmt(*without * 100) + "% without (+" + fmt(gain) +
                          " points over 100000 statements each), " +
                          fmt(seconds_since(start)) + " s"};
}

// ---------------------------------------------------------------- 6

Outcome runtime_pruning() {
  struct Spot {
    std::uint64_t s, f;
    double want;
  };
  std::vector<std::string> problems;
  for (const Spot& sp : {Spot{0, 0, 0.5}, Spot{10, 0, 11.0 / 12.0}, Spot{1, 9, 2.0 / 12.0}})
    if (std::abs(estimate_support_prob({sp.s, sp.f}) - sp.want) > 1e-12)
      problems.push_back("posterior(" + std::to_string(sp.s) + "," + std::to_string(sp.f) + ")");

  Rng rng(6);
  const ValidatorConfig vc;
  int bad_demoted = 0, good_demoted = 0;
  std::uint64_t worst_uses = 0;
  for (int phase = 0; phase < 100; ++phase) {
    FragmentStore store;
    auto feat = store.upsert_feature(FeatureLevel::Expression, "F");
    auto plant = [&](const std::string& text) {
      Fragment f;
      f.feature = feat;
      f.hole = HoleKind::FunctionName;
      f.text = text;
      f.validity = Validity::Valid;
      store.add(f);
      return f.id;
    };
    const auto bad = plant("BAD"), good = plant("GOOD");
    std::optional<std::uint64_t> bad_at;
    for (std::uint64_t use = 1; use <= 200; ++use) {
      if (store.fragment(bad)->validity == Validity::Valid)
        store.record_use(bad, rng.chance(0.1));
      store.record_use(good, rng.chance(0.95));
      runtime_prune(store, vc.prune_threshold, vc.min_trials);
      if (!bad_at && store.fragment(bad)->validity == Validity::Demoted)
        bad_at = use;
    }
    if (bad_at) {
      ++bad_demoted;
      worst_uses = std::max(worst_uses, *bad_at);
    }
    good_demoted += store.fragment(good)->validity == Validity::Demoted;
  }
  if (bad_demoted < 95)
    problems.push_back("p=0.1 demoted in only " + std::to_string(bad_demoted) + "/100 phases");
  if (good_demoted > 0)
    problems.push_back("p=0.95 demoted in " + std::to_string(good_demoted) + " phases");
  Outcome out;
  out.pass = problems.empty();
  out.detail = "p=0.1 demoted in " + std::to_string(bad_demoted) + "/100 phases (by use " +
               std::to_string(worst_uses) + " at worst), p=0.95 demoted in " +
               std::to_string(good_demoted) + "/100, posterior spot checks " +
               (problems.empty() || problems[0].starts_with("p=") ? "ok" : "off");
  for (const auto& p : problems)
    out.detail += "; " + p;
  return out;
}

// ---------------------------------------------------------------- 7

Outcome throughput() {
  Generator gen(GenConfig{}, nullptr);
  Rng rng(7);
  const auto budget = std::chrono::seconds(3);

  std::uint64_t generated = 0;
  auto start = Clock::now();
  while (Clock::now() - start < budget) {
    const auto ctx = gen.generate_context(rng);
    generated += ctx.statements.size();
    for (int q = 0; q < 50; ++q)
      generated += !gen.generate_query(ctx.schema, rng).text.empty();
  }
  const double gen_rate = static_cast<double>(generated) / seconds_since(start);

  auto conn = connect("embedded::memory:");
  std::uint64_t executed = 0;
  start = Clock::now();
  while (Clock::now() - start < budget) {
    conn->reset_database();
    const auto ctx = gen.generate_context(rng);
    for (const auto& s : ctx.statements) {
      conn->execute(s.text);
      ++executed;
    }
    for (int q = 0; q < 50; ++q) {
      conn->execute(gen.generate_query(ctx.schema, rng).text);
      ++executed;
    }
  }
  const double exec_rate = static_cast<double>(executed) / seconds_since(start);
  return {gen_rate >= 1000 && exec_rate >= 300,
          "generator " + fmt(gen_rate, 0) + " statements/s (need 1000), generator+engine " +
              fmt(exec_rate, 0) + " statements/s (need 300), single thread"};
}

// ---------------------------------------------------------------- 8

bool one_minimal(const BugReport& rep, Connector& conn) {
  const auto& s = rep.verdict.statements;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto fewer = s;
    fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
    if (reproduces(rep.verdict, fewer, conn))
      return false;
  }
  return true;
}

Outcome reducer() {
  const auto start = Clock::now();
  std::vector<std::string> problems;

  // Planted case: the fault needs only the table, the NULL row and the query.
  auto conn = connect("mock:null-drop");
  std::vector<std::string> script = {"CREATE TABLE t0 (c0 INT)", "CREATE TABLE t1 (c0 VARCHAR)",
                                     "CREATE INDEX i0 ON t0 (c0)"};
  for (int i = 0; i < 20; ++i)
    script.push_back(i == 13 ? "INSERT INTO t0 (c0) VALUES (NULL)"
                             : "INSERT INTO t0 (c0) VALUES (" + std::to_string(i * 7) + ")");
  for (std::size_t i = 0; i < script.size(); ++i)
    conn->execute(script[i]);
  Verdict planted = tlp_check({"t0"}, "((t0.c0 + 1) > 3)", *conn);
  script.push_back(closing_query(planted));
  std::size_t planted_size = 0;
  if (planted.kind != VerdictKind::LogicBug) {
    problems.push_back("planted case not detected");
  } else {
    auto rr = reduce_testcase(script, [&](const auto& s) { return reproduces(planted, s, *conn); });
    planted_size = rr.statements.size();
    if (script.size() != 24 || planted_size != 3)
      problems.push_back("planted case reduced " + std::to_string(script.size()) + " -> " +
                         std::to_string(planted_size));
  }

  // Reports from campaigns on every fault of the catalog.
  std::size_t reports = 0, flaky = 0;
  for (MockFault fault : all_mock_faults()) {
    const auto dir = scratch("reports-" + std::string(to_string(fault)));
    {
      FragmentStore store;
      store.attach_file(dir / "fragments.jsonl");
      seed_trigger_fragments(store);
      store.flush();
    }
    const std::string target = "mock:" + std::string(to_string(fault));
    auto run = cli({"fuzz", "--target", target, "--no-learn", "--num-statements", "20000",
                    "--timeout-ms", "200", "--seed", "8", "--out-dir", dir.string()});
    if (run.code != kExitFindings) {
      problems.push_back(target + " produced no report");
      continue;
    }
    if (fs::exists(dir / "reports" / "flaky"))
      for (const auto& e : fs::directory_iterator(dir / "reports" / "flaky")) {
        ++flaky;
        problems.push_back("unreproducible report " + e.path().filename().string());
      }
    auto replay_conn = connect(target, 200);
    for (const auto& e : fs::directory_iterator(dir / "reports")) {
      if (!e.is_regular_file())
        continue;
      ++reports;
      auto r = cli({"replay", e.path().string(), "--timeout-ms", "200"});
      if (r.code != kExitOk) {
        problems.push_back(e.path().filename().string() + " (" + target + ") does not replay");
        continue;
      }
      if (!one_minimal(parse_report(slurp(e.path())), *replay_conn))
        problems.push_back(e.path().filename().string() + " (" + target + ") not 1-minimal");
    }
  }
  Outcome out;
  out.pass = problems.empty();
  out.detail = "planted 24 -> " + std::to_string(planted_size) + " statements; " +
               std::to_string(reports) + " campaign reports replayed and checked for " +
               "1-minimality, " + std::to_string(flaky) + " unreproducible, " +
               fmt(seconds_since(start)) + " s";
  for (std::size_t i = 0; i < problems.size() && i < 5; ++i)
    out.detail += "; " + problems[i];
  return out;
}

// ---------------------------------------------------------------- 9

Outcome determinism() {
  std::vector<std::string> transcripts;
  for (const char* name : {"det-a", "det-b"}) {
    const auto dir = scratch(name);
    auto r = cli({"fuzz", "--learn", "--backend", "replay:" + (kFixtures / "table3").string(),
                  "--num-statements", "20000", "--seed", "9", "--out-dir", dir.string()});
    if (r.code != kExitOk)
      return {false, "run exited " + std::to_string(r.code) + ": " + r.err};
    transcripts.push_back(slurp(dir / "statements.sql"));
  }
  const bool same = transcripts[0] == transcripts[1];
  return {same && !transcripts[0].empty(),
          std::string(same ? "identical" : "different") + " transcripts (" +
              std::to_string(transcripts[0].size()) + " bytes) from two seeded runs with " +
              "replay learning"};
}

// ---------------------------------------------------------------- 10

Outcome offline_purity() {
  const auto dir = scratch("offline");
  const std::string replay = "replay:" + (kFixtures / "table3").string();
  auto run = [&](const std::string& name, const std::string& args, const std::string& extra_env) {
    const fs::path log = dir / (name + ".log");
    const std::string cmd = "env " + extra_env + " NETDENY_LOG=" + log.string() +
                            " LD_PRELOAD=" + kNetDeny.string() + " " + kBinary.string() + " " +
                            args + " --out-dir " + (dir / name).string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const std::string attempts = fs::exists(log) ? slurp(log) : "";
    return std::make_pair(status, attempts);
  };
  std::vector<std::string> problems;
  const std::vector<std::pair<std::string, std::string>> offline = {
      {"no-learn", "fuzz --no-learn --num-statements 5000"},
      {"replay-fuzz", "fuzz --learn --backend " + replay + " --num-statements 5000"},
      {"replay-learn", "learn --backend " + replay},
  };
  for (const auto& [name, args] : offline) {
    auto [status, attempts] = run(name, args, "");
    if (status != 0)
      problems.push_back(name + " exited with status " + std::to_string(status));
    if (!attempts.empty())
      problems.push_back(name + " attempted network access");
  }
  // Control: a live backend must trip the harness.
  auto [status, attempts] =
      run("live-control", "fuzz --learn --backend live --num-statements 200",
          "LLM_ENDPOINT=http://127.0.0.1:9/v1/chat/completions LLM_MODEL=m");
  (void)status;
  if (attempts.empty())
    problems.push_back("control run with a live backend was not intercepted");
  Outcome out;
  out.pass = problems.empty();
  out.detail = "no-learn and replay runs made 0 network attempts under the denying shim; "
               "live control intercepted";
  if (!problems.empty()) {
    out.detail = "";
    for (const auto& p : problems)
      out.detail += (out.detail.empty() ? "" : "; ") + p;
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle soundness", oracle_soundness},
      {"oracle completeness", oracle_completeness},
      {"small-instance oracle equivalence", small_instance_equivalence},
      {"learning loop end-to-end", learning_loop},
      {"validation effect", validation_effect},
      {"run-time pruning", runtime_pruning},
      {"throughput", throughput},
      {"reducer", reducer},
      {"determinism", determinism},
      {"offline purity", offline_purity},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i)
    selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1))
      continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " ("
              << criteria[i].first << "): " << o.detail << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() /
                 ("sketchfuzz-acceptance-" + std::to_string(::getpid())));
  return failures == 0 ? 0 : 1;
}
