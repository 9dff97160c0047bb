#include "sketchfuzz/campaign/campaign.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/sketcher.hpp"

namespace sketchfuzz {

namespace fs = std::filesystem;

void CampaignConfig::check() const {
  if (max_queries < 1)
    throw Error("max_queries must be at least 1");
  if (queries_per_state < 1)
    throw Error("queries_per_state must be at least 1");
  if (boost_factor < 1)
    throw Error("boost factor must be >= 1");
  if (threads < 1)
    throw Error("threads must be at least 1");
  if (tlp_probability < 0 || tlp_probability > 1)
    throw Error("tlp probability must lie in [0, 1]");
  gen.check();
  validator.check();
}

std::size_t FeaturePool::size() const {
  std::size_t n = 0;
  for (const auto& [level, fs] : by_level)
    n += fs.size();
  return n;
}

const std::vector<std::string>& builtin_feature_names(FeatureLevel level) {
  static const std::vector<std::string> statement = {"CREATE TABLE", "INSERT", "SELECT",
                                                     "CREATE VIEW"};
  static const std::vector<std::string> clause = {"WHERE"};
  static const std::vector<std::string> expression = {
      "=", "<", ">", "<=", ">=", "<>", "AND", "OR", "NOT", "+", "-", "*", "IS NULL",
      "IS NOT NULL"};
  static const std::vector<std::string> datatype = {"INT", "VARCHAR", "BOOLEAN"};
  switch (level) {
  case FeatureLevel::Statement: return statement;
  case FeatureLevel::Clause: return clause;
  case FeatureLevel::Expression: return expression;
  case FeatureLevel::DataType: return datatype;
  }
  return statement;
}

namespace {

std::string level_phrase(FeatureLevel level) {
  switch (level) {
  case FeatureLevel::Statement: return "statement-level features (e.g., CREATE TABLE)";
  case FeatureLevel::Clause: return "clause-level features (e.g., PRIMARY KEY)";
  case FeatureLevel::Expression: return "expression-level features, operators and functions (e.g., ABS)";
  case FeatureLevel::DataType: return "data-type features (e.g., INT)";
  }
  return "features";
}

// "- foo", "1. foo", "* `foo`" -> "foo".
std::string clean_feature_line(std::string line) {
  line = text::trim(line);
  std::size_t i = 0;
  while (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '+'))
    ++i;
  std::size_t j = i;
  while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j])))
    ++j;
  if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')'))
    i = j + 1;
  line = text::trim(line.substr(i));
  while (!line.empty() && (line.front() == '`' || line.front() == '"'))
    line.erase(line.begin());
  while (!line.empty() && (line.back() == '`' || line.back() == '"' || line.back() == ',' ||
                           line.back() == ':'))
    line.pop_back();
  return text::trim(line);
}

void ensure_alive(Connector& c) {
  if (c.probe_alive() != Liveness::Alive)
    c.restart();
}

// One use per statement, however often the fragment occurs in it.
void note_uses(std::vector<std::pair<FragmentId, bool>>& uses, std::vector<FragmentId> ids,
               bool ok) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (auto id : ids)
    uses.emplace_back(id, ok);
}

bool is_bug(VerdictKind k) {
  return k == VerdictKind::LogicBug || k == VerdictKind::Crash || k == VerdictKind::Hang;
}

// Validation ran into an engine failure other than a plain SQL error.
std::optional<Verdict> validation_failure(const ValidationResult& r, Connector& c) {
  if (r.status != ExecStatus::ConnectionLost && r.status != ExecStatus::Timeout)
    return std::nullopt;
  ExecOutcome o;
  o.status = r.status;
  o.message = r.error_message;
  const VerdictKind kind = classify_failure(o, c.probe_alive());
  ensure_alive(c);
  if (!is_bug(kind))
    return std::nullopt;
  Verdict v;
  v.oracle = OracleKind::Execution;
  v.kind = kind;
  v.statements = r.statements;
  v.details = r.error_message.value_or("");
  return v;
}

std::size_t hole_index_for(const Sketch& s, HoleKind kind) {
  for (const auto& h : s.holes)
    if (h.kind == kind)
      return h.index;
  throw Error("sketch has no hole of kind " + std::string(to_string(kind)));
}

std::vector<HoleAssignment> single_assignment(const Sketch& s, std::size_t hole,
                                              Fragment f) {
  std::vector<HoleAssignment> out;
  for (const auto& h : s.holes)
    out.push_back({h.index, std::nullopt});
  for (auto& a : out)
    if (a.hole == hole)
      a.fragment = std::move(f);
  return out;
}

void store_result(FragmentStore& store, Fragment f, LearnResult& res) {
  if (store.add(f) != AddResult::Added)
    return;
  if (f.validity == Validity::Valid)
    ++res.new_valid;
  else if (f.validity == Validity::Invalid)
    ++res.new_invalid;
}

// Validates each candidate on its own, the other holes left empty.
void learn_independent(const Sketch& s, std::vector<Fragment> cands, Connector& c,
                       FragmentStore& store, Rng& rng, const LearnOptions& opts,
                       LearnResult& res) {
  std::size_t trials = 0;
  for (auto& f : cands) {
    if (!opts.validate || trials >= opts.max_trials) {
      if (!opts.validate)
        store_result(store, std::move(f), res);
      continue;
    }
    ++trials;
    auto r = validate_candidate(s, single_assignment(s, hole_index_for(s, f.hole), f), c, rng);
    if (auto v = validation_failure(r, c))
      res.failures.push_back(std::move(*v));
    for (auto& a : r.assignment)
      if (a.fragment)
        store_result(store, std::move(*a.fragment), res);
  }
}

struct Tracked {
  Fragment f;
  bool passed = false;
};

void learn_datatype(const Feature& feature, const Sketch& s, std::vector<Fragment> cands,
                    Synthesizer& synth, Connector& c, FragmentStore& store, Rng& rng,
                    const LearnOptions& opts, LearnResult& res) {
  std::vector<Tracked> types, lits;
  for (auto& f : cands)
    (f.hole == HoleKind::DataTypeName ? types : lits).push_back({std::move(f)});
  if (!opts.validate) {
    for (auto* group : {&types, &lits})
      for (auto& t : *group)
        store_result(store, std::move(t.f), res);
    return;
  }

  const std::size_t type_hole = hole_index_for(s, HoleKind::DataTypeName);
  const std::size_t lit_hole = hole_index_for(s, HoleKind::TypedLiteral);
  std::size_t trials = 0;
  // Runs one (type, literal) pair; the copies start as Candidate so the
  // final validity is decided here, stats accumulate across pairs.
  auto attempt = [&](Tracked& type, Tracked* lit) {
    ++trials;
    Fragment tf = type.f;
    tf.validity = Validity::Candidate;
    Fragment lf;
    if (lit) {
      lf = lit->f;
      lf.validity = Validity::Candidate;
    } else {
      lf.hole = HoleKind::TypedLiteral;
      lf.text = "NULL";
    }
    std::vector<HoleAssignment> a = {{type_hole, tf}, {lit_hole, lf}};
    auto r = validate_candidate(s, std::move(a), c, rng);
    if (auto v = validation_failure(r, c))
      res.failures.push_back(std::move(*v));
    const bool ok = r.outcome == ValidationOutcome::Valid;
    type.f.stats = r.assignment[0].fragment->stats;
    type.passed |= ok;
    if (lit) {
      lit->f.stats = r.assignment[1].fragment->stats;
      lit->passed |= ok;
    }
  };
  for (auto& type : types) {
    for (auto& lit : lits) {
      if (trials >= opts.max_trials)
        break;
      attempt(type, &lit);
    }
    if (!type.passed && trials < opts.max_trials)
      attempt(type, nullptr);
  }

  std::optional<std::string> learned_type;
  std::optional<std::string> learned_literal;
  for (auto* group : {&types, &lits}) {
    for (auto& t : *group) {
      if (t.f.stats.total() == 0)
        continue;  // never tried
      t.f.validity = t.passed ? Validity::Valid : Validity::Invalid;
      if (t.passed && group == &types && !learned_type)
        learned_type = t.f.text;
      if (t.passed && group == &lits && !learned_literal)
        learned_literal = t.f.text;
      store_result(store, std::move(t.f), res);
    }
  }
  if (!learned_type)
    return;

  // Expressions over the new type, learned in the same phase.
  const std::string type_text = expand_fragment(*learned_type, s.schema, rng);
  const std::string literal =
      learned_literal ? expand_fragment(*learned_literal, s.schema, rng) : "NULL";
  Sketch typed = make_typed_expression_sketch(feature, type_text, literal, rng);
  auto exprs = synth.synthesize_fragments(feature, typed, store, rng);
  res.candidates += exprs.size();
  learn_independent(typed, std::move(exprs), c, store, rng, opts, res);
}

} // namespace

FeaturePool initialize_features(std::string_view dbms, CompletionBackend& backend,
                                FragmentStore& store) {
  for (FeatureLevel level : kAllLevels) {
    std::vector<std::string> names;
    if (backend.mode() != BackendMode::Null) {
      CompletionRequest req;
      req.task = TaskKind::ListFeatures;
      req.slug = "features-" + slugify(to_string(level));
      req.prompt = "You are an expert in SQL dialects. List the names of " + level_phrase(level) +
                   " supported by " + std::string(dbms) +
                   ". Answer with one name per line and nothing else.";
      std::optional<std::string> response;
      try {
        response = backend.complete(req);
      } catch (const BackendUnavailable&) {
      }
      if (response)
        for (const auto& line : text::split_lines(*response)) {
          std::string name = clean_feature_line(line);
          if (!name.empty() && name.size() <= 64)
            names.push_back(std::move(name));
        }
    }
    if (names.empty())
      names = builtin_feature_names(level);
    for (const auto& n : names)
      store.upsert_feature(level, n);
  }
  FeaturePool pool;
  for (auto& f : store.features())
    pool.by_level[f.level].push_back(std::move(f));
  return pool;
}

LearnResult learn_feature(const Feature& feature, Synthesizer& synth, Connector& connector,
                          FragmentStore& store, Rng& rng, const LearnOptions& opts) {
  store.set_status(feature.id, FeatureStatus::Learning);
  LearnResult res;
  try {
    SketchRequest req;
    req.feature = feature;
    req.level = feature.level;
    Sketch s = make_sketch(req, rng);
    auto cands = synth.synthesize_fragments(feature, s, store, rng);
    res.candidates = cands.size();
    if (feature.level == FeatureLevel::DataType)
      learn_datatype(feature, s, std::move(cands), synth, connector, store, rng, opts, res);
    else
      learn_independent(s, std::move(cands), connector, store, rng, opts, res);
  } catch (const BackendUnavailable&) {
    store.set_status(feature.id, FeatureStatus::Unlearned);
    throw;
  }
  store.set_status(feature.id, FeatureStatus::Learned);
  return res;
}

PhaseStats& PhaseStats::operator+=(const PhaseStats& o) {
  states += o.states;
  statements += o.statements;
  ok_statements += o.ok_statements;
  oracle_checks += o.oracle_checks;
  expected_errors += o.expected_errors;
  for (const auto& [k, n] : o.verdicts)
    verdicts[k] += n;
  demoted.insert(demoted.end(), o.demoted.begin(), o.demoted.end());
  return *this;
}

PhaseStats testing_phase(std::optional<FeatureId> boosted, const CampaignConfig& cfg,
                         std::uint64_t max_queries, Connector& connector,
                         FragmentStore& store, Rng& rng, const PhaseEnv& env) {
  PhaseStats st;
  if (max_queries == 0)
    return st;
  GenConfig g = cfg.gen;
  g.boosted_feature = boosted;
  g.boost_factor = boosted ? cfg.boost_factor : 1.0;
  g.use_candidates = !cfg.validate_fragments;

  auto emit = [&](const std::string& s) { return !env.on_statement || env.on_statement(s); };
  std::uint64_t done = 0;
  std::uint64_t barren_states = 0;
  bool stop = false;
  while (done < max_queries && !stop) {
    Generator gen(g, store.snapshot());
    ensure_alive(connector);
    connector.reset_database();
    ++st.states;
    const auto ctx = gen.generate_context(rng);
    std::vector<std::string> executed;
    std::vector<std::pair<FragmentId, bool>> uses;
    bool broken = false;

    for (const auto& stmt : ctx.statements) {
      if (!emit(stmt.text)) {
        stop = true;
        break;
      }
      ExecOutcome r = connector.execute(stmt.text);
      ++st.statements;
      const bool ok = r.ok();
      note_uses(uses, stmt.fragments, ok);
      if (ok) {
        ++st.ok_statements;
        executed.push_back(stmt.text);
        continue;
      }
      if (r.status == ExecStatus::SqlError)
        continue;
      const VerdictKind kind = classify_failure(r, connector.probe_alive());
      if (!is_bug(kind))
        continue;
      Verdict v;
      v.oracle = OracleKind::Execution;
      v.kind = kind;
      v.statements = executed;
      v.statements.push_back(stmt.text);
      v.last_statement = stmt.text;
      v.details = r.message.value_or(std::string(to_string(r.status)));
      ++st.verdicts[kind];
      if (env.on_verdict && !env.on_verdict(v, connector))
        stop = true;
      ensure_alive(connector);
      broken = true;
      break;
    }

    if (!broken && !stop) {
      barren_states = 0;
      const std::uint64_t quota = std::min(cfg.queries_per_state, max_queries - done);
      for (std::uint64_t q = 0; q < quota; ++q) {
        auto gq = gen.generate_query(ctx.schema, rng);
        if (!emit(gq.text)) {
          stop = true;
          break;
        }
        const OracleKind oracle =
            rng.chance(cfg.tlp_probability) ? OracleKind::TLP : OracleKind::NoREC;
        Verdict v = run_oracle(oracle, gq.from, gq.predicate, connector);
        ++done;
        ++st.oracle_checks;
        ++st.statements;
        ++st.verdicts[v.kind];
        const bool ok = v.kind != VerdictKind::ExpectedError;
        ok ? ++st.ok_statements : ++st.expected_errors;
        note_uses(uses, gq.fragments, ok);
        if (!is_bug(v.kind))
          continue;
        v.statements = executed;
        v.statements.push_back(closing_query(v));
        if (env.on_verdict && !env.on_verdict(v, connector))
          stop = true;
        // The state is gone after reduction or a restart.
        ensure_alive(connector);
        break;
      }
    } else if (broken && ++barren_states >= 1000) {
      // Every state kills the engine before a query can run.
      stop = true;
    }
    store.record_uses(uses);
  }
  if (cfg.validate_fragments)
    st.demoted = runtime_prune(store, cfg.validator.prune_threshold, cfg.validator.min_trials);
  return st;
}

double CampaignReport::validity_rate() const {
  return totals.statements ? static_cast<double>(totals.ok_statements) /
                                 static_cast<double>(totals.statements)
                           : 0.0;
}

std::string CampaignReport::render() const {
  std::ostringstream out;
  out << "statements: " << totals.statements << "\n";
  out << "valid_statements: " << totals.ok_statements << "\n";
  out << "validity_rate: " << std::fixed << std::setprecision(4) << validity_rate() << "\n";
  out << "oracle_checks: " << totals.oracle_checks << "\n";
  out << "database_states: " << totals.states << "\n";
  out << "phases: " << phases << "\n";
  out << "features_learned: " << features_learned << "\n";
  out << "fragments_learned: " << fragments_learned << "\n";
  out << "fragments_demoted: " << fragments_demoted << "\n";
  for (VerdictKind k : {VerdictKind::LogicBug, VerdictKind::Crash, VerdictKind::Hang}) {
    auto it = totals.verdicts.find(k);
    out << "verdicts_" << text::to_lower(to_string(k)) << ": "
        << (it == totals.verdicts.end() ? 0 : it->second) << "\n";
  }
  out << "bugs_found: " << bugs_found << "\n";
  out << "duplicate_reports: " << duplicates << "\n";
  out << "backend_calls: " << backend_calls << "\n";
  out << "backend_failures: " << backend_failures << "\n";
  out << "elapsed_ms: " << elapsed.count() << "\n";
  return out.str();
}

namespace {

struct Shared {
  const CampaignConfig& cfg;
  CompletionBackend& backend;
  FragmentStore& store;
  Synthesizer synth;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> statements{0};
  std::mutex learn_mutex;
  std::mutex mutex;  // guards everything below
  std::set<std::string> seen;
  std::uint64_t report_counter = 0;
  CampaignReport report;
  std::mutex log_mutex;

  Shared(const CampaignConfig& c, CompletionBackend& b, FragmentStore& s)
      : cfg(c), backend(b), store(s), synth(b, {c.dbms, c.docs_dir, ""}) {}

  void log(const std::string& msg) {
    if (!cfg.log)
      return;
    std::lock_guard lock(log_mutex);
    cfg.log(msg);
  }
};

void write_report(Shared& sh, const BugReport& rep, bool flaky, std::size_t worker) {
  std::uint64_t n;
  {
    std::lock_guard lock(sh.mutex);
    n = ++sh.report_counter;
    ++sh.report.bugs_found;
  }
  sh.log("worker " + std::to_string(worker) + ": " + std::string(to_string(rep.verdict.kind)) +
         " (" + std::string(to_string(rep.verdict.oracle)) + "), " +
         std::to_string(rep.verdict.statements.size()) + " statements" +
         (flaky ? ", not reproducible" : ""));
  if (sh.cfg.out_dir.empty())
    return;
  fs::path dir = sh.cfg.out_dir / "reports";
  if (flaky)
    dir /= "flaky";
  fs::create_directories(dir);
  char name[64];
  std::snprintf(name, sizeof name, "%04llu-%s.sql", static_cast<unsigned long long>(n),
                text::to_lower(to_string(rep.verdict.kind)).c_str());
  std::ofstream(dir / name) << render_report(rep);
  std::lock_guard lock(sh.mutex);
  sh.report.report_files.push_back(dir / name);
}

// Dedups, reduces and writes a verdict. Returns false when the campaign
// should stop.
bool handle_verdict(Shared& sh, const Verdict& v, Connector& c, std::size_t worker) {
  {
    std::lock_guard lock(sh.mutex);
    if (!sh.seen.insert(dedup_key(v)).second) {
      ++sh.report.duplicates;
      return !sh.stop;
    }
  }
  BugReport rep{v, c.engine_version(), c.config().target, sh.cfg.seed + worker};
  bool flaky = false;
  if (sh.cfg.reduce) {
    auto rr = reduce_testcase(v.statements,
                              [&](const std::vector<std::string>& s) { return reproduces(v, s, c); });
    rep.verdict.statements = std::move(rr.statements);
    flaky = rr.flaky;
  }
  ensure_alive(c);
  write_report(sh, rep, flaky, worker);
  if (sh.cfg.stop_on_bug)
    sh.stop = true;
  return !sh.stop;
}

std::optional<Feature> pick_unlearned(Shared& sh, Rng& rng) {
  auto unlearned = [&] {
    std::vector<Feature> out;
    for (auto& f : sh.store.features())
      if (f.status == FeatureStatus::Unlearned)
        out.push_back(std::move(f));
    return out;
  };
  auto pool = unlearned();
  if (pool.empty()) {
    if (sh.cfg.single_pass)
      return std::nullopt;
    initialize_features(sh.cfg.dbms, sh.backend, sh.store);
    pool = unlearned();
    if (pool.empty()) {
      sh.store.reset_statuses();
      pool = unlearned();
    }
  }
  if (pool.empty())
    return std::nullopt;
  return pool[rng.below(pool.size())];
}

void worker_main(Shared& sh, std::size_t index) {
  const CampaignConfig& cfg = sh.cfg;
  ConnectorConfig cc = cfg.connector;
  // Workers must not share an on-disk database.
  if (index > 0 && cc.target.starts_with("embedded:") && cc.target != "embedded::memory:")
    cc.target += "." + std::to_string(index);
  auto conn = make_connector(cc);
  Rng rng(cfg.seed + index);
  std::ofstream transcript;
  if (!cfg.out_dir.empty())
    transcript.open(cfg.out_dir / (index == 0 ? std::string("statements.sql")
                                              : "statements-" + std::to_string(index) + ".sql"));

  PhaseEnv env;
  env.on_statement = [&](const std::string& s) {
    if (sh.stop)
      return false;
    if (cfg.max_statements && sh.statements.fetch_add(1) >= cfg.max_statements) {
      sh.stop = true;
      return false;
    }
    if (transcript.is_open())
      transcript << s << ";\n";
    return true;
  };
  env.on_verdict = [&](const Verdict& v, Connector& c) { return handle_verdict(sh, v, c, index); };

  CampaignReport local;
  const std::uint64_t phase_queries = cfg.phase_queries_override.value_or(cfg.max_queries);
  while (!sh.stop) {
    std::optional<FeatureId> boosted;
    if (cfg.learning_enabled) {
      std::unique_lock lock(sh.learn_mutex, std::try_to_lock);
      if (lock.owns_lock()) {
        auto f = pick_unlearned(sh, rng);
        if (!f) {
          sh.stop = true;
          break;
        }
        try {
          auto lr = learn_feature(*f, sh.synth, *conn, sh.store, rng,
                                  {.validate = cfg.validate_fragments});
          ++local.features_learned;
          local.fragments_learned += lr.new_valid;
          sh.log("learned " + std::string(to_string(f->level)) + " " + f->name + ": " +
                 std::to_string(lr.candidates) + " candidates, " + std::to_string(lr.new_valid) +
                 " valid");
          for (const auto& v : lr.failures)
            if (!handle_verdict(sh, v, *conn, index))
              break;
          boosted = f->id;
        } catch (const BackendUnavailable& e) {
          ++local.backend_failures;
          sh.log("learning " + f->name + " failed: " + e.what());
          // A learning-only run cannot make progress without the backend.
          if (cfg.single_pass) {
            sh.stop = true;
            break;
          }
        }
      }
    }
    if (sh.stop)
      break;
    PhaseStats ph = testing_phase(boosted, cfg, phase_queries, *conn, sh.store, rng, env);
    local.fragments_demoted += ph.demoted.size();
    local.totals += ph;
    ++local.phases;
  }
  transcript.flush();

  std::lock_guard lock(sh.mutex);
  sh.report.totals += local.totals;
  sh.report.phases += local.phases;
  sh.report.features_learned += local.features_learned;
  sh.report.fragments_learned += local.fragments_learned;
  sh.report.fragments_demoted += local.fragments_demoted;
  sh.report.backend_failures += local.backend_failures;
}

} // namespace

CampaignReport run_campaign(const CampaignConfig& cfg, CompletionBackend& backend,
                            FragmentStore& store) {
  cfg.check();
  const auto start = std::chrono::steady_clock::now();
  if (!cfg.out_dir.empty())
    fs::create_directories(cfg.out_dir);
  Shared sh(cfg, backend, store);
  const std::uint64_t calls_before = backend.calls();
  if (cfg.learning_enabled)
    initialize_features(cfg.dbms, backend, store);

  std::atomic<std::size_t> running{cfg.threads};
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < cfg.threads; ++i)
    workers.emplace_back([&sh, &running, i] {
      try {
        worker_main(sh, i);
      } catch (const std::exception& e) {
        sh.log("worker " + std::to_string(i) + " stopped: " + e.what());
      }
      --running;
    });

  // Supervisor: stop conditions and periodic flushes.
  auto last_flush = std::chrono::steady_clock::now();
  while (running > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const auto now = std::chrono::steady_clock::now();
    if (cfg.wall_clock.count() > 0 && now - start >= cfg.wall_clock)
      sh.stop = true;
    if (cfg.interrupt && cfg.interrupt->load())
      sh.stop = true;
    if (now - last_flush >= std::chrono::seconds(5)) {
      store.flush();
      last_flush = now;
    }
  }
  for (auto& t : workers)
    t.join();
  store.flush();

  CampaignReport report = std::move(sh.report);
  report.backend_calls = backend.calls() - calls_before;
  report.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  if (!cfg.out_dir.empty())
    std::ofstream(cfg.out_dir / "summary.txt") << report.render();
  return report;
}

} // namespace sketchfuzz
