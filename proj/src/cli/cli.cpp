#include "sketchfuzz/cli/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

namespace fs = std::filesystem;

const std::vector<OptionSpec>& option_specs() {
  static const std::vector<OptionSpec> specs = {
      {"target", "embedded::memory:", "embedded:<path>, embedded::memory: or mock:<fault,...>"},
      {"out-dir", "sketchfuzz-out", "directory for reports, transcripts and the summary"},
      {"fragments", "fragments.jsonl", "fragment store file"},
      {"docs", "", "documentation corpus directory"},
      {"backend", "null", "null, replay:<dir> or live"},
      {"dbms", "SQLite", "dialect name used in prompts"},
      {"learn", "auto", "interleave learning phases (default: on unless --backend null)", true},
      {"validate", "true", "validate synthesized fragments before use", true},
      {"reduce", "true", "minimize bug scripts", true},
      {"stop-on-bug", "false", "stop at the first new bug", true},
      {"verbose", "false", "log learning phases and bugs to stderr", true},
      {"threads", "1", "worker threads"},
      {"seed", "0", "random seed"},
      {"duration", "0", "wall-clock limit: seconds, or with ms/s/m/h suffix (0: none)"},
      {"num-statements", "0", "statement budget (0: none)"},
      {"max-queries", "1000", "oracle checks per testing phase"},
      {"queries-per-state", "500", "oracle checks per database state"},
      {"boost", "10", "selection weight multiplier for newly learned fragments"},
      {"fragment-probability", "0.3", "chance of using a learned fragment"},
      {"prune-threshold", "0.5", "demote fragments below this support probability"},
      {"min-trials", "20", "uses before a fragment can be demoted"},
      {"timeout-ms", "5000", "statement timeout"},
      {"max-tables", "2", "tables per database state"},
      {"max-views", "1", "views per database state"},
      {"max-inserts", "20", "inserts per database state"},
      {"max-columns", "5", "columns per table"},
      {"llm-transcript", "llm-transcript.jsonl", "log of backend exchanges"},
  };
  return specs;
}

namespace {

const OptionSpec* find_spec(std::string_view name) {
  for (const auto& s : option_specs())
    if (s.name == name)
      return &s;
  return nullptr;
}

template <typename T>
T parse_number(const Settings& s, const std::string& key) {
  const std::string& v = s.at(key);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error("--" + key + ": not a valid number: '" + v + "'");
  return out;
}

bool parse_bool(const Settings& s, const std::string& key) {
  const std::string v = text::to_lower(s.at(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  throw Error("--" + key + ": expected true or false, got '" + s.at(key) + "'");
}

std::chrono::milliseconds parse_duration(const std::string& v) {
  std::size_t split = 0;
  while (split < v.size() && (std::isdigit(static_cast<unsigned char>(v[split])) || v[split] == '.'))
    ++split;
  double amount = 0;
  try {
    amount = std::stod(v.substr(0, split));
  } catch (const std::exception&) {
    throw Error("--duration: cannot parse '" + v + "'");
  }
  const std::string unit = v.substr(split);
  double ms;
  if (unit.empty() || unit == "s")
    ms = amount * 1000;
  else if (unit == "ms")
    ms = amount;
  else if (unit == "m")
    ms = amount * 60'000;
  else if (unit == "h")
    ms = amount * 3'600'000;
  else
    throw Error("--duration: unknown unit '" + unit + "'");
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

fs::path under(const fs::path& dir, const fs::path& p) {
  return p.is_absolute() ? p : dir / p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in)
    throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Options registered on one subcommand; values stay empty unless given.
struct FlagBinding {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  std::string config_file;
  CLI::Option* config = nullptr;

  void attach(CLI::App& app, const std::vector<std::string>& only = {}) {
    config = app.add_option("--config", config_file, "key=value configuration file");
    for (const auto& spec : option_specs()) {
      if (!only.empty() && std::find(only.begin(), only.end(), spec.name) == only.end())
        continue;
      if (spec.is_flag) {
        flags[spec.name] = false;
        options[spec.name] =
            app.add_flag("--" + spec.name + ",!--no-" + spec.name, flags[spec.name], spec.help);
      } else {
        options[spec.name] = app.add_option("--" + spec.name, values[spec.name], spec.help);
      }
    }
  }

  Settings given() const {
    Settings out;
    for (const auto& [name, opt] : options) {
      if (opt->count() == 0)
        continue;
      out[name] = find_spec(name)->is_flag ? (flags.at(name) ? "true" : "false")
                                           : values.at(name);
    }
    return out;
  }
};

Settings merged(const FlagBinding& b, const std::vector<std::string>& env) {
  Settings s = default_settings();
  if (b.config->count())
    merge_settings(s, parse_config_file(read_file(b.config_file)), b.config_file);
  merge_settings(s, settings_from_environment(env), "environment");
  merge_settings(s, b.given(), "command line");
  return s;
}

std::function<void(std::string_view)> logger(std::ostream& err, bool verbose) {
  if (!verbose)
    return {};
  return [&err](std::string_view msg) { err << msg << "\n"; };
}

// Opens the target once up front so a bad URL is a configuration error.
void check_target(const ConnectorConfig& cfg) {
  auto c = make_connector(cfg);
  if (c->probe_alive() != Liveness::Alive)
    throw Error("target " + cfg.target + " is not responding");
  if (!c->execute("SELECT 1").ok())
    throw Error("target " + cfg.target + " cannot run SELECT 1");
}

struct Session {
  RunOptions opts;
  std::unique_ptr<CompletionBackend> backend;
  FragmentStore store;
};

void open_session(Session& s) {
  check_target(s.opts.campaign.connector);
  s.backend = make_backend(s.opts.backend);
  fs::create_directories(s.opts.campaign.out_dir);
  if (s.backend->mode() != BackendMode::Null)
    s.backend->set_transcript(std::make_shared<Transcript>(s.opts.llm_transcript));
  if (!s.opts.fragments.parent_path().empty())
    fs::create_directories(s.opts.fragments.parent_path());
  s.store.attach_file(s.opts.fragments);
}

int cmd_fuzz(Session& s, std::ostream& out) {
  CampaignReport rep = run_campaign(s.opts.campaign, *s.backend, s.store);
  out << rep.render();
  for (const auto& f : rep.report_files)
    out << "report: " << f.string() << "\n";
  return rep.bugs_found > 0 ? kExitFindings : kExitOk;
}

int cmd_learn(Session& s, std::ostream& out, std::ostream& err) {
  if (s.backend->mode() == BackendMode::Null) {
    err << "error: learning needs a replay or live backend\n";
    return kExitConfig;
  }
  CampaignConfig& cfg = s.opts.campaign;
  cfg.learning_enabled = true;
  cfg.single_pass = true;
  cfg.phase_queries_override = std::min<std::uint64_t>(cfg.max_queries, 10);
  CampaignReport rep = run_campaign(cfg, *s.backend, s.store);
  out << rep.render();
  out << "fragments: " << s.store.size() << " in " << s.opts.fragments.string() << "\n";
  if (rep.backend_failures > 0) {
    err << "error: backend unavailable\n";
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_replay(const fs::path& file, const Settings& settings, bool target_given,
               std::ostream& out, std::ostream& err) {
  BugReport rep;
  try {
    rep = parse_report(read_file(file));
  } catch (const Error& e) {
    err << "error: " << file.string() << ": " << e.what() << "\n";
    return kExitConfig;
  }
  ConnectorConfig cc;
  cc.target = !target_given && !rep.target.empty() ? rep.target : settings.at("target");
  cc.statement_timeout = std::chrono::milliseconds(parse_number<std::int64_t>(settings, "timeout-ms"));
  std::unique_ptr<Connector> conn;
  try {
    conn = make_connector(cc);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const bool hit = reproduces(rep.verdict, rep.verdict.statements, *conn);
  if (hit) {
    out << "reproduced: " << to_string(rep.verdict.kind) << " (" << to_string(rep.verdict.oracle)
        << ") on " << cc.target << "\n";
    return kExitOk;
  }
  out << "not reproduced on " << cc.target << "\n";
  return kExitFindings;
}

} // namespace

Settings default_settings() {
  Settings s;
  for (const auto& spec : option_specs())
    s[spec.name] = spec.default_value;
  return s;
}

Settings parse_config_file(std::string_view input) {
  Settings s;
  int lineno = 0;
  for (const auto& raw : text::split_lines(input)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    line = text::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected key=value");
    s[text::trim(line.substr(0, eq))] = text::trim(line.substr(eq + 1));
  }
  return s;
}

Settings settings_from_environment(const std::vector<std::string>& environ_entries) {
  constexpr std::string_view prefix = "SKETCHFUZZ_";
  Settings s;
  for (const auto& e : environ_entries) {
    if (!e.starts_with(prefix))
      continue;
    const auto eq = e.find('=');
    if (eq == std::string::npos)
      continue;
    std::string key = text::to_lower(e.substr(prefix.size(), eq - prefix.size()));
    std::replace(key.begin(), key.end(), '_', '-');
    s[key] = e.substr(eq + 1);
  }
  return s;
}

void merge_settings(Settings& into, const Settings& from, std::string_view origin) {
  for (const auto& [k, v] : from) {
    if (!find_spec(k))
      throw Error("unknown setting '" + k + "' in " + std::string(origin));
    into[k] = v;
  }
}

RunOptions resolve(const Settings& s, bool learn_default) {
  for (const auto& [k, v] : s)
    if (!find_spec(k))
      throw Error("unknown setting '" + k + "'");
  RunOptions o;
  CampaignConfig& c = o.campaign;
  o.backend = s.at("backend");
  c.out_dir = s.at("out-dir");
  if (c.out_dir.empty())
    throw Error("--out-dir must not be empty");
  o.fragments = under(c.out_dir, s.at("fragments"));
  o.llm_transcript = under(c.out_dir, s.at("llm-transcript"));
  c.docs_dir = s.at("docs");
  c.dbms = s.at("dbms");
  c.learning_enabled = s.at("learn") == "auto" ? learn_default && o.backend != "null"
                                               : parse_bool(s, "learn");
  c.validate_fragments = parse_bool(s, "validate");
  c.reduce = parse_bool(s, "reduce");
  c.stop_on_bug = parse_bool(s, "stop-on-bug");
  o.verbose = parse_bool(s, "verbose");
  c.threads = parse_number<std::size_t>(s, "threads");
  c.seed = parse_number<std::uint64_t>(s, "seed");
  c.wall_clock = parse_duration(s.at("duration"));
  c.max_statements = parse_number<std::uint64_t>(s, "num-statements");
  c.max_queries = parse_number<std::uint64_t>(s, "max-queries");
  c.queries_per_state = parse_number<std::uint64_t>(s, "queries-per-state");
  c.boost_factor = parse_number<double>(s, "boost");
  c.gen.fragment_probability = parse_number<double>(s, "fragment-probability");
  c.gen.max_tables = parse_number<std::size_t>(s, "max-tables");
  c.gen.max_views = parse_number<std::size_t>(s, "max-views");
  c.gen.max_inserts = parse_number<std::size_t>(s, "max-inserts");
  c.gen.max_columns = parse_number<std::size_t>(s, "max-columns");
  c.gen.seed = c.seed;
  c.validator.prune_threshold = parse_number<double>(s, "prune-threshold");
  c.validator.min_trials = parse_number<std::uint64_t>(s, "min-trials");
  const auto timeout = parse_number<std::int64_t>(s, "timeout-ms");
  if (timeout <= 0)
    throw Error("--timeout-ms must be positive");
  c.connector.target = s.at("target");
  c.connector.statement_timeout = std::chrono::milliseconds(timeout);
  c.check();
  return o;
}

int run_cli(const std::vector<std::string>& args, const std::vector<std::string>& environ_entries,
            std::ostream& out, std::ostream& err, const std::atomic<bool>* interrupt) {
  CLI::App app{"Feature-learning fuzzer for SQL database engines"};
  app.name(args.empty() ? "sketchfuzz" : args.front());
  app.require_subcommand(1);

  auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
  FlagBinding fuzz_flags;
  fuzz_flags.attach(*fuzz);
  auto* learn = app.add_subcommand("learn", "learn fragments only and persist them");
  FlagBinding learn_flags;
  learn_flags.attach(*learn);
  auto* replay = app.add_subcommand("replay", "replay a bug report and check it reproduces");
  FlagBinding replay_flags;
  replay_flags.attach(*replay, {"target", "timeout-ms"});
  std::string report_file;
  replay->add_option("report", report_file, "bug report file")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (replay->parsed()) {
      const Settings s = merged(replay_flags, environ_entries);
      const bool target_given = replay_flags.options.at("target")->count() > 0 ||
                                settings_from_environment(environ_entries).count("target");
      return cmd_replay(report_file, s, target_given, out, err);
    }
    const bool is_learn = learn->parsed();
    Session session;
    session.opts = resolve(merged(is_learn ? learn_flags : fuzz_flags, environ_entries), true);
    session.opts.campaign.log = logger(err, session.opts.verbose);
    session.opts.campaign.interrupt = interrupt;
    open_session(session);
    return is_learn ? cmd_learn(session, out, err) : cmd_fuzz(session, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

} // namespace sketchfuzz
