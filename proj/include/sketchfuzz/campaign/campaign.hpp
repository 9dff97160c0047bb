#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sketchfuzz/connector/connector.hpp"
#include "sketchfuzz/core/fragment_store.hpp"
#include "sketchfuzz/gen/generator.hpp"
#include "sketchfuzz/learn/backend.hpp"
#include "sketchfuzz/learn/synthesizer.hpp"
#include "sketchfuzz/learn/validator.hpp"
#include "sketchfuzz/oracle/oracles.hpp"
#include "sketchfuzz/oracle/reducer.hpp"

namespace sketchfuzz {

struct CampaignConfig {
  // Oracle checks per testing phase.
  std::uint64_t max_queries = 1000;
  // Oracle checks against one generated database state.
  std::uint64_t queries_per_state = 500;
  bool learning_enabled = true;
  // Off: synthesized fragments are stored unvalidated and used as-is.
  bool validate_fragments = true;
  double boost_factor = 10.0;
  std::size_t threads = 1;
  // Stop conditions; zero means unbounded. Statements count every
  // generated statement, context and queries alike.
  std::uint64_t max_statements = 0;
  std::chrono::milliseconds wall_clock{0};
  // Learning-only mode: phases run this many oracle checks instead.
  std::optional<std::uint64_t> phase_queries_override;
  // Stop after every feature of the pool has been learned once.
  bool single_pass = false;
  bool stop_on_bug = false;
  bool reduce = true;
  double tlp_probability = 0.5;
  GenConfig gen;
  ValidatorConfig validator;
  std::uint64_t seed = 0;
  std::string dbms = "SQLite";
  ConnectorConfig connector;
  // Reports, transcripts and the summary go here; empty: nothing written.
  std::filesystem::path out_dir;
  std::filesystem::path docs_dir;
  std::function<void(std::string_view)> log;
  // Set from outside (e.g. a signal handler) to end the campaign early.
  const std::atomic<bool>* interrupt = nullptr;

  void check() const;
};

struct FeaturePool {
  std::map<FeatureLevel, std::vector<Feature>> by_level;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

// Names used when the backend offers no feature list.
const std::vector<std::string>& builtin_feature_names(FeatureLevel level);

// One ListFeatures request per level (fixture "features-<level>"). Lines are
// stripped of bullets and numbering; every name is upserted into the store.
// Levels without an answer fall back to the built-in names.
FeaturePool initialize_features(std::string_view dbms, CompletionBackend& backend,
                                FragmentStore& store);

struct LearnOptions {
  bool validate = true;
  // Validation attempts per sketch.
  std::size_t max_trials = kMaxCandidatesPerCall;
};

struct LearnResult {
  std::size_t candidates = 0;
  std::size_t new_valid = 0;
  std::size_t new_invalid = 0;
  // Engine crashes or hangs hit while validating; statements are the sketch
  // script.
  std::vector<Verdict> failures;
};

// Sketch, synthesize, validate and store fragments for one feature. The
// status goes Unlearned -> Learning -> Learned; BackendUnavailable reverts it
// to Unlearned and is rethrown.
LearnResult learn_feature(const Feature& feature, Synthesizer& synth, Connector& connector,
                          FragmentStore& store, Rng& rng, const LearnOptions& opts = {});

struct PhaseStats {
  std::uint64_t states = 0;
  std::uint64_t statements = 0;
  std::uint64_t ok_statements = 0;
  std::uint64_t oracle_checks = 0;
  std::uint64_t expected_errors = 0;
  std::map<VerdictKind, std::uint64_t> verdicts;
  std::vector<FragmentId> demoted;

  PhaseStats& operator+=(const PhaseStats& o);
};

// Receives every LogicBug/Crash/Hang verdict with its reproducing script.
// Returns false to stop the phase.
using VerdictSink = std::function<bool(const Verdict&, Connector&)>;
// Called with every generated statement, in order; returns false to stop.
using StatementHook = std::function<bool(const std::string&)>;

struct PhaseEnv {
  VerdictSink on_verdict;
  StatementHook on_statement;
};

// Runs max_queries oracle checks over fresh database states, boosting
// the fragments of `boosted` when set. Ends early only when a hook says so.
PhaseStats testing_phase(std::optional<FeatureId> boosted, const CampaignConfig& cfg,
                         std::uint64_t max_queries, Connector& connector,
                         FragmentStore& store, Rng& rng, const PhaseEnv& env = {});

struct CampaignReport {
  PhaseStats totals;
  std::uint64_t phases = 0;
  std::uint64_t features_learned = 0;
  std::uint64_t fragments_learned = 0;
  std::uint64_t fragments_demoted = 0;
  std::uint64_t bugs_found = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t backend_failures = 0;
  std::vector<std::filesystem::path> report_files;
  std::chrono::milliseconds elapsed{0};

  double validity_rate() const;
  std::string render() const;
};

// The outer loop: learn a random Unlearned feature (one worker at a time),
// then test with its fragments boosted, until a stop condition holds.
CampaignReport run_campaign(const CampaignConfig& cfg, CompletionBackend& backend,
                            FragmentStore& store);

} // namespace sketchfuzz
