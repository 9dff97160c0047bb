#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sketchfuzz/connector/connector.hpp"
#include "sketchfuzz/core/fragment_store.hpp"
#include "sketchfuzz/core/rng.hpp"
#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

class IncompleteAssignmentError : public Error {
public:
  using Error::Error;
};

struct ValidatorConfig {
  double prune_threshold = 0.5;
  std::uint64_t min_trials = 20;

  void check() const;
};

// One hole filled with concrete text; empty text removes the hole.
struct HoleFill {
  std::size_t hole = 0;
  std::string text;
};

// Substitutes every placeholder. An empty fill inside a comma separated
// list also drops one separator; statements left empty are omitted.
std::vector<std::string> fill_sketch(const Sketch& sketch,
                                     const std::vector<HoleFill>& fills);

// A fragment (or nothing) per hole, before expansion.
struct HoleAssignment {
  std::size_t hole = 0;
  std::optional<Fragment> fragment;
};

enum class ValidationOutcome { Valid, Invalid, Crashed };

struct ValidationResult {
  std::vector<HoleAssignment> assignment;
  ValidationOutcome outcome = ValidationOutcome::Invalid;
  std::optional<std::string> error_message;
  // Status of the statement that failed, Ok when valid.
  ExecStatus status = ExecStatus::Ok;
  // The executed script, for crash reports.
  std::vector<std::string> statements;
};

// Resets the database, expands the fragments against sketch.schema, runs
// the filled script and updates validity and stats of every assigned
// fragment (Candidate -> Valid/Invalid). A lost connection leaves the
// fragments untouched.
ValidationResult validate_candidate(const Sketch& sketch,
                                    std::vector<HoleAssignment> assignment,
                                    Connector& connector, Rng& rng);

// Beta(1,1) posterior mean (s+1)/(n+2).
double estimate_support_prob(const SupportStats& stats);

// Demotes Valid fragments with enough trials and a posterior mean below
// threshold. Returns the demoted ids.
std::vector<FragmentId> runtime_prune(FragmentStore& store, double threshold,
                                      std::uint64_t min_trials);

// Max posterior mean over the feature's fragments (0.5 without fragments).
double feature_support_prob(const FragmentStore& store, FeatureId feature);

} // namespace sketchfuzz
