#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "sketchfuzz/core/fragment_store.hpp"
#include "sketchfuzz/core/rng.hpp"
#include "sketchfuzz/core/types.hpp"
#include "sketchfuzz/gen/generator.hpp"
#include "sketchfuzz/learn/backend.hpp"

namespace sketchfuzz {

struct DocEntry {
  std::string name;
  std::string description;
  std::string example;
};

struct DocSummary {
  FeatureId feature;
  std::vector<DocEntry> entries;
};

// Characters of the best matching file kept by the offline fallback.
inline constexpr std::size_t kSummaryFallbackChars = 4000;

// Corpus files ranked by token overlap with key, best first; files without
// overlap are left out.
std::vector<std::filesystem::path> rank_corpus(const std::filesystem::path& dir,
                                               std::string_view key);

std::string summary_prompt(std::string_view dbms, const Feature& feature,
                           std::string_view documents);

DocSummary summarize_docs(const std::filesystem::path& corpus_dir,
                          std::string_view dbms, const Feature& feature,
                          CompletionBackend& backend);

struct FewShot {
  std::size_t hole = 0;
  std::string text;
};

std::string build_prompt(const Sketch& sketch, std::string_view dbms,
                         const Feature& feature, const DocSummary& summary,
                         const std::vector<FewShot>& examples,
                         const LiteralRegistry& generators =
                             LiteralRegistry::standard());

// CSV row "hole,fragment", quoting the fragment when needed.
std::string render_csv_row(std::size_t hole, std::string_view fragment);

// Rows with a valid index below hole_count and non-empty fragment.
std::vector<FewShot> parse_response(std::string_view response,
                                    std::size_t hole_count);

// Rewrites sketch table/column names to their canonical abstract tokens.
std::string abstract_identifiers(std::string_view fragment,
                                 const SchemaModel& schema);

// Default tokens that mark a fragment as nondeterministic.
const std::vector<std::string>& default_blacklist();
bool is_blacklisted(std::string_view fragment,
                    const std::vector<std::string>& blacklist = default_blacklist());

inline constexpr std::size_t kMaxCandidatesPerCall = 64;
inline constexpr std::size_t kMaxFewShot = 5;

struct SynthesisContext {
  std::string dbms = "SQLite";
  std::filesystem::path corpus_dir;  // empty: no documentation
  std::string slug;                  // fixture name for the sketch request
};

// Caches documentation summaries per feature.
class Synthesizer {
public:
  Synthesizer(CompletionBackend& backend, SynthesisContext ctx);

  // Returns Candidate fragments bound to sketch.feature; the store is only
  // read (few-shot examples, dedup screen).
  std::vector<Fragment> synthesize_fragments(const Feature& feature,
                                             const Sketch& sketch,
                                             const FragmentStore& store,
                                             Rng& rng);

  const DocSummary& summary_for(const Feature& feature);
  CompletionBackend& backend() { return backend_; }
  const SynthesisContext& context() const { return ctx_; }

private:
  CompletionBackend& backend_;
  SynthesisContext ctx_;
  std::mutex mutex_;
  std::map<FeatureId, DocSummary> summaries_;
};

// Default fixture name for a sketch of feature.
std::string synthesis_slug(const Feature& feature, const Sketch& sketch);

} // namespace sketchfuzz
