#include "sketchfuzz/learn/synthesizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/sketcher.hpp"

namespace sketchfuzz {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Crude plural folding so "types" matches "type".
std::string stem(std::string t) {
  if (t.size() > 3 && t.back() == 's')
    t.pop_back();
  return t;
}

std::string level_words(FeatureLevel level) {
  switch (level) {
  case FeatureLevel::Statement: return "statement";
  case FeatureLevel::Clause: return "clause constraint";
  case FeatureLevel::Expression: return "expression function operator";
  case FeatureLevel::DataType: return "data type";
  }
  return {};
}

std::string level_label(FeatureLevel level) {
  switch (level) {
  case FeatureLevel::Statement: return "Statement";
  case FeatureLevel::Clause: return "Clause";
  case FeatureLevel::Expression: return "Expression";
  case FeatureLevel::DataType: return "Data type";
  }
  return {};
}

std::string truncate(std::string s, std::size_t n) {
  if (s.size() > n)
    s.resize(n);
  return s;
}

DocSummary fallback_summary(const Feature& feature, const std::filesystem::path& best) {
  DocSummary s;
  s.feature = feature.id;
  s.entries.push_back({feature.name, truncate(read_file(best), kSummaryFallbackChars), ""});
  return s;
}

} // namespace

std::vector<std::filesystem::path> rank_corpus(const std::filesystem::path& dir,
                                               std::string_view key) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  if (dir.empty() || !std::filesystem::is_directory(dir, ec))
    return out;
  std::vector<std::string> key_tokens;
  for (auto& t : text::word_tokens(key))
    key_tokens.push_back(stem(t));

  std::vector<std::pair<std::size_t, std::filesystem::path>> scored;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file())
      continue;
    const auto& p = entry.path();
    std::string first_line;
    {
      std::ifstream in(p);
      std::getline(in, first_line);
    }
    std::set<std::string> doc;
    for (auto& t : text::word_tokens(p.stem().string() + " " + first_line))
      doc.insert(stem(t));
    std::size_t score = 0;
    for (const auto& t : key_tokens)
      score += doc.count(t);
    if (score > 0)
      scored.emplace_back(score, p);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (auto& [score, p] : scored)
    out.push_back(std::move(p));
  return out;
}

std::string summary_prompt(std::string_view dbms, const Feature& feature,
                           std::string_view documents) {
  std::string p = "Please summarize the below document of [" + std::string(dbms) +
                  "]. List each [" + level_label(feature.level) +
                  "] with their description and examples, focusing on " +
                  feature.name + ".\n";
  p += "Answer with one line per item in the form: NAME | description | example\n\n";
  p += documents;
  return p;
}

DocSummary summarize_docs(const std::filesystem::path& corpus_dir,
                          std::string_view dbms, const Feature& feature,
                          CompletionBackend& backend) {
  DocSummary empty;
  empty.feature = feature.id;
  // The feature name is repeated so it outweighs the generic level words.
  const std::string key = std::string(dbms) + " " + level_words(feature.level) +
                          " " + feature.name + " " + feature.name + " " +
                          feature.name;
  const auto ranked = rank_corpus(corpus_dir, key);
  if (ranked.empty())
    return empty;
  if (backend.mode() == BackendMode::Null)
    return fallback_summary(feature, ranked.front());

  std::string docs;
  for (std::size_t i = 0; i < ranked.size() && i < 2; ++i)
    docs += truncate(read_file(ranked[i]), 2 * kSummaryFallbackChars) + "\n";
  CompletionRequest req{TaskKind::Summarize, summary_prompt(dbms, feature, docs),
                        "summary-" + slugify(level_label(feature.level)) + "-" +
                            slugify(feature.name)};
  auto response = backend.complete(req);
  if (!response)
    return fallback_summary(feature, ranked.front());
  DocSummary s;
  s.feature = feature.id;
  for (const auto& line : text::split_lines(*response)) {
    std::string l = text::trim(line);
    if (l.empty() || l.starts_with("```"))
      continue;
    DocEntry e;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
      auto bar = l.find('|', start);
      parts.push_back(text::trim(l.substr(start, bar - start)));
      if (bar == std::string::npos)
        break;
      start = bar + 1;
    }
    e.name = parts[0];
    if (!e.name.empty() && (e.name[0] == '-' || e.name[0] == '*'))
      e.name = text::trim(e.name.substr(1));
    if (e.name.empty())
      continue;
    if (parts.size() > 1)
      e.description = parts[1];
    if (parts.size() > 2)
      e.example = parts[2];
    s.entries.push_back(std::move(e));
  }
  if (s.entries.empty())
    return fallback_summary(feature, ranked.front());
  return s;
}

std::string build_prompt(const Sketch& sketch, std::string_view dbms,
                         const Feature& feature, const DocSummary& summary,
                         const std::vector<FewShot>& examples,
                         const LiteralRegistry& generators) {
  std::string p = "You are an expert in SQL dialects.\n";
  p += "Target DBMS: " + std::string(dbms) + "\n";
  p += "Feature to explore: " + feature.name + " (" + level_label(feature.level) +
       " level)\n\n";
  if (!summary.entries.empty()) {
    p += "Documentation summary:\n";
    for (const auto& e : summary.entries) {
      p += "- " + e.name;
      if (!e.description.empty())
        p += ": " + e.description;
      if (!e.example.empty())
        p += " Example: " + e.example;
      p += "\n";
    }
    p += "\n";
  }
  p += "SQL sketch:\n" + render_for_prompt(sketch) + "\n";
  p += "Placeholders:\n";
  for (const auto& h : sketch.holes)
    p += "{" + std::to_string(h.index) + "}: " + std::string(to_string(h.kind)) + "\n";
  p += "\nVariable generators (write them literally, e.g. <RANDOM_INT>):\n";
  for (const auto& g : generators.all())
    p += g.keyword + " - " + g.description + "\n";
  p += "\nGenerate, for each placeholder ({0}, {1}, ...) in the SQL sketch, as many "
       "deterministic, rare, and complex concrete alternatives as possible, using "
       "**only** the provided variable generators or literal values.\n";
  if (!examples.empty()) {
    p += "\nExamples of the expected output:\n";
    for (const auto& e : examples)
      p += render_csv_row(e.hole, e.text) + "\n";
  }
  p += "\nOutput CSV only, one alternative per row, with the columns "
       "hole_index,fragment. Quote a fragment that contains a comma. An empty "
       "alternative is allowed for optional placeholders.\n";
  p += "Avoid random functions and anything depending on the current time, so "
       "that every alternative evaluates the same way on each run.\n";
  return p;
}

std::string render_csv_row(std::size_t hole, std::string_view fragment) {
  const bool quote = fragment.find_first_of(",\"") != std::string_view::npos ||
                     (!fragment.empty() && (fragment.front() == ' ' || fragment.back() == ' '));
  std::string row = std::to_string(hole) + ",";
  if (!quote)
    return row + std::string(fragment);
  row += '"';
  for (char c : fragment) {
    if (c == '"')
      row += '"';
    row += c;
  }
  return row + '"';
}

std::vector<FewShot> parse_response(std::string_view response, std::size_t hole_count) {
  std::vector<FewShot> out;
  for (const auto& raw : text::split_lines(response)) {
    const std::string line = text::trim(raw);
    if (line.empty() || line.starts_with("```") ||
        text::starts_with_ci(line, "hole_index"))
      continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      continue;
    const std::string idx = text::trim(line.substr(0, comma));
    if (idx.empty() || idx.size() > 6 ||
        !std::all_of(idx.begin(), idx.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    const std::size_t hole = std::stoul(idx);
    if (hole >= hole_count)
      continue;
    std::string frag = text::trim(line.substr(comma + 1));
    if (frag.size() >= 2 && frag.front() == '"') {
      std::string unq;
      bool closed = false;
      for (std::size_t i = 1; i < frag.size(); ++i) {
        if (frag[i] == '"') {
          if (i + 1 < frag.size() && frag[i + 1] == '"') {
            unq += '"';
            ++i;
            continue;
          }
          closed = true;
          break;
        }
        unq += frag[i];
      }
      if (closed)
        frag = unq;
    }
    if (text::trim(frag).empty())
      continue;
    out.push_back({hole, std::move(frag)});
  }
  return out;
}

std::string abstract_identifiers(std::string_view fragment, const SchemaModel& schema) {
  std::string s(fragment);
  const auto rels = schema.relations();
  for (std::size_t r = 0; r < rels.size(); ++r) {
    const std::string tab = r == 0 ? std::string(kAbstractTable)
                                   : std::string(kAbstractTable) + std::to_string(r + 1);
    s = text::replace_word(s, rels[r]->name, tab, true);
    for (std::size_t c = 0; c < rels[r]->columns.size(); ++c) {
      const std::string col = c == 0 ? std::string(kAbstractColumn)
                                     : std::string(kAbstractColumn) + std::to_string(c + 1);
      s = text::replace_word(s, rels[r]->columns[c].name, col, true);
    }
  }
  return s;
}

const std::vector<std::string>& default_blacklist() {
  static const std::vector<std::string> list = {"RANDOM", "RAND", "CURRENT_TIMESTAMP",
                                                "NOW", "UUID"};
  return list;
}

bool is_blacklisted(std::string_view fragment, const std::vector<std::string>& blacklist) {
  // Generator keywords are deterministic given the seed; ignore them.
  std::string s;
  std::size_t last = 0;
  for (const auto& k : generator_keywords(fragment)) {
    const auto pos = fragment.find("<" + k + ">", last);
    s.append(fragment.substr(last, pos - last));
    s += ' ';
    last = pos + k.size() + 2;
  }
  s.append(fragment.substr(last));
  for (std::size_t i = 0; i < s.size();) {
    if (!text::is_ident_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::is_ident_char(s[j]))
      ++j;
    const std::string word = text::to_upper(s.substr(i, j - i));
    if (std::find(blacklist.begin(), blacklist.end(), word) != blacklist.end())
      return true;
    i = j;
  }
  return false;
}

std::string synthesis_slug(const Feature& feature, const Sketch& sketch) {
  const bool typed = feature.level == FeatureLevel::DataType && !sketch.holes.empty() &&
                     sketch.holes.front().kind == HoleKind::LeafExpression;
  if (typed)
    return "synth-typed-" + slugify(feature.name);
  return "synth-" + slugify(to_string(feature.level)) + "-" + slugify(feature.name);
}

Synthesizer::Synthesizer(CompletionBackend& backend, SynthesisContext ctx)
    : backend_(backend), ctx_(std::move(ctx)) {}

const DocSummary& Synthesizer::summary_for(const Feature& feature) {
  std::lock_guard lock(mutex_);
  auto it = summaries_.find(feature.id);
  if (it == summaries_.end())
    it = summaries_.emplace(feature.id,
                            summarize_docs(ctx_.corpus_dir, ctx_.dbms, feature, backend_))
             .first;
  return it->second;
}

std::vector<Fragment> Synthesizer::synthesize_fragments(const Feature& feature,
                                                        const Sketch& sketch,
                                                        const FragmentStore& store,
                                                        Rng& rng) {
  if (sketch.feature != feature.id)
    throw Error("sketch was built for a different feature");
  const DocSummary& summary = summary_for(feature);

  std::vector<FewShot> pool;
  std::set<HoleKind> seen_kinds;
  for (const auto& h : sketch.holes) {
    if (!seen_kinds.insert(h.kind).second)
      continue;
    for (const auto& f : store.lookup(h.kind, true))
      pool.push_back({h.index, f.text});
  }
  std::vector<FewShot> shots;
  while (!pool.empty() && shots.size() < kMaxFewShot) {
    const auto i = rng.below(pool.size());
    shots.push_back(std::move(pool[i]));
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }

  CompletionRequest req;
  req.task = TaskKind::Synthesize;
  req.prompt = build_prompt(sketch, ctx_.dbms, feature, summary, shots);
  req.slug = ctx_.slug.empty() ? synthesis_slug(feature, sketch) : ctx_.slug;
  const auto response = backend_.complete(req);
  if (!response)
    return {};

  std::vector<Fragment> out;
  std::set<std::pair<HoleKind, std::string>> batch;
  for (const auto& row : parse_response(*response, sketch.holes.size())) {
    if (out.size() >= kMaxCandidatesPerCall)
      break;
    const HoleKind kind = sketch.holes[row.hole].kind;
    std::string t = text::trim(abstract_identifiers(row.text, sketch.schema));
    if (t.empty() || is_blacklisted(t) || !keywords_registered(t))
      continue;
    if (kind == HoleKind::WholeStatement && is_schema_changing_statement(t))
      continue;
    if (store.contains_text(kind, t) ||
        !batch.emplace(kind, text::collapse_whitespace(t)).second)
      continue;
    Fragment f;
    f.feature = feature.id;
    f.hole = kind;
    f.text = std::move(t);
    f.validity = Validity::Candidate;
    f.origin = Origin::Synthesized;
    out.push_back(std::move(f));
  }
  return out;
}

} // namespace sketchfuzz
