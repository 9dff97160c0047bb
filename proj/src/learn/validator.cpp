#include "sketchfuzz/learn/validator.hpp"

#include <algorithm>

#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/generator.hpp"

namespace sketchfuzz {

void ValidatorConfig::check() const {
  if (!(prune_threshold > 0 && prune_threshold < 1))
    throw Error("prune threshold must be within (0, 1)");
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void trim_right(std::string& s) {
  while (!s.empty() && is_space(s.back()))
    s.pop_back();
}

std::size_t skip_spaces(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i]))
    ++i;
  return i;
}

// Length of a "{k}" placeholder starting at i, 0 if none.
std::size_t placeholder_at(std::string_view s, std::size_t i, std::size_t& index) {
  if (s[i] != '{')
    return 0;
  std::size_t j = i + 1, v = 0;
  while (j < s.size() && s[j] >= '0' && s[j] <= '9')
    v = v * 10 + static_cast<std::size_t>(s[j++] - '0');
  if (j == i + 1 || j >= s.size() || s[j] != '}')
    return 0;
  index = v;
  return j + 1 - i;
}

// Name of the column whose definition precedes position pos
// ("..., COL2 VARCHAR {2}").
std::string column_before(std::string_view stmt, std::size_t pos) {
  std::size_t start = stmt.find_last_of("(,", pos);
  if (start == std::string_view::npos)
    return {};
  start = skip_spaces(stmt, start + 1);
  std::size_t end = start;
  while (end < stmt.size() && text::is_ident_char(stmt[end]))
    ++end;
  return std::string(stmt.substr(start, end - start));
}

} // namespace

std::vector<std::string> fill_sketch(const Sketch& sketch,
                                     const std::vector<HoleFill>& fills) {
  std::vector<const std::string*> by_hole(sketch.holes.size(), nullptr);
  for (const auto& f : fills) {
    if (f.hole >= by_hole.size())
      throw IncompleteAssignmentError("fill for unknown hole " + std::to_string(f.hole));
    if (by_hole[f.hole])
      throw IncompleteAssignmentError("hole filled twice: " + std::to_string(f.hole));
    by_hole[f.hole] = &f.text;
  }
  for (std::size_t k = 0; k < by_hole.size(); ++k)
    if (!by_hole[k])
      throw IncompleteAssignmentError("hole " + std::to_string(k) + " has no fill");

  std::vector<std::string> out = sketch.context_statements;
  for (const auto& stmt : sketch.holed_statements) {
    std::string res;
    for (std::size_t i = 0; i < stmt.size();) {
      std::size_t idx = 0;
      const std::size_t len = placeholder_at(stmt, i, idx);
      if (!len) {
        res.push_back(stmt[i++]);
        continue;
      }
      i += len;
      const std::string& fill = *by_hole.at(idx);
      if (!fill.empty()) {
        res += fill;
        continue;
      }
      trim_right(res);
      const std::size_t next = skip_spaces(stmt, i);
      const char follow = next < stmt.size() ? stmt[next] : '\0';
      if (!res.empty() && res.back() == ',' && (follow == ')' || follow == ',')) {
        // Drop the separator in front of an empty list element.
        res.pop_back();
        trim_right(res);
      } else if (!res.empty() && res.back() == '(' && follow == ',') {
        i = skip_spaces(stmt, next + 1);
        continue;
      }
      // Keep a single space towards the following token.
      if (!res.empty() && next < stmt.size() && follow != ')' && follow != ',' &&
          follow != ';')
        res.push_back(' ');
      i = next;
    }
    res = text::trim(res);
    if (!res.empty())
      out.push_back(std::move(res));
  }
  return out;
}

ValidationResult validate_candidate(const Sketch& sketch,
                                    std::vector<HoleAssignment> assignment,
                                    Connector& connector, Rng& rng) {
  ValidationResult result;
  const TableDef* table =
      sketch.schema.tables.empty() ? nullptr : &sketch.schema.tables.front();

  std::vector<HoleFill> fills;
  try {
    for (const auto& a : assignment) {
      HoleFill fill{a.hole, {}};
      if (a.fragment) {
        ExpansionContext ctx;
        ctx.table = table;
        if (a.hole < sketch.holes.size() &&
            sketch.holes[a.hole].kind == HoleKind::ColumnConstraint && table) {
          const std::string marker = "{" + std::to_string(a.hole) + "}";
          for (const auto& stmt : sketch.holed_statements) {
            const auto pos = stmt.find(marker);
            if (pos == std::string::npos)
              continue;
            ctx.column = table->find_column(column_before(stmt, pos));
          }
        }
        fill.text = expand_fragment(a.fragment->text, sketch.schema, rng, ctx);
      }
      fills.push_back(std::move(fill));
    }
    result.statements = fill_sketch(sketch, fills);
  } catch (const IncompleteAssignmentError&) {
    throw;
  } catch (const Error& e) {
    result.outcome = ValidationOutcome::Invalid;
    result.error_message = e.what();
    result.status = ExecStatus::SqlError;
  }

  if (!result.error_message) {
    connector.reset_database();
    result.outcome = ValidationOutcome::Valid;
    for (const auto& stmt : result.statements) {
      ExecOutcome r = connector.execute(stmt);
      if (r.ok())
        continue;
      result.status = r.status;
      result.error_message =
          r.message.value_or(std::string(to_string(r.status)));
      result.outcome = r.status == ExecStatus::ConnectionLost
                           ? ValidationOutcome::Crashed
                           : ValidationOutcome::Invalid;
      break;
    }
  }

  if (result.outcome != ValidationOutcome::Crashed) {
    const bool ok = result.outcome == ValidationOutcome::Valid;
    for (auto& a : assignment) {
      if (!a.fragment)
        continue;
      a.fragment->stats.record(ok);
      if (a.fragment->validity == Validity::Candidate)
        a.fragment->validity = ok ? Validity::Valid : Validity::Invalid;
    }
  }
  result.assignment = std::move(assignment);
  return result;
}

double estimate_support_prob(const SupportStats& stats) {
  return (static_cast<double>(stats.successes) + 1.0) /
         (static_cast<double>(stats.total()) + 2.0);
}

std::vector<FragmentId> runtime_prune(FragmentStore& store, double threshold,
                                      std::uint64_t min_trials) {
  if (!(threshold > 0 && threshold < 1))
    throw Error("prune threshold must be within (0, 1)");
  std::vector<FragmentId> demoted;
  store.for_each_mutable([&](Fragment& f) {
    if (f.validity == Validity::Valid && f.stats.total() >= min_trials &&
        estimate_support_prob(f.stats) < threshold) {
      f.validity = Validity::Demoted;
      demoted.push_back(f.id);
    }
  });
  return demoted;
}

double feature_support_prob(const FragmentStore& store, FeatureId feature) {
  double best = -1;
  for (const auto& f : store.fragments_of(feature))
    best = std::max(best, estimate_support_prob(f.stats));
  return best < 0 ? 0.5 : best;
}

} // namespace sketchfuzz
