#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchfuzz/core/fragment_store.hpp"
#include "sketchfuzz/core/rng.hpp"
#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

struct GenConfig {
  std::size_t max_tables = 2;
  std::size_t max_views = 1;
  std::size_t max_inserts = 20;
  std::size_t max_columns = 5;
  std::uint64_t seed = 0;
  // Chance of using a learned fragment at an eligible grammar node.
  double fragment_probability = 0.3;
  // Selection weight multiplier for fragments of boosted_feature.
  double boost_factor = 1.0;
  std::optional<FeatureId> boosted_feature;
  // Also draw from fragments that were never validated.
  bool use_candidates = false;

  void check() const;
};

class UnknownKeywordError : public Error {
public:
  using Error::Error;
};

class EmptySchemaError : public Error {
public:
  using Error::Error;
};

// Random literal generator keyed by "<NAME>".
struct LiteralGenerator {
  std::string keyword;  // without angle brackets
  std::string description;
  std::function<std::string(Rng&, const SchemaModel&)> produce;
};

// The registered keyword set. Ships RANDOM_INT, RANDOM_VARCHAR, RANDOM_DATE,
// RANDOM_TABLE and RANDOM_COLUMN.
class LiteralRegistry {
public:
  static const LiteralRegistry& standard();

  void add(LiteralGenerator g);
  const LiteralGenerator* find(std::string_view keyword) const;
  const std::vector<LiteralGenerator>& all() const { return generators_; }

private:
  std::vector<LiteralGenerator> generators_;
};

std::string random_int(Rng& rng);
std::string random_varchar(Rng& rng);
std::string random_date(Rng& rng);

// "<NAME>" tokens in text (NAME = [A-Z][A-Z0-9_]*), in order.
std::vector<std::string> generator_keywords(std::string_view text);
// True when every keyword in text is registered.
bool keywords_registered(std::string_view text,
                         const LiteralRegistry& registry =
                             LiteralRegistry::standard());

// Abstract identifiers used in sketches and stored fragments.
inline constexpr std::string_view kAbstractTable = "TAB";
inline constexpr std::string_view kAbstractColumn = "COL";
inline constexpr std::string_view kAbstractColumn2 = "COL2";

struct ExpansionContext {
  // Table bound to TAB; may be a table that is still being created.
  const TableDef* table = nullptr;
  // Column bound to COL; must belong to table when both are set.
  const Column* column = nullptr;
  // Restricts the columns COL may bind to.
  std::function<bool(const Column&)> column_filter;
  // Render column references as table.column.
  bool qualify = false;
};

// Replaces generator keywords with fresh literals and abstract identifiers
// with schema names.
std::string expand_fragment(std::string_view text, const SchemaModel& schema,
                            Rng& rng, const ExpansionContext& ctx = {});

struct GeneratedStatement {
  std::string text;
  std::vector<FragmentId> fragments;
};

struct GeneratedContext {
  std::vector<GeneratedStatement> statements;
  SchemaModel schema;
};

struct GeneratedQuery {
  std::vector<std::string> from;
  std::string predicate;
  // SELECT * FROM <from> WHERE <predicate>
  std::string text;
  std::vector<FragmentId> fragments;
};

// Rule-based generator. Deterministic given (config, snapshot, rng).
class Generator {
public:
  Generator(GenConfig cfg, std::shared_ptr<const StoreSnapshot> store);

  GeneratedContext generate_context(Rng& rng) const;
  GeneratedQuery generate_query(const SchemaModel& schema, Rng& rng) const;

  const GenConfig& config() const { return cfg_; }

private:
  struct Impl;
  GenConfig cfg_;
  std::shared_ptr<const StoreSnapshot> store_;
};

std::string render_from(const std::vector<std::string>& from);

} // namespace sketchfuzz
