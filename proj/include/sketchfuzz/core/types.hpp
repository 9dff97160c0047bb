#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sketchfuzz {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class FeatureLevel { Statement, Clause, Expression, DataType };

inline constexpr FeatureLevel kAllLevels[] = {
    FeatureLevel::Statement, FeatureLevel::Clause, FeatureLevel::Expression,
    FeatureLevel::DataType};

enum class FeatureStatus { Unlearned, Learning, Learned };

enum class HoleKind {
  WholeStatement,
  TableOption,
  ColumnConstraint,
  TableConstraint,
  StatementSuffix,
  BinaryOperator,
  FunctionName,
  UnaryPrefix,
  LeafExpression,
  DataTypeName,
  TypedLiteral,
};

inline constexpr HoleKind kAllHoleKinds[] = {
    HoleKind::WholeStatement,   HoleKind::TableOption,
    HoleKind::ColumnConstraint, HoleKind::TableConstraint,
    HoleKind::StatementSuffix,  HoleKind::BinaryOperator,
    HoleKind::FunctionName,     HoleKind::UnaryPrefix,
    HoleKind::LeafExpression,   HoleKind::DataTypeName,
    HoleKind::TypedLiteral};

enum class Validity { Candidate, Valid, Invalid, Demoted };

enum class Origin { BuiltIn, Synthesized };

constexpr FeatureLevel level_of(HoleKind kind) {
  switch (kind) {
  case HoleKind::WholeStatement:
  case HoleKind::StatementSuffix:
    return FeatureLevel::Statement;
  case HoleKind::TableOption:
  case HoleKind::ColumnConstraint:
  case HoleKind::TableConstraint:
    return FeatureLevel::Clause;
  case HoleKind::BinaryOperator:
  case HoleKind::FunctionName:
  case HoleKind::UnaryPrefix:
  case HoleKind::LeafExpression:
    return FeatureLevel::Expression;
  case HoleKind::DataTypeName:
  case HoleKind::TypedLiteral:
    return FeatureLevel::DataType;
  }
  return FeatureLevel::Statement;
}

std::string_view to_string(FeatureLevel level);
std::string_view to_string(FeatureStatus status);
std::string_view to_string(HoleKind kind);
std::string_view to_string(Validity validity);
std::string_view to_string(Origin origin);

// Parsers accept exactly the names produced by to_string.
std::optional<FeatureLevel> parse_level(std::string_view text);
std::optional<FeatureStatus> parse_status(std::string_view text);
std::optional<HoleKind> parse_hole(std::string_view text);
std::optional<Validity> parse_validity(std::string_view text);
std::optional<Origin> parse_origin(std::string_view text);

template <typename Tag>
struct StrongId {
  std::uint64_t value = 0;
  friend auto operator<=>(const StrongId&, const StrongId&) = default;
};

struct FeatureTag {};
struct FragmentTag {};
using FeatureId = StrongId<FeatureTag>;
using FragmentId = StrongId<FragmentTag>;

struct SupportStats {
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;

  std::uint64_t total() const { return successes + failures; }
  void record(bool ok) { ok ? ++successes : ++failures; }
  friend bool operator==(const SupportStats&, const SupportStats&) = default;
};

struct Feature {
  FeatureId id;
  std::string name;
  FeatureLevel level = FeatureLevel::Statement;
  FeatureStatus status = FeatureStatus::Unlearned;
  SupportStats stats;

  friend bool operator==(const Feature&, const Feature&) = default;
};

struct Fragment {
  FragmentId id;
  FeatureId feature;
  HoleKind hole = HoleKind::WholeStatement;
  std::string text;
  Validity validity = Validity::Candidate;
  SupportStats stats;
  Origin origin = Origin::Synthesized;

  friend bool operator==(const Fragment&, const Fragment&) = default;
};

struct Column {
  std::string name;
  std::string type;  // INT, VARCHAR, BOOLEAN or a learned type name

  friend bool operator==(const Column&, const Column&) = default;
};

struct TableDef {
  std::string name;
  std::vector<Column> columns;
  bool is_view = false;

  const Column* find_column(std::string_view column) const;
  friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct SchemaModel {
  std::vector<TableDef> tables;
  std::vector<TableDef> views;

  bool empty() const { return tables.empty() && views.empty(); }
  // Tables first, then views.
  std::vector<const TableDef*> relations() const;
  const TableDef* find(std::string_view name) const;
  // Throws Error when an invariant is violated.
  void check() const;
  friend bool operator==(const SchemaModel&, const SchemaModel&) = default;
};

// Built-in column type tags shared by every target.
inline constexpr std::string_view kBuiltinTypes[] = {"INT", "VARCHAR",
                                                     "BOOLEAN"};
bool is_builtin_type(std::string_view type);

struct SketchHole {
  std::size_t index = 0;
  HoleKind kind = HoleKind::WholeStatement;
  friend bool operator==(const SketchHole&, const SketchHole&) = default;
};

struct Sketch {
  std::vector<std::string> context_statements;
  std::vector<std::string> holed_statements;
  std::vector<SketchHole> holes;
  FeatureId feature;
  SchemaModel schema;

  // Throws Error when placeholders and holes do not form a bijection.
  void check() const;
};

// Finds "{k}" placeholders in text; returns the indices in order of
// appearance.
std::vector<std::size_t> placeholder_indices(std::string_view text);

} // namespace sketchfuzz

template <typename Tag>
struct std::hash<sketchfuzz::StrongId<Tag>> {
  std::size_t operator()(const sketchfuzz::StrongId<Tag>& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
