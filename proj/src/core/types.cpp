#include "sketchfuzz/core/types.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace sketchfuzz {

namespace {

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view text,
                            const std::array<E, N>& values) {
  for (E v : values)
    if (to_string(v) == text)
      return v;
  return std::nullopt;
}

} // namespace

std::string_view to_string(FeatureLevel level) {
  switch (level) {
  case FeatureLevel::Statement: return "Statement";
  case FeatureLevel::Clause: return "Clause";
  case FeatureLevel::Expression: return "Expression";
  case FeatureLevel::DataType: return "DataType";
  }
  return "?";
}

std::string_view to_string(FeatureStatus status) {
  switch (status) {
  case FeatureStatus::Unlearned: return "Unlearned";
  case FeatureStatus::Learning: return "Learning";
  case FeatureStatus::Learned: return "Learned";
  }
  return "?";
}

std::string_view to_string(HoleKind kind) {
  switch (kind) {
  case HoleKind::WholeStatement: return "WholeStatement";
  case HoleKind::TableOption: return "TableOption";
  case HoleKind::ColumnConstraint: return "ColumnConstraint";
  case HoleKind::TableConstraint: return "TableConstraint";
  case HoleKind::StatementSuffix: return "StatementSuffix";
  case HoleKind::BinaryOperator: return "BinaryOperator";
  case HoleKind::FunctionName: return "FunctionName";
  case HoleKind::UnaryPrefix: return "UnaryPrefix";
  case HoleKind::LeafExpression: return "LeafExpression";
  case HoleKind::DataTypeName: return "DataTypeName";
  case HoleKind::TypedLiteral: return "TypedLiteral";
  }
  return "?";
}

std::string_view to_string(Validity validity) {
  switch (validity) {
  case Validity::Candidate: return "Candidate";
  case Validity::Valid: return "Valid";
  case Validity::Invalid: return "Invalid";
  case Validity::Demoted: return "Demoted";
  }
  return "?";
}

std::string_view to_string(Origin origin) {
  return origin == Origin::BuiltIn ? "BuiltIn" : "Synthesized";
}

std::optional<FeatureLevel> parse_level(std::string_view text) {
  return parse_enum(text, std::array{FeatureLevel::Statement,
                                     FeatureLevel::Clause,
                                     FeatureLevel::Expression,
                                     FeatureLevel::DataType});
}

std::optional<FeatureStatus> parse_status(std::string_view text) {
  return parse_enum(text,
                    std::array{FeatureStatus::Unlearned,
                               FeatureStatus::Learning,
                               FeatureStatus::Learned});
}

std::optional<HoleKind> parse_hole(std::string_view text) {
  std::array<HoleKind, std::size(kAllHoleKinds)> all{};
  std::copy(std::begin(kAllHoleKinds), std::end(kAllHoleKinds), all.begin());
  return parse_enum(text, all);
}

std::optional<Validity> parse_validity(std::string_view text) {
  return parse_enum(text, std::array{Validity::Candidate, Validity::Valid,
                                     Validity::Invalid, Validity::Demoted});
}

std::optional<Origin> parse_origin(std::string_view text) {
  return parse_enum(text, std::array{Origin::BuiltIn, Origin::Synthesized});
}

const Column* TableDef::find_column(std::string_view column) const {
  for (const auto& c : columns)
    if (c.name == column)
      return &c;
  return nullptr;
}

std::vector<const TableDef*> SchemaModel::relations() const {
  std::vector<const TableDef*> out;
  for (const auto& t : tables)
    out.push_back(&t);
  for (const auto& v : views)
    out.push_back(&v);
  return out;
}

const TableDef* SchemaModel::find(std::string_view name) const {
  for (const auto* r : relations())
    if (r->name == name)
      return r;
  return nullptr;
}

void SchemaModel::check() const {
  std::set<std::string> names;
  for (const auto* r : relations()) {
    if (!names.insert(r->name).second)
      throw Error("duplicate relation name: " + r->name);
    if (r->columns.empty())
      throw Error("relation without columns: " + r->name);
    std::set<std::string> cols;
    for (const auto& c : r->columns) {
      if (c.type.empty())
        throw Error("column without type tag: " + r->name + "." + c.name);
      if (!cols.insert(c.name).second)
        throw Error("duplicate column " + c.name + " in " + r->name);
    }
  }
}

bool is_builtin_type(std::string_view type) {
  return std::find(std::begin(kBuiltinTypes), std::end(kBuiltinTypes),
                   type) != std::end(kBuiltinTypes);
}

std::vector<std::size_t> placeholder_indices(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{')
      continue;
    std::size_t j = i + 1;
    std::size_t value = 0;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
      value = value * 10 + static_cast<std::size_t>(text[j] - '0');
      ++j;
    }
    if (j > i + 1 && j < text.size() && text[j] == '}') {
      out.push_back(value);
      i = j;
    }
  }
  return out;
}

void Sketch::check() const {
  for (const auto& stmt : context_statements)
    if (!placeholder_indices(stmt).empty())
      throw Error("context statement contains a placeholder: " + stmt);
  std::vector<std::size_t> seen;
  for (const auto& stmt : holed_statements)
    for (std::size_t idx : placeholder_indices(stmt))
      seen.push_back(idx);
  std::sort(seen.begin(), seen.end());
  if (seen.size() != holes.size())
    throw Error("placeholder count does not match hole count");
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != i)
      throw Error("placeholders are not exactly {0..n-1}");
  for (std::size_t i = 0; i < holes.size(); ++i)
    if (holes[i].index != i)
      throw Error("holes are not ordered by index");
}

} // namespace sketchfuzz
