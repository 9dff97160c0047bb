#include "sketchfuzz/gen/sketcher.hpp"

#include <algorithm>

#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/generator.hpp"

namespace sketchfuzz {

namespace {

const std::string kTab(kAbstractTable);
const std::string kCol(kAbstractColumn);
const std::string kCol2(kAbstractColumn2);

std::string placeholder(std::size_t k) { return "{" + std::to_string(k) + "}"; }

SchemaModel single_table(std::vector<Column> columns) {
  SchemaModel s;
  s.tables.push_back({kTab, std::move(columns), false});
  return s;
}

void require_level(const SketchRequest& req, FeatureLevel level) {
  if (req.level != level || req.feature.level != level)
    throw Error("sketch request level mismatch: wanted " +
                std::string(to_string(level)));
}

std::string int_rows(Rng& rng) {
  return "INSERT INTO " + kTab + " (" + kCol + ") VALUES (1), (-1), (NULL), (" +
         std::to_string(rng.range(-1000, 1000)) + ")";
}

} // namespace

HoleKind expression_hole_for(std::string_view feature_name) {
  const std::string name = text::to_upper(text::collapse_whitespace(feature_name));
  if (name.empty())
    return HoleKind::FunctionName;
  const bool symbolic = std::none_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  });
  if (symbolic)
    return HoleKind::BinaryOperator;
  static const std::vector<std::string> kPrefix = {"NOT", "EXISTS", "UNARY"};
  static const std::vector<std::string> kInfix = {
      "LIKE",  "ILIKE", "GLOB",     "REGEXP",  "MATCH", "IS",  "BETWEEN",
      "IN",    "DISTINCT", "AND",   "OR",      "XOR",   "DIV", "MOD",
      "SIMILAR", "OPERATOR", "COMPARISON", "COLLATE"};
  const auto words = text::word_tokens(name);
  if (!words.empty() && text::to_upper(words.front()) == "NOT" && words.size() == 1)
    return HoleKind::UnaryPrefix;
  for (const auto& w : words) {
    const std::string up = text::to_upper(w);
    if (std::find(kInfix.begin(), kInfix.end(), up) != kInfix.end())
      return HoleKind::BinaryOperator;
  }
  for (const auto& w : words)
    if (std::find(kPrefix.begin(), kPrefix.end(), text::to_upper(w)) != kPrefix.end())
      return HoleKind::UnaryPrefix;
  return HoleKind::FunctionName;
}

Sketch make_statement_sketch(const SketchRequest& req, Rng& rng) {
  require_level(req, FeatureLevel::Statement);
  Sketch s;
  s.feature = req.feature.id;
  s.schema = single_table({{kCol, "INT"}});
  s.context_statements = {"CREATE TABLE " + kTab + " (" + kCol + " INT)",
                          int_rows(rng)};
  const std::size_t n =
      std::clamp<std::size_t>(req.statement_holes.value_or(1 + rng.below(3)), 1, 3);
  for (std::size_t k = 0; k < n; ++k) {
    s.holed_statements.push_back(placeholder(k));
    s.holes.push_back({k, HoleKind::WholeStatement});
  }
  s.check();
  return s;
}

Sketch make_clause_sketch(const SketchRequest& req, Rng& rng) {
  require_level(req, FeatureLevel::Clause);
  Sketch s;
  s.feature = req.feature.id;
  s.schema = single_table({{kCol, "INT"}, {kCol2, "VARCHAR"}});
  s.holed_statements = {
      "CREATE TABLE {0} " + kTab + " (" + kCol + " INT {1}, " + kCol2 +
          " VARCHAR {2}, {3}) {4}",
      "INSERT INTO " + kTab + " (" + kCol + ", " + kCol2 + ") VALUES (" +
          std::to_string(rng.range(1, 1000)) + ", 'a'), (" +
          std::to_string(rng.range(1001, 2000)) + ", 'b')"};
  s.holes = {{0, HoleKind::TableOption},
             {1, HoleKind::ColumnConstraint},
             {2, HoleKind::ColumnConstraint},
             {3, HoleKind::TableConstraint},
             {4, HoleKind::StatementSuffix}};
  s.check();
  return s;
}

Sketch make_expression_sketch(const SketchRequest& req, Rng& rng) {
  require_level(req, FeatureLevel::Expression);
  const HoleKind kind = req.expression_hole.value_or(expression_hole_for(req.feature.name));
  Sketch s;
  s.feature = req.feature.id;
  s.schema = single_table({{kCol, "INT"}});
  s.context_statements = {"CREATE TABLE " + kTab + " (" + kCol + " INT)",
                          int_rows(rng)};
  const std::string select = "SELECT * FROM " + kTab + " WHERE ";
  switch (kind) {
  case HoleKind::BinaryOperator:
    s.holed_statements = {select + kCol + " {0} 1"};
    break;
  case HoleKind::FunctionName:
    s.holed_statements = {select + "{0}(" + kCol + ")"};
    break;
  case HoleKind::UnaryPrefix:
    s.holed_statements = {select + "{0} (" + kCol + " > 0)"};
    break;
  case HoleKind::LeafExpression:
    s.holed_statements = {select + "{0}"};
    break;
  default:
    throw Error("not an expression hole: " + std::string(to_string(kind)));
  }
  s.holes = {{0, kind}};
  s.check();
  return s;
}

Sketch make_datatype_sketch(const SketchRequest& req, Rng&) {
  require_level(req, FeatureLevel::DataType);
  Sketch s;
  s.feature = req.feature.id;
  s.schema = single_table({{kCol, "LEARNED(" + req.feature.name + ")"}});
  s.holed_statements = {"CREATE TABLE " + kTab + " (" + kCol + " {0})",
                        "INSERT INTO " + kTab + " (" + kCol + ") VALUES ({1})"};
  s.holes = {{0, HoleKind::DataTypeName}, {1, HoleKind::TypedLiteral}};
  s.check();
  return s;
}

Sketch make_sketch(const SketchRequest& req, Rng& rng) {
  switch (req.level) {
  case FeatureLevel::Statement: return make_statement_sketch(req, rng);
  case FeatureLevel::Clause: return make_clause_sketch(req, rng);
  case FeatureLevel::Expression: return make_expression_sketch(req, rng);
  case FeatureLevel::DataType: return make_datatype_sketch(req, rng);
  }
  throw Error("unknown feature level");
}

Sketch make_typed_expression_sketch(const Feature& type_feature,
                                    const std::string& type_name,
                                    const std::string& context_literal,
                                    Rng&) {
  Sketch s;
  s.feature = type_feature.id;
  s.schema = single_table({{kCol, type_name}});
  s.context_statements = {
      "CREATE TABLE " + kTab + " (" + kCol + " " + type_name + ")",
      "INSERT INTO " + kTab + " (" + kCol + ") VALUES (" + context_literal +
          "), (NULL)"};
  s.holed_statements = {"SELECT * FROM " + kTab + " WHERE {0}"};
  s.holes = {{0, HoleKind::LeafExpression}};
  s.check();
  return s;
}

std::string render_for_prompt(const Sketch& sketch) {
  std::string out;
  for (const auto* list : {&sketch.context_statements, &sketch.holed_statements})
    for (const auto& stmt : *list)
      out += stmt + ";\n";
  return out;
}

} // namespace sketchfuzz
