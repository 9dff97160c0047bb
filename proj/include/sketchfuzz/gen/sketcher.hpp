#pragma once

#include <optional>
#include <string>

#include "sketchfuzz/core/rng.hpp"
#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

struct SketchRequest {
  Feature feature;
  FeatureLevel level = FeatureLevel::Statement;
  // Expression sketches only; derived from the feature name when unset.
  std::optional<HoleKind> expression_hole;
  // Statement sketches only; drawn from 1..3 when unset.
  std::optional<std::size_t> statement_holes;
};

Sketch make_statement_sketch(const SketchRequest& req, Rng& rng);
Sketch make_clause_sketch(const SketchRequest& req, Rng& rng);
Sketch make_expression_sketch(const SketchRequest& req, Rng& rng);
Sketch make_datatype_sketch(const SketchRequest& req, Rng& rng);
// Dispatches on req.level.
Sketch make_sketch(const SketchRequest& req, Rng& rng);

// Expression sketch over a column of a learned data type, with a single
// LeafExpression hole. context_literal is a concrete literal of the type
// ("NULL" when none is known).
Sketch make_typed_expression_sketch(const Feature& type_feature,
                                    const std::string& type_name,
                                    const std::string& context_literal,
                                    Rng& rng);

// Which expression hole a feature name most likely fills: operators made
// of symbols or infix keywords are BinaryOperator, NOT-like words are
// UnaryPrefix, everything else is a FunctionName.
HoleKind expression_hole_for(std::string_view feature_name);

// Context, then holed statements, one per line, each ending with ';'.
std::string render_for_prompt(const Sketch& sketch);

} // namespace sketchfuzz
