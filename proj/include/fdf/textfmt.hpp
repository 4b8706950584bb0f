#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/diagnostic.hpp"
#include "fdf/ir.hpp"

namespace fdf {

struct ParseResult {
  std::optional<Pipeline> pipeline;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return pipeline.has_value(); }
};

/// Parses `.fdf` text. Ports are numbered in declaration order and, when the
/// pipeline is structurally valid and acyclic, renumbered to the canonical
/// topological order. Structural problems are left for validate_structure;
/// only lexical/syntactic/name-resolution failures fail the parse.
ParseResult parse(std::string_view text);

/// Canonical text; parse(print(p)) is isomorphic to p.
std::string print(const Pipeline& pipeline);

/// Drops the exponent part of an annotation: everything from the first '^'
/// (when it is not the leading character). "V^E" -> "V".
std::string strip_exponent(std::string_view annotation);

}  // namespace fdf
