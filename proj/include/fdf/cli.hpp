#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/diagnostic.hpp"
#include "fdf/graph.hpp"
#include "fdf/ir.hpp"
#include "fdf/library.hpp"
#include "fdf/typing.hpp"

namespace fdf {

/// Everything `check` learns about a source text. `run` goes through the
/// same function and refuses to execute unless exit_code() is 0.
struct CheckOutcome {
  std::optional<Pipeline> pipeline;
  std::optional<FdfGraph> graph;
  std::optional<TypingResult> typing;
  std::vector<Diagnostic> diagnostics;
  bool parse_failed = false;

  /// 0: clean or warnings only, 1: errors, 2: parse failure.
  int exit_code() const;
};

/// Parse, structure, graph, cycle check and typing. With `strict`, warnings
/// are promoted to errors.
CheckOutcome check_source(std::string_view text, const Library& library, bool strict = false);

/// DOT rendering. Box level by default; `ports` draws one node per port.
std::string to_dot(const Pipeline& pipeline, bool ports = false);

/// A `same_type` directive that silences a W-INCONSISTENT-INPUT diagnostic,
/// in textual form (`same_type a b`). Candidates are checked by re-running
/// propagation; nullopt when none works.
std::optional<std::string> suggest_same_type(const Pipeline& pipeline, const FdfGraph& graph,
                                             const TypingResult& typing, const Library& library,
                                             const Diagnostic& d);

/// Library used by the command line: builtins, case-study surrogates, then
/// FDF_LIBRARY_MANIFEST.
Library cli_library();

/// Entry point of the `fdf` executable.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fdf
