#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fdf {

/// Position of a construct in the original .fdf text. Lines and columns are
/// 1-based; a zero line means "no source location".
struct SourceSpan {
  int line = 0;
  int column = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Identifier of a port inside one pipeline. Ids are dense in [1, m].
struct PortId {
  std::uint32_t value = 0;

  constexpr PortId() = default;
  constexpr explicit PortId(std::uint32_t v) : value(v) {}

  constexpr std::size_t index() const { return value - 1; }
  friend constexpr auto operator<=>(PortId, PortId) = default;
};

enum class Severity { Error, Warning };

namespace codes {
inline constexpr std::string_view kSyntax = "E-SYNTAX";
inline constexpr std::string_view kDuplicate = "E-DUPLICATE";
inline constexpr std::string_view kUnknownRef = "E-UNKNOWN-REF";
inline constexpr std::string_view kKeyword = "E-KEYWORD";
inline constexpr std::string_view kArity = "E-ARITY";
inline constexpr std::string_view kDangling = "E-DANGLING";
inline constexpr std::string_view kClass = "E-CLASS";
inline constexpr std::string_view kParam = "E-PARAM";
inline constexpr std::string_view kParamK = "E-PARAM-K";
inline constexpr std::string_view kCycle = "E-CYCLE";
inline constexpr std::string_view kArityMismatch = "E-ARITY-MISMATCH";
inline constexpr std::string_view kInconsistentInput = "W-INCONSISTENT-INPUT";
inline constexpr std::string_view kAnnotClass = "E-ANNOT-CLASS";
inline constexpr std::string_view kUpstream = "E-UPSTREAM";
inline constexpr std::string_view kLibrary = "E-LIBRARY";
inline constexpr std::string_view kBatch = "E-BATCH";
inline constexpr std::string_view kRuntimeShape = "E-RUNTIME-SHAPE";
inline constexpr std::string_view kMissingSource = "E-MISSING-SOURCE";
inline constexpr std::string_view kImport = "E-IMPORT";
inline constexpr std::string_view kBoxFailed = "E-BOX-FAILED";
inline constexpr std::string_view kDegenerate = "E-DEGENERATE";
inline constexpr std::string_view kSingular = "E-SINGULAR";
inline constexpr std::string_view kBadArgument = "E-BAD-ARGUMENT";
inline constexpr std::string_view kDiverged = "E-DIVERGED";
}  // namespace codes

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  SourceSpan span;
  std::vector<PortId> ports;

  bool is_error() const { return severity == Severity::Error; }
};

Diagnostic make_error(std::string_view code, std::string message,
                      SourceSpan span = {}, std::vector<PortId> ports = {});
Diagnostic make_warning(std::string_view code, std::string message,
                        SourceSpan span = {}, std::vector<PortId> ports = {});

bool has_errors(const std::vector<Diagnostic>& diags);
std::size_t count_code(const std::vector<Diagnostic>& diags, std::string_view code);

/// `SEVERITY CODE file:line:col message [ports]`
std::string render(const Diagnostic& d, std::string_view file);

/// Operational failure carrying a diagnostic code (unknown port, bad artifact,
/// training divergence, ...). Diagnostics proper are returned as values.
class Error : public std::runtime_error {
 public:
  Error(std::string_view code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace fdf
