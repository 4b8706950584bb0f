#include "fdf/diagnostic.hpp"

#include <algorithm>
#include <sstream>

namespace fdf {

Diagnostic make_error(std::string_view code, std::string message, SourceSpan span,
                      std::vector<PortId> ports) {
  return Diagnostic{Severity::Error, std::string(code), std::move(message), span,
                    std::move(ports)};
}

Diagnostic make_warning(std::string_view code, std::string message, SourceSpan span,
                        std::vector<PortId> ports) {
  return Diagnostic{Severity::Warning, std::string(code), std::move(message), span,
                    std::move(ports)};
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.is_error(); });
}

std::size_t count_code(const std::vector<Diagnostic>& diags, std::string_view code) {
  return static_cast<std::size_t>(std::count_if(
      diags.begin(), diags.end(), [&](const Diagnostic& d) { return d.code == code; }));
}

std::string render(const Diagnostic& d, std::string_view file) {
  std::ostringstream os;
  os << (d.is_error() ? "ERROR" : "WARNING") << ' ' << d.code << ' ' << file << ':'
     << d.span.line << ':' << d.span.column << ' ' << d.message << " [";
  for (std::size_t i = 0; i < d.ports.size(); ++i) {
    if (i) os << ',';
    os << d.ports[i].value;
  }
  os << ']';
  return os.str();
}

}  // namespace fdf
