#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/diagnostic.hpp"
#include "fdf/graph.hpp"
#include "fdf/library.hpp"
#include "fdf/mlkit.hpp"
#include "fdf/typing.hpp"

namespace fdf {

enum class BoxStatus { Blocked, Ready, Done, Failed };

std::string_view to_string(BoxStatus s);

struct RunInputs {
  std::map<PortId, DataBatch> data;         // DataIO output ports
  std::map<PortId, FunctionPtr> functions;  // FuncOut output ports (imports)
};

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::filesystem::path base_dir;  // for library behaviors reading files
};

struct RunResult {
  std::map<PortId, DataBatch> sinks;        // DataIO input ports
  std::map<PortId, FunctionPtr> exports;    // FuncOut input ports
  std::vector<std::string> log;             // `DONE <box> <ms> <ports>`, completion order
  std::vector<BoxStatus> status;            // per box index
  std::vector<Diagnostic> failures;         // box index order

  bool ok() const { return failures.empty(); }
};

/// Per-box seed derived from the run seed and the box id.
std::uint64_t box_seed(std::uint64_t run_seed, std::string_view box_id);

/// Why `f` cannot be bound to the import port `port`, if it cannot.
std::optional<std::string> import_mismatch(const Port& port, const LearnedFunction& f);

/// Executes the pipeline. Throws Error(E-MISSING-SOURCE / E-IMPORT) when the
/// inputs do not cover the implicit output ports; box-level failures are
/// reported in RunResult::failures and do not stop independent boxes.
RunResult run(const Pipeline& pipeline, const FdfGraph& graph, const TypeEnv& env,
              const Library& library, const RunInputs& inputs, const RunOptions& options = {});

}  // namespace fdf
