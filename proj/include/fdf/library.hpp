#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/mlkit.hpp"

namespace fdf {

enum class Role { Coder, Trainer, Processor };
enum class TypeOverride { None, OutEqIn1 };

std::string_view to_string(Role role);
std::optional<Role> role_from(std::string_view name);

/// Weak type information for a predefined function. Slots 1..inputs are the
/// inputs and inputs+1..inputs+outputs the outputs; slots in one partition
/// share a type. Zero arities mean "any number" (coders and trainers).
struct LibrarySignature {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<std::vector<std::size_t>> partitions;

  bool operator==(const LibrarySignature&) const = default;
};

/// `name(pos, ..., key=value, ...)`, as written in a `predef` string.
struct CallSpec {
  std::string name;
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> named;
};

CallSpec parse_call(std::string_view text);

/// Named arguments already checked against a schema.
class Arguments {
 public:
  Arguments(std::string callee, CallSpec call);

  const std::vector<std::string>& positional() const { return call_.positional; }
  bool has(std::string_view key) const;
  std::string text(std::string_view key, std::string fallback) const;
  double number(std::string_view key, double fallback) const;
  long integer(std::string_view key, long fallback) const;
  long positional_integer(std::size_t i) const;

  [[noreturn]] void fail(const std::string& what) const;

 private:
  const std::string* find(std::string_view key) const;
  std::string callee_;
  CallSpec call_;
};

/// Context handed to behaviors at execution time.
struct RunContext {
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;
};

using CoderBehavior = std::function<CoderPair(std::span<const DataBatch>, const RunContext&)>;
using TrainerBehavior = std::function<FunctionPtr(
    std::span<const DataBatch> x, std::span<const DataBatch> y, const RunContext&)>;
using ProcessorBehavior =
    std::function<std::vector<DataBatch>(std::span<const DataBatch>, const RunContext&)>;

/// Exactly one member is set, matching the entry's role. Behaviors are
/// stateless closures and may be invoked concurrently.
struct Behavior {
  CoderBehavior coder;
  TrainerBehavior trainer;
  ProcessorBehavior processor;
};

struct ParamSchema {
  std::vector<std::string> keys;
  std::size_t max_positional = 0;
};

using Factory = std::function<Behavior(const Arguments&)>;

/// A compiled-in constructor that manifest entries may point at.
struct FactoryDef {
  std::string id;
  Role role = Role::Processor;
  ParamSchema schema;
  Factory make;
};

struct PredefEntry {
  std::string name;
  Role role = Role::Processor;
  LibrarySignature signature;
  TypeOverride type_override = TypeOverride::None;
  std::string factory;  // FactoryDef id
};

struct Instance {
  const PredefEntry* entry = nullptr;
  Behavior behavior;
};

namespace codes {
inline constexpr std::string_view kUnknownName = "E-UNKNOWN-NAME";
inline constexpr std::string_view kDuplicateName = "E-DUPLICATE-NAME";
}  // namespace codes

class Library {
 public:
  /// pca, standardize, linreg, mlp, dlinss, sub, add, identity, linmap.
  static Library builtin();

  void register_factory(FactoryDef def);
  void register_entry(PredefEntry entry);
  /// Factory and entry under the same name.
  void register_builtin(FactoryDef def, LibrarySignature sig,
                        TypeOverride override = TypeOverride::None);

  const PredefEntry* find(Role role, std::string_view name) const;
  std::vector<const PredefEntry*> entries() const;

  /// Parses `call`, checks its arguments against the schema and builds the
  /// behavior. Throws Error(E-UNKNOWN-NAME / E-BAD-ARGUMENT).
  Instance lookup(Role role, std::string_view call) const;

  /// `predef <role> <name> k=.. k'=.. partitions=[[..]] override=.. factory=..`
  void load_manifest_text(std::string_view text, std::string_view origin = "<manifest>");
  void load_manifest(const std::filesystem::path& path);

 private:
  std::map<std::string, FactoryDef> factories_;
  std::vector<std::unique_ptr<PredefEntry>> entries_;
};

/// Builtins, then `extend` (extra compiled-in factories), then the manifest
/// named by FDF_LIBRARY_MANIFEST if set.
Library default_library(const std::function<void(Library&)>& extend = nullptr);

}  // namespace fdf
