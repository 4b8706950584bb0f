#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdf/diagnostic.hpp"
#include "fdf/graph.hpp"
#include "fdf/ir.hpp"
#include "fdf/library.hpp"

namespace fdf {

using TypeId = std::uint32_t;

/// ((inputs), (outputs)) over data-type ids.
struct FuncType {
  std::vector<TypeId> inputs;
  std::vector<TypeId> outputs;

  bool operator==(const FuncType&) const = default;
};

std::string to_string(const FuncType& t);

/// Implicit types of a pipeline. Data types live in a union-find over ids
/// 1..m (one per port) plus one extra node per distinct annotation label;
/// a class is named by its minimum member. Function types are tuples of
/// node ids and are canonicalized on read.
class TypeEnv {
 public:
  TypeEnv() = default;
  /// Every port at its default type; nothing resolved yet.
  explicit TypeEnv(const Pipeline& pipeline);

  std::size_t port_count() const { return port_count_; }
  std::size_t node_count() const { return parent_.size() - 1; }

  TypeId find(TypeId node) const;
  /// Merges two classes; the smaller representative wins. Returns it.
  TypeId unite(TypeId a, TypeId b);
  bool same(TypeId a, TypeId b) const { return find(a) == find(b); }

  bool resolved(PortId p) const { return resolved_[p.index()]; }
  std::optional<TypeId> data_type(PortId p) const;
  std::optional<FuncType> func_type(PortId p) const;
  FuncType canonical(const FuncType& t) const;

  void resolve_data(PortId p) { resolved_[p.index()] = true; }
  void resolve_func(PortId p, FuncType t);

  /// Node standing for a stripped annotation label, created on first use.
  TypeId annotation_node(const std::string& label);
  /// A new singleton node beyond the port ids.
  TypeId add_node(std::string label = {});
  std::optional<TypeId> find_annotation(const std::string& label) const;
  /// Stripped annotation labels attached to the class of `node`, sorted.
  std::vector<std::string> labels_of(TypeId node) const;

  /// Ids minted as fresh types during propagation, in minting order.
  const std::vector<TypeId>& minted() const { return minted_; }
  /// Records `id` as freshly minted. Returns false if `id` is not its own
  /// representative or is already the type of some resolved port.
  bool mint(TypeId id);
  std::size_t class_size(TypeId node) const;

 private:
  std::size_t port_count_ = 0;
  std::vector<TypeId> parent_;  // index 0 unused
  std::vector<bool> resolved_;
  std::vector<std::optional<FuncType>> func_;
  std::vector<std::string> node_label_;  // stripped annotation per node, or empty
  std::vector<TypeId> minted_;
};

struct TypingResult {
  TypeEnv env;
  std::vector<Diagnostic> diagnostics;
  bool fresh_ok = true;  // every minted type was fresh when minted
};

/// Unifies ports sharing a stripped annotation and applies `same_type`
/// directives. Annotated function ports give E-ANNOT-CLASS.
std::vector<Diagnostic> apply_annotations(const Pipeline& pipeline, TypeEnv& env);

/// Full inference: annotations, then defaults and the per-kind rules in
/// topological order. Requires a structurally valid, acyclic pipeline.
TypingResult propagate(const Pipeline& pipeline, const FdfGraph& graph, const Library& library);

}  // namespace fdf
