#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/diagnostic.hpp"

namespace fdf {

enum class BoxKind { Processor, Coder, Trainer, DataIO, FuncOut };
enum class Direction { Input, Output };
enum class PortClass { Data, Function };

std::string_view to_string(BoxKind kind);
std::string_view to_string(PortClass cls);

inline bool is_implicit(BoxKind kind) {
  return kind == BoxKind::DataIO || kind == BoxKind::FuncOut;
}

/// Box parameter. Coders and predefined Processors carry only `predef`;
/// Trainers also carry the X/Y split `k`.
struct Param {
  std::string predef;
  std::optional<unsigned> split;

  bool operator==(const Param&) const = default;
};

using BoxIndex = std::size_t;
inline constexpr BoxIndex kDataIOBox = 0;
inline constexpr BoxIndex kFuncOutBox = 1;

struct Box {
  std::string id;
  BoxKind kind = BoxKind::Processor;
  std::optional<Param> param;
  std::string display_name;
  SourceSpan span;
};

/// Declared signature of an imported function: one annotation per slot.
struct ImportSignature {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  bool operator==(const ImportSignature&) const = default;
};

struct Port {
  PortId id;
  Direction direction = Direction::Input;
  PortClass cls = PortClass::Data;
  BoxIndex box = 0;
  // Output ports: the declared local name. Sink/export inputs: the wired ref.
  std::string name;
  std::optional<std::string> annotation;
  // Position among the owning box's ports of the same direction and class, in
  // declaration order. This is the "first k inputs" order for Trainers.
  std::size_t ordinal = 0;
  std::optional<ImportSignature> import;
  SourceSpan span;

  std::size_t index() const { return id.index(); }
  bool is_input() const { return direction == Direction::Input; }
  bool is_output() const { return direction == Direction::Output; }
};

/// `same_type a b`: each operand is either a port or a bare annotation label.
struct TypeDirective {
  struct Operand {
    std::optional<PortId> port;
    std::string annotation;
  };
  Operand lhs;
  Operand rhs;
  SourceSpan span;
};

/// The formal pipeline tuple: boxes with kinds and params, ports with class
/// and owner, and the wiring map from every input port to its source output.
/// boxes[0] is DataIO, boxes[1] is FuncOut, user boxes follow in declaration
/// order. ports[i].id == i + 1.
struct Pipeline {
  std::string name;
  std::vector<Box> boxes;
  std::vector<Port> ports;
  std::vector<std::optional<PortId>> sigma;  // indexed like `ports`
  std::vector<TypeDirective> same_type;

  std::size_t port_count() const { return ports.size(); }
  bool contains(PortId p) const { return p.value >= 1 && p.value <= ports.size(); }
  const Port& port(PortId p) const;  // throws Error on unknown port
  const Box& owner(PortId p) const { return boxes[port(p).box]; }

  std::optional<BoxIndex> find_box(std::string_view id) const;
  std::vector<BoxIndex> user_boxes() const;

  /// Ports of `box` with the given direction and class, ordered by ordinal.
  std::vector<PortId> ports_of(BoxIndex box, Direction dir, PortClass cls) const;
  std::vector<PortId> inputs_of(BoxIndex box) const;
  std::vector<PortId> outputs_of(BoxIndex box) const;

  /// Human-readable reference of an output port: source name or box.port.
  std::string ref_of(PortId p) const;
};

/// Incremental construction used by the parser and by tests.
class PipelineBuilder {
 public:
  explicit PipelineBuilder(std::string name = {});

  BoxIndex add_box(std::string id, BoxKind kind, std::optional<Param> param = {},
                   std::string display_name = {}, SourceSpan span = {});
  PortId add_port(BoxIndex box, Direction dir, PortClass cls, std::string name = {},
                  std::optional<std::string> annotation = {}, SourceSpan span = {});
  void set_import(PortId p, ImportSignature sig);
  void wire(PortId input, PortId output);
  void add_directive(TypeDirective d);

  const Pipeline& peek() const { return p_; }
  Pipeline build() &&;

 private:
  Pipeline p_;
};

/// One diagnostic per violated arity rule, dangling input, class mismatch,
/// out-of-range Trainer split, or missing/extraneous parameter.
std::vector<Diagnostic> validate_structure(const Pipeline& pipeline);

const Box& port_owner(const Pipeline& pipeline, PortId p);
PortId source_of(const Pipeline& pipeline, PortId p);

/// Structural equality up to port renumbering.
bool isomorphic(const Pipeline& a, const Pipeline& b);

}  // namespace fdf
