#include "fdf/ir.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

namespace fdf {

std::string_view to_string(BoxKind kind) {
  switch (kind) {
    case BoxKind::Processor: return "processor";
    case BoxKind::Coder: return "coder";
    case BoxKind::Trainer: return "trainer";
    case BoxKind::DataIO: return "DataIO";
    case BoxKind::FuncOut: return "FuncOut";
  }
  return "?";
}

std::string_view to_string(PortClass cls) {
  return cls == PortClass::Data ? "data" : "func";
}

const Port& Pipeline::port(PortId p) const {
  if (!contains(p)) {
    throw Error("E-UNKNOWN-PORT",
                "unknown port " + std::to_string(p.value) + " (pipeline has " +
                    std::to_string(ports.size()) + " ports)");
  }
  return ports[p.index()];
}

std::optional<BoxIndex> Pipeline::find_box(std::string_view id) const {
  for (BoxIndex i = 0; i < boxes.size(); ++i)
    if (boxes[i].id == id) return i;
  return std::nullopt;
}

std::vector<BoxIndex> Pipeline::user_boxes() const {
  std::vector<BoxIndex> out;
  for (BoxIndex i = 0; i < boxes.size(); ++i)
    if (!is_implicit(boxes[i].kind)) out.push_back(i);
  return out;
}

std::vector<PortId> Pipeline::ports_of(BoxIndex box, Direction dir, PortClass cls) const {
  std::vector<PortId> out;
  for (const Port& p : ports)
    if (p.box == box && p.direction == dir && p.cls == cls) out.push_back(p.id);
  std::sort(out.begin(), out.end(), [&](PortId a, PortId b) {
    return ports[a.index()].ordinal < ports[b.index()].ordinal;
  });
  return out;
}

std::vector<PortId> Pipeline::inputs_of(BoxIndex box) const {
  std::vector<PortId> out;
  for (const Port& p : ports)
    if (p.box == box && p.is_input()) out.push_back(p.id);
  return out;
}

std::vector<PortId> Pipeline::outputs_of(BoxIndex box) const {
  std::vector<PortId> out;
  for (const Port& p : ports)
    if (p.box == box && p.is_output()) out.push_back(p.id);
  return out;
}

std::string Pipeline::ref_of(PortId p) const {
  const Port& port = this->port(p);
  if (port.box == kDataIOBox || port.box == kFuncOutBox) return port.name;
  return boxes[port.box].id + "." + port.name;
}

// ---------------------------------------------------------------------------

PipelineBuilder::PipelineBuilder(std::string name) {
  p_.name = std::move(name);
  p_.boxes.push_back(Box{"DataIO", BoxKind::DataIO, std::nullopt, {}, {}});
  p_.boxes.push_back(Box{"FuncOut", BoxKind::FuncOut, std::nullopt, {}, {}});
}

BoxIndex PipelineBuilder::add_box(std::string id, BoxKind kind, std::optional<Param> param,
                                  std::string display_name, SourceSpan span) {
  p_.boxes.push_back(Box{std::move(id), kind, std::move(param), std::move(display_name), span});
  return p_.boxes.size() - 1;
}

PortId PipelineBuilder::add_port(BoxIndex box, Direction dir, PortClass cls, std::string name,
                                 std::optional<std::string> annotation, SourceSpan span) {
  std::size_t ordinal = 0;
  for (const Port& q : p_.ports)
    if (q.box == box && q.direction == dir && q.cls == cls) ++ordinal;
  Port port;
  port.id = PortId(static_cast<std::uint32_t>(p_.ports.size() + 1));
  port.direction = dir;
  port.cls = cls;
  port.box = box;
  port.name = std::move(name);
  port.annotation = std::move(annotation);
  port.ordinal = ordinal;
  port.span = span;
  p_.ports.push_back(std::move(port));
  p_.sigma.emplace_back();
  return p_.ports.back().id;
}

void PipelineBuilder::set_import(PortId p, ImportSignature sig) {
  p_.ports.at(p.index()).import = std::move(sig);
}

void PipelineBuilder::wire(PortId input, PortId output) { p_.sigma.at(input.index()) = output; }

void PipelineBuilder::add_directive(TypeDirective d) { p_.same_type.push_back(std::move(d)); }

Pipeline PipelineBuilder::build() && { return std::move(p_); }

// ---------------------------------------------------------------------------

namespace {

struct Counts {
  std::size_t in_data = 0, in_func = 0, out_data = 0, out_func = 0;
};

Counts count_ports(const Pipeline& p, BoxIndex b) {
  Counts c;
  for (const Port& q : p.ports) {
    if (q.box != b) continue;
    if (q.is_input())
      (q.cls == PortClass::Data ? c.in_data : c.in_func)++;
    else
      (q.cls == PortClass::Data ? c.out_data : c.out_func)++;
  }
  return c;
}

std::string box_label(const Box& b) {
  return std::string(to_string(b.kind)) + " '" + b.id + "'";
}

}  // namespace

std::vector<Diagnostic> validate_structure(const Pipeline& p) {
  std::vector<Diagnostic> out;

  auto arity = [&](const Box& b, bool ok, std::string_view what, std::size_t have) {
    if (ok) return;
    out.push_back(make_error(codes::kArity,
                             box_label(b) + " must have " + std::string(what) + ", has " +
                                 std::to_string(have),
                             b.span));
  };

  for (BoxIndex bi = 0; bi < p.boxes.size(); ++bi) {
    const Box& b = p.boxes[bi];
    const Counts c = count_ports(p, bi);
    switch (b.kind) {
      case BoxKind::Processor:
        arity(b, c.in_data >= 1, "one or more input data ports", c.in_data);
        arity(b, c.in_func <= 1, "zero or one input function port", c.in_func);
        arity(b, c.out_data >= 1, "one or more output data ports", c.out_data);
        arity(b, c.out_func == 0, "no output function port", c.out_func);
        if (c.in_func == 0 && !b.param)
          out.push_back(make_error(codes::kParam,
                                   box_label(b) + " needs either `predef` or `func`", b.span));
        if (c.in_func > 0 && b.param)
          out.push_back(make_error(
              codes::kParam, box_label(b) + " cannot take both `predef` and `func`", b.span));
        if (b.param && b.param->split)
          out.push_back(make_error(codes::kParam, box_label(b) + " does not take `k`", b.span));
        break;
      case BoxKind::Coder:
        arity(b, c.in_data >= 1, "one or more input data ports", c.in_data);
        arity(b, c.in_func == 0, "no input function port", c.in_func);
        arity(b, c.out_data == 0, "no output data port", c.out_data);
        arity(b, c.out_func >= 1 && c.out_func <= 2, "one or two output function ports",
              c.out_func);
        if (!b.param)
          out.push_back(make_error(codes::kParam, box_label(b) + " needs `predef`", b.span));
        else if (b.param->split)
          out.push_back(make_error(codes::kParam, box_label(b) + " does not take `k`", b.span));
        break;
      case BoxKind::Trainer:
        arity(b, c.in_data >= 2, "two or more input data ports", c.in_data);
        arity(b, c.in_func == 0, "no input function port", c.in_func);
        arity(b, c.out_data == 0, "no output data port", c.out_data);
        arity(b, c.out_func == 1, "exactly one output function port", c.out_func);
        if (!b.param || !b.param->split) {
          out.push_back(
              make_error(codes::kParam, box_label(b) + " needs both `k` and `predef`", b.span));
        } else if (*b.param->split < 1 || *b.param->split >= c.in_data) {
          out.push_back(make_error(codes::kParamK,
                                   box_label(b) + " has k=" + std::to_string(*b.param->split) +
                                       " but needs 1 <= k < " + std::to_string(c.in_data),
                                   b.span));
        }
        break;
      case BoxKind::DataIO:
        arity(b, c.in_func == 0 && c.out_func == 0, "no function ports",
              c.in_func + c.out_func);
        break;
      case BoxKind::FuncOut:
        arity(b, c.in_data == 0 && c.out_data == 0, "no data ports", c.in_data + c.out_data);
        break;
    }
  }

  for (const Port& q : p.ports) {
    if (q.is_output()) {
      if (q.box == kFuncOutBox && !q.import)
        out.push_back(make_error(codes::kArity,
                                 "function source '" + q.name + "' lacks a signature", q.span,
                                 {q.id}));
      continue;
    }
    const auto& src = p.sigma[q.index()];
    if (!src) {
      out.push_back(make_error(codes::kDangling,
                               "input port " + std::to_string(q.id.value) + " of " +
                                   box_label(p.boxes[q.box]) + " is not wired",
                               q.span, {q.id}));
      continue;
    }
    if (!p.contains(*src)) {
      out.push_back(make_error(codes::kDangling,
                               "input port " + std::to_string(q.id.value) +
                                   " is wired to a nonexistent port",
                               q.span, {q.id}));
      continue;
    }
    const Port& s = p.port(*src);
    if (!s.is_output()) {
      out.push_back(make_error(codes::kClass,
                               "input port " + std::to_string(q.id.value) +
                                   " is wired to input port " + std::to_string(s.id.value),
                               q.span, {q.id, s.id}));
    } else if (s.cls != q.cls) {
      out.push_back(make_error(codes::kClass,
                               std::string(to_string(q.cls)) + " input port " +
                                   std::to_string(q.id.value) + " is wired to " +
                                   std::string(to_string(s.cls)) + " output port " +
                                   std::to_string(s.id.value),
                               q.span, {q.id, s.id}));
    }
  }
  return out;
}

const Box& port_owner(const Pipeline& pipeline, PortId p) { return pipeline.owner(p); }

PortId source_of(const Pipeline& pipeline, PortId p) {
  const Port& port = pipeline.port(p);
  if (!port.is_input())
    throw Error("E-NOT-INPUT", "port " + std::to_string(p.value) + " is not an input port");
  const auto& src = pipeline.sigma[p.index()];
  if (!src)
    throw Error(codes::kDangling, "input port " + std::to_string(p.value) + " is not wired");
  return *src;
}

namespace {

using PortKey = std::tuple<std::string, int, int, std::size_t>;

PortKey key_of(const Pipeline& p, PortId id) {
  const Port& q = p.port(id);
  return {p.boxes[q.box].id, static_cast<int>(q.direction), static_cast<int>(q.cls), q.ordinal};
}

struct PortShape {
  std::string name;
  std::optional<std::string> annotation;
  std::optional<ImportSignature> import;
  std::optional<PortKey> source;
  bool operator==(const PortShape&) const = default;
};

std::map<PortKey, PortShape> shape_of(const Pipeline& p) {
  std::map<PortKey, PortShape> out;
  for (const Port& q : p.ports) {
    PortShape s{q.name, q.annotation, q.import, std::nullopt};
    if (q.is_input() && p.sigma[q.index()] && p.contains(*p.sigma[q.index()]))
      s.source = key_of(p, *p.sigma[q.index()]);
    out.emplace(key_of(p, q.id), std::move(s));
  }
  return out;
}

using OperandKey = std::pair<std::optional<PortKey>, std::string>;

std::vector<std::pair<OperandKey, OperandKey>> directives_of(const Pipeline& p) {
  std::vector<std::pair<OperandKey, OperandKey>> out;
  auto op = [&](const TypeDirective::Operand& o) {
    return OperandKey{o.port ? std::optional<PortKey>(key_of(p, *o.port)) : std::nullopt,
                      o.annotation};
  };
  for (const auto& d : p.same_type) out.emplace_back(op(d.lhs), op(d.rhs));
  return out;
}

}  // namespace

bool isomorphic(const Pipeline& a, const Pipeline& b) {
  if (a.name != b.name || a.boxes.size() != b.boxes.size() ||
      a.ports.size() != b.ports.size())
    return false;
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const Box& x = a.boxes[i];
    const Box& y = b.boxes[i];
    if (x.id != y.id || x.kind != y.kind || x.param != y.param ||
        x.display_name != y.display_name)
      return false;
  }
  return shape_of(a) == shape_of(b) && directives_of(a) == directives_of(b);
}

}  // namespace fdf
