#include "fdf/typing.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fdf/textfmt.hpp"

namespace fdf {

std::string to_string(const FuncType& t) {
  auto tuple = [](const std::vector<TypeId>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(v[i]);
    }
    return s + ")";
  };
  return "(" + tuple(t.inputs) + "," + tuple(t.outputs) + ")";
}

// ---------------------------------------------------------------------------
// TypeEnv

TypeEnv::TypeEnv(const Pipeline& pipeline)
    : port_count_(pipeline.port_count()),
      parent_(pipeline.port_count() + 1),
      resolved_(pipeline.port_count(), false),
      func_(pipeline.port_count()),
      node_label_(pipeline.port_count() + 1) {
  for (TypeId i = 0; i < parent_.size(); ++i) parent_[i] = i;
  for (const Port& p : pipeline.ports)
    if (p.annotation && p.cls == PortClass::Data) node_label_[p.id.value] = strip_exponent(*p.annotation);
}

TypeId TypeEnv::find(TypeId node) const {
  while (parent_[node] != node) node = parent_[node];
  return node;
}

TypeId TypeEnv::unite(TypeId a, TypeId b) {
  a = find(a);
  b = find(b);
  if (a == b) return a;
  const TypeId lo = std::min(a, b);
  parent_[std::max(a, b)] = lo;
  return lo;
}

std::optional<TypeId> TypeEnv::data_type(PortId p) const {
  if (!resolved_[p.index()] || func_[p.index()]) return std::nullopt;
  return find(p.value);
}

FuncType TypeEnv::canonical(const FuncType& t) const {
  FuncType out;
  for (TypeId x : t.inputs) out.inputs.push_back(find(x));
  for (TypeId x : t.outputs) out.outputs.push_back(find(x));
  return out;
}

std::optional<FuncType> TypeEnv::func_type(PortId p) const {
  if (!resolved_[p.index()] || !func_[p.index()]) return std::nullopt;
  return canonical(*func_[p.index()]);
}

void TypeEnv::resolve_func(PortId p, FuncType t) {
  func_[p.index()] = std::move(t);
  resolved_[p.index()] = true;
}

TypeId TypeEnv::add_node(std::string label) {
  const auto id = static_cast<TypeId>(parent_.size());
  parent_.push_back(id);
  node_label_.push_back(std::move(label));
  return id;
}

std::optional<TypeId> TypeEnv::find_annotation(const std::string& label) const {
  for (std::size_t i = port_count_ + 1; i < node_label_.size(); ++i)
    if (node_label_[i] == label) return static_cast<TypeId>(i);
  return std::nullopt;
}

TypeId TypeEnv::annotation_node(const std::string& label) {
  if (auto id = find_annotation(label)) return *id;
  return add_node(label);
}

std::vector<std::string> TypeEnv::labels_of(TypeId node) const {
  const TypeId root = find(node);
  std::set<std::string> out;
  for (std::size_t i = 1; i < node_label_.size(); ++i)
    if (!node_label_[i].empty() && find(static_cast<TypeId>(i)) == root) out.insert(node_label_[i]);
  return {out.begin(), out.end()};
}

std::size_t TypeEnv::class_size(TypeId node) const {
  const TypeId root = find(node);
  std::size_t n = 0;
  for (std::size_t i = 1; i < parent_.size(); ++i)
    if (find(static_cast<TypeId>(i)) == root) ++n;
  return n;
}

bool TypeEnv::mint(TypeId id) {
  minted_.push_back(id);
  if (find(id) != id) return false;
  for (std::size_t i = 0; i < port_count_; ++i) {
    const PortId p(static_cast<std::uint32_t>(i + 1));
    if (auto t = data_type(p); t && *t == id) return false;
    if (auto f = func_type(p)) {
      for (TypeId x : f->inputs)
        if (x == id) return false;
      for (TypeId x : f->outputs)
        if (x == id) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Annotations

std::vector<Diagnostic> apply_annotations(const Pipeline& pipeline, TypeEnv& env) {
  std::vector<Diagnostic> diags;
  for (const Port& p : pipeline.ports) {
    if (p.annotation) {
      if (p.cls == PortClass::Function) {
        diags.push_back(make_error(codes::kAnnotClass,
                                   "annotation \"" + *p.annotation + "\" on function port " +
                                       std::to_string(p.id.value) +
                                       "; annotations describe data types",
                                   p.span, {p.id}));
      } else {
        env.unite(p.id.value, env.annotation_node(strip_exponent(*p.annotation)));
      }
    }
    if (p.import) {
      for (const auto& a : p.import->inputs)
        if (!a.empty()) env.annotation_node(strip_exponent(a));
      for (const auto& a : p.import->outputs)
        if (!a.empty()) env.annotation_node(strip_exponent(a));
    }
  }
  for (const TypeDirective& d : pipeline.same_type) {
    std::vector<TypeId> nodes;
    bool ok = true;
    for (const auto* op : {&d.lhs, &d.rhs}) {
      if (op->port) {
        const Port& p = pipeline.port(*op->port);
        if (p.cls == PortClass::Function) {
          diags.push_back(make_error(codes::kAnnotClass,
                                     "same_type names function port " +
                                         std::to_string(p.id.value) +
                                         "; only data types can be identified",
                                     d.span, {p.id}));
          ok = false;
        }
        nodes.push_back(p.id.value);
      } else {
        nodes.push_back(env.annotation_node(strip_exponent(op->annotation)));
      }
    }
    if (ok) env.unite(nodes[0], nodes[1]);
  }
  return diags;
}

// ---------------------------------------------------------------------------
// Propagation

namespace {

class Propagator {
 public:
  Propagator(const Pipeline& p, const Library& lib, TypingResult& r)
      : p_(p), lib_(lib), r_(r), env_(r.env), done_(p.boxes.size(), false) {}

  void visit(PortId id) {
    const Port& port = p_.port(id);
    if (port.is_input()) {
      copy_from_source(port);
      return;
    }
    if (!done_[port.box]) {
      done_[port.box] = true;
      run_box(port.box);
    }
  }

 private:
  void copy_from_source(const Port& q) {
    const auto& src = p_.sigma[q.index()];
    if (!src || !env_.resolved(*src)) return;
    if (q.cls == PortClass::Data) {
      env_.unite(q.id.value, src->value);
      env_.resolve_data(q.id);
    } else if (auto t = env_.func_type(*src)) {
      env_.resolve_func(q.id, *t);
    }
  }

  bool all_resolved(const std::vector<PortId>& ports) const {
    return std::all_of(ports.begin(), ports.end(), [&](PortId x) { return env_.resolved(x); });
  }

  std::vector<TypeId> nodes(const std::vector<PortId>& ports) const {
    std::vector<TypeId> out;
    for (PortId x : ports) out.push_back(x.value);
    return out;
  }

  std::string label(BoxIndex b) const {
    return std::string(to_string(p_.boxes[b].kind)) + " '" + p_.boxes[b].id + "'";
  }

  void mint(TypeId id) {
    if (!env_.mint(id)) r_.fresh_ok = false;
  }

  std::optional<Instance> lookup(BoxIndex b, Role role) {
    const Box& box = p_.boxes[b];
    try {
      return lib_.lookup(role, box.param ? box.param->predef : std::string());
    } catch (const Error& e) {
      r_.diagnostics.push_back(
          make_error(codes::kLibrary, label(b) + ": " + e.what(), box.span));
      return std::nullopt;
    }
  }

  void run_box(BoxIndex b) {
    switch (p_.boxes[b].kind) {
      case BoxKind::DataIO:
        for (PortId o : p_.ports_of(b, Direction::Output, PortClass::Data)) env_.resolve_data(o);
        break;
      case BoxKind::FuncOut:
        for (PortId o : p_.ports_of(b, Direction::Output, PortClass::Function)) import_type(o);
        break;
      case BoxKind::Coder: coder(b); break;
      case BoxKind::Trainer: trainer(b); break;
      case BoxKind::Processor: processor(b); break;
    }
  }

  void import_type(PortId o) {
    const Port& port = p_.port(o);
    if (!port.import) return;
    auto slot = [&](const std::string& a) {
      return a.empty() ? env_.add_node() : env_.annotation_node(strip_exponent(a));
    };
    FuncType t;
    for (const auto& a : port.import->inputs) t.inputs.push_back(slot(a));
    for (const auto& a : port.import->outputs) t.outputs.push_back(slot(a));
    env_.resolve_func(o, std::move(t));
  }

  void coder(BoxIndex b) {
    const auto ins = p_.ports_of(b, Direction::Input, PortClass::Data);
    const auto outs = p_.ports_of(b, Direction::Output, PortClass::Function);
    if (outs.empty()) return;
    auto inst = lookup(b, Role::Coder);
    if (!inst || !all_resolved(ins)) return;
    TypeId out_t = 0;
    if (inst->entry->type_override == TypeOverride::OutEqIn1) {
      out_t = ins.front().value;
    } else {
      out_t = std::min_element(outs.begin(), outs.end())->value;
      mint(out_t);
    }
    env_.resolve_func(outs[0], FuncType{nodes(ins), {out_t}});
    if (outs.size() > 1) env_.resolve_func(outs[1], FuncType{{out_t}, nodes(ins)});
  }

  void trainer(BoxIndex b) {
    const auto ins = p_.ports_of(b, Direction::Input, PortClass::Data);
    const auto outs = p_.ports_of(b, Direction::Output, PortClass::Function);
    const Box& box = p_.boxes[b];
    if (outs.size() != 1 || !box.param || !box.param->split) return;
    auto inst = lookup(b, Role::Trainer);
    if (!inst || !all_resolved(ins)) return;
    const std::size_t k = *box.param->split;
    if (k < 1 || k >= ins.size()) return;
    const auto all = nodes(ins);
    env_.resolve_func(outs[0], FuncType{{all.begin(), all.begin() + static_cast<long>(k)},
                                        {all.begin() + static_cast<long>(k), all.end()}});
  }

  void processor(BoxIndex b) {
    const Box& box = p_.boxes[b];
    const auto ins = p_.ports_of(b, Direction::Input, PortClass::Data);
    const auto outs = p_.ports_of(b, Direction::Output, PortClass::Data);
    const auto fin = p_.ports_of(b, Direction::Input, PortClass::Function);
    std::vector<PortId> involved = ins;
    involved.insert(involved.end(), outs.begin(), outs.end());

    if (!fin.empty()) {
      const PortId pf = fin.front();
      auto t = env_.func_type(pf);
      if (!t) {
        r_.diagnostics.push_back(make_error(
            codes::kUpstream,
            label(b) + ": the function on port " + std::to_string(pf.value) +
                " has no type because of an upstream error",
            box.span, {pf}));
        return;
      }
      if (t->inputs.size() != ins.size() || t->outputs.size() != outs.size()) {
        std::vector<PortId> ports{pf};
        ports.insert(ports.end(), involved.begin(), involved.end());
        r_.diagnostics.push_back(make_error(
            codes::kArityMismatch,
            label(b) + ": function " + to_string(*t) + " takes " +
                std::to_string(t->inputs.size()) + " input(s) and gives " +
                std::to_string(t->outputs.size()) + " output(s), box has " +
                std::to_string(ins.size()) + " and " + std::to_string(outs.size()),
            box.span, ports));
        return;
      }
      if (!all_resolved(ins)) return;
      for (std::size_t j = 0; j < ins.size(); ++j) {
        const TypeId have = env_.find(ins[j].value);
        if (have != t->inputs[j]) {
          r_.diagnostics.push_back(make_warning(
              codes::kInconsistentInput,
              label(b) + ": input " + std::to_string(j + 1) + " (port " +
                  std::to_string(ins[j].value) + ") has type " + std::to_string(have) +
                  " but the function on port " + std::to_string(pf.value) + " expects " +
                  std::to_string(t->inputs[j]),
              box.span, {ins[j], pf}));
        }
      }
      for (std::size_t j = 0; j < outs.size(); ++j) {
        env_.unite(outs[j].value, t->outputs[j]);
        env_.resolve_data(outs[j]);
      }
      return;
    }

    auto inst = lookup(b, Role::Processor);
    if (!inst) return;
    const LibrarySignature& sig = inst->entry->signature;
    if (sig.inputs != ins.size() || sig.outputs != outs.size()) {
      r_.diagnostics.push_back(make_error(
          codes::kArityMismatch,
          label(b) + ": '" + inst->entry->name + "' takes " + std::to_string(sig.inputs) +
              " input(s) and gives " + std::to_string(sig.outputs) + " output(s), box has " +
              std::to_string(ins.size()) + " and " + std::to_string(outs.size()),
          box.span, involved));
      return;
    }
    if (!all_resolved(ins)) return;
    auto slot_port = [&](std::size_t s) { return s <= ins.size() ? ins[s - 1] : outs[s - ins.size() - 1]; };

    for (const auto& part : sig.partitions) {
      std::vector<PortId> in_members, out_members;
      for (std::size_t s : part) (s <= ins.size() ? in_members : out_members).push_back(slot_port(s));
      if (!in_members.empty()) {
        const TypeId first = env_.find(in_members.front().value);
        for (std::size_t j = 1; j < in_members.size(); ++j) {
          const TypeId other = env_.find(in_members[j].value);
          if (other != first) {
            r_.diagnostics.push_back(make_warning(
                codes::kInconsistentInput,
                label(b) + ": ports " + std::to_string(in_members.front().value) + " and " +
                    std::to_string(in_members[j].value) + " share a partition of '" +
                    inst->entry->name + "' but have types " + std::to_string(first) + " and " +
                    std::to_string(other),
                box.span, {in_members.front(), in_members[j]}));
          }
        }
        for (PortId o : out_members) env_.unite(o.value, in_members.front().value);
      } else if (!out_members.empty()) {
        const TypeId fresh = std::min_element(out_members.begin(), out_members.end())->value;
        mint(fresh);
        for (PortId o : out_members) env_.unite(o.value, fresh);
      }
    }
    for (PortId o : outs) env_.resolve_data(o);
  }

  const Pipeline& p_;
  const Library& lib_;
  TypingResult& r_;
  TypeEnv& env_;
  std::vector<bool> done_;
};

}  // namespace

TypingResult propagate(const Pipeline& pipeline, const FdfGraph& graph, const Library& library) {
  TypingResult r;
  r.env = TypeEnv(pipeline);
  r.diagnostics = apply_annotations(pipeline, r.env);

  std::vector<PortId> order;
  if (graph.topo) {
    order = *graph.topo;
  } else {
    FdfGraph g = graph;
    if (auto cycle = check_well_formed(g))
      throw Error(codes::kCycle, "cannot type a cyclic pipeline");
    order = *g.topo;
  }
  Propagator walk(pipeline, library, r);
  for (PortId p : order) walk.visit(p);
  return r;
}

}  // namespace fdf
