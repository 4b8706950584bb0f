#include "fdf/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fdf/casestudies.hpp"
#include "fdf/engine.hpp"
#include "fdf/store.hpp"
#include "fdf/textfmt.hpp"

namespace fdf {

namespace fs = std::filesystem;

int CheckOutcome::exit_code() const {
  if (parse_failed) return 2;
  return has_errors(diagnostics) ? 1 : 0;
}

namespace {

bool silences(const Pipeline& p, const FdfGraph& g, const Library& library, const Diagnostic& d,
              const TypeDirective& directive) {
  Pipeline trial = p;
  trial.same_type.push_back(directive);
  const TypingResult r = propagate(trial, g, library);
  if (has_errors(r.diagnostics)) return false;
  for (const Diagnostic& e : r.diagnostics)
    if (e.code == d.code && e.ports == d.ports) return false;
  return true;
}

std::string operand_text(const Pipeline& p, const TypeDirective::Operand& o) {
  if (o.port) return p.ref_of(*o.port);
  return "\"" + o.annotation + "\"";
}

}  // namespace

std::optional<std::string> suggest_same_type(const Pipeline& p, const FdfGraph& g,
                                             const TypingResult& typing, const Library& library,
                                             const Diagnostic& d) {
  if (d.code != codes::kInconsistentInput || d.ports.size() != 2) return std::nullopt;
  const Port& a = p.port(d.ports[0]);
  const Port& b = p.port(d.ports[1]);
  const auto& src_a = p.sigma[a.index()];
  if (!src_a) return std::nullopt;

  std::vector<TypeDirective> candidates;
  auto add = [&](TypeDirective::Operand rhs) {
    TypeDirective t;
    t.lhs.port = *src_a;
    t.rhs = std::move(rhs);
    candidates.push_back(std::move(t));
  };
  if (a.cls == PortClass::Data && b.cls == PortClass::Data) {
    if (const auto& src_b = p.sigma[b.index()]) add({*src_b, {}});
  } else if (a.cls == PortClass::Data && b.cls == PortClass::Function) {
    const auto f = typing.env.func_type(b.id);
    if (!f) return std::nullopt;
    const auto ins = p.ports_of(a.box, Direction::Input, PortClass::Data);
    const auto at = static_cast<std::size_t>(std::find(ins.begin(), ins.end(), a.id) - ins.begin());
    if (at >= f->inputs.size()) return std::nullopt;
    const TypeId want = f->inputs[at];
    for (const std::string& label : typing.env.labels_of(want)) add({std::nullopt, label});
    for (const Port& q : p.ports)
      if (q.is_output() && q.cls == PortClass::Data && typing.env.data_type(q.id) == want)
        add({q.id, {}});
  }
  for (const TypeDirective& t : candidates)
    if (silences(p, g, library, d, t))
      return "same_type " + operand_text(p, t.lhs) + " " + operand_text(p, t.rhs);
  return std::nullopt;
}

CheckOutcome check_source(std::string_view text, const Library& library, bool strict) {
  CheckOutcome out;
  ParseResult parsed = parse(text);
  out.diagnostics = std::move(parsed.diagnostics);
  if (!parsed.ok()) {
    out.parse_failed = true;
    return out;
  }
  out.pipeline = std::move(parsed.pipeline);
  const Pipeline& p = *out.pipeline;

  auto structural = validate_structure(p);
  const bool broken = has_errors(structural);
  out.diagnostics.insert(out.diagnostics.end(), structural.begin(), structural.end());
  if (broken) return out;

  FdfGraph g = build_graph(p);
  if (auto cycle = check_well_formed(g)) {
    std::string path;
    for (PortId q : cycle->ports) path += std::to_string(q.value) + " -> ";
    path += std::to_string(cycle->ports.front().value);
    out.diagnostics.push_back(make_error(codes::kCycle, "the FDF graph has a cycle: " + path,
                                         p.port(cycle->ports.front()).span, cycle->ports));
    out.graph = std::move(g);
    return out;
  }
  out.graph = std::move(g);

  TypingResult typing = propagate(p, *out.graph, library);
  for (Diagnostic& d : typing.diagnostics) {
    if (d.code == codes::kInconsistentInput)
      if (auto hint = suggest_same_type(p, *out.graph, typing, library, d))
        d.message += "; if both are the same type, add `" + *hint + "`";
    out.diagnostics.push_back(d);
  }
  out.typing = std::move(typing);

  if (strict)
    for (Diagnostic& d : out.diagnostics)
      if (d.severity == Severity::Warning) {
        d.severity = Severity::Error;
        d.message += " (promoted by --strict)";
      }
  return out;
}

// ---------------------------------------------------------------------------
// DOT

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string box_node(BoxIndex b) { return "b" + std::to_string(b); }

std::string box_attrs(const Box& b) {
  std::string label = b.display_name.empty() ? b.id : b.display_name + "\n(" + b.id + ")";
  if (b.param) {
    label += "\n";
    if (b.param->split) label += "k=" + std::to_string(*b.param->split) + ", ";
    label += b.param->predef;
  }
  std::string shape;
  switch (b.kind) {
    case BoxKind::Processor: shape = "shape=box, style=filled, fillcolor=lightblue"; break;
    case BoxKind::Coder: shape = "shape=trapezium, style=filled, fillcolor=palegreen"; break;
    case BoxKind::Trainer: shape = "shape=pentagon, style=filled, fillcolor=thistle"; break;
    case BoxKind::DataIO:
    case BoxKind::FuncOut: shape = "shape=none"; break;
  }
  return "[label=" + dot_quote(label) + ", " + shape + "]";
}

std::string edge_style(PortClass cls) {
  return cls == PortClass::Function ? "color=red, style=dashed" : "color=black, style=solid";
}

}  // namespace

std::string to_dot(const Pipeline& p, bool ports) {
  std::ostringstream os;
  os << "digraph " << dot_quote(p.name) << " {\n";
  std::set<BoxIndex> used;
  for (const Port& q : p.ports) used.insert(q.box);
  if (!p.ports.empty() || p.boxes.size() > 2) os << "  rankdir=LR;\n";

  if (!ports) {
    for (BoxIndex b = 0; b < p.boxes.size(); ++b) {
      if (is_implicit(p.boxes[b].kind) && !used.count(b)) continue;
      os << "  " << box_node(b) << " " << box_attrs(p.boxes[b]) << ";\n";
    }
    for (const Port& q : p.ports) {
      const auto& src = p.sigma[q.index()];
      if (!q.is_input() || !src || !p.contains(*src)) continue;
      os << "  " << box_node(p.port(*src).box) << " -> " << box_node(q.box)
         << " [label=" << dot_quote(std::to_string(src->value) + "->" + std::to_string(q.id.value))
         << ", " << edge_style(q.cls) << "];\n";
    }
    os << "}\n";
    return os.str();
  }

  for (BoxIndex b = 0; b < p.boxes.size(); ++b) {
    if (!used.count(b)) continue;
    const Box& box = p.boxes[b];
    os << "  subgraph cluster_" << b << " {\n";
    os << "    label=" << dot_quote(box.display_name.empty() ? box.id : box.display_name) << ";\n";
    for (const Port& q : p.ports) {
      if (q.box != b) continue;
      std::string label = std::to_string(q.id.value);
      if (!q.name.empty() && q.is_output()) label += " " + q.name;
      os << "    p" << q.id.value << " [label=" << dot_quote(label) << ", shape="
         << (q.is_input() ? "circle" : "doublecircle") << ", color="
         << (q.cls == PortClass::Function ? "red" : "black") << "];\n";
    }
    os << "  }\n";
  }
  for (const Port& q : p.ports) {
    const auto& src = p.sigma[q.index()];
    if (q.is_input() && src && p.contains(*src))
      os << "  p" << src->value << " -> p" << q.id.value << " [" << edge_style(q.cls) << "];\n";
  }
  for (BoxIndex b : p.user_boxes())
    for (PortId i : p.inputs_of(b))
      for (PortId o : p.outputs_of(b))
        os << "  p" << i.value << " -> p" << o.value << " [color=gray, style=dotted];\n";
  os << "}\n";
  return os.str();
}

Library cli_library() { return default_library(cases::register_surrogates); }

// ---------------------------------------------------------------------------
// Commands

namespace {

std::optional<std::string> read_source(const std::string& path, std::ostream& err) {
  try {
    return read_file(path);
  } catch (const Error& e) {
    err << "ERROR " << e.code() << " " << e.what() << "\n";
    return std::nullopt;
  }
}

void print_diagnostics(const CheckOutcome& c, const std::string& file, std::ostream& os) {
  for (const auto& d : c.diagnostics) os << render(d, file) << "\n";
}

int cmd_check(const std::string& file, bool strict, std::ostream& out, std::ostream& err) {
  auto text = read_source(file, err);
  if (!text) return 2;
  const Library lib = cli_library();
  const CheckOutcome c = check_source(*text, lib, strict);
  print_diagnostics(c, file, out);
  return c.exit_code();
}

int cmd_graph(const std::string& file, bool ports, std::ostream& out, std::ostream& err) {
  auto text = read_source(file, err);
  if (!text) return 2;
  ParseResult r = parse(*text);
  if (!r.ok()) {
    for (const auto& d : r.diagnostics) err << render(d, file) << "\n";
    return 2;
  }
  out << to_dot(*r.pipeline, ports);
  return 0;
}

std::string slot_text(const SlotSignature& s) {
  std::string out = "type " + std::to_string(s.type);
  if (!s.annotations.empty()) {
    out += " {";
    for (std::size_t i = 0; i < s.annotations.size(); ++i)
      out += (i ? ", " : "") + s.annotations[i];
    out += "}";
  }
  return out;
}

void describe(const LearnedFunction& f, std::ostream& out, const std::string& indent) {
  auto widths = [](const std::vector<Index>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
  };
  out << indent << "kind: " << to_string(f.kind) << "\n";
  out << indent << "in widths: " << widths(f.in_widths) << "\n";
  out << indent << "out widths: " << widths(f.out_widths) << "\n";
  for (std::size_t i = 0; i < f.signature.inputs.size(); ++i)
    out << indent << "in slot " << i + 1 << ": " << slot_text(f.signature.inputs[i]) << "\n";
  for (std::size_t i = 0; i < f.signature.outputs.size(); ++i)
    out << indent << "out slot " << i + 1 << ": " << slot_text(f.signature.outputs[i]) << "\n";
  if (!f.provenance.pipeline.empty() || !f.provenance.box.empty())
    out << indent << "provenance: pipeline " << f.provenance.pipeline << ", box "
        << f.provenance.box << ", port " << f.provenance.port << ", seed " << f.provenance.seed
        << "\n";
  if (f.kind == FunctionKind::Mlp) {
    const Matrix& h = f.param("hidden");
    std::string layers;
    for (Index j = 0; j < h.cols(); ++j)
      layers += (j ? "," : "") + std::to_string(static_cast<long>(h(0, j)));
    out << indent << "hidden layers: (" << layers << ")\n";
  }
  if (f.kind == FunctionKind::PcaEncode || f.kind == FunctionKind::PcaDecode) {
    const Matrix& e = f.param("explained");
    out << indent << "components: " << e.cols() << " (explained variance " << e.sum() << ")\n";
  }
  if (const double w = f.scalar("window", 0); w > 0)
    out << indent << "window: " << static_cast<long>(w) << "\n";
  if (f.kind == FunctionKind::Dlinss)
    out << indent << "state order: " << f.param("A").rows() << "\n";
  for (const auto& n : f.notes) out << indent << "note: " << n << "\n";
  for (std::size_t i = 0; i < f.stages.size(); ++i) {
    out << indent << "stage " << i + 1 << ":\n";
    describe(*f.stages[i], out, indent + "  ");
  }
}

int cmd_inspect(const std::string& file, std::ostream& out, std::ostream& err) {
  try {
    describe(*load_function(file), out, "");
    return 0;
  } catch (const Error& e) {
    err << "ERROR " << e.code() << " " << e.what() << "\n";
    return 1;
  }
}

struct RunArgs {
  std::string file;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool strict = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  auto text = read_source(a.file, err);
  if (!text) return 2;
  const Library lib = cli_library();
  const CheckOutcome c = check_source(*text, lib, a.strict);
  print_diagnostics(c, a.file, err);
  if (c.exit_code() != 0) return c.exit_code();
  const Pipeline& p = *c.pipeline;

  try {
    const DataManifest manifest = load_data_manifest(a.data);
    RunInputs inputs;
    for (PortId o : p.ports_of(kDataIOBox, Direction::Output, PortClass::Data)) {
      const std::string& name = p.port(o).name;
      const ManifestEntry* e = manifest.source(name);
      if (!e)
        throw Error(codes::kMissingSource, "manifest " + a.data + " has no entry for source '" + name + "'");
      inputs.data.emplace(o, load_batch(e->path));
    }
    for (PortId o : p.ports_of(kFuncOutBox, Direction::Output, PortClass::Function)) {
      const std::string& name = p.port(o).name;
      const ManifestEntry* e = manifest.source(name);
      if (!e)
        throw Error(codes::kMissingSource,
                    "manifest " + a.data + " has no entry for function source '" + name + "'");
      inputs.functions.emplace(o, load_function(e->path));
    }

    RunOptions opts;
    opts.seed = a.seed;
    opts.jobs = a.jobs;
    opts.base_dir = fs::path(a.file).parent_path();
    const RunResult r = run(p, *c.graph, c.typing->env, lib, inputs, opts);
    for (const auto& line : r.log) out << line << "\n";

    const fs::path dir(a.out);
    for (const auto& [port, batch] : r.sinks) {
      const std::string& ref = p.port(port).name;
      const ManifestEntry* e = manifest.sink(ref);
      save_batch(batch, e ? e->path : dir / (ref + ".csv"));
    }
    for (const auto& [port, f] : r.exports)
      save_function(*f, dir / (p.port(port).name + ".fdfn"));

    for (const auto& d : r.failures) err << render(d, a.file) << "\n";
    return r.ok() ? 0 : 1;
  } catch (const Error& e) {
    err << "ERROR " << e.code() << " " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Function+Data Flow pipelines: check, draw, run and inspect", "fdf"};
  app.require_subcommand(1);

  std::string file;
  bool strict = false;
  auto* check = app.add_subcommand("check", "Parse, validate and type-check a pipeline");
  check->add_option("file", file, "Pipeline (.fdf)")->required();
  check->add_flag("--strict", strict, "Treat warnings as errors");

  bool dot = false, ports = false;
  auto* graph = app.add_subcommand("graph", "Print the pipeline as a DOT digraph");
  graph->add_option("file", file, "Pipeline (.fdf)")->required();
  graph->add_flag("--dot", dot, "DOT output (the only format)");
  graph->add_flag("--ports", ports, "One node per port instead of per box");

  RunArgs run_args;
  auto* runc = app.add_subcommand("run", "Execute a pipeline");
  runc->add_option("file", run_args.file, "Pipeline (.fdf)")->required();
  runc->add_option("--data", run_args.data, "Data manifest")->required();
  runc->add_option("--out", run_args.out, "Output directory")->required();
  runc->add_option("--seed", run_args.seed, "Run seed")->required();
  runc->add_option("--jobs", run_args.jobs, "Boxes executed concurrently")->check(CLI::Range(1u, 256u));
  runc->add_flag("--strict", run_args.strict, "Treat warnings as errors");

  auto* inspect = app.add_subcommand("inspect", "Describe a function artifact");
  inspect->add_option("file", file, "Artifact (.fdfn)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }

  if (*check) return cmd_check(file, strict, out, err);
  if (*graph) return cmd_graph(file, ports, out, err);
  if (*runc) return cmd_run(run_args, out, err);
  if (*inspect) return cmd_inspect(file, out, err);
  return 2;
}

}  // namespace fdf
