#include "fdf/textfmt.hpp"

#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "fdf/graph.hpp"

namespace fdf {

std::string strip_exponent(std::string_view annotation) {
  const auto caret = annotation.find('^');
  if (caret == std::string_view::npos || caret == 0) return std::string(annotation);
  return std::string(annotation.substr(0, caret));
}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, String, Int, Punct, Arrow, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
  bool line_start = false;  // first token on its line
};

bool ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}
bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

class Lexer {
 public:
  Lexer(std::string_view text, std::vector<Diagnostic>& diags) : text_(text), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ < text_.size()) {
      const unsigned char c = static_cast<unsigned char>(text_[pos_]);
      if (c == '\n') {
        advance();
        line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        continue;
      }
      Token t;
      t.line_start = line_start;
      line_start = false;
      t.span = here();
      if (ident_start(c)) {
        while (pos_ < text_.size() && ident_char(static_cast<unsigned char>(text_[pos_])))
          t.text += text_[advance()];
        t.kind = Tok::Ident;
      } else if (c >= '0' && c <= '9') {
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9')
          t.text += text_[advance()];
        t.kind = Tok::Int;
      } else if (c == '"') {
        advance();
        bool closed = false;
        while (pos_ < text_.size()) {
          const char d = text_[pos_];
          if (d == '\n') break;
          advance();
          if (d == '"') {
            closed = true;
            break;
          }
          if (d == '\\' && pos_ < text_.size() && text_[pos_] != '\n') {
            const char e = text_[advance()];
            t.text += e == 'n' ? '\n' : e;
          } else {
            t.text += d;
          }
        }
        if (!closed) {
          diags_.push_back(make_error(codes::kSyntax, "unterminated string", t.span));
        }
        t.kind = Tok::String;
      } else if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
        advance();
        advance();
        t.kind = Tok::Arrow;
        t.text = "->";
      } else if (std::string_view("{}:=,.()").find(static_cast<char>(c)) !=
                 std::string_view::npos) {
        t.text = std::string(1, static_cast<char>(c));
        advance();
        t.kind = Tok::Punct;
      } else {
        diags_.push_back(make_error(
            codes::kSyntax, "unexpected character (byte " + std::to_string(c) + ")", t.span));
        advance();
        continue;
      }
      t.span.end = pos_;
      out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.span = here();
    end.line_start = true;
    out.push_back(end);
    return out;
  }

 private:
  SourceSpan here() const { return SourceSpan{line_, col_, pos_, pos_}; }

  std::size_t advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return pos_++;
  }

  std::string_view text_;
  std::vector<Diagnostic>& diags_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Syntax tree

struct RefAst {
  std::string box;  // empty for bare source names
  std::string port;
  SourceSpan span;

  std::string text() const { return box.empty() ? port : box + "." + port; }
};

struct PortDeclAst {
  enum class Kind { FuncIn, DataIn, DataOut, FuncOut } kind;
  std::string name;  // outputs
  RefAst ref;        // inputs
  std::optional<std::string> annotation;
  SourceSpan span;
};

struct BoxAst {
  std::string id;
  std::string display;
  BoxKind kind = BoxKind::Processor;
  std::optional<std::string> predef;
  std::optional<unsigned> k;
  std::vector<PortDeclAst> ports;
  SourceSpan span;
};

struct SourceAst {
  PortClass cls;
  std::string name;
  std::optional<std::string> annotation;
  std::optional<ImportSignature> signature;
  SourceSpan span;
};

struct SinkAst {
  PortClass cls;  // Data for sink, Function for export
  RefAst ref;
  std::optional<std::string> annotation;
  SourceSpan span;
};

struct OperandAst {
  std::optional<RefAst> ref;
  std::string annotation;
};

struct SameTypeAst {
  OperandAst lhs, rhs;
  SourceSpan span;
};

struct NameAst {
  std::string name;
};

using Stmt = std::variant<NameAst, SourceAst, BoxAst, SinkAst, SameTypeAst>;

// ---------------------------------------------------------------------------
// Parser

struct SyntaxError {};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<Diagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  std::vector<Stmt> run() {
    std::vector<Stmt> out;
    while (peek().kind != Tok::End) {
      try {
        out.push_back(statement());
      } catch (const SyntaxError&) {
        recover_top();
      }
    }
    return out;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_ident(std::string_view word, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == word;
  }
  bool is_punct(char c) const {
    return peek().kind == Tok::Punct && peek().text.size() == 1 && peek().text[0] == c;
  }

  [[noreturn]] void fail(const std::string& what) {
    const Token& t = peek();
    std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    diags_.push_back(make_error(codes::kSyntax, "expected " + what + ", got " + got, t.span));
    throw SyntaxError{};
  }

  void expect_punct(char c) {
    if (!is_punct(c)) fail(std::string("'") + c + "'");
    next();
  }
  void expect_word(std::string_view w) {
    if (!is_ident(w)) fail("'" + std::string(w) + "'");
    next();
  }
  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident) fail(what);
    return next().text;
  }
  std::optional<std::string> opt_string() {
    if (peek().kind != Tok::String) return std::nullopt;
    return next().text;
  }

  static bool top_keyword(const Token& t) {
    if (t.kind != Tok::Ident) return false;
    return t.text == "pipeline" || t.text == "source" || t.text == "sink" || t.text == "box" ||
           t.text == "export" || t.text == "same_type";
  }

  void recover_top() {
    // Skip at least one token, then resume at the next top-level keyword that
    // starts a line.
    next();
    while (peek().kind != Tok::End && !(peek().line_start && top_keyword(peek()))) next();
  }

  RefAst ref() {
    RefAst r;
    r.span = peek().span;
    r.port = ident("a port reference");
    if (is_punct('.')) {
      next();
      r.box = std::move(r.port);
      r.port = ident("a port name after '.'");
    }
    return r;
  }

  Stmt statement() {
    const Token& head = peek();
    if (head.kind != Tok::Ident) fail("a statement keyword");
    const SourceSpan span = head.span;
    if (head.text == "pipeline") {
      next();
      return NameAst{ident("a pipeline name")};
    }
    if (head.text == "source") {
      next();
      SourceAst s;
      s.span = span;
      if (is_ident("data")) {
        next();
        s.cls = PortClass::Data;
        s.name = ident("a source name");
        s.span = toks_[pos_ - 1].span;
        s.annotation = opt_string();
      } else if (is_ident("func")) {
        next();
        s.cls = PortClass::Function;
        s.name = ident("a function source name");
        s.span = toks_[pos_ - 1].span;
        ImportSignature sig;
        sig.inputs = string_tuple();
        if (peek().kind != Tok::Arrow) fail("'->'");
        next();
        sig.outputs = string_tuple();
        s.signature = std::move(sig);
      } else {
        fail("'data' or 'func'");
      }
      return s;
    }
    if (head.text == "sink" || head.text == "export") {
      const bool sink = head.text == "sink";
      next();
      SinkAst s;
      s.cls = sink ? PortClass::Data : PortClass::Function;
      expect_word(sink ? "data" : "func");
      s.ref = ref();
      s.span = s.ref.span;
      if (sink) s.annotation = opt_string();
      return s;
    }
    if (head.text == "same_type") {
      next();
      SameTypeAst s;
      s.span = span;
      s.lhs = operand();
      s.rhs = operand();
      return s;
    }
    if (head.text == "box") {
      next();
      return box(span);
    }
    diags_.push_back(
        make_error(codes::kKeyword, "unknown statement keyword '" + head.text + "'", span));
    throw SyntaxError{};
  }

  std::vector<std::string> string_tuple() {
    std::vector<std::string> out;
    expect_punct('(');
    if (!is_punct(')')) {
      while (true) {
        if (peek().kind != Tok::String) fail("a quoted annotation");
        out.push_back(next().text);
        if (!is_punct(',')) break;
        next();
      }
    }
    expect_punct(')');
    return out;
  }

  OperandAst operand() {
    OperandAst o;
    if (peek().kind == Tok::String) {
      o.annotation = next().text;
    } else {
      o.ref = ref();
    }
    return o;
  }

  BoxAst box(SourceSpan span) {
    BoxAst b;
    b.span = peek().span;
    b.id = ident("a box name");
    if (auto d = opt_string()) b.display = *d;
    expect_punct(':');
    const Token kind_tok = peek();
    const std::string kind = ident("a box kind");
    if (kind == "processor") b.kind = BoxKind::Processor;
    else if (kind == "coder") b.kind = BoxKind::Coder;
    else if (kind == "trainer") b.kind = BoxKind::Trainer;
    else {
      diags_.push_back(make_error(codes::kKeyword,
                                  "unknown box kind '" + kind +
                                      "' (expected processor, coder or trainer)",
                                  kind_tok.span));
      throw SyntaxError{};
    }
    (void)span;
    expect_punct('{');
    while (!is_punct('}')) {
      if (peek().kind == Tok::End) fail("'}'");
      box_item(b);
    }
    next();
    return b;
  }

  void box_item(BoxAst& b) {
    const Token head = peek();
    if (head.kind != Tok::Ident) fail("a box item");
    auto dup = [&](const char* what) {
      diags_.push_back(make_error(codes::kDuplicate,
                                  std::string("box '") + b.id + "' declares `" + what +
                                      "` more than once",
                                  head.span));
    };
    auto wrong_kind = [&](const char* what, const char* kind) {
      diags_.push_back(make_error(codes::kKeyword,
                                  std::string("`") + what + "` is only valid in a " + kind +
                                      " box, not in " + std::string(to_string(b.kind)) +
                                      " '" + b.id + "'",
                                  head.span));
    };
    if (head.text == "predef") {
      next();
      expect_punct('=');
      if (peek().kind != Tok::String) fail("a quoted library call");
      std::string call = next().text;
      if (b.predef) dup("predef");
      b.predef = std::move(call);
    } else if (head.text == "k") {
      next();
      expect_punct('=');
      if (peek().kind != Tok::Int) fail("an integer");
      const std::string digits = next().text;
      unsigned value = 0;
      try {
        const unsigned long v = std::stoul(digits);
        value = v > 1000000 ? 1000000u : static_cast<unsigned>(v);
      } catch (...) {
        value = 1000000u;
      }
      if (b.kind != BoxKind::Trainer) wrong_kind("k", "trainer");
      else if (b.k) dup("k");
      b.k = value;
    } else if (head.text == "func" && peek(1).kind == Tok::Punct && peek(1).text == "=") {
      next();
      next();
      PortDeclAst d;
      d.kind = PortDeclAst::Kind::FuncIn;
      d.ref = ref();
      d.span = d.ref.span;
      if (b.kind != BoxKind::Processor) wrong_kind("func", "processor");
      for (const auto& p : b.ports)
        if (p.kind == PortDeclAst::Kind::FuncIn) dup("func");
      b.ports.push_back(std::move(d));
    } else if (head.text == "in") {
      next();
      expect_word("data");
      do {
        if (is_punct(',')) next();
        PortDeclAst d;
        d.kind = PortDeclAst::Kind::DataIn;
        d.ref = ref();
        d.span = d.ref.span;
        d.annotation = opt_string();
        b.ports.push_back(std::move(d));
      } while (is_punct(','));
    } else if (head.text == "out") {
      next();
      PortDeclAst::Kind kind;
      if (is_ident("data")) kind = PortDeclAst::Kind::DataOut;
      else if (is_ident("func")) kind = PortDeclAst::Kind::FuncOut;
      else fail("'data' or 'func'");
      next();
      do {
        if (is_punct(',')) next();
        PortDeclAst d;
        d.kind = kind;
        d.span = peek().span;
        d.name = ident("an output port name");
        d.annotation = opt_string();
        b.ports.push_back(std::move(d));
      } while (is_punct(','));
    } else {
      diags_.push_back(make_error(codes::kKeyword,
                                  "unknown box item '" + head.text + "' in box '" + b.id + "'",
                                  head.span));
      throw SyntaxError{};
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic>& diags_;
};

// ---------------------------------------------------------------------------
// Tree -> Pipeline

class Builder {
 public:
  explicit Builder(std::vector<Diagnostic>& diags) : diags_(diags) {}

  std::optional<Pipeline> run(const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) std::visit([&](const auto& x) { add(x); }, s);
    for (const auto& [input, ref] : pending_) {
      if (auto out = resolve(ref)) b_.wire(input, *out);
    }
    for (const auto& st : pending_directives_) {
      TypeDirective d;
      d.span = st.span;
      bool ok = true;
      auto operand = [&](const OperandAst& o, TypeDirective::Operand& dst) {
        if (o.ref) {
          auto p = resolve(*o.ref);
          if (!p) ok = false;
          dst.port = p;
        } else {
          dst.annotation = o.annotation;
        }
      };
      operand(st.lhs, d.lhs);
      operand(st.rhs, d.rhs);
      if (ok) b_.add_directive(std::move(d));
    }
    if (has_errors(diags_)) return std::nullopt;
    Pipeline p = std::move(b_).build();
    p.name = name_;
    return p;
  }

 private:
  void add(const NameAst& n) { name_ = n.name; }

  void add(const SourceAst& s) {
    if (sources_.count(s.name)) {
      diags_.push_back(make_error(codes::kDuplicate, "duplicate source '" + s.name + "'", s.span));
      return;
    }
    const BoxIndex owner = s.cls == PortClass::Data ? kDataIOBox : kFuncOutBox;
    const PortId id = b_.add_port(owner, Direction::Output, s.cls, s.name, s.annotation, s.span);
    if (s.signature) b_.set_import(id, *s.signature);
    sources_[s.name] = id;
  }

  void add(const BoxAst& box) {
    if (box.id == "DataIO" || box.id == "FuncOut" || boxes_.count(box.id)) {
      diags_.push_back(make_error(codes::kDuplicate, "duplicate box '" + box.id + "'", box.span));
      return;
    }
    std::optional<Param> param;
    if (box.predef || box.k) param = Param{box.predef.value_or(""), box.k};
    const BoxIndex bi = b_.add_box(box.id, box.kind, param, box.display, box.span);
    auto& outputs = boxes_[box.id];
    outputs.index = bi;
    for (const PortDeclAst& d : box.ports) {
      switch (d.kind) {
        case PortDeclAst::Kind::FuncIn:
        case PortDeclAst::Kind::DataIn: {
          const PortClass cls =
              d.kind == PortDeclAst::Kind::FuncIn ? PortClass::Function : PortClass::Data;
          const PortId id = b_.add_port(bi, Direction::Input, cls, {}, d.annotation, d.span);
          pending_.emplace_back(id, d.ref);
          break;
        }
        case PortDeclAst::Kind::DataOut:
        case PortDeclAst::Kind::FuncOut: {
          if (outputs.ports.count(d.name)) {
            diags_.push_back(make_error(
                codes::kDuplicate, "duplicate port '" + box.id + "." + d.name + "'", d.span));
            continue;
          }
          const PortClass cls =
              d.kind == PortDeclAst::Kind::FuncOut ? PortClass::Function : PortClass::Data;
          outputs.ports[d.name] =
              b_.add_port(bi, Direction::Output, cls, d.name, d.annotation, d.span);
          break;
        }
      }
    }
  }

  void add(const SinkAst& s) {
    const BoxIndex owner = s.cls == PortClass::Data ? kDataIOBox : kFuncOutBox;
    const std::string name = s.ref.text();
    auto& seen = s.cls == PortClass::Data ? sinks_ : exports_;
    if (!seen.insert(name).second) {
      diags_.push_back(make_error(codes::kDuplicate,
                                  std::string(s.cls == PortClass::Data ? "sink" : "export") +
                                      " of '" + name + "' declared twice",
                                  s.span));
      return;
    }
    const PortId id = b_.add_port(owner, Direction::Input, s.cls, name, s.annotation, s.span);
    pending_.emplace_back(id, s.ref);
  }

  void add(const SameTypeAst& s) { pending_directives_.push_back(s); }

  std::optional<PortId> resolve(const RefAst& r) {
    if (r.box.empty()) {
      if (auto it = sources_.find(r.port); it != sources_.end()) return it->second;
    } else if (auto it = boxes_.find(r.box); it != boxes_.end()) {
      if (auto jt = it->second.ports.find(r.port); jt != it->second.ports.end())
        return jt->second;
    }
    diags_.push_back(
        make_error(codes::kUnknownRef, "unknown reference '" + r.text() + "'", r.span));
    return std::nullopt;
  }

  struct BoxPorts {
    BoxIndex index = 0;
    std::map<std::string, PortId> ports;
  };

  std::vector<Diagnostic>& diags_;
  PipelineBuilder b_;
  std::string name_;
  std::map<std::string, PortId> sources_;
  std::map<std::string, BoxPorts> boxes_;
  std::set<std::string> sinks_, exports_;
  std::vector<std::pair<PortId, RefAst>> pending_;
  std::vector<SameTypeAst> pending_directives_;
};

// ---------------------------------------------------------------------------
// Printer helpers

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

void print_annotation(std::ostream& os, const std::optional<std::string>& a) {
  if (a) os << ' ' << quote(*a);
}

}  // namespace

ParseResult parse(std::string_view text) {
  ParseResult result;
  auto tokens = Lexer(text, result.diagnostics).run();
  auto stmts = Parser(std::move(tokens), result.diagnostics).run();
  if (has_errors(result.diagnostics)) return result;
  auto pipeline = Builder(result.diagnostics).run(stmts);
  if (!pipeline) return result;

  if (validate_structure(*pipeline).empty()) {
    FdfGraph g = build_graph(*pipeline);
    if (!check_well_formed(g)) pipeline = renumber(*pipeline, std::move(g));
  }
  result.pipeline = std::move(pipeline);
  return result;
}

std::string print(const Pipeline& p) {
  std::ostringstream os;
  if (!p.name.empty()) os << "pipeline " << p.name << "\n";

  for (const Port& q : p.ports) {
    if (!q.is_output()) continue;
    if (q.box == kDataIOBox) {
      os << "source data " << q.name;
      print_annotation(os, q.annotation);
      os << "\n";
    } else if (q.box == kFuncOutBox) {
      os << "source func " << q.name << " (";
      const ImportSignature sig = q.import.value_or(ImportSignature{});
      for (std::size_t i = 0; i < sig.inputs.size(); ++i)
        os << (i ? ", " : "") << quote(sig.inputs[i]);
      os << ") -> (";
      for (std::size_t i = 0; i < sig.outputs.size(); ++i)
        os << (i ? ", " : "") << quote(sig.outputs[i]);
      os << ")\n";
    }
  }

  auto src_ref = [&](PortId input) -> std::string {
    const auto& s = p.sigma[input.index()];
    return s ? p.ref_of(*s) : std::string("?");
  };

  for (BoxIndex bi : p.user_boxes()) {
    const Box& b = p.boxes[bi];
    os << "box " << b.id;
    if (!b.display_name.empty()) os << ' ' << quote(b.display_name);
    os << " : " << to_string(b.kind) << " {\n";
    if (b.param && b.param->split) os << "  k = " << *b.param->split << "\n";
    if (b.param) os << "  predef = " << quote(b.param->predef) << "\n";
    for (PortId f : p.ports_of(bi, Direction::Input, PortClass::Function))
      os << "  func = " << src_ref(f) << "\n";
    auto list = [&](const char* head, const std::vector<PortId>& ids, bool inputs) {
      if (ids.empty()) return;
      os << "  " << head << ' ';
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const Port& q = p.port(ids[i]);
        os << (i ? ", " : "") << (inputs ? src_ref(q.id) : q.name);
        print_annotation(os, q.annotation);
      }
      os << "\n";
    };
    list("in data", p.ports_of(bi, Direction::Input, PortClass::Data), true);
    list("out data", p.ports_of(bi, Direction::Output, PortClass::Data), false);
    list("out func", p.ports_of(bi, Direction::Output, PortClass::Function), false);
    os << "}\n";
  }

  for (const Port& q : p.ports) {
    if (!q.is_input()) continue;
    if (q.box == kDataIOBox) {
      os << "sink data " << src_ref(q.id);
      print_annotation(os, q.annotation);
      os << "\n";
    } else if (q.box == kFuncOutBox) {
      os << "export func " << src_ref(q.id) << "\n";
    }
  }

  auto operand = [&](const TypeDirective::Operand& o) {
    return o.port ? p.ref_of(*o.port) : quote(o.annotation);
  };
  for (const auto& d : p.same_type)
    os << "same_type " << operand(d.lhs) << ' ' << operand(d.rhs) << "\n";
  return os.str();
}

}  // namespace fdf
