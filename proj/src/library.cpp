#include "fdf/library.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "fdf/store.hpp"

namespace fdf {

namespace fs = std::filesystem;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Coder: return "coder";
    case Role::Trainer: return "trainer";
    case Role::Processor: return "processor";
  }
  return "?";
}

std::optional<Role> role_from(std::string_view name) {
  if (name == "coder") return Role::Coder;
  if (name == "trainer") return Role::Trainer;
  if (name == "processor") return Role::Processor;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Call syntax

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_call(std::string_view text, const std::string& what) {
  throw Error(codes::kBadArgument, "predef '" + std::string(text) + "': " + what);
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string unquote(std::string_view v, std::string_view text) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
  if (v.find('"') != std::string_view::npos) bad_call(text, "stray quote in argument");
  return std::string(v);
}

}  // namespace

CallSpec parse_call(std::string_view text) {
  const std::string_view s = trim(text);
  CallSpec call;
  std::size_t i = 0;
  while (i < s.size() && is_name_char(s[i])) ++i;
  call.name = std::string(s.substr(0, i));
  if (call.name.empty()) bad_call(text, "missing function name");
  std::string_view rest = trim(s.substr(i));
  if (rest.empty()) return call;
  if (rest.front() != '(' || rest.back() != ')') bad_call(text, "expected name(args)");
  rest = rest.substr(1, rest.size() - 2);
  if (trim(rest).empty()) return call;

  std::vector<std::string_view> pieces;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    if (rest[k] == '"') quoted = !quoted;
    if (rest[k] == ',' && !quoted) {
      pieces.push_back(rest.substr(start, k - start));
      start = k + 1;
    }
  }
  if (quoted) bad_call(text, "unterminated string");
  pieces.push_back(rest.substr(start));

  for (auto piece : pieces) {
    piece = trim(piece);
    if (piece.empty()) bad_call(text, "empty argument");
    const std::size_t eq = piece.find('=');
    if (eq == std::string_view::npos || piece.front() == '"') {
      if (!call.named.empty()) bad_call(text, "positional argument after named ones");
      call.positional.push_back(unquote(piece, text));
      continue;
    }
    const std::string key(trim(piece.substr(0, eq)));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_name_char))
      bad_call(text, "bad argument name '" + key + "'");
    for (const auto& [k, v] : call.named)
      if (k == key) bad_call(text, "argument '" + key + "' given twice");
    const std::string_view value = trim(piece.substr(eq + 1));
    if (value.empty()) bad_call(text, "argument '" + key + "' has no value");
    call.named.emplace_back(key, unquote(value, text));
  }
  return call;
}

Arguments::Arguments(std::string callee, CallSpec call)
    : callee_(std::move(callee)), call_(std::move(call)) {}

void Arguments::fail(const std::string& what) const {
  throw Error(codes::kBadArgument, callee_ + ": " + what);
}

const std::string* Arguments::find(std::string_view key) const {
  for (const auto& [k, v] : call_.named)
    if (k == key) return &v;
  return nullptr;
}

bool Arguments::has(std::string_view key) const { return find(key) != nullptr; }

std::string Arguments::text(std::string_view key, std::string fallback) const {
  const std::string* v = find(key);
  return v ? *v : std::move(fallback);
}

double Arguments::number(std::string_view key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  double out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || ec != std::errc() || ptr != v->data() + v->size())
    fail("argument " + std::string(key) + "=" + *v + " is not a number");
  return out;
}

long Arguments::integer(std::string_view key, long fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || ec != std::errc() || ptr != v->data() + v->size())
    fail("argument " + std::string(key) + "=" + *v + " is not an integer");
  return out;
}

long Arguments::positional_integer(std::size_t i) const {
  const std::string& v = call_.positional.at(i);
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    fail("positional argument '" + v + "' is not an integer");
  return out;
}

// ---------------------------------------------------------------------------
// Registry

void Library::register_factory(FactoryDef def) {
  if (factories_.count(def.id))
    throw Error(codes::kDuplicateName, "factory '" + def.id + "' is already registered");
  std::string id = def.id;
  factories_.emplace(std::move(id), std::move(def));
}

void Library::register_entry(PredefEntry entry) {
  if (find(entry.role, entry.name))
    throw Error(codes::kDuplicateName, std::string(to_string(entry.role)) + " '" + entry.name +
                                           "' is already registered");
  auto f = factories_.find(entry.factory);
  if (f == factories_.end())
    throw Error(codes::kUnknownName, "unknown factory '" + entry.factory + "' for '" +
                                         entry.name + "'");
  if (f->second.role != entry.role)
    throw Error(codes::kBadArgument, "factory '" + entry.factory + "' builds a " +
                                         std::string(to_string(f->second.role)) + ", not a " +
                                         std::string(to_string(entry.role)));
  const std::size_t slots = entry.signature.inputs + entry.signature.outputs;
  std::vector<bool> seen(slots + 1, false);
  for (const auto& part : entry.signature.partitions) {
    for (std::size_t s : part) {
      if (s < 1 || s > slots || seen[s])
        throw Error(codes::kBadArgument, "partition slot " + std::to_string(s) + " of '" +
                                             entry.name + "' is out of range or repeated");
      seen[s] = true;
    }
  }
  entries_.push_back(std::make_unique<PredefEntry>(std::move(entry)));
}

void Library::register_builtin(FactoryDef def, LibrarySignature sig, TypeOverride override) {
  PredefEntry e{def.id, def.role, std::move(sig), override, def.id};
  register_factory(std::move(def));
  register_entry(std::move(e));
}

const PredefEntry* Library::find(Role role, std::string_view name) const {
  for (const auto& e : entries_)
    if (e->role == role && e->name == name) return e.get();
  return nullptr;
}

std::vector<const PredefEntry*> Library::entries() const {
  std::vector<const PredefEntry*> out;
  for (const auto& e : entries_) out.push_back(e.get());
  return out;
}

Instance Library::lookup(Role role, std::string_view call_text) const {
  CallSpec call = parse_call(call_text);
  const PredefEntry* entry = find(role, call.name);
  if (!entry)
    throw Error(codes::kUnknownName,
                "no " + std::string(to_string(role)) + " named '" + call.name + "' in the library");
  const FactoryDef& def = factories_.at(entry->factory);
  if (call.positional.size() > def.schema.max_positional)
    throw Error(codes::kBadArgument, entry->name + ": too many positional arguments");
  for (const auto& [k, v] : call.named)
    if (std::find(def.schema.keys.begin(), def.schema.keys.end(), k) == def.schema.keys.end())
      throw Error(codes::kBadArgument, entry->name + ": unknown argument '" + k + "'");
  Arguments args(entry->name, std::move(call));
  return Instance{entry, def.make(args)};
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::vector<std::vector<std::size_t>> parse_partitions(std::string_view v,
                                                       const std::string& where) {
  auto fail = [&]() -> void {
    throw Error(codes::kManifest, where + ": malformed partitions '" + std::string(v) + "'");
  };
  std::vector<std::vector<std::size_t>> out;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') fail();
  std::string_view inner = v.substr(1, v.size() - 2);
  std::size_t i = 0;
  while (i < inner.size()) {
    if (inner[i] == ',') {
      ++i;
      continue;
    }
    if (inner[i] != '[') fail();
    const std::size_t close = inner.find(']', i);
    if (close == std::string_view::npos) fail();
    std::vector<std::size_t> part;
    std::string_view body = inner.substr(i + 1, close - i - 1);
    std::size_t start = 0;
    while (start <= body.size()) {
      std::size_t comma = body.find(',', start);
      if (comma == std::string_view::npos) comma = body.size();
      std::string_view num = trim(body.substr(start, comma - start));
      std::size_t slot = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), slot);
      if (num.empty() || ec != std::errc() || ptr != num.data() + num.size()) fail();
      part.push_back(slot);
      start = comma + 1;
    }
    out.push_back(std::move(part));
    i = close + 1;
  }
  return out;
}

}  // namespace

void Library::load_manifest_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string head;
    if (!(words >> head)) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (head != "predef") throw Error(codes::kManifest, where + ": expected 'predef'");
    std::string role_name, name;
    words >> role_name >> name;
    auto role = role_from(role_name);
    if (!role) throw Error(codes::kManifest, where + ": unknown role '" + role_name + "'");
    if (name.empty()) throw Error(codes::kManifest, where + ": missing name");

    PredefEntry e;
    e.name = name;
    e.role = *role;
    bool have_k = false, have_kp = false;
    std::string field;
    while (words >> field) {
      const std::size_t eq = field.find('=');
      if (eq == std::string::npos)
        throw Error(codes::kManifest, where + ": expected key=value, got '" + field + "'");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      auto count = [&]() {
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
        if (value.empty() || ec != std::errc() || ptr != value.data() + value.size())
          throw Error(codes::kManifest, where + ": " + key + " must be a count");
        return n;
      };
      if (key == "k") {
        e.signature.inputs = count();
        have_k = true;
      } else if (key == "k'") {
        e.signature.outputs = count();
        have_kp = true;
      } else if (key == "partitions") {
        e.signature.partitions = parse_partitions(value, where);
      } else if (key == "override") {
        if (value == "none")
          e.type_override = TypeOverride::None;
        else if (value == "out_eq_in1")
          e.type_override = TypeOverride::OutEqIn1;
        else
          throw Error(codes::kManifest, where + ": unknown override '" + value + "'");
      } else if (key == "factory") {
        e.factory = value;
      } else {
        throw Error(codes::kManifest, where + ": unknown field '" + key + "'");
      }
    }
    if (!have_k || !have_kp || e.factory.empty())
      throw Error(codes::kManifest, where + ": k, k' and factory are required");
    try {
      register_entry(std::move(e));
    } catch (const Error& err) {
      throw Error(err.code(), where + ": " + err.what());
    }
  }
}

void Library::load_manifest(const fs::path& path) {
  load_manifest_text(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Builtins

namespace {

void require_width_match(std::span<const DataBatch> in, const char* who) {
  for (const auto& b : in)
    if (b.width() != in.front().width() || b.samples() != in.front().samples())
      throw Error(codes::kRuntimeShape, std::string(who) + ": operands differ in shape");
}

ProcessorBehavior elementwise(const char* who, double sign) {
  return [who, sign](std::span<const DataBatch> in, const RunContext&) {
    if (in.size() != 2) throw Error(codes::kRuntimeShape, std::string(who) + " takes 2 inputs");
    require_width_match(in, who);
    return std::vector<DataBatch>{DataBatch(in[0].values + sign * in[1].values)};
  };
}

Matrix load_matrix_csv(const fs::path& path) { return load_batch(path).values; }

}  // namespace

Library Library::builtin() {
  Library lib;

  lib.register_builtin(
      {"pca", Role::Coder, {{"var", "k"}, 0},
       [](const Arguments& a) {
         PcaTarget target;
         if (a.has("var") && a.has("k")) a.fail("give either var or k, not both");
         if (a.has("k")) {
           const long k = a.integer("k", 0);
           if (k < 1) a.fail("k must be >= 1");
           target.components = k;
         } else {
           const double var = a.number("var", 0.99);
           if (!(var > 0.0 && var <= 1.0)) a.fail("variance fraction must be in (0, 1]");
           target.variance = var;
         }
         Behavior b;
         b.coder = [target](std::span<const DataBatch> in, const RunContext&) {
           return pca_fit(in, target);
         };
         return b;
       }},
      {});

  lib.register_builtin({"standardize", Role::Coder, {},
                        [](const Arguments&) {
                          Behavior b;
                          b.coder = [](std::span<const DataBatch> in, const RunContext&) {
                            return standardize_fit(in);
                          };
                          return b;
                        }},
                       {}, TypeOverride::OutEqIn1);

  lib.register_builtin(
      {"linreg", Role::Trainer, {{"ridge", "window"}, 0},
       [](const Arguments& a) {
         LinregOptions o;
         o.ridge = a.number("ridge", 0.0);
         o.window = a.integer("window", 0);
         if (o.ridge < 0) a.fail("ridge must be nonnegative");
         if (o.window < 0) a.fail("window must be nonnegative");
         Behavior b;
         b.trainer = [o](std::span<const DataBatch> x, std::span<const DataBatch> y,
                         const RunContext&) { return linreg_fit(x, y, o); };
         return b;
       }},
      {});

  lib.register_builtin(
      {"mlp", Role::Trainer, {{"opt", "epochs", "lr", "batch", "window"}, 16},
       [](const Arguments& a) {
         MlpOptions o;
         if (!a.positional().empty()) {
           o.hidden.clear();
           for (std::size_t i = 0; i < a.positional().size(); ++i) {
             const long h = a.positional_integer(i);
             if (h < 1) a.fail("hidden layer widths must be >= 1");
             o.hidden.push_back(h);
           }
         }
         if (a.text("opt", "sgd") != "sgd") a.fail("only opt=sgd is available");
         o.epochs = static_cast<int>(a.integer("epochs", o.epochs));
         o.learning_rate = a.number("lr", o.learning_rate);
         o.batch_size = a.integer("batch", o.batch_size);
         o.window = a.integer("window", 0);
         if (o.epochs < 1) a.fail("epochs must be >= 1");
         if (!(o.learning_rate > 0)) a.fail("lr must be positive");
         if (o.batch_size < 1) a.fail("batch must be >= 1");
         if (o.window < 0) a.fail("window must be nonnegative");
         Behavior b;
         b.trainer = [o](std::span<const DataBatch> x, std::span<const DataBatch> y,
                         const RunContext& ctx) {
           MlpOptions run = o;
           run.seed = ctx.seed;
           return mlp_fit(x, y, run);
         };
         return b;
       }},
      {});

  lib.register_builtin(
      {"dlinss", Role::Trainer, {{"order", "ridge"}, 0},
       [](const Arguments& a) {
         DlinssOptions o;
         o.order = a.integer("order", o.order);
         o.ridge = a.number("ridge", o.ridge);
         if (o.order < 1) a.fail("order must be >= 1");
         if (o.ridge < 0) a.fail("ridge must be nonnegative");
         Behavior b;
         b.trainer = [o](std::span<const DataBatch> x, std::span<const DataBatch> y,
                         const RunContext&) {
           if (x.size() != 1 || y.size() != 1)
             throw Error(codes::kBadArgument, "dlinss maps one input sequence to one output");
           return dlinss_fit(x[0], y[0], o);
         };
         return b;
       }},
      {});

  auto arith = [](const char* name, double sign) {
    return FactoryDef{name, Role::Processor, {},
                      [name, sign](const Arguments&) {
                        Behavior b;
                        b.processor = elementwise(name, sign);
                        return b;
                      }};
  };
  lib.register_builtin(arith("sub", -1.0), {2, 1, {{1, 2, 3}}});
  lib.register_builtin(arith("add", 1.0), {2, 1, {{1, 2, 3}}});

  lib.register_builtin({"identity", Role::Processor, {},
                        [](const Arguments&) {
                          Behavior b;
                          b.processor = [](std::span<const DataBatch> in, const RunContext&) {
                            return std::vector<DataBatch>(in.begin(), in.end());
                          };
                          return b;
                        }},
                       {1, 1, {{1, 2}}});

  lib.register_builtin(
      {"linmap", Role::Processor, {{"file"}, 0},
       [](const Arguments& a) {
         const std::string file = a.text("file", "");
         if (file.empty()) a.fail("file=<matrix.csv> is required");
         Behavior b;
         b.processor = [file](std::span<const DataBatch> in, const RunContext& ctx) {
           if (in.size() != 1) throw Error(codes::kRuntimeShape, "linmap takes 1 input");
           fs::path p(file);
           if (p.is_relative()) p = ctx.base_dir / p;
           const Matrix m = load_matrix_csv(p);
           // w_in rows: y = x M. One extra row: trailing bias.
           const Index w = in[0].width();
           if (m.rows() != w && m.rows() != w + 1)
             throw Error(codes::kRuntimeShape,
                         "linmap: matrix " + p.string() + " has " + std::to_string(m.rows()) +
                             " rows for an input of width " + std::to_string(w));
           Matrix y = in[0].values * m.topRows(w);
           if (m.rows() == w + 1) y.rowwise() += Eigen::RowVectorXd(m.row(w));
           return std::vector<DataBatch>{DataBatch(std::move(y))};
         };
         return b;
       }},
      {1, 1, {}});

  return lib;
}

Library default_library(const std::function<void(Library&)>& extend) {
  Library lib = Library::builtin();
  if (extend) extend(lib);
  if (const char* manifest = std::getenv("FDF_LIBRARY_MANIFEST"); manifest && *manifest)
    lib.load_manifest(manifest);
  return lib;
}

}  // namespace fdf
