#include "fdf/store.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace fdf {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(codes::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(codes::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(codes::kIo, "cannot rename into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(codes::kIo, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV

std::string format_csv(const DataBatch& batch) {
  std::string out;
  for (Index j = 0; j < batch.width(); ++j) {
    if (j) out += ',';
    out += 'c' + std::to_string(j);
  }
  out += '\n';
  char buf[40];
  for (Index i = 0; i < batch.samples(); ++i) {
    for (Index j = 0; j < batch.width(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", batch.values(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

DataBatch parse_csv(std::string_view text, std::string_view origin) {
  auto fail = [&](int line, const std::string& what) {
    throw Error(codes::kCsv, std::string(origin) + ":" + std::to_string(line) + ": " + what);
  };
  std::vector<double> values;
  Index width = -1;
  Index rows = 0;
  int line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_cells(line);
    if (!header_seen) {
      header_seen = true;
      width = static_cast<Index>(cells.size());
      for (Index j = 0; j < width; ++j)
        if (trim(cells[j]) != "c" + std::to_string(j))
          fail(line_no, "header must be c0,c1,... (column " + std::to_string(j) + ")");
      continue;
    }
    if (static_cast<Index>(cells.size()) != width)
      fail(line_no, "ragged row: " + std::to_string(cells.size()) + " cells, header declares " +
                        std::to_string(width));
    for (auto cell : cells) {
      cell = trim(cell);
      double v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
        fail(line_no, "non-numeric cell '" + std::string(cell) + "'");
      if (!std::isfinite(v)) fail(line_no, "non-finite cell '" + std::string(cell) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (!header_seen) fail(line_no, "missing header");
  Matrix m(rows, width);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < width; ++j) m(i, j) = values[static_cast<std::size_t>(i * width + j)];
  return DataBatch(std::move(m));
}

DataBatch load_batch(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

void save_batch(const DataBatch& batch, const fs::path& path) {
  atomic_write(path, format_csv(batch));
}

// ---------------------------------------------------------------------------
// Encoding helpers

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(codes::kCorrupt, "base64 length is not a multiple of 4");
  std::string out(3 * text.size() / 4 + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(codes::kCorrupt, "invalid base64 payload");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes standing for '=' padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() > 1 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

// ---------------------------------------------------------------------------
// Function artifacts

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

json encode_matrix(const Matrix& m) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(m(i, j)));
      char b[8];
      std::memcpy(b, &bits, 8);
      raw.append(b, 8);
    }
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64_encode(raw)}};
}

Matrix decode_matrix(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  if (rows < 0 || cols < 0) throw Error(codes::kCorrupt, "negative matrix shape");
  const std::string raw = base64_decode(j.at("data").get<std::string>());
  if (raw.size() != static_cast<std::size_t>(rows * cols) * 8)
    throw Error(codes::kCorrupt, "matrix payload does not match its shape");
  Matrix m(rows, cols);
  std::size_t at = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index c = 0; c < cols; ++c) {
      std::uint64_t bits;
      std::memcpy(&bits, raw.data() + at, 8);
      at += 8;
      m(i, c) = std::bit_cast<double>(to_le(bits));
    }
  }
  return m;
}

json encode_slots(const std::vector<SlotSignature>& slots) {
  json arr = json::array();
  for (const auto& s : slots) arr.push_back({{"type", s.type}, {"annotations", s.annotations}});
  return arr;
}

std::vector<SlotSignature> decode_slots(const json& arr) {
  std::vector<SlotSignature> out;
  for (const auto& s : arr)
    out.push_back({s.at("type").get<std::uint32_t>(),
                   s.at("annotations").get<std::vector<std::string>>()});
  return out;
}

json encode_function(const LearnedFunction& f) {
  json params = json::object();
  for (const auto& [name, m] : f.params) params[name] = encode_matrix(m);
  json stages = json::array();
  for (const auto& s : f.stages) stages.push_back(encode_function(*s));
  return json{
      {"kind", std::string(to_string(f.kind))},
      {"in_widths", f.in_widths},
      {"out_widths", f.out_widths},
      {"params", params},
      {"signature",
       {{"inputs", encode_slots(f.signature.inputs)},
        {"outputs", encode_slots(f.signature.outputs)}}},
      {"provenance",
       {{"pipeline", f.provenance.pipeline},
        {"box", f.provenance.box},
        {"port", f.provenance.port},
        {"seed", f.provenance.seed}}},
      {"notes", f.notes},
      {"stages", stages},
  };
}

FunctionPtr decode_function(const json& j) {
  auto f = std::make_shared<LearnedFunction>();
  const auto kind_name = j.at("kind").get<std::string>();
  auto kind = function_kind_from(kind_name);
  if (!kind) throw Error(codes::kCorrupt, "unknown function kind '" + kind_name + "'");
  f->kind = *kind;
  f->in_widths = j.at("in_widths").get<std::vector<Index>>();
  f->out_widths = j.at("out_widths").get<std::vector<Index>>();
  for (const auto& [name, m] : j.at("params").items()) f->params[name] = decode_matrix(m);
  f->signature.inputs = decode_slots(j.at("signature").at("inputs"));
  f->signature.outputs = decode_slots(j.at("signature").at("outputs"));
  const auto& p = j.at("provenance");
  f->provenance = {p.at("pipeline").get<std::string>(), p.at("box").get<std::string>(),
                   p.at("port").get<std::string>(), p.at("seed").get<std::uint64_t>()};
  f->notes = j.at("notes").get<std::vector<std::string>>();
  for (const auto& s : j.at("stages")) f->stages.push_back(decode_function(s));
  return f;
}

}  // namespace

std::string serialize_function(const LearnedFunction& f) {
  json doc = encode_function(f);
  doc["format"] = "fdfn";
  doc["version"] = kArtifactVersion;
  std::string body = doc.dump(2) + "\n";
  return body + "sha256 " + sha256_hex(body) + "\n";
}

FunctionPtr deserialize_function(std::string_view text, std::string_view origin) {
  const std::string where(origin);
  std::string_view trimmed = text;
  while (!trimmed.empty() && (trimmed.back() == '\n' || trimmed.back() == '\r'))
    trimmed.remove_suffix(1);
  const std::size_t cut = trimmed.rfind('\n');
  if (cut == std::string_view::npos)
    throw Error(codes::kCorrupt, where + ": missing checksum line");
  const std::string_view body = text.substr(0, cut + 1);
  const std::string_view trailer = trimmed.substr(cut + 1);
  if (trailer.substr(0, 7) != "sha256 ")
    throw Error(codes::kCorrupt, where + ": missing checksum line");

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(codes::kCorrupt, where + ": unreadable artifact: " + e.what());
  }
  // Version first so a future format is reported as such, not as corruption.
  if (!doc.is_object() || doc.value("format", "") != "fdfn")
    throw Error(codes::kCorrupt, where + ": not a function artifact");
  const int version = doc.value("version", -1);
  if (version != kArtifactVersion)
    throw Error(codes::kVersionMismatch, where + ": artifact format version " +
                                             std::to_string(version) + ", this build reads " +
                                             std::to_string(kArtifactVersion));
  if (trailer.substr(7) != sha256_hex(body))
    throw Error(codes::kCorrupt, where + ": checksum mismatch");
  try {
    return decode_function(doc);
  } catch (const json::exception& e) {
    throw Error(codes::kCorrupt, where + ": malformed artifact: " + e.what());
  }
}

void save_function(const LearnedFunction& f, const fs::path& path) {
  atomic_write(path, serialize_function(f));
}

FunctionPtr load_function(const fs::path& path) {
  return deserialize_function(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Data manifest

const ManifestEntry* DataManifest::source(std::string_view name) const {
  for (const auto& e : entries)
    if (e.kind == ManifestEntry::Kind::Source && e.name == name) return &e;
  return nullptr;
}

const ManifestEntry* DataManifest::sink(std::string_view name) const {
  for (const auto& e : entries)
    if (e.kind == ManifestEntry::Kind::Sink && e.name == name) return &e;
  return nullptr;
}

DataManifest parse_data_manifest(std::string_view text, const fs::path& base_dir,
                                 std::string_view origin) {
  DataManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw Error(codes::kManifest,
                  std::string(origin) + ":" + std::to_string(line_no) + ": " + what);
    };
    const std::size_t eq = rest.find('=');
    if (eq == std::string_view::npos) fail("expected `source|sink <name> = <path>`");
    std::istringstream lhs{std::string(rest.substr(0, eq))};
    std::string kind, name, extra;
    lhs >> kind >> name;
    if (lhs >> extra) fail("unexpected token '" + extra + "'");
    const std::string_view path = trim(rest.substr(eq + 1));
    if (name.empty() || path.empty()) fail("expected `source|sink <name> = <path>`");
    ManifestEntry e;
    if (kind == "source")
      e.kind = ManifestEntry::Kind::Source;
    else if (kind == "sink")
      e.kind = ManifestEntry::Kind::Sink;
    else
      fail("unknown entry kind '" + kind + "'");
    e.name = name;
    fs::path p{std::string(path)};
    e.path = p.is_absolute() ? p : base_dir / p;
    e.line = line_no;
    if ((e.kind == ManifestEntry::Kind::Source ? m.source(name) : m.sink(name)) != nullptr)
      fail("duplicate entry for '" + name + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

DataManifest load_data_manifest(const fs::path& path) {
  return parse_data_manifest(read_file(path), path.parent_path(), path.string());
}

}  // namespace fdf
