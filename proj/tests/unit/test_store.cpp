#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "fdf/casestudies.hpp"
#include "fdf/store.hpp"
#include "oracles.hpp"

using namespace fdf;
namespace fs = std::filesystem;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void expect_same_function(const LearnedFunction& a, const LearnedFunction& b) {
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.in_widths, b.in_widths);
  EXPECT_EQ(a.out_widths, b.out_widths);
  EXPECT_EQ(a.signature, b.signature);
  EXPECT_EQ(a.provenance, b.provenance);
  EXPECT_EQ(a.notes, b.notes);
  ASSERT_EQ(a.params.size(), b.params.size());
  for (const auto& [name, m] : a.params) {
    ASSERT_TRUE(b.params.count(name)) << name;
    EXPECT_TRUE(bit_equal(m, b.params.at(name))) << name;
  }
  ASSERT_EQ(a.stages.size(), b.stages.size());
  for (std::size_t i = 0; i < a.stages.size(); ++i) expect_same_function(*a.stages[i], *b.stages[i]);
}

// One function of every kind, trained on random data.
std::vector<FunctionPtr> every_kind(std::mt19937_64& rng) {
  const Matrix x = oracle::random_matrix(rng, 30, 4), y = oracle::random_matrix(rng, 30, 2);
  const CoderPair pca = pca_fit(DataBatch(x), PcaTarget{0.9, std::nullopt});
  const CoderPair st = standardize_fit(DataBatch(x));
  const FunctionPtr lin = linreg_fit(DataBatch(x), DataBatch(y), 0.01);
  MlpOptions o;
  o.hidden = {3, 2};
  o.epochs = 2;
  o.seed = rng();
  o.window = 0;
  const FunctionPtr mlp = mlp_fit(DataBatch(x), DataBatch(y), o);
  const Matrix v = cases::gen_voltages(8, 32, rng());
  const FunctionPtr ss = dlinss_fit(DataBatch(v), DataBatch(cases::nominal_response(v)), {2, 1e-10});
  const FunctionPtr comp = compose(pca.encode, pca.decode);
  FunctionSignature sig{{{3, {"ΔU"}}}, {{9, {"rΔU", "x"}}}};
  const FunctionPtr stamped = stamp(pca.encode, sig, {"p", "box", "E", rng()});
  return {pca.encode, pca.decode, st.encode, st.decode, lin, mlp, ss, comp, stamped};
}

}  // namespace

TEST(Store, CsvRoundTripIsBitExact) {
  std::mt19937_64 rng(81);
  Matrix m = oracle::random_matrix(rng, 7, 5, 1e3);
  m(0, 0) = 1e-300;
  m(0, 1) = -std::numeric_limits<double>::denorm_min();
  m(0, 2) = std::numeric_limits<double>::max();
  m(0, 3) = 0.1;
  m(0, 4) = -0.0;
  const std::string text = format_csv(DataBatch(m));
  EXPECT_EQ(text.substr(0, text.find('\n')), "c0,c1,c2,c3,c4");
  EXPECT_TRUE(bit_equal(parse_csv(text).values, m));
}

TEST(Store, CsvErrors) {
  EXPECT_EQ(code_of([] { parse_csv("1,2\n3,4\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0,c2\n1,2\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0,c1\n1,2\n3\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0,c1\n1,x\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0\nnan\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0\ninf\n"); }), codes::kCsv);
  EXPECT_EQ(code_of([] { parse_csv("c0\n1.5\n-2e3\n"); }), "");
  EXPECT_EQ(parse_csv("c0,c1\r\n1,2\r\n").values(0, 1), 2.0);
}

TEST(Store, BatchFiles) {
  const fs::path dir = oracle::scratch_dir("batch");
  const DataBatch b(Matrix::Random(3, 2));
  save_batch(b, dir / "sub" / "b.csv");
  EXPECT_TRUE(bit_equal(load_batch(dir / "sub" / "b.csv").values, b.values));
  EXPECT_EQ(code_of([&] { load_batch(dir / "missing.csv"); }), codes::kIo);
  for (const auto& e : fs::recursive_directory_iterator(dir))
    EXPECT_EQ(e.path().extension() == ".tmp", false) << e.path();
}

TEST(Store, KnownDigests) {
  // FIPS 180-2 and RFC 4648 test vectors
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="},
      {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (auto [plain, enc] : vectors) {
    EXPECT_EQ(base64_encode(plain), enc);
    EXPECT_EQ(base64_decode(enc), plain);
  }
  EXPECT_EQ(code_of([] { base64_decode("abc"); }), codes::kCorrupt);
}

TEST(StoreProperty, Base64RoundTrip) {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s(rng() % 40, '\0');
    for (char& c : s) c = static_cast<char>(rng() & 0xff);
    EXPECT_EQ(base64_decode(base64_encode(s)), s);
  }
}

TEST(StoreProperty, FunctionRoundTripEveryKind) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 5; ++trial) {
    for (const FunctionPtr& f : every_kind(rng)) {
      SCOPED_TRACE(std::string(to_string(f->kind)));
      const FunctionPtr g = deserialize_function(serialize_function(*f));
      expect_same_function(*f, *g);
      // applies identically
      std::vector<DataBatch> in;
      for (Index w : f->in_widths) in.emplace_back(oracle::random_matrix(rng, 6, w));
      if (f->kind == FunctionKind::Dlinss) in = {DataBatch(cases::gen_voltages(3, 32, 5))};
      const auto a = fdf::apply(*f, in), b = fdf::apply(*g, in);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_equal(a[i].values, b[i].values));
      // serialization is canonical
      EXPECT_EQ(serialize_function(*g), serialize_function(*f));
    }
  }
}

TEST(Store, SelfDescribingFile) {
  std::mt19937_64 rng(84);
  const fs::path dir = oracle::scratch_dir("fdfn");
  const FunctionPtr f = every_kind(rng).back();
  save_function(*f, dir / "f.fdfn");
  expect_same_function(*f, *load_function(dir / "f.fdfn"));
  const std::string text = read_file(dir / "f.fdfn");
  EXPECT_NE(text.find("\"format\": \"fdfn\""), std::string::npos);
  EXPECT_EQ(text.substr(text.rfind('\n', text.size() - 2) + 1, 7), "sha256 ");
}

TEST(Store, CorruptionAndVersion) {
  std::mt19937_64 rng(85);
  const FunctionPtr f = every_kind(rng)[4];
  const std::string good = serialize_function(*f);

  std::string flipped = good;
  const std::size_t at = flipped.find("\"data\"");
  ASSERT_NE(at, std::string::npos);
  flipped[at + 12] = flipped[at + 12] == 'A' ? 'B' : 'A';
  EXPECT_EQ(code_of([&] { deserialize_function(flipped); }), codes::kCorrupt);

  std::string future = good;
  const std::size_t v = future.find("\"version\": 1");
  ASSERT_NE(v, std::string::npos);
  future.replace(v, 12, "\"version\": 2");
  EXPECT_EQ(code_of([&] { deserialize_function(future); }), codes::kVersionMismatch);

  EXPECT_EQ(code_of([&] { deserialize_function(good.substr(0, good.rfind("sha256"))); }), codes::kCorrupt);
  EXPECT_EQ(code_of([&] { deserialize_function("not json\nsha256 00\n"); }), codes::kCorrupt);
  EXPECT_EQ(code_of([&] { deserialize_function(good.substr(0, good.size() / 2)); }), codes::kCorrupt);
  EXPECT_EQ(code_of([&] { load_function("/nonexistent/x.fdfn"); }), codes::kIo);
}

TEST(StoreProperty, ByteFlipsNeverLoad) {
  std::mt19937_64 rng(86);
  const std::string good = serialize_function(*every_kind(rng)[0]);
  for (int trial = 0; trial < 200; ++trial) {
    std::string bad = good;
    bad[rng() % (bad.size() - 80)] ^= static_cast<char>(1 + rng() % 127);
    const std::string code = code_of([&] { deserialize_function(bad); });
    EXPECT_TRUE(code == codes::kCorrupt || code == codes::kVersionMismatch) << code;
  }
}

TEST(Store, DataManifest) {
  const DataManifest m = parse_data_manifest(
      "# inputs\nsource F = data/F.csv\nsource model = /abs/m.fdfn  # trailing\n"
      "sink decode.eps = out/eps.csv\n",
      "/base");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.source("F")->path, fs::path("/base/data/F.csv"));
  EXPECT_EQ(m.source("model")->path, fs::path("/abs/m.fdfn"));
  EXPECT_EQ(m.sink("decode.eps")->path, fs::path("/base/out/eps.csv"));
  EXPECT_EQ(m.source("decode.eps"), nullptr);
  EXPECT_EQ(m.entries[1].line, 3);
}

TEST(Store, DataManifestErrors) {
  for (const char* bad : {"source F data.csv\n", "input F = x.csv\n", "source = x.csv\n",
                          "source F = \n", "source F G = x.csv\n", "source F = a\nsource F = b\n"})
    EXPECT_EQ(code_of([&] { parse_data_manifest(bad, "/"); }), codes::kManifest) << bad;
}
