#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "fdf/casestudies.hpp"
#include "fdf/cli.hpp"
#include "fdf/store.hpp"
#include "oracles.hpp"

using namespace fdf;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation fdf_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "fdf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string fixture_path(const std::string& name) {
  return (oracle::fixture_dir() / (name + ".fdf")).string();
}

// Every file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST(Cli, CheckExitCodes) {
  const fs::path dir = oracle::scratch_dir("cli_check");
  EXPECT_EQ(fdf_cmd({"check", fixture_path("minimal")}).code, 0);
  const auto garbage = write_file(dir, "bad.fdf", "pipeline p\nbox a : processor {\n");
  const Invocation parse = fdf_cmd({"check", garbage.string()});
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.out.find("bad.fdf:"), std::string::npos);
  const auto cyclic = write_file(dir, "cycle.fdf",
                                 "pipeline p\n"
                                 "box a : processor { predef = \"identity\" in data b.y out data x }\n"
                                 "box b : processor { predef = \"identity\" in data a.x out data y }\n");
  const Invocation cyc = fdf_cmd({"check", cyclic.string()});
  EXPECT_EQ(cyc.code, 1);
  EXPECT_NE(cyc.out.find("E-CYCLE"), std::string::npos);
  EXPECT_NE(cyc.out.find("cycle: 1 -> 2 -> 3 -> 4 -> 1 [1,2,3,4]"), std::string::npos) << cyc.out;
  EXPECT_EQ(fdf_cmd({"check", (dir / "missing.fdf").string()}).code, 2);
}

TEST(Cli, WarningsAndStrictMode) {
  const Invocation plain = fdf_cmd({"check", fixture_path("strain_exploit_miswired")});
  EXPECT_EQ(plain.code, 0);
  EXPECT_NE(plain.out.find("WARNING W-INCONSISTENT-INPUT"), std::string::npos);
  EXPECT_NE(plain.out.find("same_type fit.dU \"rΔU\""), std::string::npos) << plain.out;
  const Invocation strict = fdf_cmd({"check", "--strict", fixture_path("strain_exploit_miswired")});
  EXPECT_EQ(strict.code, 1);
  EXPECT_NE(strict.out.find("ERROR W-INCONSISTENT-INPUT"), std::string::npos) << strict.out;
  EXPECT_NE(strict.out.find("(promoted by --strict)"), std::string::npos);
  // the suggested directive, appended, silences the warning
  const fs::path dir = oracle::scratch_dir("cli_strict");
  const auto fixed = write_file(dir, "fixed.fdf",
                                oracle::fixture_text("strain_exploit_miswired") + "same_type fit.dU \"rΔU\"\n");
  const Invocation clean = fdf_cmd({"check", "--strict", fixed.string()});
  EXPECT_EQ(clean.code, 0) << clean.out;
  EXPECT_EQ(clean.out, "");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(fdf_cmd({}).code, 2);
  EXPECT_EQ(fdf_cmd({"frobnicate"}).code, 2);
  EXPECT_EQ(fdf_cmd({"run", fixture_path("minimal")}).code, 2);
  EXPECT_EQ(fdf_cmd({"run", fixture_path("minimal"), "--data", "m", "--out", "o", "--seed", "1",
                     "--jobs", "0"})
                .code,
            2);
  EXPECT_EQ(fdf_cmd({"--help"}).code, 0);
}

TEST(Cli, GraphDot) {
  const fs::path dir = oracle::scratch_dir("cli_graph");
  const auto empty = write_file(dir, "empty.fdf", "pipeline empty\n");
  EXPECT_EQ(fdf_cmd({"graph", "--dot", empty.string()}).out, "digraph \"empty\" {\n}\n");

  const Invocation boxes = fdf_cmd({"graph", fixture_path("minimal")});
  ASSERT_EQ(boxes.code, 0);
  const std::regex edge(R"re(  b\d+ -> b\d+ \[label="(\d+)->(\d+)", color=(red|black))re");
  std::set<std::pair<int, int>> edges;
  std::size_t red = 0;
  for (std::sregex_iterator it(boxes.out.begin(), boxes.out.end(), edge), end; it != end; ++it) {
    edges.emplace(std::stoi((*it)[1]), std::stoi((*it)[2]));
    red += (*it)[3] == "red";
  }
  // inter-box edges only: 8 wires
  EXPECT_EQ(edges, (std::set<std::pair<int, int>>{
                       {1, 3}, {1, 4}, {2, 5}, {6, 8}, {6, 9}, {7, 10}, {11, 12}, {13, 14}}));
  EXPECT_EQ(red, 4u);
  EXPECT_NE(boxes.out.find("shape=trapezium"), std::string::npos);
  EXPECT_NE(boxes.out.find("shape=pentagon"), std::string::npos);

  const Invocation ports = fdf_cmd({"graph", "--ports", fixture_path("minimal")});
  const std::regex node(R"(\n\s*p(\d+) \[)");
  std::set<int> ids;
  for (std::sregex_iterator it(ports.out.begin(), ports.out.end(), node), end; it != end; ++it)
    ids.insert(std::stoi((*it)[1]));
  EXPECT_EQ(ids.size(), 14u);
  EXPECT_EQ(*ids.begin(), 1);
  EXPECT_EQ(*ids.rbegin(), 14);
  EXPECT_NE(ports.out.find("subgraph cluster_"), std::string::npos);
}

TEST(Cli, StrainRunEndToEnd) {
  const fs::path dir = oracle::scratch_dir("cli_strain");
  cases::ScenarioOptions o;
  o.train = 200;
  o.held_out = 50;
  cases::write_strain_scenario(dir, o);
  const auto learn = fdf_cmd({"run", (dir / "strain_learn.fdf").string(), "--data",
                              (dir / "learn.manifest").string(), "--out",
                              (dir / "learn_out").string(), "--seed", "1"});
  ASSERT_EQ(learn.code, 0) << learn.err;
  EXPECT_EQ(std::count(learn.out.begin(), learn.out.end(), '\n'), 6);
  for (const char* f : {"pca_dU.E", "pca_dU.D", "pca_eps.E", "pca_eps.D", "strain.model"})
    EXPECT_TRUE(fs::exists(dir / "learn_out" / (std::string(f) + ".fdfn"))) << f;

  const auto exploit = fdf_cmd({"run", (dir / "strain_exploit.fdf").string(), "--data",
                                (dir / "exploit.manifest").string(), "--out",
                                (dir / "ex_out").string(), "--seed", "1"});
  ASSERT_EQ(exploit.code, 0) << exploit.err;
  const Matrix pred = load_batch(dir / "ex_out" / "decode.eps.csv").values;
  const Matrix truth = load_batch(dir / "data" / "truth_eps.csv").values;
  ASSERT_EQ(pred.rows(), 50);
  EXPECT_LT(oracle::relative_l2(pred, truth), 0.05);

  // the miswired variant warns, runs, then fails at the width mismatch
  const auto miswired = fdf_cmd({"run", (dir / "strain_exploit_miswired.fdf").string(), "--data",
                                 (dir / "exploit.manifest").string(), "--out",
                                 (dir / "mw_out").string(), "--seed", "1"});
  EXPECT_EQ(miswired.code, 1);
  EXPECT_NE(miswired.err.find("W-INCONSISTENT-INPUT"), std::string::npos);
  EXPECT_NE(miswired.err.find("E-RUNTIME-SHAPE"), std::string::npos);
  EXPECT_NE(miswired.err.find("E-BOX-FAILED"), std::string::npos);
  const auto strict = fdf_cmd({"run", "--strict", (dir / "strain_exploit_miswired.fdf").string(),
                               "--data", (dir / "exploit.manifest").string(), "--out",
                               (dir / "mw2_out").string(), "--seed", "1"});
  EXPECT_EQ(strict.code, 1);
  EXPECT_EQ(strict.out, "");

  const auto inspect = fdf_cmd({"inspect", (dir / "learn_out" / "strain.model.fdfn").string()});
  ASSERT_EQ(inspect.code, 0) << inspect.err;
  EXPECT_NE(inspect.out.find("kind: mlp"), std::string::npos);
  EXPECT_NE(inspect.out.find("{rΔU}"), std::string::npos);
  EXPECT_NE(inspect.out.find("hidden layers: (50,50)"), std::string::npos);
  EXPECT_NE(inspect.out.find("box strain"), std::string::npos);
  const auto pca = fdf_cmd({"inspect", (dir / "learn_out" / "pca_eps.E.fdfn").string()});
  EXPECT_NE(pca.out.find("components: 3"), std::string::npos) << pca.out;
}

TEST(Cli, RunReportsMissingInputs) {
  const fs::path dir = oracle::scratch_dir("cli_missing");
  cases::ScenarioOptions o;
  o.train = 20;
  o.held_out = 5;
  cases::write_bearing_scenario(dir, o);
  write_file(dir, "partial.manifest", "source VE = data/VE.csv\nsource VH = data/VH.csv\n");
  const auto r = fdf_cmd({"run", (dir / "bearing_learn.fdf").string(), "--data",
                          (dir / "partial.manifest").string(), "--out", (dir / "o").string(),
                          "--seed", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("E-MISSING-SOURCE"), std::string::npos);
  EXPECT_NE(r.err.find("phiH"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "o"));
  // the exploitation run needs artifacts that were never produced
  const auto ex = fdf_cmd({"run", (dir / "bearing_exploit.fdf").string(), "--data",
                           (dir / "exploit.manifest").string(), "--out", (dir / "o").string(),
                           "--seed", "1"});
  EXPECT_EQ(ex.code, 1);
  EXPECT_NE(ex.err.find("ERROR"), std::string::npos);
}

TEST(CliProperty, RunsAreByteIdenticalAcrossJobCounts) {
  const fs::path dir = oracle::scratch_dir("cli_det");
  cases::ScenarioOptions o;
  o.train = 24;
  o.held_out = 6;
  cases::write_bearing_scenario(dir, o);
  std::vector<std::map<std::string, std::string>> outputs;
  for (const char* jobs : {"1", "4", "1", "4"}) {
    const fs::path out = dir / ("out_" + std::to_string(outputs.size()));
    const auto r = fdf_cmd({"run", (dir / "bearing_learn.fdf").string(), "--data",
                            (dir / "learn.manifest").string(), "--out", out.string(), "--seed",
                            "11", "--jobs", jobs});
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(tree(out));
  }
  ASSERT_EQ(outputs[0].size(), 2u);
  for (std::size_t i = 1; i < outputs.size(); ++i) EXPECT_EQ(outputs[i], outputs[0]) << i;
}

TEST(Cli, InspectRejectsDamagedArtifacts) {
  const fs::path dir = oracle::scratch_dir("cli_inspect");
  std::mt19937_64 rng(5);
  const FunctionPtr f = pca_fit(DataBatch(oracle::random_matrix(rng, 30, 4)), PcaTarget{0.9, std::nullopt}).encode;
  save_function(*f, dir / "ok.fdfn");
  const auto ok = fdf_cmd({"inspect", (dir / "ok.fdfn").string()});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("kind: pca-encode"), std::string::npos) << ok.out;
  std::string bytes = slurp(dir / "ok.fdfn");
  bytes[bytes.size() / 2] ^= 0x5a;
  write_file(dir, "bad.fdfn", bytes);
  const auto bad = fdf_cmd({"inspect", (dir / "bad.fdfn").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(bad.err.substr(0, 6), "ERROR ");
  EXPECT_EQ(fdf_cmd({"inspect", (dir / "none.fdfn").string()}).code, 1);
}
