// Runs every acceptance criterion once and prints one PASS/FAIL line each.

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fdf/casestudies.hpp"
#include "fdf/cli.hpp"
#include "fdf/engine.hpp"
#include "fdf/graph.hpp"
#include "fdf/store.hpp"
#include "fdf/textfmt.hpp"
#include "oracles.hpp"

using namespace fdf;
namespace fs = std::filesystem;

namespace {

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

const Library& lib() {
  static const Library l = cli_library();
  return l;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

void fdf_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "fdf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  require(code == 0, "fdf " + args[1] + " exited " + std::to_string(code) + ": " + err.str());
}

void run_cmd(const fs::path& dir, const std::string& fdf, const std::string& manifest,
             const std::string& out, const std::string& jobs = "1") {
  fdf_cmd({"run", (dir / fdf).string(), "--data", (dir / manifest).string(), "--out",
           (dir / out).string(), "--seed", "1", "--jobs", jobs});
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

// --- criteria ---------------------------------------------------------------

std::string minimal_edge_set() {
  const ParseResult r = parse(oracle::fixture_text("minimal"));
  require(r.ok(), "minimal fixture does not parse");
  const FdfGraph g = build_graph(*r.pipeline);
  std::set<std::pair<unsigned, unsigned>> got;
  for (auto [p, q] : g.edges) got.emplace(p.value, q.value);
  const std::set<std::pair<unsigned, unsigned>> expected = {
      {1, 3}, {1, 4}, {2, 5}, {6, 8}, {6, 9}, {7, 10}, {11, 12}, {13, 14},
      {3, 6}, {3, 7}, {4, 11}, {9, 11}, {5, 13}, {12, 13}};
  require(got == expected, "edge set differs from the expected 14 edges");
  return std::to_string(got.size()) + " edges";
}

std::string well_formedness() {
  std::mt19937_64 rng(2024);
  int cyclic = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Pipeline p = oracle::random_processor_pipeline(rng, {12, true});
    require(p.port_count() <= 12, "generator exceeded 12 ports");
    FdfGraph g = build_graph(p);
    std::vector<std::pair<std::size_t, std::size_t>> raw;
    for (auto [a, b] : g.edges) raw.emplace_back(a.index(), b.index());
    const bool brute = oracle::has_cycle_brute(g.vertex_count, raw);
    const bool got = check_well_formed(g).has_value();
    require(brute == got, "disagreement on trial " + std::to_string(trial));
    cyclic += brute;
  }
  return "1000/1000 agree, " + std::to_string(cyclic) + " cyclic";
}

std::string typing_oracle() {
  const CheckOutcome c = check_source(oracle::fixture_text("minimal"), lib());
  require(c.diagnostics.empty(), "minimal fixture has diagnostics");
  const TypeEnv& env = c.typing->env;
  require(env.func_type(PortId(6)) == FuncType{{1}, {6}}, "Encode is not ((1),(6))");
  require(env.func_type(PortId(7)) == FuncType{{6}, {1}}, "Decode is not ((6),(1))");
  require(env.data_type(PortId(11)) == 6u, "port 11 is not type 6");
  require(env.func_type(PortId(13)) == FuncType{{6}, {2}}, "Predict is not ((6),(2))");
  return "Encode ((1),(6)), Decode ((6),(1)), t11=6, Predict ((6),(2))";
}

std::string warning_behavior() {
  const std::string text = oracle::fixture_text("strain_exploit_miswired");
  const CheckOutcome c = check_source(text, lib());
  require(c.diagnostics.size() == 1 && count_code(c.diagnostics, codes::kInconsistentInput) == 1,
          "expected exactly one W-INCONSISTENT-INPUT, got " + std::to_string(c.diagnostics.size()) +
              " diagnostics");
  const auto hint = suggest_same_type(*c.pipeline, *c.graph, *c.typing, lib(), c.diagnostics[0]);
  require(hint.has_value(), "no same_type directive suggested");
  const CheckOutcome fixed = check_source(text + *hint + "\n", lib());
  require(fixed.diagnostics.empty(), "warning survives `" + *hint + "`");
  return "1 warning, removed by `" + *hint + "`";
}

std::string pca_contract() {
  const auto clean = cases::gen_strain(400, 64, 3, 7, 0.0);
  const CoderPair c = pca_fit(clean.dU, PcaTarget{0.999, std::nullopt});
  const Index d = c.encode->out_widths.at(0);
  require(d == 3, "noise-free selection kept " + std::to_string(d) + " components");
  const DataBatch z = fdf::apply(*c.encode, std::vector<DataBatch>{clean.dU}).at(0);
  const DataBatch back = fdf::apply(*c.decode, std::vector<DataBatch>{z}).at(0);
  const double err = (back.values - clean.dU.values).cwiseAbs().maxCoeff();
  require(err <= 1e-9, "reconstruction error " + fmt(err));
  const auto noisy = cases::gen_strain(400, 64, 3, 7, 1e-3);
  const Index dn = pca_fit(noisy.dU, PcaTarget{0.999, std::nullopt}).encode->out_widths.at(0);
  require(dn <= 4, "noisy selection kept " + std::to_string(dn) + " components");
  return "d=3, max error " + fmt(err) + ", noisy d=" + std::to_string(dn);
}

std::string strain_end_to_end() {
  const fs::path dir = oracle::scratch_dir("acc_strain");
  cases::write_strain_scenario(dir, {});
  run_cmd(dir, "strain_learn.fdf", "learn.manifest", "learn_out");
  run_cmd(dir, "strain_exploit.fdf", "exploit.manifest", "exploit_out");
  const Matrix pred = load_batch(dir / "exploit_out" / "decode.eps.csv").values;
  const Matrix truth = load_batch(dir / "data" / "truth_eps.csv").values;
  require(pred.rows() == 100, "expected 100 held-out predictions");
  const double rel = oracle::relative_l2(pred, truth);
  require(rel <= 0.05, "relative L2 " + fmt(rel));
  return "relative L2 " + fmt(rel) + " on 100 held-out samples";
}

std::string bearing_improvement() {
  std::string summary;
  for (bool variant : {false, true}) {
    const fs::path dir = oracle::scratch_dir(variant ? "acc_bearing_v" : "acc_bearing");
    cases::ScenarioOptions o;
    o.variant = variant;
    cases::write_bearing_scenario(dir, o);
    const std::string learn = variant ? "bearing_variant_learn.fdf" : "bearing_learn.fdf";
    const std::string exploit = variant ? "bearing_variant_exploit.fdf" : "bearing_exploit.fdf";
    run_cmd(dir, learn, "learn.manifest", "learn_out");
    run_cmd(dir, exploit, "exploit.manifest", "exploit_out");
    const Matrix truth = load_batch(dir / "data" / "truth_phiI.csv").values;
    const double cauer =
        oracle::relative_l2(load_batch(dir / "exploit_out" / "cauer_apply.phiC.csv").values, truth);
    const std::string sink = variant ? "correct.phiP.csv" : "combine.phiP.csv";
    const double both = oracle::relative_l2(load_batch(dir / "exploit_out" / sink).values, truth);
    const double reduction = 1.0 - both / cauer;
    const std::string name = variant ? "composition" : "difference";
    require(reduction >= 0.25, name + " reduction " + fmt(reduction));
    summary += (variant ? ", " : "") + name + " " + fmt(reduction);
  }
  return "error reduction: " + summary;
}

std::string determinism() {
  const fs::path dir = oracle::scratch_dir("acc_det");
  cases::write_bearing_scenario(dir, {});
  std::vector<std::map<std::string, std::string>> learned, exploited;
  for (const char* jobs : {"1", "1", "4", "4"}) {
    const std::string tag = std::to_string(learned.size());
    run_cmd(dir, "bearing_learn.fdf", "learn.manifest", "learn_" + tag, jobs);
    learned.push_back(tree(dir / ("learn_" + tag)));
    // exploitation reads learn_out/, so stage this run's artifacts there
    fs::remove_all(dir / "learn_out");
    fs::copy(dir / ("learn_" + tag), dir / "learn_out");
    run_cmd(dir, "bearing_exploit.fdf", "exploit.manifest", "exploit_" + tag, jobs);
    exploited.push_back(tree(dir / ("exploit_" + tag)));
  }
  require(learned[0].size() == 2 && exploited[0].size() == 2, "unexpected output files");
  for (std::size_t i = 1; i < learned.size(); ++i) {
    require(learned[i] == learned[0], ".fdfn artifacts differ in run " + std::to_string(i));
    require(exploited[i] == exploited[0], "sink CSVs differ in run " + std::to_string(i));
  }
  return "4 runs (jobs 1, 1, 4, 4) byte-identical";
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_function(const LearnedFunction& a, const LearnedFunction& b) {
  if (a.kind != b.kind || a.in_widths != b.in_widths || a.out_widths != b.out_widths ||
      !(a.signature == b.signature) || !(a.provenance == b.provenance) || a.notes != b.notes ||
      a.params.size() != b.params.size() || a.stages.size() != b.stages.size())
    return false;
  for (const auto& [name, m] : a.params)
    if (!b.params.count(name) || !bit_equal(m, b.params.at(name))) return false;
  for (std::size_t i = 0; i < a.stages.size(); ++i)
    if (!same_function(*a.stages[i], *b.stages[i])) return false;
  return true;
}

std::string round_trips() {
  for (const auto& f : cases::fixtures()) {
    const ParseResult a = parse(oracle::fixture_text(f.name));
    require(a.ok(), f.name + " does not parse");
    const ParseResult b = parse(print(*a.pipeline));
    require(b.ok() && isomorphic(*a.pipeline, *b.pipeline), f.name + " is not preserved by print");
  }
  std::mt19937_64 rng(9);
  const Matrix x = oracle::random_matrix(rng, 30, 4), y = oracle::random_matrix(rng, 30, 2);
  const CoderPair pca = pca_fit(DataBatch(x), PcaTarget{0.9, std::nullopt});
  const CoderPair st = standardize_fit(std::vector<DataBatch>{DataBatch(x)});
  MlpOptions mo;
  mo.hidden = {3, 2};
  mo.epochs = 2;
  const Matrix v = cases::gen_voltages(8, 32, 3);
  const std::vector<FunctionPtr> all{
      pca.encode, pca.decode, st.encode, st.decode, linreg_fit(DataBatch(x), DataBatch(y), 0.01),
      mlp_fit(DataBatch(x), DataBatch(y), mo),
      dlinss_fit(DataBatch(v), DataBatch(cases::nominal_response(v)), {2, 1e-10}),
      compose(pca.encode, pca.decode),
      stamp(pca.encode, {{{3, {"ΔU"}}}, {{9, {"rΔU"}}}}, {"p", "box", "E", 42})};
  const fs::path dir = oracle::scratch_dir("acc_roundtrip");
  std::set<FunctionKind> kinds;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const fs::path file = dir / (std::to_string(i) + ".fdfn");
    save_function(*all[i], file);
    require(same_function(*all[i], *load_function(file)),
            "artifact of kind " + std::string(to_string(all[i]->kind)) + " changed");
    kinds.insert(all[i]->kind);
  }
  return std::to_string(cases::fixtures().size()) + " fixtures, " + std::to_string(kinds.size()) +
         " artifact kinds";
}

std::string gradient_check() {
  std::mt19937_64 rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index in = 1 + static_cast<Index>(rng() % 3), out = 1 + static_cast<Index>(rng() % 3);
    std::vector<Index> hidden;
    for (std::size_t l = 0, n = 1 + rng() % 2; l < n; ++l) hidden.push_back(2 + static_cast<Index>(rng() % 4));
    const MlpNetwork net = MlpNetwork::initialize(in, hidden, out, rng());
    const Matrix x = oracle::random_matrix(rng, 7, in), y = oracle::random_matrix(rng, 7, out);
    const Eigen::VectorXd analytic = net.gradient(x, y);
    const Eigen::VectorXd theta = net.flat();
    MlpNetwork probe = net;
    const auto numeric = oracle::central_gradient(
        [&](const std::vector<double>& t) {
          probe.set_flat(Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Index>(t.size())));
          return probe.loss(x, y);
        },
        std::vector<double>(theta.data(), theta.data() + theta.size()), 1e-5);
    const Eigen::VectorXd num = Eigen::Map<const Eigen::VectorXd>(numeric.data(), analytic.size());
    const double rel = (analytic - num).norm() / std::max(num.norm(), 1e-12);
    require(rel <= 1e-5, "trial " + std::to_string(trial) + " relative error " + fmt(rel));
    worst = std::max(worst, rel);
  }
  return "10 trials, worst relative error " + fmt(worst);
}

std::string batch_rule() {
  // Random DAGs of add/identity boxes over sources of two sample counts. The
  // expected status of every box follows from a forward pass over counts.
  std::mt19937_64 rng(11);
  int failed_boxes = 0, done_boxes = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::string text = "pipeline batch\nsource data s0 \"A\"\nsource data s1 \"A\"\nsource data s2 \"A\"\n";
    std::vector<std::string> refs{"s0", "s1", "s2"};
    // per ref: sample count, or -1 once a box upstream failed
    std::map<std::string, long> count{{"s0", 10}, {"s1", 10}, {"s2", 12}};
    std::map<std::string, BoxStatus> expected;
    std::map<std::string, bool> batch_error;
    const int boxes = 2 + static_cast<int>(rng() % 7);
    for (int b = 0; b < boxes; ++b) {
      const std::string name = "b" + std::to_string(b);
      const bool binary = rng() % 3 != 0;
      const std::string x = refs[rng() % refs.size()], y = refs[rng() % refs.size()];
      text += "box " + name + " : processor { predef = \"" + (binary ? "add" : "identity") +
              "\" in data " + x + (binary ? ", " + y : "") + " out data o }\n";
      const bool upstream_failed = count[x] < 0 || (binary && count[y] < 0);
      const bool mismatch = !upstream_failed && binary && count[x] != count[y];
      expected[name] = upstream_failed || mismatch ? BoxStatus::Failed : BoxStatus::Done;
      batch_error[name] = mismatch;
      count[name + ".o"] = upstream_failed || mismatch ? -1 : count[x];
      refs.push_back(name + ".o");
    }
    for (int b = 0; b < boxes; ++b) text += "sink data b" + std::to_string(b) + ".o\n";

    const CheckOutcome c = check_source(text, lib());
    require(c.exit_code() == 0 && c.diagnostics.empty(), "generated pipeline does not check");
    const Pipeline& p = *c.pipeline;
    RunInputs in;
    for (const Port& q : p.ports)
      if (q.is_output() && q.box == kDataIOBox)
        in.data.emplace(q.id, DataBatch(oracle::random_matrix(rng, count.at(q.name), 3)));
    for (unsigned jobs : {1u, 3u}) {
      RunOptions o;
      o.jobs = jobs;
      const RunResult r = run(p, *c.graph, c.typing->env, lib(), in, o);
      for (const auto& [name, status] : expected) {
        require(r.status[*p.find_box(name)] == status, "trial " + std::to_string(trial) + ": box " +
                                                           name + " has the wrong status");
      }
      std::size_t batch = 0, blocked = 0, failed = 0;
      for (const auto& [name, e] : batch_error) batch += e;
      for (const auto& [name, s] : expected) failed += s == BoxStatus::Failed;
      blocked = failed - batch;
      require(count_code(r.failures, codes::kBatch) == batch, "wrong number of E-BATCH failures");
      require(count_code(r.failures, codes::kBoxFailed) == blocked, "wrong number of E-BOX-FAILED failures");
      if (jobs == 1) {
        failed_boxes += static_cast<int>(failed);
        done_boxes += static_cast<int>(expected.size() - failed);
      }
    }
  }
  require(failed_boxes > 0 && done_boxes > 0, "generator never mixed outcomes");
  return "60 random pipelines, " + std::to_string(failed_boxes) + " failed / " +
         std::to_string(done_boxes) + " done boxes as predicted";
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0: none
  std::function<std::string()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "minimal fixture edge set", 1.0, minimal_edge_set},
      {2, "well-formedness vs brute force", 5.0, well_formedness},
      {3, "typing of the minimal fixture", 0.0, typing_oracle},
      {4, "inconsistent-input warning and resolution", 0.0, warning_behavior},
      {5, "PCA contract on the strain generator", 0.0, pca_contract},
      {6, "strain learn then exploit", 60.0, strain_end_to_end},
      {7, "bearing ignorance model improvement", 120.0, bearing_improvement},
      {8, "run determinism across --jobs", 0.0, determinism},
      {9, "text and artifact round-trips", 0.0, round_trips},
      {10, "MLP gradient check", 0.0, gradient_check},
      {11, "batch rule", 0.0, batch_rule},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.body();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && c.budget_s > 0 && secs >= c.budget_s) {
      ok = false;
      detail += "; took longer than " + fmt(c.budget_s) + " s";
    }
    failures += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " " << std::setw(2) << c.id << " " << c.name << " ("
              << std::fixed << std::setprecision(3) << secs << " s): " << detail << std::endl;
    std::cout.unsetf(std::ios::fixed);
  }
  return failures == 0 ? 0 : 1;
}
