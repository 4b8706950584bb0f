#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <fstream>
#include <iterator>
#include <numeric>

#include <unistd.h>

namespace fdf::oracle {

namespace fs = std::filesystem;

bool has_cycle_brute(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) adj[a].push_back(b);
  std::vector<bool> on_path(n);
  std::function<bool(std::size_t, std::size_t)> walk = [&](std::size_t start, std::size_t v) {
    for (std::size_t w : adj[v]) {
      if (w == start) return true;
      if (on_path[w]) continue;
      on_path[w] = true;
      const bool found = walk(start, w);
      on_path[w] = false;
      if (found) return true;
    }
    return false;
  };
  for (std::size_t s = 0; s < n; ++s) {
    on_path.assign(n, false);
    on_path[s] = true;
    if (walk(s, s)) return true;
  }
  return false;
}

bool pipeline_has_cycle(const Pipeline& p) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const Port& q : p.ports) {
    if (!q.is_input() || !p.sigma[q.index()]) continue;
    const BoxIndex from = p.ports[p.sigma[q.index()]->index()].box;
    if (is_implicit(p.boxes[from].kind) || is_implicit(p.boxes[q.box].kind)) continue;
    edges.emplace_back(from, q.box);
  }
  return has_cycle_brute(p.boxes.size(), edges);
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool coin(std::mt19937_64& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

Pipeline random_processor_pipeline(std::mt19937_64& rng, const RandomPipelineOptions& opts) {
  PipelineBuilder b("random");
  std::vector<PortId> outs;
  std::vector<std::pair<PortId, std::size_t>> pending;  // input, rank of box
  std::vector<std::size_t> first_out_of_box;             // index into outs
  std::size_t budget = opts.max_ports;

  const std::size_t sources = 1 + pick(rng, 2);
  for (std::size_t i = 0; i < sources && budget > 0; ++i, --budget)
    outs.push_back(b.add_port(kDataIOBox, Direction::Output, PortClass::Data, "s" + std::to_string(i)));
  const std::size_t source_count = outs.size();

  for (std::size_t bi = 0; budget >= 2; ++bi) {
    const std::size_t ins = std::min<std::size_t>(1 + pick(rng, 2), budget - 1);
    const std::size_t outs_n = std::min<std::size_t>(1 + pick(rng, 2), budget - ins);
    const BoxIndex box = b.add_box("b" + std::to_string(bi), BoxKind::Processor, Param{"identity", {}});
    for (std::size_t i = 0; i < ins; ++i)
      pending.emplace_back(b.add_port(box, Direction::Input, PortClass::Data), bi);
    first_out_of_box.push_back(outs.size());
    for (std::size_t o = 0; o < outs_n; ++o)
      outs.push_back(b.add_port(box, Direction::Output, PortClass::Data, "o" + std::to_string(o)));
    budget -= ins + outs_n;
    if (coin(rng, 0.3)) break;
  }
  for (auto [in, rank] : pending) {
    // acyclic mode: only sources and outputs of earlier boxes
    const std::size_t limit = opts.allow_cycles ? outs.size() : first_out_of_box[rank];
    b.wire(in, outs[pick(rng, std::max(limit, source_count))]);
  }
  return std::move(b).build();
}

Pipeline random_valid_pipeline(std::mt19937_64& rng, std::size_t user_boxes) {
  PipelineBuilder b("rand" + std::to_string(pick(rng, 1000)));
  std::vector<PortId> data_outs, func_outs, user_func_outs;
  const char* labels[] = {"A", "B", "V^E", "φ"};

  const std::size_t sources = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < sources; ++i) {
    std::optional<std::string> ann;
    if (coin(rng)) ann = labels[pick(rng, 4)];
    data_outs.push_back(b.add_port(kDataIOBox, Direction::Output, PortClass::Data,
                                   "s" + std::to_string(i), ann));
  }
  if (coin(rng, 0.4)) {
    const PortId imp = b.add_port(kFuncOutBox, Direction::Output, PortClass::Function, "imp");
    b.set_import(imp, ImportSignature{{"A"}, {"B"}});
    func_outs.push_back(imp);
  }

  auto wire_data = [&](BoxIndex box, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      b.wire(b.add_port(box, Direction::Input, PortClass::Data), data_outs[pick(rng, data_outs.size())]);
  };

  for (std::size_t bi = 0; bi < user_boxes; ++bi) {
    const std::string id = "box" + std::to_string(bi);
    const std::size_t choice = pick(rng, func_outs.empty() ? 3 : 4);
    std::vector<PortId> new_data, new_func;
    if (choice == 0) {
      const BoxIndex box = b.add_box(id, BoxKind::Processor, Param{"identity", {}},
                                     coin(rng, 0.3) ? "Box " + std::to_string(bi) : "");
      wire_data(box, 1 + pick(rng, 2));
      for (std::size_t o = 0, n = 1 + pick(rng, 2); o < n; ++o) {
        std::optional<std::string> ann;
        if (coin(rng, 0.3)) ann = labels[pick(rng, 4)];
        new_data.push_back(b.add_port(box, Direction::Output, PortClass::Data, "d" + std::to_string(o), ann));
      }
    } else if (choice == 1) {
      const BoxIndex box = b.add_box(id, BoxKind::Coder, Param{"pca(k=1)", {}});
      wire_data(box, 1 + pick(rng, 2));
      for (std::size_t o = 0, n = 1 + pick(rng, 2); o < n; ++o)
        new_func.push_back(b.add_port(box, Direction::Output, PortClass::Function, "f" + std::to_string(o)));
    } else if (choice == 2) {
      const std::size_t n = 2 + pick(rng, 2);
      const unsigned k = 1 + static_cast<unsigned>(pick(rng, n - 1));
      const BoxIndex box = b.add_box(id, BoxKind::Trainer, Param{"linreg", k});
      wire_data(box, n);
      new_func.push_back(b.add_port(box, Direction::Output, PortClass::Function, "model"));
    } else {
      const BoxIndex box = b.add_box(id, BoxKind::Processor);
      b.wire(b.add_port(box, Direction::Input, PortClass::Function), func_outs[pick(rng, func_outs.size())]);
      wire_data(box, 1 + pick(rng, 2));
      new_data.push_back(b.add_port(box, Direction::Output, PortClass::Data, "y"));
    }
    data_outs.insert(data_outs.end(), new_data.begin(), new_data.end());
    func_outs.insert(func_outs.end(), new_func.begin(), new_func.end());
    user_func_outs.insert(user_func_outs.end(), new_func.begin(), new_func.end());
  }

  const Pipeline& peek = b.peek();
  std::vector<PortId> sinks;
  for (std::size_t i = 0, n = 1 + pick(rng, 2); i < n; ++i) {
    const PortId src = data_outs[pick(rng, data_outs.size())];
    if (std::find(sinks.begin(), sinks.end(), src) != sinks.end()) continue;
    sinks.push_back(src);
    b.wire(b.add_port(kDataIOBox, Direction::Input, PortClass::Data, peek.ref_of(src)), src);
  }
  for (PortId f : user_func_outs)
    if (coin(rng)) b.wire(b.add_port(kFuncOutBox, Direction::Input, PortClass::Function, peek.ref_of(f)), f);
  if (data_outs.size() >= 2 && coin(rng, 0.3)) {
    TypeDirective d;
    d.lhs.port = data_outs[pick(rng, data_outs.size())];
    d.rhs.annotation = labels[pick(rng, 4)];
    b.add_directive(d);
  }
  return std::move(b).build();
}

EigenSystem jacobi_eigen(Matrix a, double tol, int max_sweeps) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < tol * tol) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  EigenSystem out;
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values.push_back(a(order[i], order[i]));
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

fs::path fixture_dir() { return FDF_FIXTURE_DIR; }

std::string fixture_text(const std::string& name) {
  std::ifstream in(fixture_dir() / (name + ".fdf"), std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("fdf-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

double relative_l2(const Matrix& predicted, const Matrix& truth) {
  return (predicted - truth).norm() / truth.norm();
}

}  // namespace fdf::oracle
