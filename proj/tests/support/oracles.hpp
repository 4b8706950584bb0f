#pragma once

// Reference implementations the library code is checked against. Nothing in
// here calls into the module under test.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fdf/ir.hpp"
#include "fdf/mlkit.hpp"

namespace fdf::oracle {

/// True when some vertex reaches itself; plain DFS over simple paths from
/// every start vertex. Vertices are 0-based.
bool has_cycle_brute(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Cycle existence read off the wiring at box level. Every user box has
/// complete input -> output edges, and implicit boxes have none, so the port
/// graph is cyclic exactly when this box graph is.
bool pipeline_has_cycle(const Pipeline& p);

struct RandomPipelineOptions {
  std::size_t max_ports = 12;
  bool allow_cycles = true;
};

/// Processors over data ports only, wired at random. May be cyclic.
Pipeline random_processor_pipeline(std::mt19937_64& rng, const RandomPipelineOptions& opts);

/// Structurally valid, acyclic pipeline mixing all box kinds, sinks, exports
/// and imports. Port ids are in construction order (not canonical).
Pipeline random_valid_pipeline(std::mt19937_64& rng, std::size_t user_boxes);

/// Cyclic Jacobi rotations on a symmetric matrix. Eigenvalues descending.
struct EigenSystem {
  std::vector<double> values;
  Matrix vectors;  // columns
};
EigenSystem jacobi_eigen(Matrix a, double tol = 1e-14, int max_sweeps = 100);

/// Central differences of `loss` at theta.
template <class F>
std::vector<double> central_gradient(F&& loss, std::vector<double> theta, double h) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double t = theta[i];
    theta[i] = t + h;
    const double up = loss(theta);
    theta[i] = t - h;
    const double down = loss(theta);
    theta[i] = t;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

std::filesystem::path fixture_dir();
std::string fixture_text(const std::string& name);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0);

double relative_l2(const Matrix& predicted, const Matrix& truth);

}  // namespace fdf::oracle
