#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/library.hpp"
#include "fdf/mlkit.hpp"

namespace fdf::cases {

// --- strain ------------------------------------------------------------------

struct StrainSpec {
  Index D = 64;  // full field width
  Index d = 3;   // intrinsic dimension
  std::uint64_t seed = 7;
  double noise = 0.0;  // std of additive noise on the displacement field
};

/// Fixed smooth maps from impact strength F in [0, 1] to a displacement
/// field and a plastic strain field, both living in d-dimensional subspaces.
class StrainPhysics {
 public:
  explicit StrainPhysics(const StrainSpec& spec);

  const StrainSpec& spec() const { return spec_; }
  Matrix latent(const Matrix& F) const;        // n x d
  Matrix displacement(const Matrix& F) const;  // n x D, noise-free
  Matrix strain(const Matrix& F) const;        // n x D
  const Matrix& displacement_basis() const { return u_basis_; }
  const Matrix& strain_basis() const { return e_basis_; }

 private:
  StrainSpec spec_;
  Matrix u_basis_;  // D x d, orthonormal columns
  Matrix e_basis_;
  Matrix mix_;      // d x d
};

struct StrainData {
  DataBatch F;
  DataBatch dU;
  DataBatch eps;
};

/// F uniform on [0, 1] drawn from `sample_seed`; noise added to dU only.
StrainData gen_strain(Index n, const StrainSpec& spec, std::uint64_t sample_seed);
StrainData gen_strain(Index n, Index D, Index d, std::uint64_t seed, double noise = 0.0);

/// Orthogonal D x D matrix standing in for image-to-mesh fitting.
Matrix fitting_matrix(Index D, std::uint64_t seed);

// --- bearing -----------------------------------------------------------------

struct BearingData {
  DataBatch VE;    // design-of-experiments voltages
  DataBatch phiM;  // nominal (Maxwell stand-in) flux
  DataBatch VH;    // historical voltages on the instance
  DataBatch phiH;  // measured instance flux
};

/// phi_t = 1.5 phi_{t-1} - 0.7 phi_{t-2} + 0.1 v_t + 0.1 v_{t-1}, zero start.
Matrix nominal_response(const Matrix& V);
/// Nominal response plus the instance deviation, noise-free.
Matrix instance_response(const Matrix& V, double instance_bias);
/// Voltage profiles of mixed shapes and amplitudes, one per row.
Matrix gen_voltages(Index n, Index T, std::uint64_t seed);

BearingData gen_bearing(Index n, Index T, double instance_bias, std::uint64_t seed,
                        double noise = 1e-3);

// --- library -----------------------------------------------------------------

/// abaqus_surrogate(D, d, seed, noise): F -> (dU, eps).
/// maxwell_surrogate: V -> nominal flux.
void register_surrogates(Library& lib);

// --- fixtures ----------------------------------------------------------------

struct Fixture {
  std::string name;
  std::string text;
};

const std::vector<Fixture>& fixtures();
const Fixture& fixture(std::string_view name);

/// Files for one learn-then-exploit scenario under `dir`: data/*.csv,
/// <learn>.fdf, <exploit>.fdf, learn.manifest, exploit.manifest and any
/// auxiliary matrices. Truth for the exploitation inputs goes to data/truth_*.csv.
struct ScenarioOptions {
  std::uint64_t seed = 1;
  Index train = 0;     // 0: scenario default
  Index held_out = 0;  // 0: scenario default
  double instance_bias = 0.3;
  bool variant = false;  // bearing: composition instead of difference
};

void write_strain_scenario(const std::filesystem::path& dir, const ScenarioOptions& opts);
void write_bearing_scenario(const std::filesystem::path& dir, const ScenarioOptions& opts);

}  // namespace fdf::cases
