#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/diagnostic.hpp"

namespace fdf {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// n x w samples flowing on one data edge: one row per sample.
struct DataBatch {
  Matrix values;

  DataBatch() = default;
  explicit DataBatch(Matrix m) : values(std::move(m)) {}

  Index samples() const { return values.rows(); }
  Index width() const { return values.cols(); }
  bool all_finite() const { return values.allFinite(); }
};

enum class FunctionKind {
  PcaEncode,
  PcaDecode,
  StandardizeEncode,
  StandardizeDecode,
  Linreg,
  Mlp,
  Dlinss,
  Composed,
};

std::string_view to_string(FunctionKind kind);
std::optional<FunctionKind> function_kind_from(std::string_view name);

/// Implicit type of one function slot at creation time, with the annotation
/// labels known for that type in the originating pipeline.
struct SlotSignature {
  std::uint32_t type = 0;
  std::vector<std::string> annotations;

  bool operator==(const SlotSignature&) const = default;
};

struct FunctionSignature {
  std::vector<SlotSignature> inputs;
  std::vector<SlotSignature> outputs;

  bool operator==(const FunctionSignature&) const = default;
};

struct Provenance {
  std::string pipeline;
  std::string box;
  std::string port;
  std::uint64_t seed = 0;

  bool operator==(const Provenance&) const = default;
};

struct LearnedFunction;
using FunctionPtr = std::shared_ptr<const LearnedFunction>;

/// A learned function value. Shared immutably once created.
struct LearnedFunction {
  FunctionKind kind = FunctionKind::Linreg;
  std::map<std::string, Matrix> params;
  std::vector<Index> in_widths;
  std::vector<Index> out_widths;
  FunctionSignature signature;
  Provenance provenance;
  std::vector<std::string> notes;
  std::vector<FunctionPtr> stages;  // Composed only, applied in order

  const Matrix& param(const std::string& name) const;
  double scalar(const std::string& name, double fallback) const;
};

/// Copy of `f` stamped with a signature and provenance.
FunctionPtr stamp(const FunctionPtr& f, FunctionSignature sig, Provenance prov);

// --- batch helpers ---------------------------------------------------------

Matrix hconcat(std::span<const DataBatch> parts);
std::vector<DataBatch> hsplit(const Matrix& m, std::span<const Index> widths);

// --- coders -----------------------------------------------------------------

struct PcaTarget {
  std::optional<double> variance;  // fraction in (0, 1]
  std::optional<Index> components;
};

struct CoderPair {
  FunctionPtr encode;
  FunctionPtr decode;
};

/// Principal directions by eigendecomposition of the sample covariance.
/// Keeps the smallest d reaching the requested explained variance.
CoderPair pca_fit(std::span<const DataBatch> inputs, const PcaTarget& target);
CoderPair pca_fit(const DataBatch& batch, const PcaTarget& target);

CoderPair standardize_fit(std::span<const DataBatch> inputs);
CoderPair standardize_fit(const DataBatch& batch);

// --- trainers ---------------------------------------------------------------

struct LinregOptions {
  double ridge = 0.0;
  Index window = 0;  // > 0: per-time-step regression over sequence rows
};

FunctionPtr linreg_fit(std::span<const DataBatch> x, std::span<const DataBatch> y,
                       const LinregOptions& opts = {});
FunctionPtr linreg_fit(const DataBatch& x, const DataBatch& y, double ridge);

/// Fully connected tanh network with a linear output layer.
struct MlpNetwork {
  std::vector<Matrix> weights;       // fan_in x fan_out
  std::vector<Eigen::RowVectorXd> biases;

  static MlpNetwork initialize(Index inputs, std::span<const Index> hidden, Index outputs,
                               std::uint64_t seed);

  Matrix forward(const Matrix& x) const;
  /// Mean squared error over all entries.
  double loss(const Matrix& x, const Matrix& y) const;
  /// Gradient of loss() with respect to flat().
  Eigen::VectorXd gradient(const Matrix& x, const Matrix& y) const;

  Index parameter_count() const;
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& theta);
};

struct MlpOptions {
  std::vector<Index> hidden{50, 50};
  int epochs = 200;
  double learning_rate = 0.05;
  Index batch_size = 16;
  std::uint64_t seed = 0;
  Index window = 0;
};

FunctionPtr mlp_fit(std::span<const DataBatch> x, std::span<const DataBatch> y,
                    const MlpOptions& opts);
FunctionPtr mlp_fit(const DataBatch& x, const DataBatch& y, const MlpOptions& opts);

struct DlinssOptions {
  Index order = 2;
  double ridge = 1e-10;
};

/// Discrete-time linear state-space model fitted on sequence rows, each row
/// one scalar time series. Maps an input sequence to an output sequence.
FunctionPtr dlinss_fit(const DataBatch& inputs, const DataBatch& outputs,
                       const DlinssOptions& opts = {});

/// g after f: f's outputs feed g's inputs slot by slot.
FunctionPtr compose(const FunctionPtr& f, const FunctionPtr& g);

// --- application -------------------------------------------------------------

/// Applies f sample by sample. Throws Error(E-RUNTIME-SHAPE) when the number or
/// widths of the inputs do not match f, or sample counts differ.
std::vector<DataBatch> apply(const LearnedFunction& f, std::span<const DataBatch> inputs);

/// Sliding windows over sequence rows: for every sample and time step, the
/// last `window` values of each input sequence (zero before the start).
Matrix window_features(std::span<const DataBatch> sequences, Index window);
/// Stacks sequence rows into one column per batch, sample-major.
Matrix stack_steps(std::span<const DataBatch> sequences);

}  // namespace fdf
