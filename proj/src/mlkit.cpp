#include "fdf/mlkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace fdf {

namespace {

const std::map<FunctionKind, std::string_view>& kind_names() {
  static const std::map<FunctionKind, std::string_view> names{
      {FunctionKind::PcaEncode, "pca-encode"},
      {FunctionKind::PcaDecode, "pca-decode"},
      {FunctionKind::StandardizeEncode, "standardize-encode"},
      {FunctionKind::StandardizeDecode, "standardize-decode"},
      {FunctionKind::Linreg, "linreg"},
      {FunctionKind::Mlp, "mlp"},
      {FunctionKind::Dlinss, "dlinss"},
      {FunctionKind::Composed, "composed"},
  };
  return names;
}

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

// Portable uniform draws from the raw 64-bit stream.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<Index> widths_of(std::span<const DataBatch> parts) {
  std::vector<Index> w;
  for (const auto& b : parts) w.push_back(b.width());
  return w;
}

void require_same_samples(std::span<const DataBatch> parts, const char* who) {
  for (const auto& b : parts) {
    if (b.samples() != parts.front().samples())
      throw Error(codes::kRuntimeShape,
                  std::string(who) + ": inputs disagree on the number of samples");
  }
}

Index sequence_length(std::span<const DataBatch> parts, const char* who) {
  const Index t = parts.front().width();
  for (const auto& b : parts)
    if (b.width() != t)
      throw Error(codes::kRuntimeShape,
                  std::string(who) + ": windowed sequences must share one length");
  return t;
}

struct ColumnScaling {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
};

ColumnScaling column_scaling(const Matrix& m) {
  ColumnScaling s;
  s.mean = m.colwise().mean();
  s.scale.resize(m.cols());
  const double denom = m.rows() > 1 ? static_cast<double>(m.rows() - 1) : 1.0;
  for (Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - s.mean(j)).square().sum() / denom;
    s.scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix normalize(const Matrix& m, const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& scale) {
  return (m.rowwise() - mean).array().rowwise() / scale.array();
}

Matrix denormalize(const Matrix& m, const Eigen::RowVectorXd& mean,
                   const Eigen::RowVectorXd& scale) {
  Matrix out = m.array().rowwise() * scale.array();
  return out.rowwise() + mean;
}

/// Rows i*T + t back into one n x T batch per column.
std::vector<DataBatch> unstack_steps(const Matrix& m, Index samples, Index steps) {
  std::vector<DataBatch> out;
  for (Index q = 0; q < m.cols(); ++q) {
    Matrix seq(samples, steps);
    for (Index i = 0; i < samples; ++i)
      for (Index t = 0; t < steps; ++t) seq(i, t) = m(i * steps + t, q);
    out.emplace_back(std::move(seq));
  }
  return out;
}

}  // namespace

std::string_view to_string(FunctionKind kind) { return kind_names().at(kind); }

std::optional<FunctionKind> function_kind_from(std::string_view name) {
  for (const auto& [k, n] : kind_names())
    if (n == name) return k;
  return std::nullopt;
}

const Matrix& LearnedFunction::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end())
    throw Error("E-CORRUPT", std::string(to_string(kind)) + " function lacks parameter '" +
                                 name + "'");
  return it->second;
}

double LearnedFunction::scalar(const std::string& name, double fallback) const {
  auto it = params.find(name);
  return it == params.end() || it->second.size() == 0 ? fallback : it->second(0, 0);
}

FunctionPtr stamp(const FunctionPtr& f, FunctionSignature sig, Provenance prov) {
  auto copy = std::make_shared<LearnedFunction>(*f);
  copy->signature = std::move(sig);
  copy->provenance = std::move(prov);
  return copy;
}

Matrix hconcat(std::span<const DataBatch> parts) {
  if (parts.empty()) return Matrix();
  Index cols = 0;
  for (const auto& p : parts) cols += p.width();
  Matrix out(parts.front().samples(), cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.width()) = p.values;
    at += p.width();
  }
  return out;
}

std::vector<DataBatch> hsplit(const Matrix& m, std::span<const Index> widths) {
  std::vector<DataBatch> out;
  Index at = 0;
  for (Index w : widths) {
    out.emplace_back(m.middleCols(at, w));
    at += w;
  }
  return out;
}

Matrix window_features(std::span<const DataBatch> sequences, Index window) {
  const Index n = sequences.front().samples();
  const Index steps = sequences.front().width();
  const Index ports = static_cast<Index>(sequences.size());
  Matrix out = Matrix::Zero(n * steps, ports * window);
  for (Index p = 0; p < ports; ++p) {
    const Matrix& s = sequences[p].values;
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < steps; ++t)
        for (Index lag = 0; lag < window && lag <= t; ++lag)
          out(i * steps + t, p * window + lag) = s(i, t - lag);
  }
  return out;
}

Matrix stack_steps(std::span<const DataBatch> sequences) {
  const Index n = sequences.front().samples();
  const Index steps = sequences.front().width();
  Matrix out(n * steps, static_cast<Index>(sequences.size()));
  for (std::size_t q = 0; q < sequences.size(); ++q)
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < steps; ++t)
        out(i * steps + t, static_cast<Index>(q)) = sequences[q].values(i, t);
  return out;
}

// ---------------------------------------------------------------------------
// PCA

CoderPair pca_fit(std::span<const DataBatch> inputs, const PcaTarget& target) {
  if (inputs.empty()) throw Error(codes::kBadArgument, "pca: no input batches");
  require_same_samples(inputs, "pca");
  const Matrix x = hconcat(inputs);
  const Index n = x.rows();
  const Index w = x.cols();
  if (n < 2) throw Error(codes::kDegenerate, "pca: needs at least 2 samples");
  if (target.variance && !(*target.variance > 0.0 && *target.variance <= 1.0))
    throw Error(codes::kBadArgument, "pca: variance fraction must be in (0, 1]");
  if (target.components && (*target.components < 1 || *target.components > w))
    throw Error(codes::kBadArgument, "pca: component count must be in [1, width]");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success)
    throw Error(codes::kDegenerate, "pca: eigendecomposition failed");

  std::vector<Index> order(static_cast<std::size_t>(w));
  std::iota(order.begin(), order.end(), Index{0});
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });

  const double total = values.sum();
  if (!(total > 1e-300)) throw Error(codes::kDegenerate, "pca: batch has zero total variance");

  Index d = 0;
  if (target.components) {
    d = *target.components;
  } else {
    const double want = target.variance.value_or(0.99);
    double cumulative = 0.0;
    for (Index j = 0; j < w; ++j) {
      cumulative += values(order[j]);
      d = j + 1;
      if (cumulative >= want * total - 1e-12 * total) break;
    }
  }

  Matrix basis(w, d);
  Matrix explained(1, d);
  for (Index j = 0; j < d; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(order[j]);
    for (Index i = 0; i < w; ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    basis.col(j) = v;
    explained(0, j) = values(order[j]) / total;
  }

  auto enc = std::make_shared<LearnedFunction>();
  enc->kind = FunctionKind::PcaEncode;
  enc->params = {{"mean", Matrix(mean)}, {"basis", basis}, {"explained", explained}};
  enc->in_widths = widths_of(inputs);
  enc->out_widths = {d};

  auto dec = std::make_shared<LearnedFunction>(*enc);
  dec->kind = FunctionKind::PcaDecode;
  dec->in_widths = {d};
  dec->out_widths = widths_of(inputs);
  return {enc, dec};
}

CoderPair pca_fit(const DataBatch& batch, const PcaTarget& target) {
  return pca_fit(std::span<const DataBatch>(&batch, 1), target);
}

CoderPair standardize_fit(std::span<const DataBatch> inputs) {
  if (inputs.empty()) throw Error(codes::kBadArgument, "standardize: no input batches");
  require_same_samples(inputs, "standardize");
  const Matrix x = hconcat(inputs);
  if (x.rows() < 2) throw Error(codes::kDegenerate, "standardize: needs at least 2 samples");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd scale(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var =
        (x.col(j).array() - mean(j)).square().sum() / static_cast<double>(x.rows() - 1);
    if (!(var > 0.0))
      throw Error(codes::kDegenerate,
                  "standardize: column " + std::to_string(j) + " has zero variance");
    scale(j) = std::sqrt(var);
  }
  auto enc = std::make_shared<LearnedFunction>();
  enc->kind = FunctionKind::StandardizeEncode;
  enc->params = {{"mean", Matrix(mean)}, {"scale", Matrix(scale)}};
  enc->in_widths = widths_of(inputs);
  enc->out_widths = {x.cols()};
  auto dec = std::make_shared<LearnedFunction>(*enc);
  dec->kind = FunctionKind::StandardizeDecode;
  dec->in_widths = {x.cols()};
  dec->out_widths = widths_of(inputs);
  return {enc, dec};
}

CoderPair standardize_fit(const DataBatch& batch) {
  return standardize_fit(std::span<const DataBatch>(&batch, 1));
}

// ---------------------------------------------------------------------------
// Linear regression

namespace {

struct Design {
  Matrix x;
  Matrix y;
};

Design design_matrices(std::span<const DataBatch> x, std::span<const DataBatch> y, Index window,
                       const char* who) {
  if (x.empty() || y.empty()) throw Error(codes::kBadArgument, std::string(who) + ": needs X and Y");
  std::vector<DataBatch> all(x.begin(), x.end());
  all.insert(all.end(), y.begin(), y.end());
  require_same_samples(all, who);
  if (window > 0) {
    sequence_length(all, who);
    return {window_features(x, window), stack_steps(y)};
  }
  return {hconcat(x), hconcat(y)};
}

}  // namespace

FunctionPtr linreg_fit(std::span<const DataBatch> x, std::span<const DataBatch> y,
                       const LinregOptions& opts) {
  if (opts.ridge < 0) throw Error(codes::kBadArgument, "linreg: ridge must be nonnegative");
  if (opts.window < 0) throw Error(codes::kBadArgument, "linreg: window must be nonnegative");
  const Design d = design_matrices(x, y, opts.window, "linreg");
  const Index n = d.x.rows();
  const Index p = d.x.cols();
  Matrix a(n, p + 1);
  a.leftCols(p) = d.x;
  a.col(p).setOnes();

  Matrix coef;
  if (opts.ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (qr.rank() < p + 1)
      throw Error(codes::kSingular, "linreg: normal equations are singular (rank " +
                                        std::to_string(qr.rank()) + " < " +
                                        std::to_string(p + 1) + ")");
    coef = qr.solve(d.y);
  } else {
    Matrix gram = a.transpose() * a;
    gram.diagonal().head(p).array() += opts.ridge;
    coef = gram.ldlt().solve(a.transpose() * d.y);
  }

  auto f = std::make_shared<LearnedFunction>();
  f->kind = FunctionKind::Linreg;
  f->params["W"] = coef.topRows(p);
  f->params["b"] = coef.bottomRows(1);
  f->params["window"] = scalar_matrix(static_cast<double>(opts.window));
  f->in_widths = widths_of(x);
  f->out_widths = widths_of(y);
  return f;
}

FunctionPtr linreg_fit(const DataBatch& x, const DataBatch& y, double ridge) {
  return linreg_fit(std::span<const DataBatch>(&x, 1), std::span<const DataBatch>(&y, 1),
                    LinregOptions{ridge, 0});
}

// ---------------------------------------------------------------------------
// MLP

MlpNetwork MlpNetwork::initialize(Index inputs, std::span<const Index> hidden, Index outputs,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MlpNetwork net;
  Index fan_in = inputs;
  std::vector<Index> widths(hidden.begin(), hidden.end());
  widths.push_back(outputs);
  for (Index fan_out : widths) {
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  return net;
}

Matrix MlpNetwork::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Matrix z = (h * weights[l]).rowwise() + biases[l];
    h = l + 1 < weights.size() ? Matrix(z.array().tanh()) : z;
  }
  return h;
}

double MlpNetwork::loss(const Matrix& x, const Matrix& y) const {
  return (forward(x) - y).squaredNorm() / static_cast<double>(y.size());
}

Eigen::VectorXd MlpNetwork::gradient(const Matrix& x, const Matrix& y) const {
  const std::size_t layers = weights.size();
  std::vector<Matrix> acts{x};
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = (acts.back() * weights[l]).rowwise() + biases[l];
    acts.push_back(l + 1 < layers ? Matrix(z.array().tanh()) : z);
  }
  std::vector<Matrix> gw(layers);
  std::vector<Eigen::RowVectorXd> gb(layers);
  Matrix delta = (acts.back() - y) * (2.0 / static_cast<double>(y.size()));
  for (std::size_t l = layers; l-- > 0;) {
    gw[l] = acts[l].transpose() * delta;
    gb[l] = delta.colwise().sum();
    if (l > 0)
      delta = ((delta * weights[l].transpose()).array() * (1.0 - acts[l].array().square()))
                  .matrix();
  }
  Eigen::VectorXd out(parameter_count());
  Index at = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    out.segment(at, gw[l].size()) = Eigen::Map<const Eigen::VectorXd>(gw[l].data(), gw[l].size());
    at += gw[l].size();
    out.segment(at, gb[l].size()) = gb[l].transpose();
    at += gb[l].size();
  }
  return out;
}

Index MlpNetwork::parameter_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::VectorXd MlpNetwork::flat() const {
  Eigen::VectorXd out(parameter_count());
  Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.segment(at, weights[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights[l].data(), weights[l].size());
    at += weights[l].size();
    out.segment(at, biases[l].size()) = biases[l].transpose();
    at += biases[l].size();
  }
  return out;
}

void MlpNetwork::set_flat(const Eigen::VectorXd& theta) {
  Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(weights[l].data(), weights[l].size()) =
        theta.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = theta.segment(at, biases[l].size()).transpose();
    at += biases[l].size();
  }
}

FunctionPtr mlp_fit(std::span<const DataBatch> x, std::span<const DataBatch> y,
                    const MlpOptions& opts) {
  if (opts.epochs < 1) throw Error(codes::kBadArgument, "mlp: epochs must be >= 1");
  if (opts.batch_size < 1) throw Error(codes::kBadArgument, "mlp: batch size must be >= 1");
  if (!(opts.learning_rate > 0)) throw Error(codes::kBadArgument, "mlp: lr must be positive");
  for (Index h : opts.hidden)
    if (h < 1) throw Error(codes::kBadArgument, "mlp: layer widths must be >= 1");
  const Design d = design_matrices(x, y, opts.window, "mlp");

  const ColumnScaling xs = column_scaling(d.x);
  const ColumnScaling ys = column_scaling(d.y);
  const Matrix xn = normalize(d.x, xs.mean, xs.scale);
  const Matrix yn = normalize(d.y, ys.mean, ys.scale);

  MlpNetwork net = MlpNetwork::initialize(xn.cols(), opts.hidden, yn.cols(), opts.seed);
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  const Index n = xn.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (Index i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1))]);
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += opts.batch_size) {
      const Index len = std::min(opts.batch_size, n - start);
      std::vector<Index> rows(order.begin() + start, order.begin() + start + len);
      const Matrix xb = xn(rows, Eigen::all);
      const Matrix yb = yn(rows, Eigen::all);
      epoch_loss += net.loss(xb, yb) * static_cast<double>(len);
      Eigen::VectorXd theta = net.flat();
      theta -= opts.learning_rate * net.gradient(xb, yb);
      net.set_flat(theta);
    }
    if (!std::isfinite(epoch_loss) || !net.flat().allFinite())
      throw Error(codes::kDiverged, "mlp: training diverged at epoch " + std::to_string(epoch));
  }

  auto f = std::make_shared<LearnedFunction>();
  f->kind = FunctionKind::Mlp;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    f->params["W" + std::to_string(l)] = net.weights[l];
    f->params["b" + std::to_string(l)] = net.biases[l];
  }
  Matrix hidden(1, static_cast<Index>(opts.hidden.size()));
  for (std::size_t i = 0; i < opts.hidden.size(); ++i)
    hidden(0, static_cast<Index>(i)) = static_cast<double>(opts.hidden[i]);
  f->params["hidden"] = hidden;
  f->params["x_mean"] = xs.mean;
  f->params["x_scale"] = xs.scale;
  f->params["y_mean"] = ys.mean;
  f->params["y_scale"] = ys.scale;
  f->params["window"] = scalar_matrix(static_cast<double>(opts.window));
  f->in_widths = widths_of(x);
  f->out_widths = widths_of(y);
  return f;
}

FunctionPtr mlp_fit(const DataBatch& x, const DataBatch& y, const MlpOptions& opts) {
  return mlp_fit(std::span<const DataBatch>(&x, 1), std::span<const DataBatch>(&y, 1), opts);
}

// ---------------------------------------------------------------------------
// Linear state-space sequence model

FunctionPtr dlinss_fit(const DataBatch& v, const DataBatch& phi, const DlinssOptions& opts) {
  const Index order = opts.order;
  const Index steps = v.width();
  if (order < 1) throw Error(codes::kBadArgument, "dlinss: order must be >= 1");
  if (order >= steps)
    throw Error(codes::kBadArgument, "dlinss: order " + std::to_string(order) +
                                         " must be below the sequence length " +
                                         std::to_string(steps));
  if (phi.width() != steps || phi.samples() != v.samples())
    throw Error(codes::kRuntimeShape, "dlinss: input and output sequences are not aligned");
  if (opts.ridge < 0) throw Error(codes::kBadArgument, "dlinss: ridge must be nonnegative");

  // Input/output difference equation:
  //   phi_t = sum_i a_i phi_{t-i} + sum_{i=0..n} b_i v_{t-i}, zero initial state.
  const Index n = v.samples();
  const Index features = 2 * order + 1;
  Matrix a(n * steps + features, features);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n * steps + features);
  a.setZero();
  for (Index s = 0; s < n; ++s) {
    for (Index t = 0; t < steps; ++t) {
      const Index row = s * steps + t;
      for (Index i = 1; i <= order; ++i)
        if (t - i >= 0) a(row, i - 1) = phi.values(s, t - i);
      for (Index i = 0; i <= order; ++i)
        if (t - i >= 0) a(row, order + i) = v.values(s, t - i);
      rhs(row) = phi.values(s, t);
    }
  }
  const double lambda = std::sqrt(opts.ridge);
  for (Index j = 0; j < features; ++j) a(n * steps + j, j) = lambda;
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);

  // Observer canonical realization.
  const double b0 = coef(order);
  Matrix A = Matrix::Zero(order, order);
  Matrix B(order, 1);
  Matrix C = Matrix::Zero(1, order);
  C(0, 0) = 1.0;
  for (Index i = 0; i < order; ++i) {
    A(i, 0) = coef(i);
    if (i + 1 < order) A(i, i + 1) = 1.0;
    B(i, 0) = coef(order + 1 + i) + coef(i) * b0;
  }

  auto f = std::make_shared<LearnedFunction>();
  f->kind = FunctionKind::Dlinss;
  f->params = {{"A", A}, {"B", B}, {"C", C}, {"D", scalar_matrix(b0)}};
  f->in_widths = {steps};
  f->out_widths = {steps};
  const double radius = A.eigenvalues().cwiseAbs().maxCoeff();
  if (radius >= 1.25) {
    std::ostringstream os;
    os << "unstable fit: spectral radius " << radius;
    f->notes.push_back(os.str());
  }
  return f;
}

FunctionPtr compose(const FunctionPtr& f, const FunctionPtr& g) {
  if (f->out_widths != g->in_widths)
    throw Error(codes::kRuntimeShape, "compose: output widths of the first function do not "
                                      "match the inputs of the second");
  auto c = std::make_shared<LearnedFunction>();
  c->kind = FunctionKind::Composed;
  c->in_widths = f->in_widths;
  c->out_widths = g->out_widths;
  c->stages = {f, g};
  return c;
}

// ---------------------------------------------------------------------------
// Application

namespace {

std::vector<DataBatch> apply_windowed(const LearnedFunction& f,
                                      std::span<const DataBatch> inputs, Index window,
                                      const std::function<Matrix(const Matrix&)>& model) {
  const Index steps = sequence_length(inputs, to_string(f.kind).data());
  for (Index w : f.out_widths)
    if (w != steps)
      throw Error(codes::kRuntimeShape, "windowed model output length differs from input");
  const Matrix y = model(window_features(inputs, window));
  return unstack_steps(y, inputs.front().samples(), steps);
}

Matrix mlp_forward(const LearnedFunction& f, const Matrix& x) {
  const Index layers = f.param("hidden").cols() + 1;
  Matrix h = normalize(x, f.param("x_mean"), f.param("x_scale"));
  for (Index l = 0; l < layers; ++l) {
    const Matrix& w = f.param("W" + std::to_string(l));
    const Matrix& b = f.param("b" + std::to_string(l));
    Matrix z = (h * w).rowwise() + Eigen::RowVectorXd(b.row(0));
    h = l + 1 < layers ? Matrix(z.array().tanh()) : z;
  }
  return denormalize(h, f.param("y_mean"), f.param("y_scale"));
}

}  // namespace

std::vector<DataBatch> apply(const LearnedFunction& f, std::span<const DataBatch> inputs) {
  if (inputs.size() != f.in_widths.size())
    throw Error(codes::kRuntimeShape,
                std::string(to_string(f.kind)) + " expects " +
                    std::to_string(f.in_widths.size()) + " input batches, got " +
                    std::to_string(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].width() != f.in_widths[i])
      throw Error(codes::kRuntimeShape,
                  std::string(to_string(f.kind)) + " input " + std::to_string(i + 1) +
                      " has width " + std::to_string(inputs[i].width()) + ", expected " +
                      std::to_string(f.in_widths[i]));
  }
  require_same_samples(inputs, to_string(f.kind).data());

  switch (f.kind) {
    case FunctionKind::PcaEncode: {
      const Matrix x = hconcat(inputs);
      const Eigen::RowVectorXd mean = f.param("mean").row(0);
      return {DataBatch((x.rowwise() - mean) * f.param("basis"))};
    }
    case FunctionKind::PcaDecode: {
      const Eigen::RowVectorXd mean = f.param("mean").row(0);
      Matrix x = (inputs[0].values * f.param("basis").transpose()).rowwise() + mean;
      return hsplit(x, f.out_widths);
    }
    case FunctionKind::StandardizeEncode: {
      const Matrix x = hconcat(inputs);
      return {DataBatch(normalize(x, f.param("mean"), f.param("scale")))};
    }
    case FunctionKind::StandardizeDecode:
      return hsplit(denormalize(inputs[0].values, f.param("mean"), f.param("scale")),
                    f.out_widths);
    case FunctionKind::Linreg: {
      auto affine = [&](const Matrix& x) -> Matrix {
        return (x * f.param("W")).rowwise() + Eigen::RowVectorXd(f.param("b").row(0));
      };
      const auto window = static_cast<Index>(f.scalar("window", 0));
      if (window > 0) return apply_windowed(f, inputs, window, affine);
      return hsplit(affine(hconcat(inputs)), f.out_widths);
    }
    case FunctionKind::Mlp: {
      auto model = [&](const Matrix& x) { return mlp_forward(f, x); };
      const auto window = static_cast<Index>(f.scalar("window", 0));
      if (window > 0) return apply_windowed(f, inputs, window, model);
      return hsplit(model(hconcat(inputs)), f.out_widths);
    }
    case FunctionKind::Dlinss: {
      const Matrix& A = f.param("A");
      const Matrix& B = f.param("B");
      const Matrix& C = f.param("C");
      const double D = f.param("D")(0, 0);
      const Matrix& v = inputs[0].values;
      Matrix out(v.rows(), v.cols());
      for (Index s = 0; s < v.rows(); ++s) {
        Eigen::VectorXd state = Eigen::VectorXd::Zero(A.rows());
        for (Index t = 0; t < v.cols(); ++t) {
          out(s, t) = (C * state)(0) + D * v(s, t);
          state = A * state + B.col(0) * v(s, t);
        }
      }
      return {DataBatch(std::move(out))};
    }
    case FunctionKind::Composed: {
      std::vector<DataBatch> current(inputs.begin(), inputs.end());
      for (const auto& stage : f.stages) current = fdf::apply(*stage, current);
      return current;
    }
  }
  throw Error(codes::kRuntimeShape, "unknown function kind");
}

}  // namespace fdf
