#include "fdf/casestudies.hpp"

#include <cmath>
#include <numbers>

#include "fdf/store.hpp"

namespace fdf::cases {

namespace fs = std::filesystem;

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on the raw stream, so draws are identical across standard libraries.
double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = gaussian(rng);
  return m;
}

Matrix orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

/// Legendre polynomials P_1..P_d at x.
Eigen::RowVectorXd legendre(double x, Index d) {
  Eigen::RowVectorXd out(d);
  double prev = 1.0, cur = x;
  for (Index k = 1; k <= d; ++k) {
    out(k - 1) = cur;
    const double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Strain

StrainPhysics::StrainPhysics(const StrainSpec& spec) : spec_(spec) {
  if (spec.d < 1 || spec.d >= spec.D)
    throw Error(codes::kBadArgument, "strain generator needs 1 <= d < D (d=" +
                                         std::to_string(spec.d) + ", D=" +
                                         std::to_string(spec.D) + ")");
  if (spec.noise < 0) throw Error(codes::kBadArgument, "noise must be nonnegative");
  std::mt19937_64 rng(spec.seed);
  u_basis_ = orthonormal_columns(spec.D, spec.d, rng);
  e_basis_ = orthonormal_columns(spec.D, spec.d, rng);
  mix_ = Matrix::Identity(spec.d, spec.d) + 0.3 * gaussian_matrix(spec.d, spec.d, rng);
}

Matrix StrainPhysics::latent(const Matrix& F) const {
  Matrix z(F.rows(), spec_.d);
  for (Index i = 0; i < F.rows(); ++i) {
    z.row(i) = legendre(2.0 * F(i, 0) - 1.0, spec_.d);
    for (Index k = 0; k < spec_.d; ++k) z(i, k) /= 1.0 + 0.5 * static_cast<double>(k);
  }
  return z;
}

Matrix StrainPhysics::displacement(const Matrix& F) const {
  return latent(F) * u_basis_.transpose();
}

Matrix StrainPhysics::strain(const Matrix& F) const {
  const Matrix z = latent(F);
  Matrix w = z * mix_.transpose();
  for (Index i = 0; i < w.rows(); ++i)
    for (Index k = 0; k < w.cols(); ++k)
      w(i, k) += 0.3 * std::sin(std::numbers::pi * static_cast<double>(k + 1) * F(i, 0));
  return w * e_basis_.transpose();
}

StrainData gen_strain(Index n, const StrainSpec& spec, std::uint64_t sample_seed) {
  if (n < 1) throw Error(codes::kBadArgument, "strain generator needs n >= 1");
  const StrainPhysics physics(spec);
  std::mt19937_64 rng(sample_seed ^ 0x5eed5eed5eedULL);
  Matrix F(n, 1);
  for (Index i = 0; i < n; ++i) F(i, 0) = uniform01(rng);
  Matrix dU = physics.displacement(F);
  if (spec.noise > 0)
    for (Index j = 0; j < dU.cols(); ++j)
      for (Index i = 0; i < dU.rows(); ++i) dU(i, j) += spec.noise * gaussian(rng);
  return {DataBatch(F), DataBatch(std::move(dU)), DataBatch(physics.strain(F))};
}

StrainData gen_strain(Index n, Index D, Index d, std::uint64_t seed, double noise) {
  return gen_strain(n, StrainSpec{D, d, seed, noise}, seed);
}

Matrix fitting_matrix(Index D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return orthonormal_columns(D, D, rng);
}

// ---------------------------------------------------------------------------
// Bearing

Matrix nominal_response(const Matrix& V) {
  Matrix phi = Matrix::Zero(V.rows(), V.cols());
  for (Index s = 0; s < V.rows(); ++s) {
    for (Index t = 0; t < V.cols(); ++t) {
      double y = 0.1 * V(s, t);
      if (t >= 1) y += 1.5 * phi(s, t - 1) + 0.1 * V(s, t - 1);
      if (t >= 2) y -= 0.7 * phi(s, t - 2);
      phi(s, t) = y;
    }
  }
  return phi;
}

Matrix instance_response(const Matrix& V, double instance_bias) {
  const Matrix nominal = nominal_response(V);
  Matrix out = nominal;
  for (Index s = 0; s < V.rows(); ++s) {
    for (Index t = 0; t < V.cols(); ++t) {
      const double v = V(s, t);
      const double v1 = t >= 1 ? V(s, t - 1) : 0.0;
      const double phi = nominal(s, t);
      // Voltage-dependent offset plus mild saturation of the flux.
      out(s, t) += instance_bias * (0.5 * v + 0.3 * v1 * std::abs(v1) - 0.1 * phi * phi * phi);
    }
  }
  return out;
}

Matrix gen_voltages(Index n, Index T, std::uint64_t seed) {
  if (T < 16) throw Error(codes::kBadArgument, "bearing sequences need T >= 16");
  std::mt19937_64 rng(seed ^ 0xbea1ULL);
  Matrix V(n, T);
  for (Index s = 0; s < n; ++s) {
    const int shape = static_cast<int>(rng() % 5);
    const double amp = 0.5 + 1.5 * uniform01(rng);
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    const double freq = 1.0 + 3.0 * uniform01(rng);
    const Index onset = static_cast<Index>(uniform01(rng) * static_cast<double>(T / 3));
    for (Index t = 0; t < T; ++t) {
      const double x = static_cast<double>(t) / static_cast<double>(T);
      double v = 0.0;
      switch (shape) {
        case 0: v = t >= onset ? 1.0 : 0.0; break;
        case 1: v = std::sin(2.0 * std::numbers::pi * freq * x); break;
        case 2: v = t >= onset ? static_cast<double>(t - onset) / static_cast<double>(T - onset) : 0.0; break;
        case 3: v = (t >= onset && t < onset + T / 4) ? 1.0 : 0.0; break;
        default: v = std::sin(2.0 * std::numbers::pi * freq * x * x * 2.0); break;
      }
      V(s, t) = sign * amp * v;
    }
  }
  return V;
}

BearingData gen_bearing(Index n, Index T, double instance_bias, std::uint64_t seed,
                        double noise) {
  if (n < 1) throw Error(codes::kBadArgument, "bearing generator needs n >= 1");
  if (noise < 0) throw Error(codes::kBadArgument, "noise must be nonnegative");
  BearingData out;
  const Matrix ve = gen_voltages(n, T, seed);
  const Matrix vh = gen_voltages(n, T, seed + 0x1000);
  Matrix phih = instance_response(vh, instance_bias);
  std::mt19937_64 rng(seed ^ 0x4015eULL);
  for (Index j = 0; j < phih.cols(); ++j)
    for (Index i = 0; i < phih.rows(); ++i) phih(i, j) += noise * gaussian(rng);
  out.VE = DataBatch(ve);
  out.phiM = DataBatch(nominal_response(ve));
  out.VH = DataBatch(vh);
  out.phiH = DataBatch(std::move(phih));
  return out;
}

// ---------------------------------------------------------------------------
// Surrogates

void register_surrogates(Library& lib) {
  lib.register_builtin(
      {"abaqus_surrogate", Role::Processor, {{"D", "d", "seed", "noise"}, 0},
       [](const Arguments& a) {
         StrainSpec spec;
         spec.D = a.integer("D", spec.D);
         spec.d = a.integer("d", spec.d);
         spec.seed = static_cast<std::uint64_t>(a.integer("seed", static_cast<long>(spec.seed)));
         spec.noise = a.number("noise", 0.0);
         if (spec.d < 1 || spec.d >= spec.D) a.fail("needs 1 <= d < D");
         if (spec.noise < 0) a.fail("noise must be nonnegative");
         auto physics = std::make_shared<const StrainPhysics>(spec);
         Behavior b;
         b.processor = [physics](std::span<const DataBatch> in, const RunContext& ctx) {
           if (in.size() != 1 || in[0].width() != 1)
             throw Error(codes::kRuntimeShape, "abaqus_surrogate takes one scalar input");
           Matrix dU = physics->displacement(in[0].values);
           if (physics->spec().noise > 0) {
             std::mt19937_64 rng(ctx.seed);
             for (Index j = 0; j < dU.cols(); ++j)
               for (Index i = 0; i < dU.rows(); ++i) dU(i, j) += physics->spec().noise * gaussian(rng);
           }
           return std::vector<DataBatch>{DataBatch(std::move(dU)),
                                         DataBatch(physics->strain(in[0].values))};
         };
         return b;
       }},
      {1, 2, {}});

  lib.register_builtin({"maxwell_surrogate", Role::Processor, {},
                        [](const Arguments&) {
                          Behavior b;
                          b.processor = [](std::span<const DataBatch> in, const RunContext&) {
                            if (in.size() != 1)
                              throw Error(codes::kRuntimeShape, "maxwell_surrogate takes one input");
                            return std::vector<DataBatch>{DataBatch(nominal_response(in[0].values))};
                          };
                          return b;
                        }},
                       {1, 1, {}});
}

// ---------------------------------------------------------------------------
// Fixtures

namespace {

const char* kMinimal = R"fdf(# Dimension reduction before regression: the reduced inputs feed the network.
pipeline minimal

source data X
source data Y

box reduce : coder {
  predef = "pca(var=0.99)"
  in data X
  out func Encode, Decode
}

box project : processor {
  func = reduce.Encode
  in data X
  out data rX
}

box fit : trainer {
  k = 1
  predef = "mlp(50,50,opt=sgd)"
  in data project.rX, Y
  out func Predict
}

export func reduce.Encode
export func reduce.Decode
export func fit.Predict
)fdf";

const char* kStrainLearn = R"fdf(# Strain model: impact simulations, reduced on both sides, then regressed.
pipeline strain_learn

source data F "F"

box abaqus "Abaqus Model" : processor {
  predef = "abaqus_surrogate(D=64,d=3,seed=7)"
  in data F
  out data dU "ΔU", eps "ε_p"
}

box pca_dU "PCA ΔU" : coder {
  predef = "pca(var=0.999)"
  in data abaqus.dU
  out func E, D
}

box reduce_dU : processor {
  func = pca_dU.E
  in data abaqus.dU
  out data rdU "rΔU"
}

box pca_eps "PCA ε_p" : coder {
  predef = "pca(var=0.999)"
  in data abaqus.eps
  out func E, D
}

box reduce_eps : processor {
  func = pca_eps.E
  in data abaqus.eps
  out data reps "rε_p"
}

box strain "Strain Model" : trainer {
  k = 1
  predef = "mlp(50,50,opt=sgd,epochs=400,lr=0.05,batch=16)"
  in data reduce_dU.rdU, reduce_eps.reps
  out func model
}

export func pca_dU.E
export func pca_dU.D
export func pca_eps.E
export func pca_eps.D
export func strain.model
)fdf";

const char* kStrainExploit = R"fdf(# Strain prediction from an observed deformation image.
pipeline strain_exploit

source data img "image"
source func E_dU ("ΔU") -> ("rΔU")
source func strain_model ("rΔU") -> ("rε_p")
source func D_eps ("rε_p") -> ("ε_p")

box fit "Fitting" : processor {
  predef = "linmap(file=fit_map.csv)"
  in data img
  out data dU "ΔU"
}

box encode : processor {
  func = E_dU
  in data fit.dU
  out data rdU
}

box predict : processor {
  func = strain_model
  in data encode.rdU
  out data reps
}

box decode : processor {
  func = D_eps
  in data predict.reps
  out data eps
}

sink data decode.eps
)fdf";

const char* kStrainMiswired = R"fdf(# Same as strain_exploit, but the encoder was forgotten.
pipeline strain_exploit_miswired

source data img "image"
source func strain_model ("rΔU") -> ("rε_p")
source func D_eps ("rε_p") -> ("ε_p")

box fit "Fitting" : processor {
  predef = "linmap(file=fit_map.csv)"
  in data img
  out data dU "ΔU"
}

box predict : processor {
  func = strain_model
  in data fit.dU
  out data reps
}

box decode : processor {
  func = D_eps
  in data predict.reps
  out data eps
}

sink data decode.eps
)fdf";

const char* kBearingLearn = R"fdf(# Nominal Cauer model, then an ignorance model of the instance deviation.
pipeline bearing_learn

source data VE "V^E"
source data VH "V^H"
source data phiH "φ^H"

box maxwell "Flux Maxwell" : processor {
  predef = "maxwell_surrogate"
  in data VE
  out data phiM "φ^M"
}

box cauer "Cauer Model" : trainer {
  k = 1
  predef = "dlinss(order=2)"
  in data VE, maxwell.phiM
  out func model
}

box cauer_apply : processor {
  func = cauer.model
  in data VH
  out data phiC "φ^C"
}

box diff : processor {
  predef = "sub"
  in data phiH, cauer_apply.phiC
  out data dphi "φ^Δ"
}

box ignorance "Ignorance Model" : trainer {
  k = 1
  predef = "mlp(32,32,opt=sgd,window=8,epochs=40,lr=0.02,batch=32)"
  in data VH, diff.dphi
  out func model
}

export func cauer.model
export func ignorance.model
)fdf";

const char* kBearingExploit = R"fdf(# Instance flux = nominal Cauer prediction + learned deviation.
pipeline bearing_exploit

source data VI "V^I"
source func cauer ("V") -> ("φ")
source func ignorance ("V") -> ("φ")

box cauer_apply : processor {
  func = cauer
  in data VI
  out data phiC "φ^C"
}

box ignorance_apply : processor {
  func = ignorance
  in data VI
  out data dphi "φ^Δ"
}

box combine : processor {
  predef = "add"
  in data cauer_apply.phiC, ignorance_apply.dphi
  out data phiP "φ^P"
}

sink data cauer_apply.phiC
sink data combine.phiP
)fdf";

const char* kBearingVariantLearn = R"fdf(# Variant: the correction sees the Cauer flux as well as the voltage.
pipeline bearing_variant_learn

source data VE "V^E"
source data VH "V^H"
source data phiH "φ^H"

box maxwell "Flux Maxwell" : processor {
  predef = "maxwell_surrogate"
  in data VE
  out data phiM "φ^M"
}

box cauer "Cauer Model" : trainer {
  k = 1
  predef = "dlinss(order=2)"
  in data VE, maxwell.phiM
  out func model
}

box cauer_apply : processor {
  func = cauer.model
  in data VH
  out data phiC "φ^C"
}

box correction "Cauer Correction" : trainer {
  k = 2
  predef = "mlp(32,32,opt=sgd,window=8,epochs=40,lr=0.02,batch=32)"
  in data VH, cauer_apply.phiC, phiH
  out func model
}

export func cauer.model
export func correction.model
)fdf";

const char* kBearingVariantExploit = R"fdf(# Variant exploitation: the correction is composed after the Cauer model.
pipeline bearing_variant_exploit

source data VI "V^I"
source func cauer ("V") -> ("φ")
source func correction ("V", "φ") -> ("φ")

box cauer_apply : processor {
  func = cauer
  in data VI
  out data phiC "φ^C"
}

box correct : processor {
  func = correction
  in data VI, cauer_apply.phiC
  out data phiP "φ^P"
}

sink data cauer_apply.phiC
sink data correct.phiP
)fdf";

}  // namespace

const std::vector<Fixture>& fixtures() {
  static const std::vector<Fixture> all{
      {"minimal", kMinimal},
      {"strain_learn", kStrainLearn},
      {"strain_exploit", kStrainExploit},
      {"strain_exploit_miswired", kStrainMiswired},
      {"bearing_learn", kBearingLearn},
      {"bearing_exploit", kBearingExploit},
      {"bearing_variant_learn", kBearingVariantLearn},
      {"bearing_variant_exploit", kBearingVariantExploit},
  };
  return all;
}

const Fixture& fixture(std::string_view name) {
  for (const auto& f : fixtures())
    if (f.name == name) return f;
  throw Error(codes::kUnknownName, "no fixture named '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

void write_text(const fs::path& p, std::string_view text) { atomic_write(p, text); }

}  // namespace

void write_strain_scenario(const fs::path& dir, const ScenarioOptions& opts) {
  const Index train = opts.train > 0 ? opts.train : 300;
  const Index held = opts.held_out > 0 ? opts.held_out : 100;
  // Must agree with the abaqus_surrogate arguments in the learning fixture.
  const StrainSpec spec{64, 3, 7, 0.0};
  const StrainData learn = gen_strain(train, spec, opts.seed);
  const StrainData test = gen_strain(held, spec, opts.seed + 0x7e57);
  const Matrix Q = fitting_matrix(spec.D, 5);

  save_batch(learn.F, dir / "data" / "F.csv");
  save_batch(DataBatch(test.dU.values * Q.transpose()), dir / "data" / "img.csv");
  save_batch(test.eps, dir / "data" / "truth_eps.csv");
  save_batch(test.F, dir / "data" / "truth_F.csv");
  save_batch(DataBatch(Q), dir / "fit_map.csv");

  write_text(dir / "strain_learn.fdf", fixture("strain_learn").text);
  write_text(dir / "strain_exploit.fdf", fixture("strain_exploit").text);
  write_text(dir / "strain_exploit_miswired.fdf", fixture("strain_exploit_miswired").text);
  write_text(dir / "learn.manifest", "source F = data/F.csv\n");
  write_text(dir / "exploit.manifest",
             "source img = data/img.csv\n"
             "source E_dU = learn_out/pca_dU.E.fdfn\n"
             "source strain_model = learn_out/strain.model.fdfn\n"
             "source D_eps = learn_out/pca_eps.D.fdfn\n");
}

void write_bearing_scenario(const fs::path& dir, const ScenarioOptions& opts) {
  const Index train = opts.train > 0 ? opts.train : 60;
  const Index held = opts.held_out > 0 ? opts.held_out : 20;
  const Index T = 64;
  const BearingData learn = gen_bearing(train, T, opts.instance_bias, opts.seed);
  const Matrix vi = gen_voltages(held, T, opts.seed + 0x2000);

  save_batch(learn.VE, dir / "data" / "VE.csv");
  save_batch(learn.VH, dir / "data" / "VH.csv");
  save_batch(learn.phiH, dir / "data" / "phiH.csv");
  save_batch(DataBatch(vi), dir / "data" / "VI.csv");
  save_batch(DataBatch(instance_response(vi, opts.instance_bias)),
             dir / "data" / "truth_phiI.csv");

  const std::string learn_name = opts.variant ? "bearing_variant_learn" : "bearing_learn";
  const std::string exploit_name = opts.variant ? "bearing_variant_exploit" : "bearing_exploit";
  write_text(dir / (learn_name + ".fdf"), fixture(learn_name).text);
  write_text(dir / (exploit_name + ".fdf"), fixture(exploit_name).text);
  write_text(dir / "learn.manifest",
             "source VE = data/VE.csv\nsource VH = data/VH.csv\nsource phiH = data/phiH.csv\n");
  const std::string second = opts.variant ? "correction" : "ignorance";
  write_text(dir / "exploit.manifest",
             "source VI = data/VI.csv\n"
             "source cauer = learn_out/cauer.model.fdfn\n"
             "source " + second + " = learn_out/" + second + ".model.fdfn\n");
}

}  // namespace fdf::cases
