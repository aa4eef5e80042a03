#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "structmc/common.hpp"
#include "structmc/ensembles.hpp"
#include "structmc/nomc.hpp"

namespace structmc {

/// Kernel families supported by the feature-map machinery.  The first three
/// are shift-invariant (approximated through random cosine features); the
/// rest are pointwise-nonlinear kernels of the form E[h(w.x) h(w.y)] with
/// standard Gaussian rows w.
enum class KernelTag { Gaussian, Matern, Cauchy, Angular, Quadratic, Tanh, Sine, ExpPng };

struct KernelSpec {
  KernelTag tag = KernelTag::Gaussian;
  double sigma = 1.0;        ///< amplitude scale (Gaussian, Matern)
  double lengthscale = 1.0;  ///< bandwidth (Gaussian only)
  double nu = 1.5;           ///< smoothness (Matern only)
  double growth = 1.0;       ///< exponent scale c (ExpPng only)

  static KernelSpec gaussian(double sigma, double lengthscale) {
    KernelSpec k;
    k.tag = KernelTag::Gaussian;
    k.sigma = sigma;
    k.lengthscale = lengthscale;
    return k;
  }
  static KernelSpec matern(double sigma, double nu) {
    KernelSpec k;
    k.tag = KernelTag::Matern;
    k.sigma = sigma;
    k.nu = nu;
    return k;
  }
  static KernelSpec cauchy() {
    KernelSpec k;
    k.tag = KernelTag::Cauchy;
    return k;
  }
  static KernelSpec angular() {
    KernelSpec k;
    k.tag = KernelTag::Angular;
    return k;
  }
  static KernelSpec quadratic() {
    KernelSpec k;
    k.tag = KernelTag::Quadratic;
    return k;
  }
  static KernelSpec tanh_kernel() {
    KernelSpec k;
    k.tag = KernelTag::Tanh;
    return k;
  }
  static KernelSpec sine() {
    KernelSpec k;
    k.tag = KernelTag::Sine;
    return k;
  }
  static KernelSpec exp_png(double growth) {
    KernelSpec k;
    k.tag = KernelTag::ExpPng;
    k.growth = growth;
    return k;
  }

  bool shift_invariant() const {
    return tag == KernelTag::Gaussian || tag == KernelTag::Matern || tag == KernelTag::Cauchy;
  }

  std::string label() const {
    switch (tag) {
      case KernelTag::Gaussian: return "gaussian";
      case KernelTag::Matern: return "matern";
      case KernelTag::Cauchy: return "cauchy";
      case KernelTag::Angular: return "angular";
      case KernelTag::Quadratic: return "quadratic";
      case KernelTag::Tanh: return "tanh";
      case KernelTag::Sine: return "sine";
      case KernelTag::ExpPng: return "exp_png";
    }
    throw parameter_error("unknown kernel tag");
  }

  void validate() const {
    if (!std::isfinite(sigma) || sigma <= 0.0)
      throw parameter_error("kernel sigma must be positive, got " + fmt6(sigma));
    if (tag == KernelTag::Gaussian && (!std::isfinite(lengthscale) || lengthscale <= 0.0))
      throw parameter_error("gaussian lengthscale must be positive, got " + fmt6(lengthscale));
    if (tag == KernelTag::Matern && (!std::isfinite(nu) || nu <= 0.0))
      throw parameter_error("matern smoothness must be positive, got " + fmt6(nu));
    if (tag == KernelTag::ExpPng && (!std::isfinite(growth) || growth <= 0.0))
      throw parameter_error("exp_png growth must be positive, got " + fmt6(growth));
  }

  /// Scale factor in front of the cosine feature map.  Equals K(x, x) for the
  /// shift-invariant families: sigma^2 for Gaussian/Matern and 2^d for the
  /// product Cauchy kernel (whose spectral measure is the standard Laplace
  /// product with total mass 2 per coordinate).
  double amplitude(long d) const {
    if (tag == KernelTag::Cauchy) return std::exp2(static_cast<double>(d));
    return sigma * sigma;
  }
};

/// Law of the frequency rows used to approximate the kernel in dimension d.
inline IsotropicLaw spectral_law(const KernelSpec& spec, long d) {
  spec.validate();
  switch (spec.tag) {
    case KernelTag::Gaussian: return IsotropicLaw::gaussian_scaled(d, spec.lengthscale);
    case KernelTag::Matern: return IsotropicLaw::matern_spectral(d, spec.nu);
    case KernelTag::Cauchy: return IsotropicLaw::laplace_product(d);
    default: return IsotropicLaw::gaussian_std(d);
  }
}

namespace detail {

/// Matern correlation through the modified Bessel function; valid for any
/// nu > 0.  Kept separate from the half-integer shortcuts so the two paths
/// can be cross-checked against each other.
inline double matern_correlation_bessel(double nu, double r) {
  if (r < 1e-8) return 1.0;
  const double arg = std::sqrt(2.0 * nu) * r;
  if (arg > 690.0) return 0.0;  // K_nu underflows; correlation is ~e^{-arg}
  const double lead = std::pow(2.0, 1.0 - nu) / std::tgamma(nu);
  return lead * std::pow(arg, nu) * std::cyl_bessel_k(nu, arg);
}

inline double matern_correlation(double nu, double r) {
  if (r <= 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-r);
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * r;
    return (1.0 + a) * std::exp(-a);
  }
  if (nu == 2.5) {
    const double a = std::sqrt(5.0) * r;
    return (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  return matern_correlation_bessel(nu, r);
}

/// Closed-form kernel value, or nullopt for the two families (Tanh, Sine)
/// whose value is defined through the frozen Monte Carlo oracle.
inline std::optional<double> closed_form_kernel(const KernelSpec& spec,
                                                const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& y) {
  switch (spec.tag) {
    case KernelTag::Gaussian: {
      const double r2 = (x - y).squaredNorm();
      return spec.sigma * spec.sigma *
             std::exp(-r2 / (2.0 * spec.lengthscale * spec.lengthscale));
    }
    case KernelTag::Matern: {
      const double r = (x - y).norm();
      return spec.sigma * spec.sigma * matern_correlation(spec.nu, r);
    }
    case KernelTag::Cauchy: {
      double prod = 1.0;
      for (long j = 0; j < x.size(); ++j) {
        const double z = x[j] - y[j];
        prod *= 2.0 / (1.0 + z * z);
      }
      return prod;
    }
    case KernelTag::Angular: {
      const double nx = x.norm();
      const double ny = y.norm();
      if (nx == 0.0 || ny == 0.0)
        throw domain_error("angular kernel is undefined at the zero vector");
      const double c = std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
      const double theta = std::acos(c);
      const double pi = 3.14159265358979323846;
      return 1.0 - 2.0 * theta / pi;
    }
    case KernelTag::Quadratic: {
      const double dot = x.dot(y);
      return x.squaredNorm() * y.squaredNorm() + 2.0 * dot * dot;
    }
    case KernelTag::ExpPng: {
      const double c = spec.growth;
      return std::exp(c * c * (x + y).squaredNorm() / 2.0);
    }
    default: return std::nullopt;
  }
}

}  // namespace detail

/// Fixed seed of the frozen Monte Carlo oracle used for kernels without a
/// closed form.  Changing it changes the reference values everywhere, so it
/// is part of the library's reproducibility contract.
inline constexpr std::uint64_t frozen_oracle_seed = 0x0FACE0FF5EEDull;
inline constexpr long frozen_oracle_samples = 10000000L;

struct OracleValue {
  double value = 0.0;
  double half_width = 0.0;  ///< 99% normal-theory half-width (0 for closed forms)
};

/// Reference kernel value together with its uncertainty.  Closed-form
/// families return half_width 0.  Tanh and Sine are evaluated by Monte Carlo
/// with a fixed seed: because (w.x, w.y) for Gaussian w is exactly a centered
/// bivariate Gaussian with covariance [[|x|^2, x.y], [x.y, |y|^2]], the
/// oracle samples that two-dimensional law directly, which is the same
/// distribution at a fraction of the cost of drawing d-dimensional rows.
inline OracleValue exact_kernel_oracle(const KernelSpec& spec, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y,
                                       long samples = frozen_oracle_samples) {
  spec.validate();
  if (x.size() != y.size())
    throw arity_error("kernel arguments have mismatched dimensions " +
                      std::to_string(x.size()) + " and " + std::to_string(y.size()));
  if (x.size() == 0) throw arity_error("kernel arguments must be non-empty");
  if (auto v = detail::closed_form_kernel(spec, x, y)) return {*v, 0.0};
  if (samples < 2) throw parameter_error("oracle sample count must be at least 2");

  const double a = x.squaredNorm();
  const double b = y.squaredNorm();
  const double c = x.dot(y);
  const double l11 = std::sqrt(a);
  const double l21 = l11 > 0.0 ? c / l11 : 0.0;
  const double l22 = std::sqrt(std::max(b - l21 * l21, 0.0));

  Rng rng(frozen_oracle_seed);
  double sum = 0.0;
  double sumsq = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double u = l11 * g1;
    const double v = l21 * g1 + l22 * g2;
    const double prod = spec.tag == KernelTag::Tanh ? std::tanh(u) * std::tanh(v)
                                                    : std::sin(u) * std::sin(v);
    sum += prod;
    sumsq += prod * prod;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(sumsq / n - mean * mean, 0.0);
  const double z99 = 2.5758293035489004;  // standard normal 0.995 quantile
  return {mean, z99 * std::sqrt(var / n)};
}

/// Reference kernel value (closed form where available, frozen Monte Carlo
/// oracle otherwise).
inline double exact_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
  return exact_kernel_oracle(spec, x, y).value;
}

/// A frequency ensemble paired with everything needed to evaluate features:
/// the kernel it targets and, for shift-invariant kernels, the phase draws.
struct FeatureBundle {
  KernelSpec spec;
  Ensemble ensemble;
  Eigen::VectorXd phases;  ///< one phase in [0, 2pi) per row; empty otherwise
};

/// Attach phases (for shift-invariant kernels) to an ensemble.  The phase
/// stream depends only on phase_seed, so distinct ensembles can share one
/// set of phases.
inline FeatureBundle make_feature_bundle(const KernelSpec& spec, Ensemble ensemble,
                                         std::uint64_t phase_seed) {
  spec.validate();
  FeatureBundle fb;
  fb.spec = spec;
  fb.ensemble = std::move(ensemble);
  if (spec.shift_invariant()) {
    const double two_pi = 6.283185307179586476925;
    Rng rng(phase_seed);
    fb.phases.resize(fb.ensemble.s());
    for (long i = 0; i < fb.ensemble.s(); ++i) fb.phases[i] = two_pi * rng.uniform();
  }
  return fb;
}

/// Random feature map evaluated at one point.  Shift-invariant kernels use
/// sqrt(2 * amplitude / s) * cos(w.x + b); the rest use h(w.x) / sqrt(s)
/// with the family's nonlinearity h.
inline Eigen::VectorXd feature_vector(const FeatureBundle& fb, const Eigen::VectorXd& x) {
  const long s = fb.ensemble.s();
  const long d = fb.ensemble.d();
  if (x.size() != d)
    throw arity_error("feature input has dimension " + std::to_string(x.size()) +
                      ", ensemble has " + std::to_string(d));
  Eigen::VectorXd proj = fb.ensemble.rows * x;
  if (fb.spec.shift_invariant()) {
    if (fb.phases.size() != s)
      throw precondition_error("feature bundle is missing phases for a shift-invariant kernel");
    const double amp = std::sqrt(2.0 * fb.spec.amplitude(d) / static_cast<double>(s));
    return amp * (proj + fb.phases).array().cos().matrix();
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(s));
  switch (fb.spec.tag) {
    case KernelTag::Angular:
      return scale * proj.array().sign().matrix();
    case KernelTag::Quadratic:
      return scale * proj.array().square().matrix();
    case KernelTag::Tanh:
      return scale * proj.array().tanh().matrix();
    case KernelTag::Sine:
      return scale * proj.array().sin().matrix();
    case KernelTag::ExpPng:
      return scale * (fb.spec.growth * proj.array()).exp().matrix();
    default:
      throw parameter_error("unsupported kernel tag in feature_vector");
  }
}

/// Monte Carlo kernel estimate: inner product of the two feature vectors.
inline double approx_kernel(const FeatureBundle& fb, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y) {
  return feature_vector(fb, x).dot(feature_vector(fb, y));
}

/// Draws method-tagged ensembles for benchmark trials.  Construction does
/// all shared work up front (the optimized near-orthogonal base, the
/// character-table shape), so draw() is pure in (method, trial_seed) and safe
/// to call from worker threads.
class MethodEnsembleFactory {
 public:
  MethodEnsembleFactory(IsotropicLaw law, long s, std::uint64_t master_seed,
                        const std::vector<Method>& methods, OptNomcConfig nomc_cfg = {})
      : law_(law), s_(s) {
    law_.validate();
    if (s < 1) throw parameter_error("ensemble size must be at least 1");
    for (Method m : methods) {
      if (m == Method::OptNOMC && opt_base_.size() == 0) {
        nomc_cfg.seed = derive_seed(master_seed, stream::nomc_base, static_cast<std::uint64_t>(s));
        nomc_cfg.validate();
        opt_base_ = opt_nomc_build(law_.d, s, nomc_cfg).ensemble.rows;
      } else if (m == Method::AlgNOMC && !alg_spec_) {
        alg_spec_ = derive_alg_spec(law_.d, s);
      }
    }
  }

  /// Smallest character-table configuration in dimension d holding at least
  /// s rows.  Throws if d is not twice an odd prime.
  static AlgNomcSpec derive_alg_spec(long d, long s) {
    AlgNomcSpec::check_dimension(d);
    AlgNomcSpec spec;
    spec.p = d / 2;
    spec.r = 2;
    while (spec.row_pool() < s) {
      if (spec.r > 62) throw capacity_error("character table cannot reach " + std::to_string(s) + " rows");
      ++spec.r;
    }
    if (spec.row_pool() > s) spec.selected_count = s;
    spec.validate();
    return spec;
  }

  Ensemble draw(Method m, std::uint64_t trial_seed) const {
    switch (m) {
      case Method::MC:
        return sample_iid(law_, s_, trial_seed);
      case Method::QMC:
        return sample_qmc(law_, s_, trial_seed);
      case Method::OMC:
        return s_ <= law_.d ? sample_omc_block(law_, s_, trial_seed)
                            : sample_bomc(law_, s_, trial_seed);
      case Method::BOMC:
        return sample_bomc(law_, s_, trial_seed);
      case Method::OptNOMC: {
        if (opt_base_.size() == 0)
          throw precondition_error("factory was not built with the optimized method enabled");
        const Eigen::MatrixXd rot = random_rotation(
            law_.d, derive_seed(trial_seed, stream::nomc_rotation));
        Eigen::MatrixXd dirs = opt_base_ * rot.transpose();
        Ensemble e = radial_renormalize(dirs, law_, derive_seed(trial_seed, stream::radii),
                                        Method::OptNOMC);
        e.seed = trial_seed;
        return e;
      }
      case Method::AlgNOMC: {
        if (!alg_spec_)
          throw precondition_error("factory was not built with the character method enabled");
        Ensemble base = alg_nomc_build(*alg_spec_, trial_seed);
        Ensemble e = radial_renormalize(base.rows, law_, derive_seed(trial_seed, stream::radii),
                                        Method::AlgNOMC);
        e.seed = trial_seed;
        return e;
      }
    }
    throw parameter_error("unknown method");
  }

  const IsotropicLaw& law() const { return law_; }
  long s() const { return s_; }

 private:
  IsotropicLaw law_;
  long s_;
  Eigen::MatrixXd opt_base_;
  std::optional<AlgNomcSpec> alg_spec_;
};

/// One row of a benchmark table: a (kernel, method, ensemble size) cell.
struct MseCell {
  std::string kernel;
  std::string method;
  long multiplier = 0;
  long s = 0;
  long trials = 0;
  double mean_err = 0.0;
  double mse = 0.0;
  double ci95 = 0.0;  ///< bootstrap 95% half-width for the MSE
};

struct MseTable {
  std::vector<MseCell> cells;

  std::string to_csv() const {
    std::string out = "kernel,method,multiplier,s,trials,mean_err,mse,ci95\n";
    for (const MseCell& c : cells) {
      out += c.kernel + "," + c.method + "," + std::to_string(c.multiplier) + "," +
             std::to_string(c.s) + "," + std::to_string(c.trials) + "," + fmt17(c.mean_err) +
             "," + fmt17(c.mse) + "," + fmt17(c.ci95) + "\n";
    }
    return out;
  }

  const MseCell& cell(const std::string& method, long multiplier) const {
    for (const MseCell& c : cells)
      if (c.method == method && c.multiplier == multiplier) return c;
    throw parameter_error("no benchmark cell for method " + method + " at multiplier " +
                          std::to_string(multiplier));
  }
};

/// Kernel-approximation benchmark over methods and ensemble sizes
/// s = multiplier * d.  Evaluation pairs and the exact kernel values are
/// fixed up front; each trial draws a fresh ensemble (and fresh shared
/// phases) from seeds derived only from (master_seed, method, trial), so the
/// table is byte-identical for any thread count.
inline MseTable mse_benchmark(const KernelSpec& spec, const std::vector<Method>& methods,
                              long d, const std::vector<long>& multipliers, long trials,
                              const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
                              std::uint64_t master_seed, int threads = 1,
                              const OptNomcConfig& nomc_cfg = {}) {
  spec.validate();
  if (d < 1) throw dimension_error("benchmark dimension must be at least 1");
  if (trials < 2) throw parameter_error("benchmark needs at least 2 trials");
  if (methods.empty()) throw parameter_error("benchmark needs at least one method");
  if (multipliers.empty()) throw parameter_error("benchmark needs at least one multiplier");
  for (long m : multipliers)
    if (m < 1) throw parameter_error("block multipliers must be positive");
  if (pairs.empty()) throw parameter_error("benchmark needs at least one evaluation pair");
  for (const auto& pr : pairs)
    if (pr.first.size() != d || pr.second.size() != d)
      throw arity_error("evaluation pair dimension does not match benchmark dimension " +
                        std::to_string(d));

  // Canonical cell order: methods by enum value, multipliers ascending.
  std::vector<Method> method_order;
  for (Method m : {Method::MC, Method::QMC, Method::OMC, Method::BOMC, Method::OptNOMC,
                   Method::AlgNOMC}) {
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) method_order.push_back(m);
  }
  std::vector<long> mult_order = multipliers;
  std::sort(mult_order.begin(), mult_order.end());
  mult_order.erase(std::unique(mult_order.begin(), mult_order.end()), mult_order.end());

  const IsotropicLaw law = spectral_law(spec, d);
  const long npairs = static_cast<long>(pairs.size());
  std::vector<double> exact(npairs);
  for (long p = 0; p < npairs; ++p) exact[p] = exact_kernel(spec, pairs[p].first, pairs[p].second);

  // Shared per-size factories (built serially so the optimized base is
  // deterministic and ready before worker threads start).
  std::vector<MethodEnsembleFactory> factories;
  factories.reserve(mult_order.size());
  for (long mult : mult_order)
    factories.emplace_back(law, mult * d, master_seed, method_order, nomc_cfg);

  MseTable table;
  long cell_index = 0;
  for (Method m : method_order) {
    for (std::size_t mi = 0; mi < mult_order.size(); ++mi) {
      const MethodEnsembleFactory& factory = factories[mi];
      std::vector<double> trial_err(trials);
      std::vector<double> trial_sq(trials);
      parallel_for(trials, threads, [&](long t) {
        const std::uint64_t trial_seed =
            derive_seed(master_seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t));
        const std::uint64_t phase_seed =
            derive_seed(master_seed, stream::phases, static_cast<std::uint64_t>(t));
        FeatureBundle fb = make_feature_bundle(spec, factory.draw(m, trial_seed), phase_seed);
        double esum = 0.0;
        double sqsum = 0.0;
        for (long p = 0; p < npairs; ++p) {
          const double err = approx_kernel(fb, pairs[p].first, pairs[p].second) - exact[p];
          esum += err;
          sqsum += err * err;
        }
        trial_err[t] = esum / static_cast<double>(npairs);
        trial_sq[t] = sqsum / static_cast<double>(npairs);
      });

      MseCell cell;
      cell.kernel = spec.label();
      cell.method = method_tag(m);
      cell.multiplier = mult_order[mi];
      cell.s = factory.s();
      cell.trials = trials;
      double esum = 0.0;
      double ssum = 0.0;
      for (long t = 0; t < trials; ++t) {
        esum += trial_err[t];
        ssum += trial_sq[t];
      }
      cell.mean_err = esum / static_cast<double>(trials);
      cell.mse = ssum / static_cast<double>(trials);
      Rng boot(derive_seed(master_seed, stream::bootstrap, static_cast<std::uint64_t>(cell_index)));
      cell.ci95 = detail::bootstrap_mean_half_width(trial_sq, boot);
      table.cells.push_back(std::move(cell));
      ++cell_index;
    }
  }
  return table;
}

/// Mean distance to the 50th nearest neighbour (excluding the point itself)
/// over a random subsample of at most sample_size rows.  Brute force; used to
/// put datasets on a common scale.
inline double fiftieth_nn_scale(const Eigen::MatrixXd& points, long sample_size = 1000,
                                std::uint64_t seed = 0) {
  const long n = points.rows();
  if (n < 51)
    throw parameter_error("50th-neighbour scale needs at least 51 points, got " +
                          std::to_string(n));
  if (sample_size < 1) throw parameter_error("sample size must be at least 1");
  const long m = std::min(sample_size, n);

  std::vector<long> chosen(n);
  for (long i = 0; i < n; ++i) chosen[i] = i;
  if (m < n) {
    Rng rng(seed);
    for (long i = 0; i < m; ++i) {
      const long j = i + static_cast<long>(rng.uniform_index(n - i));
      std::swap(chosen[i], chosen[j]);
    }
  }

  double acc = 0.0;
  std::vector<double> dist2(n - 1);
  for (long k = 0; k < m; ++k) {
    const long i = chosen[k];
    long w = 0;
    for (long j = 0; j < n; ++j) {
      if (j == i) continue;
      dist2[w++] = (points.row(j) - points.row(i)).squaredNorm();
    }
    std::nth_element(dist2.begin(), dist2.begin() + 49, dist2.end());
    acc += std::sqrt(dist2[49]);
  }
  return acc / static_cast<double>(m);
}

/// Point cloud with the normalization factor that was divided out at load
/// time (the 50th-nearest-neighbour scale).
struct Dataset {
  Eigen::MatrixXd points;
  double scale = 1.0;
};

/// Headerless numeric CSV reader.  Errors name the offending row and column
/// (1-based).
inline Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw parse_error("dataset row " + std::to_string(line_no) + " is empty");
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    long col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size() || !std::isfinite(v))
          throw std::invalid_argument("trailing characters");
        row.push_back(v);
      } catch (const std::exception&) {
        throw parse_error("dataset value at row " + std::to_string(line_no) + ", column " +
                          std::to_string(col) + " is not numeric: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw parse_error("dataset row " + std::to_string(line_no) + " has " +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw parse_error("dataset file " + path + " has no rows");
  Eigen::MatrixXd mat(static_cast<long>(rows.size()), static_cast<long>(rows.front().size()));
  for (long i = 0; i < mat.rows(); ++i)
    for (long j = 0; j < mat.cols(); ++j) mat(i, j) = rows[i][j];
  return mat;
}

/// Rescale a point cloud by its 50th-nearest-neighbour scale.  Degenerate
/// clouds (zero scale, e.g. heavy duplication) are rejected.
inline Dataset normalize_dataset(Eigen::MatrixXd points, long sample_size = 1000,
                                 std::uint64_t seed = 0) {
  const double scale = fiftieth_nn_scale(points, sample_size, seed);
  if (!(scale > 0.0))
    throw parameter_error("dataset scale is not positive (degenerate point cloud)");
  Dataset ds;
  ds.points = std::move(points);
  ds.points /= scale;
  ds.scale = scale;
  return ds;
}

inline Dataset load_dataset(const std::string& path, long sample_size = 1000,
                            std::uint64_t seed = 0) {
  return normalize_dataset(load_matrix_csv(path), sample_size, seed);
}

}  // namespace structmc
