#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "structmc/common.hpp"
#include "structmc/ensembles.hpp"
#include "structmc/kernels.hpp"
#include "structmc/nomc.hpp"

namespace structmc {

/// A finite point cloud standing in for a distribution: M rows, d columns.
struct PointCloud {
  Eigen::MatrixXd points;

  long size() const { return points.rows(); }
  long d() const { return points.cols(); }

  void validate() const {
    if (points.rows() < 1) throw parameter_error("point cloud must hold at least one point");
    if (!points.allFinite()) throw parameter_error("point cloud contains non-finite entries");
  }
};

inline PointCloud load_cloud(const std::string& path) {
  PointCloud c{load_matrix_csv(path)};
  c.validate();
  return c;
}

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  for (long i = 0; i < cloud.points.rows(); ++i) {
    for (long j = 0; j < cloud.points.cols(); ++j) {
      if (j) out << ',';
      out << fmt17(cloud.points(i, j));
    }
    out << '\n';
  }
  if (!out) throw io_error("failed while writing " + path);
}

/// Distribution families of the comparison zoo.  All are location-scale
/// around (mean, covariance); the heavy-tailed ones are elliptical variance
/// mixtures of the Gaussian.
enum class DistTag { Gaussian, StudentT, Cauchy, Laplace, GaussianMixture, InverseWishartGaussian };

struct DistributionSpec {
  DistTag tag = DistTag::Gaussian;
  double df = 1.0;  ///< StudentT degrees of freedom
  double nu = 10.0; ///< inverse-Wishart degrees of freedom
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  Eigen::VectorXd weights;  ///< mixture weights; empty otherwise

  static DistributionSpec gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    DistributionSpec s;
    s.tag = DistTag::Gaussian;
    s.means.push_back(std::move(mean));
    s.covariances.push_back(std::move(cov));
    return s;
  }
  static DistributionSpec student_t(double df, Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    DistributionSpec s = gaussian(std::move(mean), std::move(cov));
    s.tag = DistTag::StudentT;
    s.df = df;
    return s;
  }
  static DistributionSpec cauchy(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    DistributionSpec s = gaussian(std::move(mean), std::move(cov));
    s.tag = DistTag::Cauchy;
    s.df = 1.0;
    return s;
  }
  static DistributionSpec laplace(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    DistributionSpec s = gaussian(std::move(mean), std::move(cov));
    s.tag = DistTag::Laplace;
    return s;
  }
  static DistributionSpec mixture(std::vector<Eigen::VectorXd> means,
                                  std::vector<Eigen::MatrixXd> covs, Eigen::VectorXd weights) {
    DistributionSpec s;
    s.tag = DistTag::GaussianMixture;
    s.means = std::move(means);
    s.covariances = std::move(covs);
    s.weights = std::move(weights);
    return s;
  }
  static DistributionSpec inverse_wishart_gaussian(double nu, Eigen::VectorXd mean,
                                                   Eigen::MatrixXd scale) {
    DistributionSpec s = gaussian(std::move(mean), std::move(scale));
    s.tag = DistTag::InverseWishartGaussian;
    s.nu = nu;
    return s;
  }

  long d() const { return means.empty() ? 0 : means.front().size(); }
  long components() const { return static_cast<long>(means.size()); }

  std::string label() const {
    switch (tag) {
      case DistTag::Gaussian: return "gaussian";
      case DistTag::StudentT: return "student_t";
      case DistTag::Cauchy: return "cauchy";
      case DistTag::Laplace: return "laplace";
      case DistTag::GaussianMixture: return "gaussian_mixture";
      case DistTag::InverseWishartGaussian: return "inv_wishart_gaussian";
    }
    throw parameter_error("unknown distribution tag");
  }

  void validate() const {
    if (means.empty()) throw parameter_error("distribution spec has no mean");
    if (covariances.size() != means.size())
      throw parameter_error("distribution spec has " + std::to_string(means.size()) +
                            " means but " + std::to_string(covariances.size()) + " covariances");
    const long dim = means.front().size();
    if (dim < 1) throw dimension_error("distribution dimension must be at least 1");
    for (const auto& m : means)
      if (m.size() != dim) throw dimension_error("mixture means disagree on dimension");
    for (const auto& c : covariances) {
      if (c.rows() != dim || c.cols() != dim)
        throw dimension_error("covariance shape does not match dimension " + std::to_string(dim));
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + c.cwiseAbs().maxCoeff()))
        throw parameter_error("covariance is not symmetric");
      Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() != Eigen::Success)
        throw parameter_error("covariance is not positive definite (Cholesky failed)");
    }
    if (tag == DistTag::GaussianMixture) {
      if (weights.size() != components())
        throw parameter_error("mixture needs one weight per component");
      if (weights.minCoeff() < 0.0) throw parameter_error("mixture weights must be non-negative");
      if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw parameter_error("mixture weights must sum to 1, got " + fmt17(weights.sum()));
    } else if (components() != 1) {
      throw parameter_error("non-mixture distributions take exactly one component");
    }
    if (tag == DistTag::StudentT && !(df > 0.0))
      throw parameter_error("t distribution needs df > 0, got " + fmt6(df));
    if (tag == DistTag::InverseWishartGaussian && !(nu > static_cast<double>(dim) - 1.0))
      throw parameter_error("inverse-Wishart needs nu > d - 1, got nu = " + fmt6(nu) +
                            " at d = " + std::to_string(dim));
  }
};

/// Random covariance constructions used by the comparison studies: a dense
/// Gram matrix sqrt(d) * A^T A, or the squared diagonal of the same kind of
/// Gaussian draw.
enum class CovKind { MFull, DDiag };

struct CovRecipe {
  CovKind kind = CovKind::MFull;
  long d = 1;
  std::uint64_t seed = 0;
};

inline Eigen::MatrixXd make_cov(const CovRecipe& recipe) {
  if (recipe.d < 1) throw dimension_error("covariance dimension must be at least 1");
  Rng rng(recipe.seed);
  Eigen::MatrixXd a(recipe.d, recipe.d);
  for (long i = 0; i < recipe.d; ++i)
    for (long j = 0; j < recipe.d; ++j) a(i, j) = rng.normal();
  if (recipe.kind == CovKind::DDiag) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(recipe.d, recipe.d);
    for (long i = 0; i < recipe.d; ++i) out(i, i) = a(i, i) * a(i, i);
    return out;
  }
  Eigen::MatrixXd m = std::sqrt(static_cast<double>(recipe.d)) * (a.transpose() * a);
  return (m + m.transpose()) / 2.0;
}

/// Draw M points from the spec.  Heavy-tailed families multiply a Gaussian
/// draw by an independent per-point radial factor; the inverse-Wishart
/// variant draws one covariance for the whole cloud and then samples
/// Gaussian points under it.
inline PointCloud sample_distribution(const DistributionSpec& spec, long M, std::uint64_t seed) {
  spec.validate();
  if (M < 1) throw parameter_error("cloud size must be at least 1");
  const long d = spec.d();
  Rng rng(seed);

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(spec.covariances.size());
  for (const auto& c : spec.covariances)
    factors.push_back(Eigen::LLT<Eigen::MatrixXd>(c).matrixL());

  PointCloud cloud;
  cloud.points.resize(M, d);
  Eigen::VectorXd g(d);

  if (spec.tag == DistTag::InverseWishartGaussian) {
    // Bartlett construction.  With Psi the scale matrix and L = chol(Psi^-1),
    // W = (L A)(L A)^T is Wishart(Psi^-1, nu), so Sigma = W^-1 = T T^T with
    // T = (L A)^-T; sampling mean + T g then has covariance Sigma.
    const Eigen::MatrixXd& psi = spec.covariances.front();
    Eigen::LLT<Eigen::MatrixXd> psi_llt(psi);
    Eigen::MatrixXd psi_inv = psi_llt.solve(Eigen::MatrixXd::Identity(d, d));
    psi_inv = (psi_inv + psi_inv.transpose()) / 2.0;
    Eigen::LLT<Eigen::MatrixXd> inv_llt(psi_inv);
    if (inv_llt.info() != Eigen::Success)
      throw parameter_error("inverse-Wishart scale matrix is numerically singular");
    Eigen::MatrixXd lower = inv_llt.matrixL();
    Eigen::MatrixXd bart = Eigen::MatrixXd::Zero(d, d);
    for (long i = 0; i < d; ++i) {
      bart(i, i) = rng.chi(spec.nu - static_cast<double>(i));
      for (long j = 0; j < i; ++j) bart(i, j) = rng.normal();
    }
    const Eigen::MatrixXd la = lower * bart;  // lower triangular
    const Eigen::MatrixXd t =
        la.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(d, d));
    for (long m = 0; m < M; ++m) {
      for (long j = 0; j < d; ++j) g[j] = rng.normal();
      cloud.points.row(m) = (spec.means.front() + t * g).transpose();
    }
    return cloud;
  }

  for (long m = 0; m < M; ++m) {
    long comp = 0;
    if (spec.tag == DistTag::GaussianMixture) {
      const double u = rng.uniform();
      double acc = 0.0;
      for (long q = 0; q < spec.components(); ++q) {
        acc += spec.weights[q];
        if (u < acc || q == spec.components() - 1) {
          comp = q;
          break;
        }
      }
    }
    for (long j = 0; j < d; ++j) g[j] = rng.normal();
    double radial = 1.0;
    switch (spec.tag) {
      case DistTag::StudentT:
        radial = std::sqrt(spec.df / rng.chi_square(spec.df));
        break;
      case DistTag::Cauchy:
        radial = std::sqrt(1.0 / rng.chi_square(1.0));
        break;
      case DistTag::Laplace:
        radial = std::sqrt(rng.exponential());
        break;
      default:
        break;
    }
    cloud.points.row(m) =
        (spec.means[comp] + radial * (factors[comp] * g)).transpose();
  }
  return cloud;
}

/// Projections of every cloud point onto the unit direction u.
inline Eigen::VectorXd project_cloud(const PointCloud& cloud, const Eigen::VectorXd& u) {
  if (u.size() != cloud.d())
    throw arity_error("direction dimension " + std::to_string(u.size()) +
                      " does not match cloud dimension " + std::to_string(cloud.d()));
  if (std::abs(u.norm() - 1.0) > 1e-8)
    throw precondition_error("projection direction must be unit norm, got " + fmt6(u.norm()));
  return cloud.points * u;
}

/// Order-p Wasserstein distance between two equally sized real samples:
/// sort both and average the matched power distances.  Sorted matching is
/// the optimal assignment in one dimension.
inline double wasserstein_1d(std::vector<double> xs, std::vector<double> ys, double p) {
  if (xs.size() != ys.size())
    throw arity_error("samples have different sizes " + std::to_string(xs.size()) + " and " +
                      std::to_string(ys.size()));
  if (xs.empty()) throw arity_error("samples must be non-empty");
  if (!(p >= 1.0)) throw parameter_error("transport order must satisfy p >= 1, got " + fmt6(p));
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    acc += std::pow(std::abs(xs[i] - ys[i]), p);
  return std::pow(acc / static_cast<double>(xs.size()), 1.0 / p);
}

namespace detail {

inline double transport_power_for_direction(const PointCloud& a, const PointCloud& b,
                                            const Eigen::VectorXd& u, double p) {
  Eigen::VectorXd pa = a.points * u;
  Eigen::VectorXd pb = b.points * u;
  std::sort(pa.data(), pa.data() + pa.size());
  std::sort(pb.data(), pb.data() + pb.size());
  double acc = 0.0;
  for (long i = 0; i < pa.size(); ++i) acc += std::pow(std::abs(pa[i] - pb[i]), p);
  return acc / static_cast<double>(pa.size());
}

}  // namespace detail

/// Sliced distance estimate: average the per-direction transport costs
/// W_p^p over the ensemble's rows and take the p-th root.  Directions are
/// processed in fixed order (slot-indexed), so the result does not depend on
/// the thread count.
inline double swd_estimate(const PointCloud& a, const PointCloud& b, const Ensemble& directions,
                           double p, int threads = 1) {
  a.validate();
  b.validate();
  if (a.size() != b.size())
    throw arity_error("clouds have different sizes " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()) + "; equal counts are required");
  if (a.d() != b.d())
    throw dimension_error("clouds have different dimensions");
  if (directions.s() < 1) throw arity_error("direction set must be non-empty");
  if (directions.d() != a.d())
    throw dimension_error("direction dimension does not match cloud dimension");
  if (!(p >= 1.0)) throw parameter_error("transport order must satisfy p >= 1, got " + fmt6(p));
  for (long i = 0; i < directions.s(); ++i)
    if (std::abs(directions.rows.row(i).norm() - 1.0) > 1e-8)
      throw precondition_error("direction row " + std::to_string(i) + " is not unit norm");

  const long s = directions.s();
  std::vector<double> powers(s);
  parallel_for(s, threads, [&](long i) {
    powers[i] = detail::transport_power_for_direction(a, b, directions.rows.row(i), p);
  });
  double acc = 0.0;
  for (long i = 0; i < s; ++i) acc += powers[i];
  return std::pow(acc / static_cast<double>(s), 1.0 / p);
}

/// Quadrature reference for the Gaussian case.  For each sphere-uniform u
/// the projected clouds are one-dimensional Gaussians, whose squared
/// 2-Wasserstein distance is (u.dm)^2 + (sqrt(u'S1u) - sqrt(u'S2u))^2; the
/// oracle averages that over directions and reports a bootstrap half-width
/// on the square-root scale.
inline OracleValue gaussian_swd_oracle(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1,
                                       const Eigen::VectorXd& m2, const Eigen::MatrixXd& s2,
                                       long n_directions = 1000000, std::uint64_t seed = 0,
                                       int resamples = 500) {
  const long d = m1.size();
  if (m2.size() != d || s1.rows() != d || s1.cols() != d || s2.rows() != d || s2.cols() != d)
    throw dimension_error("oracle inputs disagree on dimension");
  if (n_directions < 2) throw parameter_error("oracle needs at least 2 directions");
  for (const Eigen::MatrixXd* s : {&s1, &s2}) {
    if ((*s - s->transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s->cwiseAbs().maxCoeff()))
      throw parameter_error("oracle covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(*s);
    if (llt.info() != Eigen::Success)
      throw parameter_error("oracle covariance is not positive definite (Cholesky failed)");
  }

  const Eigen::VectorXd dm = m1 - m2;
  Rng rng(seed);
  std::vector<double> values(n_directions);
  Eigen::VectorXd u(d);
  for (long i = 0; i < n_directions; ++i) {
    double norm2 = 0.0;
    do {
      for (long j = 0; j < d; ++j) u[j] = rng.normal();
      norm2 = u.squaredNorm();
    } while (norm2 == 0.0);
    u /= std::sqrt(norm2);
    const double mean_part = u.dot(dm);
    const double sd1 = std::sqrt(std::max(u.dot(s1 * u), 0.0));
    const double sd2 = std::sqrt(std::max(u.dot(s2 * u), 0.0));
    values[i] = mean_part * mean_part + (sd1 - sd2) * (sd1 - sd2);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n_directions);

  std::vector<double> stats(resamples);
  for (int b = 0; b < resamples; ++b) {
    double acc = 0.0;
    for (long i = 0; i < n_directions; ++i)
      acc += values[rng.uniform_index(static_cast<std::uint64_t>(n_directions))];
    stats[b] = std::sqrt(acc / static_cast<double>(n_directions));
  }
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const long lo = static_cast<long>(pos);
    const long hi = std::min<long>(lo + 1, static_cast<long>(resamples) - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * stats[lo] + w * stats[hi];
  };
  return {std::sqrt(mean), (quantile(0.975) - quantile(0.025)) / 2.0};
}

/// One row of a sliced-distance benchmark table.
struct SwdCell {
  std::string distribution;
  std::string method;
  long multiplier = 0;
  long s = 0;
  long trials = 0;
  double mean_err = 0.0;
  double mse = 0.0;
  double ci95 = 0.0;
};

struct SwdTable {
  std::vector<SwdCell> cells;
  double reference = 0.0;  ///< dense-direction value the errors are measured against

  std::string to_csv() const {
    std::string out = "distribution,method,multiplier,s,trials,mean_err,mse,ci95\n";
    for (const SwdCell& c : cells) {
      out += c.distribution + "," + c.method + "," + std::to_string(c.multiplier) + "," +
             std::to_string(c.s) + "," + std::to_string(c.trials) + "," + fmt17(c.mean_err) +
             "," + fmt17(c.mse) + "," + fmt17(c.ci95) + "\n";
    }
    return out;
  }

  const SwdCell& cell(const std::string& method, long multiplier) const {
    for (const SwdCell& c : cells)
      if (c.method == method && c.multiplier == multiplier) return c;
    throw parameter_error("no benchmark cell for method " + method + " at multiplier " +
                          std::to_string(multiplier));
  }
};

/// Sliced-distance benchmark.  Two clouds are fixed per configuration; the
/// target value is computed once from a dense set of independent uniform
/// directions, and each (method, size) cell measures trial errors against
/// it.  Per-trial seeds derive only from (master seed, method, trial), so
/// tables are byte-identical for any thread count.
inline SwdTable swd_benchmark(const DistributionSpec& da, const DistributionSpec& db,
                              const std::vector<Method>& methods,
                              const std::vector<long>& multipliers, long trials, long M,
                              std::uint64_t master_seed, int threads = 1,
                              const OptNomcConfig& nomc_cfg = {}, double p = 2.0,
                              long reference_directions = 100000) {
  da.validate();
  db.validate();
  if (da.d() != db.d()) throw dimension_error("distribution specs disagree on dimension");
  const long d = da.d();
  if (trials < 2) throw parameter_error("benchmark needs at least 2 trials");
  if (M < 1) throw parameter_error("cloud size must be at least 1");
  if (methods.empty()) throw parameter_error("benchmark needs at least one method");
  if (multipliers.empty()) throw parameter_error("benchmark needs at least one multiplier");
  for (long m : multipliers)
    if (m < 1) throw parameter_error("block multipliers must be positive");
  if (!(p >= 1.0)) throw parameter_error("transport order must satisfy p >= 1, got " + fmt6(p));
  if (reference_directions < 100)
    throw parameter_error("reference needs at least 100 directions");

  std::vector<Method> method_order;
  for (Method m : {Method::MC, Method::QMC, Method::OMC, Method::BOMC, Method::OptNOMC,
                   Method::AlgNOMC}) {
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) method_order.push_back(m);
  }
  std::vector<long> mult_order = multipliers;
  std::sort(mult_order.begin(), mult_order.end());
  mult_order.erase(std::unique(mult_order.begin(), mult_order.end()), mult_order.end());

  const PointCloud cloud_a =
      sample_distribution(da, M, derive_seed(master_seed, stream::cloud, 0));
  const PointCloud cloud_b =
      sample_distribution(db, M, derive_seed(master_seed, stream::cloud, 1));

  const Ensemble ref_dirs = sample_iid(IsotropicLaw::unit_sphere(d), reference_directions,
                                       derive_seed(master_seed, stream::reference));
  const double reference = swd_estimate(cloud_a, cloud_b, ref_dirs, p, threads);

  const IsotropicLaw sphere = IsotropicLaw::unit_sphere(d);
  std::vector<MethodEnsembleFactory> factories;
  factories.reserve(mult_order.size());
  for (long mult : mult_order)
    factories.emplace_back(sphere, mult * d, master_seed, method_order, nomc_cfg);

  const std::string dist_label =
      da.label() == db.label() ? da.label() : da.label() + "_vs_" + db.label();

  SwdTable table;
  table.reference = reference;
  long cell_index = 0;
  for (Method m : method_order) {
    for (std::size_t mi = 0; mi < mult_order.size(); ++mi) {
      const MethodEnsembleFactory& factory = factories[mi];
      std::vector<double> trial_err(trials);
      std::vector<double> trial_sq(trials);
      parallel_for(trials, threads, [&](long t) {
        const std::uint64_t trial_seed =
            derive_seed(master_seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t));
        const double est = swd_estimate(cloud_a, cloud_b, factory.draw(m, trial_seed), p);
        const double err = est - reference;
        trial_err[t] = err;
        trial_sq[t] = err * err;
      });

      SwdCell cell;
      cell.distribution = dist_label;
      cell.method = method_tag(m);
      cell.multiplier = mult_order[mi];
      cell.s = factory.s();
      cell.trials = trials;
      double esum = 0.0, ssum = 0.0;
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

}  // namespace structmc
