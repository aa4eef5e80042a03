#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "structmc/common.hpp"
#include "structmc/ensembles.hpp"
#include "structmc/kernels.hpp"

namespace structmc {

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Outcome of a claim check.  `Violated` is only ever emitted when an
/// inequality fails beyond the stated confidence radii; overlapping intervals
/// are never read as evidence of a strict inequality.
enum class Verdict { Consistent, Violated, Inconclusive };

inline std::string verdict_tag(Verdict v) {
  switch (v) {
    case Verdict::Consistent: return "consistent";
    case Verdict::Violated: return "violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  throw parameter_error("verdict_tag: unknown verdict");
}

/// One compared quantity: a left-hand statistic and a right-hand reference,
/// each with its own confidence interval.  Intervals are Wilson intervals for
/// probabilities and percentile-bootstrap intervals for moments, both at 99%.
/// Exactly known sides carry degenerate intervals (lo == value == hi).
struct ReportRow {
  std::string label;
  double lhs = 0.0;
  double lhs_lo = 0.0;
  double lhs_hi = 0.0;
  double rhs = 0.0;
  double rhs_lo = 0.0;
  double rhs_hi = 0.0;
};

/// Result of one diagnostic run: which claim was checked, with what
/// configuration, the compared statistics, and the overall verdict.
/// Reports are reproducible bit-for-bit from (claim, configuration, seed).
struct DiagnosticReport {
  std::string claim;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<ReportRow> rows;
  Verdict verdict = Verdict::Inconclusive;

  std::string to_json() const;
};

namespace detail {

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

}  // namespace detail

/// Serializes with a fixed key order (claim, verdict, config, rows) so equal
/// reports produce byte-identical files.
inline std::string DiagnosticReport::to_json() const {
  std::string out = "{\n";
  out += "  \"claim\": \"" + detail::json_escape(claim) + "\",\n";
  out += "  \"verdict\": \"" + verdict_tag(verdict) + "\",\n";
  out += "  \"config\": {";
  for (std::size_t i = 0; i < config.size(); ++i) {
    out += i == 0 ? "\n" : ",\n";
    out += "    \"" + detail::json_escape(config[i].first) + "\": \"" +
           detail::json_escape(config[i].second) + "\"";
  }
  out += config.empty() ? "},\n" : "\n  },\n";
  out += "  \"rows\": [";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ReportRow& r = rows[i];
    out += i == 0 ? "\n" : ",\n";
    out += "    {\"label\": \"" + detail::json_escape(r.label) + "\"";
    out += ", \"lhs\": " + fmt17(r.lhs);
    out += ", \"lhs_lo\": " + fmt17(r.lhs_lo);
    out += ", \"lhs_hi\": " + fmt17(r.lhs_hi);
    out += ", \"rhs\": " + fmt17(r.rhs);
    out += ", \"rhs_lo\": " + fmt17(r.rhs_lo);
    out += ", \"rhs_hi\": " + fmt17(r.rhs_hi);
    out += "}";
  }
  out += rows.empty() ? "]\n" : "\n  ]\n";
  out += "}\n";
  return out;
}

inline void save_report(const DiagnosticReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << report.to_json();
  if (!out) throw io_error("failed writing report to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

enum class TestFunctionTag { Square, AbsCos, ExpC };

/// Scalar statistics f applied to projections w.z.  Square is monotone in
/// |u| (the class whose estimator comparisons are binding); AbsCos and ExpC
/// cover the bounded and exponential classes, where tail comparisons are
/// informational only.
struct TestFunction {
  TestFunctionTag tag = TestFunctionTag::Square;
  double growth = 1.0;  ///< rate c for ExpC

  static TestFunction square() { return {TestFunctionTag::Square, 0.0}; }
  static TestFunction abs_cos() { return {TestFunctionTag::AbsCos, 0.0}; }
  static TestFunction exp_c(double c) {
    if (!std::isfinite(c)) throw parameter_error("TestFunction: growth rate must be finite");
    return {TestFunctionTag::ExpC, c};
  }

  /// True exactly for the class where MGF/MSE dominance is unconditional.
  bool monotone_in_abs() const { return tag == TestFunctionTag::Square; }

  std::string label() const {
    switch (tag) {
      case TestFunctionTag::Square: return "square";
      case TestFunctionTag::AbsCos: return "cos";
      case TestFunctionTag::ExpC: return "exp:" + fmt17(growth);
    }
    throw parameter_error("TestFunction: unknown tag");
  }

  std::string class_label() const {
    switch (tag) {
      case TestFunctionTag::Square: return "F1";
      case TestFunctionTag::AbsCos: return "F2/F3";
      case TestFunctionTag::ExpC: return "F3";
    }
    throw parameter_error("TestFunction: unknown tag");
  }

  double operator()(double u) const {
    switch (tag) {
      case TestFunctionTag::Square: return u * u;
      case TestFunctionTag::AbsCos: return std::cos(u);
      case TestFunctionTag::ExpC: return std::exp(growth * u);
    }
    throw parameter_error("TestFunction: unknown tag");
  }

  /// E f(w.z) for standard Gaussian w; the projection is N(0, |z|^2).
  double gaussian_mean(const Eigen::VectorXd& z) const {
    const double v = z.squaredNorm();
    switch (tag) {
      case TestFunctionTag::Square: return v;
      case TestFunctionTag::AbsCos: return std::exp(-0.5 * v);
      case TestFunctionTag::ExpC: return std::exp(0.5 * growth * growth * v);
    }
    throw parameter_error("TestFunction: unknown tag");
  }
};

// ---------------------------------------------------------------------------
// Confidence machinery
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double normal_q995 = 2.5758293035489004;

struct Wilson {
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// 99% Wilson score interval for a binomial proportion.  Degenerate counts
/// keep the touching endpoint exact: k == n gives hi == 1, k == 0 gives
/// lo == 0.
inline Wilson wilson99(long k, long n) {
  if (n < 1) throw parameter_error("wilson99: sample count must be positive");
  if (k < 0 || k > n) throw parameter_error("wilson99: successes out of range");
  const double z = normal_q995;
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (ph + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
  Wilson w;
  w.p = ph;
  w.lo = k == 0 ? 0.0 : std::max(0.0, center - half);
  w.hi = k == n ? 1.0 : std::min(1.0, center + half);
  return w;
}

/// 99% percentile-bootstrap interval of the mean, on a freshly derived
/// stream so report rows do not perturb each other.
inline std::pair<double, double> interval99(const std::vector<double>& values,
                                            std::uint64_t master, std::uint64_t row_index) {
  Rng rng(derive_seed(master, stream::bootstrap, row_index));
  return bootstrap_mean_interval(values, rng, 500, 0.99);
}

inline double mean_of(const std::vector<double>& values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

/// Seeds for the two coupled draws of one trial: slot 0 is the structured
/// ensemble, slot 1 the independent one.
inline std::pair<std::uint64_t, std::uint64_t> trial_pair_seeds(std::uint64_t seed, long t) {
  const std::uint64_t ts = derive_seed(seed, stream::trial, static_cast<std::uint64_t>(t));
  return {derive_seed(ts, stream::paired, 0), derive_seed(ts, stream::paired, 1)};
}

/// (1/s) sum_i f(w_i . z).
inline double projection_statistic(const TestFunction& f, const Ensemble& e,
                                   const Eigen::VectorXd& z) {
  const Eigen::VectorXd proj = e.rows * z;
  double acc = 0.0;
  for (long i = 0; i < proj.size(); ++i) acc += f(proj[i]);
  return acc / static_cast<double>(proj.size());
}

inline void require_unit(const Eigen::VectorXd& z, const char* who) {
  if (std::abs(z.norm() - 1.0) > 1e-8)
    throw precondition_error(std::string(who) + ": direction must be a unit vector");
}

inline std::string join_fmt17(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt17(values[i]);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Negative dependence
// ---------------------------------------------------------------------------

/// Checks negative orthant dependence of X_i = |w_i . z| for the rows of a
/// uniformly random orthonormal basis: for every tuple (x_1..x_d) from the
/// threshold grid, P(all X_i <= x_i) must not exceed prod_i P(X_i <= x_i)
/// beyond the combined Wilson radii, and likewise with >= throughout.
/// Marginals are estimated per index, and the product bound multiplies the
/// per-index interval endpoints.  Exact certain/impossible events produce
/// exact probabilities, so saturated thresholds compare 1 to 1 with no slack.
inline DiagnosticReport nd_empirical_test(int d, const Eigen::VectorXd& z,
                                          const std::vector<double>& thresholds, long trials,
                                          std::uint64_t seed, int threads = 1) {
  if (d < 2) throw dimension_error("nd_empirical_test: dimension must be at least 2");
  if (z.size() != d) throw arity_error("nd_empirical_test: direction has wrong dimension");
  detail::require_unit(z, "nd_empirical_test");
  if (thresholds.empty()) throw parameter_error("nd_empirical_test: thresholds must be nonempty");
  for (double t : thresholds)
    if (!std::isfinite(t)) throw parameter_error("nd_empirical_test: thresholds must be finite");
  if (trials < 10000) throw parameter_error("nd_empirical_test: at least 10^4 trials required");

  std::vector<double> grid = thresholds;
  std::sort(grid.begin(), grid.end());
  const int K = static_cast<int>(grid.size());
  double tuple_count = 1.0;
  double table_size = 1.0;
  for (int i = 0; i < d; ++i) {
    tuple_count *= static_cast<double>(K);
    table_size *= static_cast<double>(K + 1);
  }
  if (tuple_count > 2.0e5 || table_size > 4.0e6)
    throw capacity_error("nd_empirical_test: threshold tuple grid too large");

  // One orthonormal basis per trial; X stores |w_i . z| row-wise.
  Eigen::MatrixXd X(trials, d);
  const IsotropicLaw sphere = IsotropicLaw::unit_sphere(d);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const std::uint64_t ts = derive_seed(seed, stream::trial, static_cast<std::uint64_t>(t));
    const Ensemble basis = sample_omc_block(sphere, d, ts);
    X.row(static_cast<long>(t)) = (basis.rows * z).cwiseAbs().transpose();
  });

  // Per-index marginal counts for each threshold, in both directions.
  std::vector<std::vector<long>> le_count(d, std::vector<long>(K, 0));
  std::vector<std::vector<long>> ge_count(d, std::vector<long>(K, 0));
  for (long t = 0; t < trials; ++t)
    for (int i = 0; i < d; ++i) {
      const double x = X(t, i);
      for (int k = 0; k < K; ++k) {
        if (x <= grid[k]) ++le_count[i][k];
        if (x >= grid[k]) ++ge_count[i][k];
      }
    }

  // Joint counts through a (K+1)^d occupancy table: cell index i holds how
  // many thresholds lie strictly below X_i (for <=) or at most X_i (for >=),
  // then prefix/suffix sums along each axis turn occupancy into orthant
  // counts.
  const long cells = static_cast<long>(std::llround(table_size));
  std::vector<long> occ_le(cells, 0), occ_ge(cells, 0);
  std::vector<long> strides(d);
  strides[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) strides[i] = strides[i + 1] * (K + 1);
  for (long t = 0; t < trials; ++t) {
    long flat_le = 0, flat_ge = 0;
    for (int i = 0; i < d; ++i) {
      const double x = X(t, i);
      const long below = std::lower_bound(grid.begin(), grid.end(), x) - grid.begin();
      const long at_most = std::upper_bound(grid.begin(), grid.end(), x) - grid.begin();
      flat_le += strides[i] * below;    // first k with x <= grid[k]
      flat_ge += strides[i] * at_most;  // count of k with grid[k] <= x
    }
    ++occ_le[flat_le];
    ++occ_ge[flat_ge];
  }
  for (int axis = 0; axis < d; ++axis) {
    const long stride = strides[axis];
    for (long base = 0; base < cells; ++base) {
      const long coord = (base / stride) % (K + 1);
      if (coord > 0) occ_le[base] += occ_le[base - stride];       // prefix along axis
      const long mirror = cells - 1 - base;
      const long mcoord = (mirror / stride) % (K + 1);
      if (mcoord < K) occ_ge[mirror] += occ_ge[mirror + stride];  // suffix along axis
    }
  }

  DiagnosticReport report;
  report.claim = "negative-dependence";
  report.config = {{"d", std::to_string(d)},
                   {"z", detail::join_fmt17(std::vector<double>(z.data(), z.data() + d))},
                   {"thresholds", detail::join_fmt17(grid)},
                   {"trials", std::to_string(trials)},
                   {"seed", std::to_string(seed)}};

  bool violated = false;
  std::vector<int> tuple(d, 0);
  for (int dir = 0; dir < 2; ++dir) {
    const bool le = dir == 0;
    std::fill(tuple.begin(), tuple.end(), 0);
    for (;;) {
      long flat = 0;
      std::string label = le ? "le(" : "ge(";
      for (int i = 0; i < d; ++i) {
        flat += strides[i] * (le ? tuple[i] : tuple[i] + 1);
        if (i) label += ",";
        label += fmt17(grid[tuple[i]]);
      }
      label += ")";
      const long joint = le ? occ_le[flat] : occ_ge[flat];
      const detail::Wilson jw = detail::wilson99(joint, trials);
      double prod = 1.0, prod_lo = 1.0, prod_hi = 1.0;
      for (int i = 0; i < d; ++i) {
        const long count = le ? le_count[i][tuple[i]] : ge_count[i][tuple[i]];
        const detail::Wilson mw = detail::wilson99(count, trials);
        prod *= mw.p;
        prod_lo *= mw.lo;
        prod_hi *= mw.hi;
      }
      ReportRow row;
      row.label = label;
      row.lhs = jw.p;
      row.lhs_lo = jw.lo;
      row.lhs_hi = jw.hi;
      row.rhs = prod;
      row.rhs_lo = prod_lo;
      row.rhs_hi = prod_hi;
      report.rows.push_back(row);
      if (row.lhs_lo > row.rhs_hi) violated = true;
      int axis = d - 1;
      while (axis >= 0 && ++tuple[axis] == K) tuple[axis--] = 0;
      if (axis < 0) break;
    }
  }
  report.verdict = violated ? Verdict::Violated : Verdict::Consistent;
  return report;
}

// ---------------------------------------------------------------------------
// MGF dominance
// ---------------------------------------------------------------------------

/// Compares E exp(lambda F_ort) against E exp(lambda F_iid) over a lambda
/// grid, where F is the projection statistic of a monotone-in-|u| function
/// over one orthogonal block (s <= d) versus s independent Gaussian rows.
/// The verdict radius is measured on the paired per-trial difference, which
/// is the sharp test for draws sharing a trial index; both sides still carry
/// their own bootstrap intervals in the report.
inline DiagnosticReport mgf_dominance_test(const TestFunction& f,
                                           const std::vector<double>& lambda_grid, int d, int s,
                                           const Eigen::VectorXd& z, long trials,
                                           std::uint64_t seed, int threads = 1) {
  if (!f.monotone_in_abs())
    throw domain_error("mgf_dominance_test: test function must be in class F1 (monotone in |u|)");
  if (d < 1) throw dimension_error("mgf_dominance_test: dimension must be at least 1");
  if (s < 1 || s > d)
    throw dimension_error("mgf_dominance_test: ensemble size must satisfy 1 <= s <= d");
  if (z.size() != d) throw arity_error("mgf_dominance_test: direction has wrong dimension");
  detail::require_unit(z, "mgf_dominance_test");
  if (lambda_grid.empty()) throw parameter_error("mgf_dominance_test: lambda grid must be nonempty");
  for (double l : lambda_grid)
    if (!std::isfinite(l)) throw parameter_error("mgf_dominance_test: lambda values must be finite");
  if (trials < 10000) throw parameter_error("mgf_dominance_test: at least 10^4 trials required");

  const IsotropicLaw law = IsotropicLaw::gaussian_std(d);
  std::vector<double> f_ort(trials), f_iid(trials);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const auto [ort_seed, iid_seed] = detail::trial_pair_seeds(seed, static_cast<long>(t));
    f_ort[t] = detail::projection_statistic(f, sample_omc_block(law, s, ort_seed), z);
    f_iid[t] = detail::projection_statistic(f, sample_iid(law, s, iid_seed), z);
  });

  DiagnosticReport report;
  report.claim = "mgf-dominance";
  report.config = {{"f", f.label()},
                   {"class", f.class_label()},
                   {"lambda", detail::join_fmt17(lambda_grid)},
                   {"d", std::to_string(d)},
                   {"s", std::to_string(s)},
                   {"z", detail::join_fmt17(std::vector<double>(z.data(), z.data() + d))},
                   {"trials", std::to_string(trials)},
                   {"seed", std::to_string(seed)}};

  bool violated = false;
  std::vector<double> vort(trials), viid(trials), diff(trials);
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    const double lambda = lambda_grid[li];
    for (long t = 0; t < trials; ++t) {
      const double eo = lambda * f_ort[t];
      const double ei = lambda * f_iid[t];
      if (eo > 709.0 || ei > 709.0)
        throw domain_error("mgf_dominance_test: exp overflow at lambda = " + fmt17(lambda));
      vort[t] = std::exp(eo);
      viid[t] = std::exp(ei);
      diff[t] = vort[t] - viid[t];
    }
    const auto oi = detail::interval99(vort, seed, 3 * li);
    const auto ii = detail::interval99(viid, seed, 3 * li + 1);
    const auto di = detail::interval99(diff, seed, 3 * li + 2);
    ReportRow side;
    side.label = "mgf(lambda=" + fmt17(lambda) + ")";
    side.lhs = detail::mean_of(vort);
    side.lhs_lo = oi.first;
    side.lhs_hi = oi.second;
    side.rhs = detail::mean_of(viid);
    side.rhs_lo = ii.first;
    side.rhs_hi = ii.second;
    report.rows.push_back(side);
    ReportRow delta;
    delta.label = "diff(lambda=" + fmt17(lambda) + ")";
    delta.lhs = detail::mean_of(diff);
    delta.lhs_lo = di.first;
    delta.lhs_hi = di.second;
    report.rows.push_back(delta);
    if (delta.lhs_lo > 0.0) violated = true;
  }
  report.verdict = violated ? Verdict::Violated : Verdict::Consistent;
  return report;
}

// ---------------------------------------------------------------------------
// MSE ordering
// ---------------------------------------------------------------------------

/// Paired comparison of the blockwise-orthogonal and independent estimators
/// of E f(w.z) at sizes s = multiplier * d.  The verdict covers the ordering
/// claim MSE(block-orthogonal) <= MSE(independent) through the paired
/// squared-error difference; the trial means are reported against the exact
/// expectation with 3-standard-error radii as an unbiasedness check but do
/// not enter the verdict.
inline DiagnosticReport mse_ordering_test(const TestFunction& f, int d,
                                          const std::vector<long>& multipliers, long trials,
                                          const Eigen::VectorXd& z, std::uint64_t seed,
                                          int threads = 1) {
  if (d < 1) throw dimension_error("mse_ordering_test: dimension must be at least 1");
  if (z.size() != d) throw arity_error("mse_ordering_test: direction has wrong dimension");
  if (multipliers.empty()) throw parameter_error("mse_ordering_test: multipliers must be nonempty");
  for (long m : multipliers)
    if (m < 1) throw parameter_error("mse_ordering_test: multipliers must be at least 1");
  if (trials < 450) throw parameter_error("mse_ordering_test: at least 450 trials required");

  const IsotropicLaw law = IsotropicLaw::gaussian_std(d);
  const double exact = f.gaussian_mean(z);

  DiagnosticReport report;
  report.claim = "mse-ordering";
  report.config = {{"f", f.label()},
                   {"class", f.class_label()},
                   {"d", std::to_string(d)},
                   {"multipliers", [&] {
                      std::string out;
                      for (std::size_t i = 0; i < multipliers.size(); ++i)
                        out += (i ? "," : "") + std::to_string(multipliers[i]);
                      return out;
                    }()},
                   {"trials", std::to_string(trials)},
                   {"z", detail::join_fmt17(std::vector<double>(z.data(), z.data() + d))},
                   {"seed", std::to_string(seed)}};

  bool violated = false;
  for (std::size_t mi = 0; mi < multipliers.size(); ++mi) {
    const long s = multipliers[mi] * d;
    std::vector<double> ort_mean(trials), iid_mean(trials);
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
      const auto [ort_seed, iid_seed] = detail::trial_pair_seeds(seed, static_cast<long>(t));
      ort_mean[t] =
          detail::projection_statistic(f, sample_bomc(law, static_cast<int>(s), ort_seed), z);
      iid_mean[t] =
          detail::projection_statistic(f, sample_iid(law, static_cast<int>(s), iid_seed), z);
    });
    std::vector<double> ort_sq(trials), iid_sq(trials), diff(trials);
    for (long t = 0; t < trials; ++t) {
      const double eo = ort_mean[t] - exact;
      const double ei = iid_mean[t] - exact;
      ort_sq[t] = eo * eo;
      iid_sq[t] = ei * ei;
      diff[t] = ort_sq[t] - iid_sq[t];
    }
    const auto oi = detail::interval99(ort_sq, seed, 3 * mi);
    const auto ii = detail::interval99(iid_sq, seed, 3 * mi + 1);
    const auto di = detail::interval99(diff, seed, 3 * mi + 2);
    const std::string suffix = "(mult=" + std::to_string(multipliers[mi]) + ")";
    ReportRow mse;
    mse.label = "mse" + suffix;
    mse.lhs = detail::mean_of(ort_sq);
    mse.lhs_lo = oi.first;
    mse.lhs_hi = oi.second;
    mse.rhs = detail::mean_of(iid_sq);
    mse.rhs_lo = ii.first;
    mse.rhs_hi = ii.second;
    report.rows.push_back(mse);
    ReportRow delta;
    delta.label = "diff" + suffix;
    delta.lhs = detail::mean_of(diff);
    delta.lhs_lo = di.first;
    delta.lhs_hi = di.second;
    report.rows.push_back(delta);
    if (delta.lhs_lo > 0.0) violated = true;
    // Unbiasedness rows: trial mean vs the exact expectation, with a
    // 3-standard-error radius on the estimate side.
    auto mean_row = [&](const char* tag, const std::vector<double>& values) {
      const double m = detail::mean_of(values);
      double var = 0.0;
      for (double v : values) var += (v - m) * (v - m);
      var /= static_cast<double>(trials - 1);
      const double se3 = 3.0 * std::sqrt(var / static_cast<double>(trials));
      ReportRow row;
      row.label = std::string(tag) + suffix;
      row.lhs = m;
      row.lhs_lo = m - se3;
      row.lhs_hi = m + se3;
      row.rhs = exact;
      row.rhs_lo = exact;
      row.rhs_hi = exact;
      report.rows.push_back(row);
    };
    mean_row("mean_ort", ort_mean);
    mean_row("mean_iid", iid_mean);
  }
  report.verdict = violated ? Verdict::Violated : Verdict::Consistent;
  return report;
}

// ---------------------------------------------------------------------------
// Empirical Legendre transform
// ---------------------------------------------------------------------------

/// sup over the grid of theta*a - log((1/n) sum_i e^{theta x_i}), evaluated
/// through a shifted log-sum-exp.  A theta whose largest exponent would
/// overflow a double is rejected by name rather than silently saturating,
/// and the grid must point in the direction of a relative to the sample
/// mean (positive for a above the mean, negative below).
inline double empirical_legendre(const std::vector<double>& samples, double a,
                                 const std::vector<double>& theta_grid) {
  if (samples.empty()) throw arity_error("empirical_legendre: samples must be nonempty");
  if (theta_grid.empty()) throw parameter_error("empirical_legendre: theta grid must be nonempty");
  if (!std::isfinite(a)) throw parameter_error("empirical_legendre: target must be finite");
  for (double x : samples)
    if (!std::isfinite(x)) throw parameter_error("empirical_legendre: samples must be finite");

  const double n = static_cast<double>(samples.size());
  double mean = 0.0, min_x = samples.front(), max_x = samples.front();
  for (double x : samples) {
    mean += x;
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
  }
  mean /= n;
  for (double theta : theta_grid) {
    if (!std::isfinite(theta))
      throw parameter_error("empirical_legendre: theta values must be finite");
    if (a > mean && theta < 0.0)
      throw parameter_error("empirical_legendre: grid must be nonnegative when the target "
                            "exceeds the sample mean");
    if (a < mean && theta > 0.0)
      throw parameter_error("empirical_legendre: grid must be nonpositive when the target "
                            "is below the sample mean");
  }

  const double exp_limit = 709.78;  // log(DBL_MAX)
  double best = -std::numeric_limits<double>::infinity();
  for (double theta : theta_grid) {
    const double shift = theta >= 0.0 ? theta * max_x : theta * min_x;
    if (shift > exp_limit)
      throw parameter_error("empirical_legendre: theta = " + fmt17(theta) +
                            " overflows exp(theta * x) on these samples");
    double acc = 0.0;
    for (double x : samples) acc += std::exp(theta * x - shift);
    best = std::max(best, theta * a - shift - std::log(acc / n));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Tail comparison
// ---------------------------------------------------------------------------

/// Empirical P(|F_hat - F| >= eps) for the blockwise-orthogonal and
/// independent estimators per epsilon, with Wilson 99% intervals.  The
/// superiority claim is binding for monotone-in-|u| functions; for the other
/// classes it is conditional, so a failure beyond radii downgrades the
/// verdict to inconclusive instead of violated.
inline DiagnosticReport tail_comparison(const TestFunction& f, int d, int s,
                                        const std::vector<double>& eps_grid, long trials,
                                        const Eigen::VectorXd& z, std::uint64_t seed,
                                        int threads = 1) {
  if (d < 1) throw dimension_error("tail_comparison: dimension must be at least 1");
  if (s < 1) throw parameter_error("tail_comparison: ensemble size must be at least 1");
  if (z.size() != d) throw arity_error("tail_comparison: direction has wrong dimension");
  if (eps_grid.empty()) throw parameter_error("tail_comparison: epsilon grid must be nonempty");
  for (double e : eps_grid)
    if (!(e >= 0.0) || !std::isfinite(e))
      throw parameter_error("tail_comparison: epsilons must be finite and nonnegative");
  if (trials < 100000) throw parameter_error("tail_comparison: at least 10^5 trials required");

  const IsotropicLaw law = IsotropicLaw::gaussian_std(d);
  const double exact = f.gaussian_mean(z);
  std::vector<double> ort_err(trials), iid_err(trials);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const auto [ort_seed, iid_seed] = detail::trial_pair_seeds(seed, static_cast<long>(t));
    ort_err[t] =
        std::abs(detail::projection_statistic(f, sample_bomc(law, s, ort_seed), z) - exact);
    iid_err[t] =
        std::abs(detail::projection_statistic(f, sample_iid(law, s, iid_seed), z) - exact);
  });

  DiagnosticReport report;
  report.claim = "tail-comparison";
  report.config = {{"f", f.label()},
                   {"class", f.class_label()},
                   {"d", std::to_string(d)},
                   {"s", std::to_string(s)},
                   {"eps", detail::join_fmt17(eps_grid)},
                   {"trials", std::to_string(trials)},
                   {"z", detail::join_fmt17(std::vector<double>(z.data(), z.data() + d))},
                   {"seed", std::to_string(seed)}};

  bool beyond = false;
  for (double eps : eps_grid) {
    long ort_k = 0, iid_k = 0;
    for (long t = 0; t < trials; ++t) {
      if (ort_err[t] >= eps) ++ort_k;
      if (iid_err[t] >= eps) ++iid_k;
    }
    const detail::Wilson ow = detail::wilson99(ort_k, trials);
    const detail::Wilson iw = detail::wilson99(iid_k, trials);
    ReportRow row;
    row.label = "tail(eps=" + fmt17(eps) + ")";
    row.lhs = ow.p;
    row.lhs_lo = ow.lo;
    row.lhs_hi = ow.hi;
    row.rhs = iw.p;
    row.rhs_lo = iw.lo;
    row.rhs_hi = iw.hi;
    report.rows.push_back(row);
    if (row.lhs_lo > row.rhs_hi) beyond = true;
  }
  report.verdict = !beyond ? Verdict::Consistent
                           : (f.monotone_in_abs() ? Verdict::Violated : Verdict::Inconclusive);
  return report;
}

// ---------------------------------------------------------------------------
// Uniform error sweep
// ---------------------------------------------------------------------------

struct SweepCell {
  long s = 0;
  double mean_sup_err = 0.0;
  double lo = 0.0;  ///< 99% bootstrap interval of the mean
  double hi = 0.0;
};

/// Mean (over trials) of the supremum (over an evaluation grid) of the
/// absolute kernel approximation error, per ensemble size.
struct UniformSweepTable {
  std::string kernel;
  std::string method;
  long trials = 0;
  std::vector<SweepCell> cells;  // in the caller's s order
  /// True when consecutive cells, taken in increasing s, are separated
  /// beyond their 99% radii — never inferred from overlapping intervals.
  bool decreasing_beyond_radii = false;

  std::string to_csv() const {
    std::string out = "kernel,method,s,trials,mean_sup_err,lo99,hi99\n";
    for (const SweepCell& c : cells)
      out += kernel + "," + method + "," + std::to_string(c.s) + "," + std::to_string(trials) +
             "," + fmt17(c.mean_sup_err) + "," + fmt17(c.lo) + "," + fmt17(c.hi) + "\n";
    return out;
  }
};

/// Sweeps ensemble sizes and reports the mean sup-error of the feature-map
/// kernel approximation against the closed-form kernel over a fixed grid of
/// evaluation points (each compared at the origin, the natural anchor for
/// shift-invariant families).  Trial seeds depend only on the trial index,
/// so sweeps sharing a seed are paired across methods.
inline UniformSweepTable uniform_error_sweep(const KernelSpec& kernel,
                                             const std::vector<Eigen::VectorXd>& grid,
                                             const std::vector<long>& s_values, Method method,
                                             long trials, std::uint64_t seed, int threads = 1) {
  kernel.validate();
  if (kernel.tag == KernelTag::Tanh || kernel.tag == KernelTag::Sine)
    throw config_error("uniform_error_sweep: no closed-form reference for kernel '" +
                       kernel.label() + "'");
  if (grid.empty()) throw parameter_error("uniform_error_sweep: evaluation grid must be nonempty");
  const long d = grid.front().size();
  if (d < 1) throw dimension_error("uniform_error_sweep: evaluation points must be nonempty");
  for (const Eigen::VectorXd& g : grid)
    if (g.size() != d) throw arity_error("uniform_error_sweep: evaluation points must share a dimension");
  if (s_values.empty()) throw parameter_error("uniform_error_sweep: ensemble sizes must be nonempty");
  for (long s : s_values)
    if (s < 1) throw parameter_error("uniform_error_sweep: ensemble sizes must be at least 1");
  if (trials < 2) throw parameter_error("uniform_error_sweep: at least 2 trials required");

  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
  std::vector<double> exact(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) exact[j] = exact_kernel(kernel, grid[j], origin);

  const IsotropicLaw law = spectral_law(kernel, d);
  UniformSweepTable table;
  table.kernel = kernel.label();
  table.method = method_tag(method);
  table.trials = trials;
  for (std::size_t si = 0; si < s_values.size(); ++si) {
    const MethodEnsembleFactory factory(law, s_values[si], seed, {method});
    std::vector<double> sup_err(trials);
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
      const std::uint64_t trial_seed = derive_seed(seed, stream::trial, static_cast<std::uint64_t>(t));
      const std::uint64_t phase_seed = derive_seed(seed, stream::phases, static_cast<std::uint64_t>(t));
      const FeatureBundle fb = make_feature_bundle(kernel, factory.draw(method, trial_seed), phase_seed);
      const Eigen::VectorXd at_origin = feature_vector(fb, origin);
      double worst = 0.0;
      for (std::size_t j = 0; j < grid.size(); ++j)
        worst = std::max(worst, std::abs(feature_vector(fb, grid[j]).dot(at_origin) - exact[j]));
      sup_err[t] = worst;
    });
    Rng boot(derive_seed(seed, stream::bootstrap, static_cast<std::uint64_t>(si)));
    const auto ci = detail::bootstrap_mean_interval(sup_err, boot, 500, 0.99);
    SweepCell cell;
    cell.s = s_values[si];
    cell.mean_sup_err = detail::mean_of(sup_err);
    cell.lo = ci.first;
    cell.hi = ci.second;
    table.cells.push_back(cell);
  }

  std::vector<SweepCell> ordered = table.cells;
  std::sort(ordered.begin(), ordered.end(),
            [](const SweepCell& a, const SweepCell& b) { return a.s < b.s; });
  table.decreasing_beyond_radii = ordered.size() >= 2;
  for (std::size_t i = 0; i + 1 < ordered.size(); ++i)
    if (!(ordered[i + 1].hi < ordered[i].lo)) table.decreasing_beyond_radii = false;
  return table;
}

}  // namespace structmc
