#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "structmc/diagnostics.hpp"

using namespace structmc;

namespace {

/// The Wilson endpoints are the roots of n(p_hat - p)^2 = z^2 p(1 - p); this
/// evaluates that defining equation so returned endpoints can be verified as
/// solutions without re-deriving the closed form.
double wilson_root_residual(double p_hat, long n, double p) {
  const double z = 2.5758293035489004;
  return static_cast<double>(n) * (p_hat - p) * (p_hat - p) - z * z * p * (1.0 - p);
}

/// Independent Monte Carlo estimate of E f(u), u ~ N(0, scale^2), using the
/// standard library generator.  Returns (mean, standard error).
template <typename F>
std::pair<double, double> scalar_mc_oracle(F f, double scale, long n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0, sq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double v = f(scale * normal(gen));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

const ReportRow& find_row(const DiagnosticReport& report, const std::string& label) {
  for (const ReportRow& row : report.rows)
    if (row.label == label) return row;
  FAIL("missing report row '" + label + "'");
  return report.rows.front();
}

Eigen::VectorXd unit_vec(std::initializer_list<double> values) {
  Eigen::VectorXd z(static_cast<long>(values.size()));
  long i = 0;
  for (double v : values) z[i++] = v;
  return z / z.norm();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("test functions evaluate and classify correctly", "[diagnostics]") {
  REQUIRE(TestFunction::square()(3.0) == 9.0);
  REQUIRE(TestFunction::square()(-3.0) == 9.0);
  REQUIRE(TestFunction::abs_cos()(0.0) == 1.0);
  REQUIRE(TestFunction::abs_cos()(M_PI) == Catch::Approx(-1.0));
  REQUIRE(TestFunction::exp_c(2.0)(0.5) == Catch::Approx(std::exp(1.0)));

  REQUIRE(TestFunction::square().monotone_in_abs());
  REQUIRE_FALSE(TestFunction::abs_cos().monotone_in_abs());
  REQUIRE_FALSE(TestFunction::exp_c(1.0).monotone_in_abs());

  REQUIRE(TestFunction::square().label() == "square");
  REQUIRE(TestFunction::abs_cos().label() == "cos");
  REQUIRE(TestFunction::exp_c(0.5).label() == "exp:0.5");
  REQUIRE(TestFunction::square().class_label() == "F1");
  REQUIRE(TestFunction::abs_cos().class_label() == "F2/F3");
  REQUIRE(TestFunction::exp_c(1.0).class_label() == "F3");

  REQUIRE_THROWS_AS(TestFunction::exp_c(std::nan("")), parameter_error);
}

TEST_CASE("test function expectations match an independent sampler", "[diagnostics]") {
  // E f(w.z) for standard Gaussian w depends only on |z|; the projection is
  // N(0, |z|^2), sampled here with the standard library generator.
  Eigen::VectorXd z(3);
  z << 0.6, -0.9, 0.7;
  const double scale = z.norm();
  const long n = 2000000;

  const TestFunction fs = TestFunction::square();
  auto [m1, se1] = scalar_mc_oracle([](double u) { return u * u; }, scale, n, 11);
  REQUIRE(std::abs(fs.gaussian_mean(z) - m1) < 4.0 * se1);
  REQUIRE(fs.gaussian_mean(z) == Catch::Approx(z.squaredNorm()));

  const TestFunction fc = TestFunction::abs_cos();
  auto [m2, se2] = scalar_mc_oracle([](double u) { return std::cos(u); }, scale, n, 12);
  REQUIRE(std::abs(fc.gaussian_mean(z) - m2) < 4.0 * se2);

  const TestFunction fe = TestFunction::exp_c(0.7);
  auto [m3, se3] = scalar_mc_oracle([](double u) { return std::exp(0.7 * u); }, scale, n, 13);
  REQUIRE(std::abs(fe.gaussian_mean(z) - m3) < 4.0 * se3);
}

TEST_CASE("Wilson intervals solve their defining equation", "[diagnostics]") {
  // Interior endpoints must be roots of n(p_hat - p)^2 = z^2 p(1-p).
  for (auto [k, n] : std::vector<std::pair<long, long>>{{50, 100}, {3, 10000}, {9990, 10000}}) {
    const auto w = detail::wilson99(k, n);
    const double p_hat = static_cast<double>(k) / static_cast<double>(n);
    REQUIRE(w.p == p_hat);
    REQUIRE(w.lo < p_hat);
    REQUIRE(w.hi > p_hat);
    REQUIRE(std::abs(wilson_root_residual(p_hat, n, w.lo)) < 1e-5);
    REQUIRE(std::abs(wilson_root_residual(p_hat, n, w.hi)) < 1e-5);
  }

  // Degenerate counts keep the touching endpoint exact.
  REQUIRE(detail::wilson99(0, 500).p == 0.0);
  REQUIRE(detail::wilson99(0, 500).lo == 0.0);
  REQUIRE(detail::wilson99(0, 500).hi > 0.0);
  REQUIRE(detail::wilson99(500, 500).p == 1.0);
  REQUIRE(detail::wilson99(500, 500).hi == 1.0);
  REQUIRE(detail::wilson99(500, 500).lo < 1.0);

  // Wider samples tighten the interval.
  REQUIRE(detail::wilson99(500, 1000).hi - detail::wilson99(500, 1000).lo <
          detail::wilson99(50, 100).hi - detail::wilson99(50, 100).lo);

  REQUIRE_THROWS_AS(detail::wilson99(1, 0), parameter_error);
  REQUIRE_THROWS_AS(detail::wilson99(-1, 10), parameter_error);
  REQUIRE_THROWS_AS(detail::wilson99(11, 10), parameter_error);
}

TEST_CASE("reports serialize with a stable byte layout", "[diagnostics]") {
  DiagnosticReport report;
  report.claim = "demo-claim";
  report.verdict = Verdict::Consistent;
  report.config = {{"d", "2"}, {"trials", "100"}};
  // Dyadic values print exactly under 17-significant-digit formatting.
  ReportRow row;
  row.label = "le(0.5)";
  row.lhs = 0.25;
  row.lhs_lo = 0.125;
  row.lhs_hi = 0.375;
  row.rhs = 0.5;
  row.rhs_lo = 0.4375;
  row.rhs_hi = 0.5625;
  report.rows.push_back(row);

  const std::string expected =
      "{\n"
      "  \"claim\": \"demo-claim\",\n"
      "  \"verdict\": \"consistent\",\n"
      "  \"config\": {\n"
      "    \"d\": \"2\",\n"
      "    \"trials\": \"100\"\n"
      "  },\n"
      "  \"rows\": [\n"
      "    {\"label\": \"le(0.5)\", \"lhs\": 0.25, \"lhs_lo\": 0.125, \"lhs_hi\": 0.375,"
      " \"rhs\": 0.5, \"rhs_lo\": 0.4375, \"rhs_hi\": 0.5625}\n"
      "  ]\n"
      "}\n";
  REQUIRE(report.to_json() == expected);

  const std::string path = temp_path("structmc_report_test.json");
  save_report(report, path);
  std::ifstream in(path);
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(contents == expected);
  std::filesystem::remove(path);

  REQUIRE_THROWS_AS(save_report(report, "/nonexistent_dir_structmc/report.json"), io_error);

  REQUIRE(verdict_tag(Verdict::Consistent) == "consistent");
  REQUIRE(verdict_tag(Verdict::Violated) == "violated");
  REQUIRE(verdict_tag(Verdict::Inconclusive) == "inconclusive");

  DiagnosticReport empty;
  empty.claim = "quote\"and\\slash";
  empty.verdict = Verdict::Inconclusive;
  REQUIRE(empty.to_json() ==
          "{\n  \"claim\": \"quote\\\"and\\\\slash\",\n  \"verdict\": \"inconclusive\",\n"
          "  \"config\": {},\n  \"rows\": []\n}\n");
}

TEST_CASE("orthant probabilities on the circle match arc-length values", "[diagnostics]") {
  // For a random orthonormal pair in the plane, X1 = |cos t| and X2 = |sin t|
  // with t uniform.  Arc lengths give P(|cos t| <= 1/2) = 1/3, so the product
  // side of the <= tuple is 1/9 while the joint event is impossible
  // (cos^2 + sin^2 = 1 cannot have both below 1/2).  For the >= direction the
  // joint arc is 4 segments of length pi/6, so exactly 1/3 against a product
  // of 4/9.
  Eigen::VectorXd z(2);
  z << 1.0, 0.0;
  const auto report = nd_empirical_test(2, z, {0.5}, 20000, 71);
  REQUIRE(report.claim == "negative-dependence");
  REQUIRE(report.verdict == Verdict::Consistent);
  REQUIRE(report.rows.size() == 2);

  const ReportRow& le = find_row(report, "le(0.5,0.5)");
  REQUIRE(le.lhs == 0.0);
  REQUIRE(le.lhs_lo == 0.0);
  REQUIRE(std::abs(le.rhs - 1.0 / 9.0) < 0.02);
  REQUIRE(le.rhs_lo <= le.rhs);
  REQUIRE(le.rhs <= le.rhs_hi);

  const ReportRow& ge = find_row(report, "ge(0.5,0.5)");
  REQUIRE(std::abs(ge.lhs - 1.0 / 3.0) < 0.02);
  REQUIRE(std::abs(ge.rhs - 4.0 / 9.0) < 0.02);
  REQUIRE(ge.lhs_lo <= ge.rhs_hi);  // inequality holds with margin
}

TEST_CASE("saturated thresholds give exact certain events", "[diagnostics]") {
  // Rows are unit vectors, so |w.z| <= 1 always holds for unit z: every
  // <= tuple at thresholds >= 1 must count all trials, making joint and
  // product exactly one.  Thresholds above 1 are unreachable from below, so
  // the >= side is exactly zero.
  const Eigen::VectorXd z = unit_vec({1.0, 2.0, 2.0});
  const auto report = nd_empirical_test(3, z, {1.0, 1.5}, 10000, 5);
  REQUIRE(report.verdict == Verdict::Consistent);
  REQUIRE(report.rows.size() == 16);  // 2^3 tuples in each direction

  const ReportRow& le = find_row(report, "le(1,1,1)");
  REQUIRE(le.lhs == 1.0);
  REQUIRE(le.lhs_hi == 1.0);
  REQUIRE(le.rhs == 1.0);
  REQUIRE(le.rhs_hi == 1.0);

  const ReportRow& mixed = find_row(report, "le(1,1.5,1)");
  REQUIRE(mixed.lhs == 1.0);
  REQUIRE(mixed.rhs == 1.0);

  const ReportRow& ge = find_row(report, "ge(1.5,1.5,1.5)");
  REQUIRE(ge.lhs == 0.0);
  REQUIRE(ge.rhs == 0.0);

  for (const ReportRow& row : report.rows) {
    REQUIRE(row.lhs >= 0.0);
    REQUIRE(row.lhs_hi <= 1.0);
    REQUIRE(row.lhs_lo <= row.lhs_hi);
  }
}

TEST_CASE("negative dependence holds across a full threshold grid", "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, -2.0, 2.0});
  const std::vector<double> thresholds = {0.2, 0.35, 0.5, 0.7, 0.9};
  const auto report = nd_empirical_test(3, z, thresholds, 100000, 2024);
  REQUIRE(report.verdict == Verdict::Consistent);
  REQUIRE(report.rows.size() == 2 * 125);
  for (const ReportRow& row : report.rows) {
    REQUIRE(row.lhs >= 0.0);
    REQUIRE(row.lhs <= 1.0);
    REQUIRE(row.lhs_lo <= row.lhs);
    REQUIRE(row.lhs <= row.lhs_hi);
    REQUIRE(row.rhs_lo <= row.rhs);
    REQUIRE(row.rhs <= row.rhs_hi);
  }

  // Bit-for-bit reproducible from the same inputs, regardless of threads.
  const auto again = nd_empirical_test(3, z, thresholds, 100000, 2024);
  REQUIRE(again.to_json() == report.to_json());
  const auto threaded = nd_empirical_test(3, z, thresholds, 100000, 2024, 4);
  REQUIRE(threaded.to_json() == report.to_json());
}

TEST_CASE("negative dependence test validates its inputs", "[diagnostics]") {
  const Eigen::VectorXd e1 = unit_vec({1.0, 0.0});
  REQUIRE_THROWS_AS(nd_empirical_test(1, Eigen::VectorXd::Ones(1), {0.5}, 10000, 0),
                    dimension_error);
  REQUIRE_THROWS_AS(nd_empirical_test(2, Eigen::VectorXd::Ones(3), {0.5}, 10000, 0), arity_error);
  REQUIRE_THROWS_AS(nd_empirical_test(2, 2.0 * e1, {0.5}, 10000, 0), precondition_error);
  REQUIRE_THROWS_AS(nd_empirical_test(2, e1, {}, 10000, 0), parameter_error);
  REQUIRE_THROWS_AS(nd_empirical_test(2, e1, {std::nan("")}, 10000, 0), parameter_error);
  REQUIRE_THROWS_AS(nd_empirical_test(2, e1, {0.5}, 9999, 0), parameter_error);

  Eigen::VectorXd z8 = Eigen::VectorXd::Zero(8);
  z8[0] = 1.0;
  REQUIRE_THROWS_AS(
      nd_empirical_test(8, z8, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 10000, 0), capacity_error);
}

TEST_CASE("moment generating functions of orthogonal estimators stay below independent ones",
          "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, 1.0, -1.0, 1.0});
  const auto report =
      mgf_dominance_test(TestFunction::square(), {-0.5, 0.0, 0.5}, 4, 4, z, 100000, 31);
  REQUIRE(report.claim == "mgf-dominance");
  REQUIRE(report.verdict == Verdict::Consistent);

  // lambda = 0 collapses both sides to exactly one with degenerate radii.
  const ReportRow& zero = find_row(report, "mgf(lambda=0)");
  REQUIRE(zero.lhs == 1.0);
  REQUIRE(zero.lhs_lo == 1.0);
  REQUIRE(zero.lhs_hi == 1.0);
  REQUIRE(zero.rhs == 1.0);
  const ReportRow& zero_diff = find_row(report, "diff(lambda=0)");
  REQUIRE(zero_diff.lhs == 0.0);
  REQUIRE(zero_diff.lhs_lo == 0.0);
  REQUIRE(zero_diff.lhs_hi == 0.0);

  // At lambda = 1/2 the independent side is (1 - 1/4)^{-2} = 16/9 while the
  // entangled side averages below it; the paired difference should sit
  // clearly negative at this trial count.
  const ReportRow& half = find_row(report, "mgf(lambda=" + fmt17(0.5) + ")");
  REQUIRE(std::abs(half.rhs - 16.0 / 9.0) < 0.02);
  REQUIRE(half.lhs < half.rhs);
  const ReportRow& half_diff = find_row(report, "diff(lambda=" + fmt17(0.5) + ")");
  REQUIRE(half_diff.lhs < 0.0);
  REQUIRE(half_diff.lhs_hi < 0.0);
}

TEST_CASE("single-row estimators have identical law", "[diagnostics]") {
  // With s = 1 the orthogonalized draw is one Gaussian row, the same law as
  // the independent draw, so the two means must agree within radii.  The
  // rate stays below 1/4 so the exponential of the squared projection keeps
  // a finite second moment.
  const Eigen::VectorXd z = unit_vec({2.0, -1.0, 2.0});
  const auto report = mgf_dominance_test(TestFunction::square(), {0.2}, 3, 1, z, 20000, 17);
  REQUIRE(report.verdict == Verdict::Consistent);
  const ReportRow& row = find_row(report, "mgf(lambda=" + fmt17(0.2) + ")");
  REQUIRE(row.lhs_lo <= row.rhs_hi);
  REQUIRE(row.rhs_lo <= row.lhs_hi);

  const auto again = mgf_dominance_test(TestFunction::square(), {0.2}, 3, 1, z, 20000, 17);
  REQUIRE(again.to_json() == report.to_json());
  const auto threaded = mgf_dominance_test(TestFunction::square(), {0.2}, 3, 1, z, 20000, 17, 3);
  REQUIRE(threaded.to_json() == report.to_json());
}

TEST_CASE("mgf dominance test validates its inputs", "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, 0.0, 0.0, 0.0});
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::abs_cos(), {0.5}, 4, 4, z, 10000, 0),
                    domain_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::exp_c(1.0), {0.5}, 4, 4, z, 10000, 0),
                    domain_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {0.5}, 4, 5, z, 10000, 0),
                    dimension_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {0.5}, 4, 0, z, 10000, 0),
                    dimension_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {0.5}, 4, 4, 2.0 * z, 10000, 0),
                    precondition_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {}, 4, 4, z, 10000, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {0.5}, 4, 4, z, 9999, 0),
                    parameter_error);

  // A lambda that overflows the exponential is rejected by name.
  const Eigen::VectorXd z2 = unit_vec({1.0, 1.0});
  REQUIRE_THROWS_AS(mgf_dominance_test(TestFunction::square(), {1e6}, 2, 1, z2, 10000, 0),
                    domain_error);
}

TEST_CASE("blockwise orthogonal estimators dominate independent ones in mean squared error",
          "[diagnostics]") {
  // For the squared projection in d = 8 at one block, the orthogonal
  // estimator's variance is 0.075|z|^4 against 0.25|z|^4 independent — a
  // factor-three separation that must show beyond the 99% radii.  Trial
  // means double as an unbiasedness check around the exact value |z|^2.
  Eigen::VectorXd z(8);
  z << 0.5, -0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5;  // |z|^2 = 2
  const auto report = mse_ordering_test(TestFunction::square(), 8, {1}, 10000, z, 404);
  REQUIRE(report.claim == "mse-ordering");
  REQUIRE(report.verdict == Verdict::Consistent);

  const ReportRow& mse = find_row(report, "mse(mult=1)");
  REQUIRE(mse.lhs_hi < mse.rhs_lo);
  REQUIRE(std::abs(mse.lhs - 0.075 * 4.0) < 0.04);
  REQUIRE(std::abs(mse.rhs - 0.25 * 4.0) < 0.1);

  const ReportRow& diff = find_row(report, "diff(mult=1)");
  REQUIRE(diff.lhs < 0.0);
  REQUIRE(diff.lhs_hi < 0.0);

  const ReportRow& mean_ort = find_row(report, "mean_ort(mult=1)");
  REQUIRE(mean_ort.rhs == 2.0);
  REQUIRE(mean_ort.lhs_lo <= 2.0);
  REQUIRE(2.0 <= mean_ort.lhs_hi);
  const ReportRow& mean_iid = find_row(report, "mean_iid(mult=1)");
  REQUIRE(mean_iid.rhs == 2.0);
  REQUIRE(mean_iid.lhs_lo <= 2.0);
  REQUIRE(2.0 <= mean_iid.lhs_hi);
}

TEST_CASE("degenerate single-sample comparison is a tie", "[diagnostics]") {
  // d = 1 at multiplier 1 draws one row on each side; the estimators share a
  // law, so the squared errors must agree within radii.
  Eigen::VectorXd z(1);
  z << 1.3;
  const auto report = mse_ordering_test(TestFunction::square(), 1, {1}, 500, z, 9);
  REQUIRE(report.verdict == Verdict::Consistent);
  const ReportRow& mse = find_row(report, "mse(mult=1)");
  REQUIRE(mse.lhs_lo <= mse.rhs_hi);
  REQUIRE(mse.rhs_lo <= mse.lhs_hi);
  const ReportRow& diff = find_row(report, "diff(mult=1)");
  REQUIRE(diff.lhs_lo <= 0.0);
  REQUIRE(0.0 <= diff.lhs_hi);
}

TEST_CASE("mse ordering runs on the exponential class", "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, 0.5, -0.5, 1.0});
  const auto report = mse_ordering_test(TestFunction::exp_c(0.5), 4, {1, 2}, 450, z, 77);
  REQUIRE(report.rows.size() == 8);
  for (const ReportRow& row : report.rows) REQUIRE(row.lhs_lo <= row.lhs_hi);
  REQUIRE((report.verdict == Verdict::Consistent || report.verdict == Verdict::Violated));
}

TEST_CASE("mse ordering test validates its inputs", "[diagnostics]") {
  Eigen::VectorXd z(4);
  z << 1.0, 0.0, 0.0, 0.0;
  REQUIRE_THROWS_AS(mse_ordering_test(TestFunction::square(), 0, {1}, 450, z, 0),
                    dimension_error);
  REQUIRE_THROWS_AS(mse_ordering_test(TestFunction::square(), 3, {1}, 450, z, 0), arity_error);
  REQUIRE_THROWS_AS(mse_ordering_test(TestFunction::square(), 4, {}, 450, z, 0), parameter_error);
  REQUIRE_THROWS_AS(mse_ordering_test(TestFunction::square(), 4, {0}, 450, z, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(mse_ordering_test(TestFunction::square(), 4, {1}, 449, z, 0),
                    parameter_error);
}

TEST_CASE("empirical Legendre transform recovers the Gaussian rate", "[diagnostics]") {
  // For X ~ N(0,1) the transform at a = 1 is a^2/2 = 1/2, attained at
  // theta = 1.  A million standard-library samples keep the empirical value
  // within the 0.02 band.
  std::mt19937_64 gen(20240817);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> samples(1000000);
  for (double& x : samples) x = normal(gen);

  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0};
  const double value = empirical_legendre(samples, 1.0, grid);
  REQUIRE(std::abs(value - 0.5) < 0.02);

  // Supremum over a refinement can only grow.
  const double coarse = empirical_legendre(samples, 1.0, {0.0, 0.5, 1.5});
  REQUIRE(coarse <= value + 1e-12);

  // At the sample mean with a grid shrinking to zero the transform vanishes.
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  const double at_mean = empirical_legendre(samples, mean, {1e-6, 1e-5});
  REQUIRE(std::abs(at_mean) < 1e-6);
}

TEST_CASE("Legendre transform of constant samples grows with the grid", "[diagnostics]") {
  // Constant samples have MGF e^{theta c}, so the objective is
  // theta (a - c): linear and unbounded in the largest theta.
  const std::vector<double> samples = {2.0, 2.0, 2.0};
  REQUIRE(empirical_legendre(samples, 3.0, {0.0, 1.0}) == Catch::Approx(1.0));
  REQUIRE(empirical_legendre(samples, 3.0, {0.0, 1.0, 2.0}) == Catch::Approx(2.0));
  REQUIRE(empirical_legendre(samples, 3.0, {0.0, 5.0}) == Catch::Approx(5.0));
}

TEST_CASE("empirical Legendre transform validates its inputs", "[diagnostics]") {
  REQUIRE_THROWS_AS(empirical_legendre({}, 1.0, {0.5}), arity_error);
  REQUIRE_THROWS_AS(empirical_legendre({1.0, 2.0}, 1.0, {}), parameter_error);
  REQUIRE_THROWS_AS(empirical_legendre({1.0, std::nan("")}, 1.0, {0.5}), parameter_error);
  REQUIRE_THROWS_AS(empirical_legendre({1.0, 2.0}, std::nan(""), {0.5}), parameter_error);

  // Grid direction must match the side of the sample mean the target is on.
  REQUIRE_THROWS_AS(empirical_legendre({-1.0, 1.0}, 1.0, {0.5, -0.5}), parameter_error);
  REQUIRE_THROWS_AS(empirical_legendre({-1.0, 1.0}, -1.0, {0.1}), parameter_error);

  // Overflowing thetas are rejected by name before evaluation.
  try {
    empirical_legendre({100.0}, 200.0, {8.0});
    FAIL("expected a grid-range error");
  } catch (const parameter_error& e) {
    REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("theta = 8"));
  }
}

TEST_CASE("tail probabilities of orthogonal estimators stay below independent ones",
          "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0});
  const auto report =
      tail_comparison(TestFunction::square(), 8, 8, {0.0, 0.5, 100.0}, 100000, z, 55);
  REQUIRE(report.claim == "tail-comparison");
  REQUIRE(report.verdict == Verdict::Consistent);

  // Every deviation is >= 0, so the epsilon = 0 row is exactly one on both
  // sides; an epsilon far beyond the spread counts nothing.
  const ReportRow& zero = find_row(report, "tail(eps=0)");
  REQUIRE(zero.lhs == 1.0);
  REQUIRE(zero.lhs_hi == 1.0);
  REQUIRE(zero.rhs == 1.0);
  const ReportRow& far = find_row(report, "tail(eps=100)");
  REQUIRE(far.lhs == 0.0);
  REQUIRE(far.rhs == 0.0);

  const ReportRow& mid = find_row(report, "tail(eps=0.5)");
  REQUIRE(mid.lhs < mid.rhs);
  REQUIRE(mid.lhs_lo <= mid.rhs_hi);
}

TEST_CASE("tail comparison is informational outside the monotone class", "[diagnostics]") {
  // cos is bounded in [-1, 1] and its mean lies in (0, 1), so deviations
  // never exceed 2: the epsilon = 2.5 row is exactly zero by bounded
  // support.  Whatever the per-epsilon outcomes, the conditional claim can
  // only yield consistent or inconclusive.
  const Eigen::VectorXd z = unit_vec({1.0, -1.0, 1.0, 1.0});
  const auto report =
      tail_comparison(TestFunction::abs_cos(), 4, 4, {0.3, 2.5}, 100000, z, 23);
  REQUIRE(report.verdict != Verdict::Violated);
  const ReportRow& far = find_row(report, "tail(eps=2.5)");
  REQUIRE(far.lhs == 0.0);
  REQUIRE(far.rhs == 0.0);
}

TEST_CASE("tail comparison validates its inputs", "[diagnostics]") {
  const Eigen::VectorXd z = unit_vec({1.0, 0.0, 0.0, 0.0});
  REQUIRE_THROWS_AS(tail_comparison(TestFunction::square(), 0, 4, {0.5}, 100000, z, 0),
                    dimension_error);
  REQUIRE_THROWS_AS(tail_comparison(TestFunction::square(), 4, 0, {0.5}, 100000, z, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(
      tail_comparison(TestFunction::square(), 3, 4, {0.5}, 100000, z, 0), arity_error);
  REQUIRE_THROWS_AS(tail_comparison(TestFunction::square(), 4, 4, {}, 100000, z, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(tail_comparison(TestFunction::square(), 4, 4, {-0.5}, 100000, z, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(tail_comparison(TestFunction::square(), 4, 4, {0.5}, 99999, z, 0),
                    parameter_error);
}

TEST_CASE("uniform kernel error decreases with ensemble size", "[diagnostics]") {
  // Fifty evaluation points inside the radius-2 ball around the origin, with
  // ensemble sizes 4, 16, 64: the mean sup error must fall strictly beyond
  // the 99% radii, and the blockwise-orthogonal sweep must not lose to the
  // independent one at the largest size.
  std::mt19937_64 gen(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Eigen::VectorXd> grid;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd v(4);
    for (int j = 0; j < 4; ++j) v[j] = normal(gen);
    grid.push_back(2.0 * std::pow(uni(gen), 0.25) * v / v.norm());
  }

  const KernelSpec spec = KernelSpec::gaussian(1.0, 1.0);
  const auto bomc = uniform_error_sweep(spec, grid, {4, 16, 64}, Method::BOMC, 300, 606);
  REQUIRE(bomc.kernel == "gaussian");
  REQUIRE(bomc.method == "bomc");
  REQUIRE(bomc.cells.size() == 3);
  REQUIRE(bomc.cells[0].s == 4);
  REQUIRE(bomc.cells[2].s == 64);
  REQUIRE(bomc.cells[0].mean_sup_err > bomc.cells[1].mean_sup_err);
  REQUIRE(bomc.cells[1].mean_sup_err > bomc.cells[2].mean_sup_err);
  REQUIRE(bomc.decreasing_beyond_radii);

  const auto mc = uniform_error_sweep(spec, grid, {4, 16, 64}, Method::MC, 300, 606);
  REQUIRE(bomc.cells[2].lo <= mc.cells[2].hi);  // no loss beyond radii at s = 64

  const std::string csv = bomc.to_csv();
  REQUIRE(csv.rfind("kernel,method,s,trials,mean_sup_err,lo99,hi99\n", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);

  const auto threaded = uniform_error_sweep(spec, grid, {4, 16, 64}, Method::BOMC, 300, 606, 4);
  REQUIRE(threaded.to_csv() == csv);
}

TEST_CASE("single-point sweep reduces to pointwise error", "[diagnostics]") {
  const KernelSpec spec = KernelSpec::gaussian(1.0, 1.0);
  Eigen::VectorXd z0(3);
  z0 << 0.5, -0.2, 0.8;
  const auto table = uniform_error_sweep(spec, {z0}, {8}, Method::MC, 5, 99);
  REQUIRE(table.cells.size() == 1);

  // Reconstruct through the public seed-derivation contract.
  const IsotropicLaw law = spectral_law(spec, 3);
  const MethodEnsembleFactory factory(law, 8, 99, {Method::MC});
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(3);
  double acc = 0.0;
  for (long t = 0; t < 5; ++t) {
    const FeatureBundle fb = make_feature_bundle(
        spec, factory.draw(Method::MC, derive_seed(99, stream::trial, t)),
        derive_seed(99, stream::phases, t));
    acc += std::abs(approx_kernel(fb, z0, origin) - exact_kernel(spec, z0, origin));
  }
  REQUIRE(table.cells[0].mean_sup_err == acc / 5.0);

  // Duplicating the only grid point changes nothing.
  const auto doubled = uniform_error_sweep(spec, {z0, z0}, {8}, Method::MC, 5, 99);
  REQUIRE(doubled.to_csv() == table.to_csv());
}

TEST_CASE("uniform error sweep validates its inputs", "[diagnostics]") {
  Eigen::VectorXd z0(3);
  z0 << 0.5, -0.2, 0.8;
  const std::vector<Eigen::VectorXd> grid = {z0};
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::tanh_kernel(), grid, {8}, Method::MC, 5, 0),
                    config_error);
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::sine(), grid, {8}, Method::MC, 5, 0),
                    config_error);
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::gaussian(1, 1), {}, {8}, Method::MC, 5, 0),
                    parameter_error);
  const std::vector<Eigen::VectorXd> ragged = {z0, Eigen::VectorXd::Zero(2)};
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::gaussian(1, 1), ragged, {8}, Method::MC, 5, 0),
                    arity_error);
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::gaussian(1, 1), grid, {}, Method::MC, 5, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::gaussian(1, 1), grid, {0}, Method::MC, 5, 0),
                    parameter_error);
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::gaussian(1, 1), grid, {8}, Method::MC, 1, 0),
                    parameter_error);
  // The angular kernel's closed form is undefined at the origin anchor.
  REQUIRE_THROWS_AS(uniform_error_sweep(KernelSpec::angular(), grid, {8}, Method::MC, 5, 0),
                    domain_error);
}
