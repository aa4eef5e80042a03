#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "json.hpp"

#include "structmc/common.hpp"
#include "structmc/diagnostics.hpp"
#include "structmc/ensembles.hpp"
#include "structmc/kernels.hpp"
#include "structmc/nomc.hpp"
#include "structmc/swd.hpp"

namespace structmc {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Command { Sample, BuildNomc, Coherence, BenchKernel, BenchSwd, Diagnose };

inline std::string command_tag(Command c) {
  switch (c) {
    case Command::Sample: return "sample";
    case Command::BuildNomc: return "build-nomc";
    case Command::Coherence: return "coherence";
    case Command::BenchKernel: return "bench-kernel";
    case Command::BenchSwd: return "bench-swd";
    case Command::Diagnose: return "diagnose";
  }
  throw parameter_error("command_tag: unknown command");
}

inline std::optional<Command> command_from_tag(const std::string& tag) {
  if (tag == "sample") return Command::Sample;
  if (tag == "build-nomc") return Command::BuildNomc;
  if (tag == "coherence") return Command::Coherence;
  if (tag == "bench-kernel") return Command::BenchKernel;
  if (tag == "bench-swd") return Command::BenchSwd;
  if (tag == "diagnose") return Command::Diagnose;
  return std::nullopt;
}

/// One ensemble drawn from (law, method, size) and written to a file.
struct SampleConfig {
  Method method = Method::MC;
  IsotropicLaw law = IsotropicLaw::gaussian_std(2);  ///< carries the dimension
  long s = 1;
  OptNomcConfig nomc;  ///< optimizer settings when method = opt_nomc
};

/// Near-orthogonal construction: either the optimizer (d, s, descent
/// parameters) or the character table (p, r, optional subsample).
struct BuildNomcConfig {
  bool algebraic = false;
  int d = 2;
  long s = 1;
  OptNomcConfig opt;
  AlgNomcSpec alg;
};

struct CoherenceConfig {
  std::string input;  ///< ensemble file to score
};

struct BenchKernelConfig {
  KernelSpec kernel;
  long d = 1;
  std::vector<Method> methods;
  std::vector<long> multipliers;
  long trials = 0;
  long pair_count = 10;
  std::string dataset;  ///< optional CSV point cloud; pairs are synthetic when empty
  OptNomcConfig nomc;
};

struct BenchSwdConfig {
  DistributionSpec dist_a;
  DistributionSpec dist_b;
  std::vector<Method> methods;
  std::vector<long> multipliers;
  long trials = 0;
  long cloud_size = 1000;
  double order = 2.0;
  long reference_directions = 100000;
  OptNomcConfig nomc;
};

enum class Claim { Nd, Mgf, Mse, Tail, Sweep };

inline std::string claim_tag(Claim c) {
  switch (c) {
    case Claim::Nd: return "nd";
    case Claim::Mgf: return "mgf";
    case Claim::Mse: return "mse";
    case Claim::Tail: return "tail";
    case Claim::Sweep: return "sweep";
  }
  throw parameter_error("claim_tag: unknown claim");
}

/// Parameter bag for the diagnose command; which fields are read depends on
/// the claim.
struct DiagnoseConfig {
  Claim claim = Claim::Nd;
  int d = 2;
  Eigen::VectorXd z;
  long trials = 0;
  long s = 0;
  TestFunction f = TestFunction::square();
  std::vector<double> thresholds;
  std::vector<double> lambdas;
  std::vector<double> eps;
  std::vector<long> multipliers;
  std::vector<long> s_values;
  KernelSpec kernel;
  long grid_points = 50;
  double grid_radius = 2.0;
  Method method = Method::BOMC;
};

/// A fully validated run: one command, a master seed, an output directory,
/// and the command's parameters.  Artifact bytes are a function of this
/// struct alone; worker-thread counts never change them.
struct RunConfig {
  Command command = Command::Sample;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::optional<SampleConfig> sample;
  std::optional<BuildNomcConfig> build_nomc;
  std::optional<CoherenceConfig> coherence_cfg;
  std::optional<BenchKernelConfig> bench_kernel;
  std::optional<BenchSwdConfig> bench_swd;
  std::optional<DiagnoseConfig> diagnose;
};

struct RunResult {
  std::vector<std::string> files;  ///< paths of every artifact written, in emission order
};

// ---------------------------------------------------------------------------
// JSON configuration parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string json_type_name(const nlohmann::json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "a boolean";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  if (j.is_object()) return "an object";
  return "a value";
}

inline std::string json_brief(const nlohmann::json& j) {
  std::string text = j.dump();
  if (text.size() > 48) text = text.substr(0, 45) + "...";
  return text;
}

/// A JSON value plus the dotted path that led to it; every accessor failure
/// names that path so config errors are greppable.
struct ConfigNode {
  const nlohmann::json* node;
  std::string path;

  bool has(const std::string& key) const { return node->contains(key); }

  ConfigNode child(const std::string& key) const {
    auto it = node->find(key);
    if (it == node->end())
      throw config_error("missing required key '" + key + "' at " + path);
    return ConfigNode{&*it, path + "." + key};
  }

  ConfigNode object(const std::string& key) const {
    ConfigNode c = child(key);
    if (!c.node->is_object())
      throw config_error(c.path + ": expected an object, got " + json_type_name(*c.node));
    return c;
  }

  ConfigNode array(const std::string& key) const {
    ConfigNode c = child(key);
    if (!c.node->is_array())
      throw config_error(c.path + ": expected an array, got " + json_type_name(*c.node));
    return c;
  }

  ConfigNode element(std::size_t i) const {
    return ConfigNode{&(*node)[i], path + "[" + std::to_string(i) + "]"};
  }

  void reject_unknown(const std::vector<std::string>& allowed) const {
    for (auto it = node->begin(); it != node->end(); ++it) {
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        throw config_error("unknown key '" + it.key() + "' at " + path);
    }
  }

  std::string get_string(const std::string& key) const {
    ConfigNode c = child(key);
    if (!c.node->is_string())
      throw config_error(c.path + ": expected a string, got " + json_type_name(*c.node));
    return c.node->get<std::string>();
  }

  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  std::uint64_t get_seed(const std::string& key) const {
    ConfigNode c = child(key);
    if (c.node->is_number_unsigned()) return c.node->get<std::uint64_t>();
    if (c.node->is_number_integer() && c.node->get<long long>() >= 0)
      return static_cast<std::uint64_t>(c.node->get<long long>());
    throw config_error(c.path + ": expected a nonnegative integer, got " + json_brief(*c.node));
  }

  long get_long(const std::string& key) const {
    ConfigNode c = child(key);
    if (c.node->is_number_unsigned()) {
      const std::uint64_t u = c.node->get<std::uint64_t>();
      if (u > 9223372036854775807ull)
        throw config_error(c.path + ": integer out of range: " + json_brief(*c.node));
      return static_cast<long>(u);
    }
    if (c.node->is_number_integer()) return static_cast<long>(c.node->get<long long>());
    throw config_error(c.path + ": expected an integer, got " + json_brief(*c.node));
  }

  long get_positive_long(const std::string& key) const {
    const long v = get_long(key);
    if (v < 1)
      throw config_error(path + "." + key + ": must be a positive integer, got " +
                         std::to_string(v));
    return v;
  }

  long get_positive_long_or(const std::string& key, long fallback) const {
    return has(key) ? get_positive_long(key) : fallback;
  }

  long get_nonneg_long_or(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const long v = get_long(key);
    if (v < 0)
      throw config_error(path + "." + key + ": must be nonnegative, got " + std::to_string(v));
    return v;
  }

  /// Positive integer bounded so downstream matrix shapes stay sane.
  int get_dimension(const std::string& key) const {
    const long v = get_positive_long(key);
    if (v > 65536)
      throw config_error(path + "." + key + ": must be at most 65536, got " + std::to_string(v));
    return static_cast<int>(v);
  }

  double get_double(const std::string& key) const {
    ConfigNode c = child(key);
    if (!c.node->is_number())
      throw config_error(c.path + ": expected a number, got " + json_brief(*c.node));
    const double v = c.node->get<double>();
    if (!std::isfinite(v)) throw config_error(c.path + ": must be finite");
    return v;
  }

  double get_positive_double(const std::string& key) const {
    const double v = get_double(key);
    if (!(v > 0.0))
      throw config_error(path + "." + key + ": must be positive, got " + fmt6(v));
    return v;
  }

  double get_positive_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_positive_double(key) : fallback;
  }

  std::vector<double> get_double_array(const std::string& key) const {
    ConfigNode arr = array(key);
    if (arr.node->empty()) throw config_error(arr.path + ": must not be empty");
    std::vector<double> out;
    out.reserve(arr.node->size());
    for (std::size_t i = 0; i < arr.node->size(); ++i) {
      ConfigNode c = arr.element(i);
      if (!c.node->is_number() || !std::isfinite(c.node->get<double>()))
        throw config_error(c.path + ": expected a finite number, got " + json_brief(*c.node));
      out.push_back(c.node->get<double>());
    }
    return out;
  }

  std::vector<long> get_positive_long_array(const std::string& key) const {
    ConfigNode arr = array(key);
    if (arr.node->empty()) throw config_error(arr.path + ": must not be empty");
    std::vector<long> out;
    out.reserve(arr.node->size());
    for (std::size_t i = 0; i < arr.node->size(); ++i) {
      ConfigNode c = arr.element(i);
      if (!c.node->is_number_integer())
        throw config_error(c.path + ": expected an integer, got " + json_brief(*c.node));
      const long v = static_cast<long>(c.node->get<long long>());
      if (v < 1)
        throw config_error(c.path + ": must be a positive integer, got " + std::to_string(v));
      out.push_back(v);
    }
    return out;
  }

  Eigen::VectorXd get_vector(const std::string& key, long expected) const {
    ConfigNode arr = array(key);
    if (expected >= 0 && static_cast<long>(arr.node->size()) != expected)
      throw config_error(arr.path + ": expected " + std::to_string(expected) +
                         " entries, got " + std::to_string(arr.node->size()));
    Eigen::VectorXd v(static_cast<long>(arr.node->size()));
    for (std::size_t i = 0; i < arr.node->size(); ++i) {
      ConfigNode c = arr.element(i);
      if (!c.node->is_number() || !std::isfinite(c.node->get<double>()))
        throw config_error(c.path + ": expected a finite number, got " + json_brief(*c.node));
      v(static_cast<long>(i)) = c.node->get<double>();
    }
    return v;
  }
};

inline Method parse_method_text(const std::string& text, const std::string& path) {
  try {
    return method_from_tag(text);
  } catch (const parse_error&) {
    throw config_error(path + ": unknown method tag '" + text + "'");
  }
}

inline std::vector<Method> parse_method_array(const ConfigNode& parent, const std::string& key) {
  ConfigNode arr = parent.array(key);
  if (arr.node->empty()) throw config_error(arr.path + ": must not be empty");
  std::vector<Method> out;
  out.reserve(arr.node->size());
  for (std::size_t i = 0; i < arr.node->size(); ++i) {
    ConfigNode c = arr.element(i);
    if (!c.node->is_string())
      throw config_error(c.path + ": expected a method tag, got " + json_brief(*c.node));
    out.push_back(parse_method_text(c.node->get<std::string>(), c.path));
  }
  return out;
}

/// "gaussian" is accepted as a synonym of the standard-Gaussian law tag; the
/// remaining names are the ensemble-file vocabulary (gauss_std, unit_sphere,
/// gauss_scaled:<l>, matern:<nu>, laplace_prod).
inline IsotropicLaw parse_law_text(const std::string& text, int d, const std::string& path) {
  const std::string mapped = text == "gaussian" ? "gauss_std" : text;
  try {
    IsotropicLaw law = IsotropicLaw::from_tag_string(mapped, d);
    law.validate();
    return law;
  } catch (const error& e) {
    throw config_error(path + ": " + e.what());
  }
}

inline TestFunction parse_test_function_text(const std::string& text, const std::string& path) {
  if (text == "square") return TestFunction::square();
  if (text == "cos") return TestFunction::abs_cos();
  if (text.rfind("exp:", 0) == 0) {
    const std::string rate = text.substr(4);
    try {
      std::size_t used = 0;
      const double c = std::stod(rate, &used);
      if (used != rate.size()) throw std::invalid_argument(rate);
      return TestFunction::exp_c(c);
    } catch (const std::exception&) {
      throw config_error(path + ": bad exponential rate in '" + text + "'");
    }
  }
  throw config_error(path + ": unknown test function '" + text +
                     "' (use square, cos, or exp:<rate>)");
}

/// Read the descent parameters present on a node, leaving absent ones at
/// their defaults.  Key rejection is the caller's job: the same five keys
/// appear nested under "nomc" for benchmarks and inline for build-nomc.
inline OptNomcConfig read_nomc_fields(const ConfigNode& obj) {
  OptNomcConfig c;
  c.eta = obj.get_positive_double_or("eta", c.eta);
  c.delta = obj.get_positive_double_or("delta", c.delta);
  c.iterations = obj.get_positive_long_or("iterations", c.iterations);
  c.early_stop_window = obj.get_nonneg_long_or("early_stop_window", c.early_stop_window);
  c.early_stop_tol = obj.has("early_stop_tol") ? obj.get_positive_double("early_stop_tol")
                                               : c.early_stop_tol;
  return c;
}

inline OptNomcConfig parse_nomc_block(const ConfigNode& obj) {
  obj.reject_unknown({"eta", "delta", "iterations", "early_stop_window", "early_stop_tol"});
  return read_nomc_fields(obj);
}

/// Kernel name plus its applicable parameters, read from the command level.
/// Parameters that do not apply to the named kernel are rejected rather than
/// silently ignored.
inline KernelSpec parse_kernel_block(const ConfigNode& obj) {
  const std::string name = obj.get_string_or("kernel", "gaussian");
  if (obj.has("sigma") && name != "gaussian" && name != "matern")
    throw config_error(obj.path + ".sigma: only meaningful for gaussian or matern kernels");
  if (obj.has("lengthscale") && name != "gaussian")
    throw config_error(obj.path + ".lengthscale: only meaningful for the gaussian kernel");
  if (obj.has("nu") && name != "matern")
    throw config_error(obj.path + ".nu: only meaningful for the matern kernel");
  if (obj.has("growth") && name != "exp_png")
    throw config_error(obj.path + ".growth: only meaningful for the exp_png kernel");
  if (name == "gaussian")
    return KernelSpec::gaussian(obj.get_positive_double_or("sigma", 1.0),
                                obj.get_positive_double_or("lengthscale", 1.0));
  if (name == "matern")
    return KernelSpec::matern(obj.get_positive_double_or("sigma", 1.0),
                              obj.get_positive_double_or("nu", 1.5));
  if (name == "cauchy") return KernelSpec::cauchy();
  if (name == "angular") return KernelSpec::angular();
  if (name == "quadratic") return KernelSpec::quadratic();
  if (name == "tanh") return KernelSpec::tanh_kernel();
  if (name == "sine") return KernelSpec::sine();
  if (name == "exp_png") return KernelSpec::exp_png(obj.get_positive_double_or("growth", 1.0));
  throw config_error(obj.path + ".kernel: unknown kernel '" + name + "'");
}

inline Eigen::MatrixXd parse_cov_block(const ConfigNode& obj, long d) {
  obj.reject_unknown({"kind", "seed"});
  const std::string kind = obj.get_string_or("kind", "identity");
  if (kind == "identity") {
    if (obj.has("seed"))
      throw config_error(obj.path + ".seed: an identity covariance takes no seed");
    return Eigen::MatrixXd::Identity(d, d);
  }
  const std::uint64_t seed = obj.has("seed") ? obj.get_seed("seed") : 0;
  if (kind == "full") return make_cov(CovRecipe{CovKind::MFull, d, seed});
  if (kind == "diag") return make_cov(CovRecipe{CovKind::DDiag, d, seed});
  throw config_error(obj.path + ".kind: unknown covariance kind '" + kind +
                     "' (use identity, full, or diag)");
}

inline DistributionSpec parse_distribution_block(const ConfigNode& obj) {
  const std::string family = obj.get_string("family");
  const long d = obj.get_dimension("d");
  DistributionSpec spec;
  if (family == "gaussian_mixture") {
    obj.reject_unknown({"family", "d", "components", "weights"});
    ConfigNode comps = obj.array("components");
    if (comps.node->empty()) throw config_error(comps.path + ": must not be empty");
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t i = 0; i < comps.node->size(); ++i) {
      ConfigNode comp = comps.element(i);
      if (!comp.node->is_object())
        throw config_error(comp.path + ": expected an object, got " +
                           json_type_name(*comp.node));
      comp.reject_unknown({"mean", "cov"});
      means.push_back(comp.has("mean") ? comp.get_vector("mean", d)
                                       : Eigen::VectorXd::Zero(d).eval());
      covs.push_back(comp.has("cov") ? parse_cov_block(comp.object("cov"), d)
                                     : Eigen::MatrixXd::Identity(d, d).eval());
    }
    const std::vector<double> w = obj.get_double_array("weights");
    if (w.size() != means.size())
      throw config_error(obj.path + ".weights: expected " + std::to_string(means.size()) +
                         " entries to match components, got " + std::to_string(w.size()));
    Eigen::VectorXd weights(static_cast<long>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) weights(static_cast<long>(i)) = w[i];
    spec = DistributionSpec::mixture(std::move(means), std::move(covs), std::move(weights));
  } else {
    std::vector<std::string> allowed = {"family", "d", "mean", "cov"};
    if (family == "student_t") allowed.push_back("df");
    if (family == "inv_wishart_gaussian") allowed.push_back("nu");
    obj.reject_unknown(allowed);
    Eigen::VectorXd mean =
        obj.has("mean") ? obj.get_vector("mean", d) : Eigen::VectorXd::Zero(d).eval();
    Eigen::MatrixXd cov = obj.has("cov") ? parse_cov_block(obj.object("cov"), d)
                                         : Eigen::MatrixXd::Identity(d, d).eval();
    if (family == "gaussian") {
      spec = DistributionSpec::gaussian(std::move(mean), std::move(cov));
    } else if (family == "student_t") {
      spec = DistributionSpec::student_t(obj.get_positive_double_or("df", 3.0), std::move(mean),
                                         std::move(cov));
    } else if (family == "cauchy") {
      spec = DistributionSpec::cauchy(std::move(mean), std::move(cov));
    } else if (family == "laplace") {
      spec = DistributionSpec::laplace(std::move(mean), std::move(cov));
    } else if (family == "inv_wishart_gaussian") {
      spec = DistributionSpec::inverse_wishart_gaussian(obj.get_positive_double_or("nu", 10.0),
                                                        std::move(mean), std::move(cov));
    } else {
      throw config_error(obj.path + ".family: unknown distribution family '" + family + "'");
    }
  }
  try {
    spec.validate();
  } catch (const error& e) {
    throw config_error(obj.path + ": " + e.what());
  }
  return spec;
}

inline Eigen::VectorXd default_unit_direction(int d) {
  return Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

}  // namespace detail

/// Parse and validate a JSON run configuration.  Unknown keys anywhere in
/// the document are rejected by name; missing keys, type mismatches, and
/// out-of-range values raise a config error carrying the dotted path of the
/// offending entry.  The text itself must be valid JSON.
inline RunConfig parse_config(const std::string& json_text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object())
    throw config_error("$: config must be a JSON object");
  detail::ConfigNode top{&root, "$"};

  const std::string cmd_text = top.get_string("command");
  const std::optional<Command> cmd = command_from_tag(cmd_text);
  if (!cmd)
    throw config_error("$.command: unknown command '" + cmd_text +
                       "' (use sample, build-nomc, coherence, bench-kernel, bench-swd, or "
                       "diagnose)");

  RunConfig cfg;
  cfg.command = *cmd;
  cfg.seed = top.get_seed("seed");
  cfg.out = top.get_string_or("out", ".");
  if (cfg.out.empty()) throw config_error("$.out: must be a non-empty path");

  switch (*cmd) {
    case Command::Sample: {
      top.reject_unknown({"command", "seed", "out", "law", "d", "s", "method", "nomc"});
      SampleConfig sc;
      const int d = top.get_dimension("d");
      sc.law = detail::parse_law_text(top.get_string("law"), d, "$.law");
      sc.s = top.get_positive_long("s");
      sc.method = detail::parse_method_text(top.get_string_or("method", "mc"), "$.method");
      if (top.has("nomc")) sc.nomc = detail::parse_nomc_block(top.object("nomc"));
      cfg.sample = std::move(sc);
      break;
    }
    case Command::BuildNomc: {
      const std::string variant = top.get_string("variant");
      BuildNomcConfig bc;
      if (variant == "opt") {
        top.reject_unknown({"command", "seed", "out", "variant", "d", "s", "eta", "delta",
                            "iterations", "early_stop_window", "early_stop_tol"});
        bc.algebraic = false;
        bc.d = top.get_dimension("d");
        bc.s = top.get_positive_long("s");
        bc.opt = detail::read_nomc_fields(top);
      } else if (variant == "alg") {
        top.reject_unknown({"command", "seed", "out", "variant", "p", "r", "count"});
        bc.algebraic = true;
        bc.alg.p = top.get_positive_long("p");
        bc.alg.r = top.get_dimension("r");
        if (top.has("count")) bc.alg.selected_count = top.get_positive_long("count");
      } else {
        throw config_error("$.variant: unknown variant '" + variant + "' (use opt or alg)");
      }
      cfg.build_nomc = std::move(bc);
      break;
    }
    case Command::Coherence: {
      top.reject_unknown({"command", "seed", "out", "input"});
      CoherenceConfig cc;
      cc.input = top.get_string("input");
      if (cc.input.empty()) throw config_error("$.input: must be a non-empty path");
      cfg.coherence_cfg = std::move(cc);
      break;
    }
    case Command::BenchKernel: {
      top.reject_unknown({"command", "seed", "out", "kernel", "sigma", "lengthscale", "nu",
                          "growth", "d", "methods", "multipliers", "trials", "pairs", "dataset",
                          "nomc"});
      BenchKernelConfig bk;
      bk.kernel = detail::parse_kernel_block(top);
      bk.d = top.get_dimension("d");
      bk.methods = detail::parse_method_array(top, "methods");
      bk.multipliers = top.get_positive_long_array("multipliers");
      bk.trials = top.get_positive_long("trials");
      bk.pair_count = top.get_positive_long_or("pairs", 10);
      bk.dataset = top.get_string_or("dataset", "");
      if (top.has("nomc")) bk.nomc = detail::parse_nomc_block(top.object("nomc"));
      cfg.bench_kernel = std::move(bk);
      break;
    }
    case Command::BenchSwd: {
      top.reject_unknown({"command", "seed", "out", "dist_a", "dist_b", "methods", "multipliers",
                          "trials", "cloud_size", "order", "reference_directions", "nomc"});
      BenchSwdConfig bs;
      bs.dist_a = detail::parse_distribution_block(top.object("dist_a"));
      bs.dist_b = detail::parse_distribution_block(top.object("dist_b"));
      bs.methods = detail::parse_method_array(top, "methods");
      bs.multipliers = top.get_positive_long_array("multipliers");
      bs.trials = top.get_positive_long("trials");
      bs.cloud_size = top.get_positive_long_or("cloud_size", 1000);
      if (top.has("order")) {
        bs.order = top.get_double("order");
        if (!(bs.order >= 1.0))
          throw config_error("$.order: transport order must be at least 1, got " +
                             fmt6(bs.order));
      }
      bs.reference_directions = top.get_positive_long_or("reference_directions", 100000);
      if (bs.reference_directions < 100)
        throw config_error("$.reference_directions: must be at least 100, got " +
                           std::to_string(bs.reference_directions));
      if (top.has("nomc")) bs.nomc = detail::parse_nomc_block(top.object("nomc"));
      cfg.bench_swd = std::move(bs);
      break;
    }
    case Command::Diagnose: {
      const std::string claim = top.get_string("claim");
      DiagnoseConfig dc;
      dc.d = top.get_dimension("d");
      const auto read_z = [&]() {
        return top.has("z") ? top.get_vector("z", dc.d) : detail::default_unit_direction(dc.d);
      };
      if (claim == "nd") {
        top.reject_unknown({"command", "seed", "out", "claim", "d", "trials", "z", "thresholds"});
        dc.claim = Claim::Nd;
        dc.z = read_z();
        dc.thresholds = top.has("thresholds") ? top.get_double_array("thresholds")
                                              : std::vector<double>{0.2, 0.35, 0.5, 0.7, 0.9};
        dc.trials = top.get_positive_long_or("trials", 100000);
      } else if (claim == "mgf") {
        top.reject_unknown(
            {"command", "seed", "out", "claim", "d", "trials", "z", "s", "function", "lambdas"});
        dc.claim = Claim::Mgf;
        dc.z = read_z();
        dc.s = top.get_positive_long_or("s", dc.d);
        dc.f = detail::parse_test_function_text(top.get_string_or("function", "square"),
                                                "$.function");
        dc.lambdas = top.has("lambdas") ? top.get_double_array("lambdas")
                                        : std::vector<double>{-0.5, -0.25, 0.25, 0.5};
        dc.trials = top.get_positive_long_or("trials", 100000);
      } else if (claim == "mse") {
        top.reject_unknown(
            {"command", "seed", "out", "claim", "d", "trials", "z", "function", "multipliers"});
        dc.claim = Claim::Mse;
        dc.z = read_z();
        dc.f = detail::parse_test_function_text(top.get_string_or("function", "square"),
                                                "$.function");
        dc.multipliers = top.has("multipliers") ? top.get_positive_long_array("multipliers")
                                                : std::vector<long>{1, 2, 3};
        dc.trials = top.get_positive_long_or("trials", 10000);
      } else if (claim == "tail") {
        top.reject_unknown(
            {"command", "seed", "out", "claim", "d", "trials", "z", "s", "function", "eps"});
        dc.claim = Claim::Tail;
        dc.z = read_z();
        dc.s = top.get_positive_long_or("s", dc.d);
        dc.f = detail::parse_test_function_text(top.get_string_or("function", "square"),
                                                "$.function");
        dc.eps = top.has("eps") ? top.get_double_array("eps")
                                : std::vector<double>{0.1, 0.25, 0.5, 1.0};
        dc.trials = top.get_positive_long_or("trials", 100000);
      } else if (claim == "sweep") {
        top.reject_unknown({"command", "seed", "out", "claim", "d", "trials", "kernel", "sigma",
                            "lengthscale", "nu", "growth", "grid_points", "grid_radius",
                            "s_values", "method"});
        dc.claim = Claim::Sweep;
        dc.kernel = detail::parse_kernel_block(top);
        dc.grid_points = top.get_positive_long_or("grid_points", 50);
        if (dc.grid_points > 100000)
          throw config_error("$.grid_points: must be at most 100000, got " +
                             std::to_string(dc.grid_points));
        dc.grid_radius = top.get_positive_double_or("grid_radius", 2.0);
        dc.s_values = top.has("s_values") ? top.get_positive_long_array("s_values")
                                          : std::vector<long>{4, 16, 64};
        dc.method = detail::parse_method_text(top.get_string_or("method", "bomc"), "$.method");
        dc.trials = top.get_positive_long_or("trials", 300);
      } else {
        throw config_error("$.claim: unknown claim '" + claim +
                           "' (use nd, mgf, mse, tail, or sweep)");
      }
      cfg.diagnose = std::move(dc);
      break;
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// SVG line plots
// ---------------------------------------------------------------------------

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

struct PlotSeries {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> bands;  ///< half-width of the shaded band around ys
};

/// Per-trial standard deviation recovered from a 95% bootstrap half-width.
inline double sigma_from_ci95(double ci95, long trials) {
  return ci95 * std::sqrt(static_cast<double>(trials)) / 1.959963984540054;
}

/// Shared renderer: linear x, log10 y, one polyline + markers + shaded band
/// per series, legend on the right.  Single-vertex series render as a lone
/// marker.  All coordinates go through fmt6 so output bytes are stable.
inline std::string render_lineplot(const std::string& title, const std::string& x_label,
                                   const std::string& y_label, std::vector<PlotSeries> series) {
  static const char* palette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
  const double PL = 70.0, PR = 470.0, PT = 40.0, PB = 370.0;

  for (PlotSeries& s : series) {
    std::vector<std::size_t> idx(s.xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return s.xs[a] < s.xs[b]; });
    PlotSeries sorted{s.name, {}, {}, {}};
    for (std::size_t i : idx) {
      sorted.xs.push_back(s.xs[i]);
      sorted.ys.push_back(s.ys[i]);
      sorted.bands.push_back(s.bands[i]);
    }
    s = std::move(sorted);
  }

  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = std::numeric_limits<double>::infinity(), yhi = 0.0;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      xlo = std::min(xlo, s.xs[i]);
      xhi = std::max(xhi, s.xs[i]);
      for (double v : {s.ys[i], s.ys[i] - s.bands[i], s.ys[i] + s.bands[i]}) {
        if (std::isfinite(v) && v > 0.0) {
          ylo = std::min(ylo, v);
          yhi = std::max(yhi, v);
        }
      }
    }
  }
  if (!(ylo <= yhi)) {  // no positive value anywhere: pick an arbitrary window
    ylo = 1e-12;
    yhi = 1.0;
  }
  if (ylo == yhi) {
    ylo *= 0.1;
    yhi *= 10.0;
  }
  if (xlo == xhi) {
    xlo -= 1.0;
    xhi += 1.0;
  }
  double llo = std::log10(ylo), lhi = std::log10(yhi);
  const double lpad = 0.05 * (lhi - llo);
  llo -= lpad;
  lhi += lpad;

  const auto px = [&](double x) { return PL + (x - xlo) / (xhi - xlo) * (PR - PL); };
  const auto py = [&](double v) {
    double cv = (std::isfinite(v) && v > 0.0) ? v : std::pow(10.0, llo);
    const double l = std::clamp(std::log10(cv), llo, lhi);
    return PB - (l - llo) / (lhi - llo) * (PB - PT);
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg +=
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
      "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"270\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";

  // y grid: decade lines, falling back to the window edges when the range
  // spans less than one decade.
  std::vector<double> yticks;
  for (long e = static_cast<long>(std::ceil(llo)); e <= static_cast<long>(std::floor(lhi)); ++e)
    yticks.push_back(std::pow(10.0, static_cast<double>(e)));
  if (yticks.empty()) {
    yticks.push_back(ylo);
    yticks.push_back(yhi);
  }
  for (double v : yticks) {
    const double y = py(v);
    svg += "<line x1=\"" + fmt6(PL) + "\" y1=\"" + fmt6(y) + "\" x2=\"" + fmt6(PR) +
           "\" y2=\"" + fmt6(y) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + fmt6(PL - 6.0) + "\" y=\"" + fmt6(y + 4.0) +
           "\" text-anchor=\"end\">" + fmt6(v) + "</text>\n";
  }

  // x ticks at the distinct sample positions (thinned when crowded).
  std::vector<double> xticks;
  for (const PlotSeries& s : series)
    for (double x : s.xs) xticks.push_back(x);
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  const std::size_t stride = xticks.size() > 12 ? (xticks.size() + 11) / 12 : 1;
  for (std::size_t i = 0; i < xticks.size(); i += stride) {
    const double x = px(xticks[i]);
    svg += "<line x1=\"" + fmt6(x) + "\" y1=\"" + fmt6(PB) + "\" x2=\"" + fmt6(x) + "\" y2=\"" +
           fmt6(PB + 5.0) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + fmt6(x) + "\" y=\"" + fmt6(PB + 18.0) +
           "\" text-anchor=\"middle\">" + fmt6(xticks[i]) + "</text>\n";
  }

  svg += "<rect x=\"" + fmt6(PL) + "\" y=\"" + fmt6(PT) + "\" width=\"" + fmt6(PR - PL) +
         "\" height=\"" + fmt6(PB - PT) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg += "<text x=\"270\" y=\"402\" text-anchor=\"middle\">" + xml_escape(x_label) +
         "</text>\n";
  svg += "<text x=\"20\" y=\"205\" text-anchor=\"middle\" transform=\"rotate(-90 20 205)\">" +
         xml_escape(y_label) + "</text>\n";

  // bands under lines under markers
  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = palette[si % 6];
    bool any_band = false;
    for (double b : s.bands) any_band = any_band || b > 0.0;
    if (s.xs.size() >= 2 && any_band) {
      std::string pts;
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (i) pts += ' ';
        pts += fmt6(px(s.xs[i])) + "," + fmt6(py(s.ys[i] + s.bands[i]));
      }
      for (std::size_t i = s.xs.size(); i-- > 0;) {
        pts += ' ';
        pts += fmt6(px(s.xs[i])) + "," + fmt6(py(s.ys[i] - s.bands[i]));
      }
      svg += "<polygon class=\"series-band\" fill=\"" + std::string(color) +
             "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"" + pts + "\"/>\n";
    }
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = palette[si % 6];
    if (s.xs.size() >= 2) {
      std::string pts;
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (i) pts += ' ';
        pts += fmt6(px(s.xs[i])) + "," + fmt6(py(s.ys[i]));
      }
      svg += "<polyline class=\"series-line\" fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    }
    for (std::size_t i = 0; i < s.xs.size(); ++i)
      svg += "<circle class=\"series-marker\" cx=\"" + fmt6(px(s.xs[i])) + "\" cy=\"" +
             fmt6(py(s.ys[i])) + "\" r=\"3\" fill=\"" + std::string(color) + "\"/>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % 6];
    const double ly = 60.0 + 18.0 * static_cast<double>(si);
    svg += "<line x1=\"486\" y1=\"" + fmt6(ly) + "\" x2=\"508\" y2=\"" + fmt6(ly) +
           "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"514\" y=\"" + fmt6(ly + 4.0) + "\">" + xml_escape(series[si].name) +
           "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace detail

/// Kernel benchmark figure: MSE against the block multiplier, one curve per
/// method, band = ±0.5 of the per-trial standard deviation.
inline void emit_svg_lineplot(const MseTable& table, const std::string& path) {
  if (table.cells.empty()) throw arity_error("emit_svg_lineplot: table has no cells");
  std::vector<detail::PlotSeries> series;
  for (const MseCell& c : table.cells) {
    detail::PlotSeries* s = nullptr;
    for (detail::PlotSeries& cand : series)
      if (cand.name == c.method) s = &cand;
    if (!s) {
      series.push_back(detail::PlotSeries{c.method, {}, {}, {}});
      s = &series.back();
    }
    s->xs.push_back(static_cast<double>(c.multiplier));
    s->ys.push_back(c.mse);
    s->bands.push_back(0.5 * detail::sigma_from_ci95(c.ci95, c.trials));
  }
  const std::string title = table.cells.front().kernel + " kernel: mse vs multiplier";
  detail::write_text_file(path,
                          detail::render_lineplot(title, "multiplier", "mse", std::move(series)));
}

/// Sliced-distance benchmark figure; same layout as the kernel plot.
inline void emit_svg_lineplot(const SwdTable& table, const std::string& path) {
  if (table.cells.empty()) throw arity_error("emit_svg_lineplot: table has no cells");
  std::vector<detail::PlotSeries> series;
  for (const SwdCell& c : table.cells) {
    detail::PlotSeries* s = nullptr;
    for (detail::PlotSeries& cand : series)
      if (cand.name == c.method) s = &cand;
    if (!s) {
      series.push_back(detail::PlotSeries{c.method, {}, {}, {}});
      s = &series.back();
    }
    s->xs.push_back(static_cast<double>(c.multiplier));
    s->ys.push_back(c.mse);
    s->bands.push_back(0.5 * detail::sigma_from_ci95(c.ci95, c.trials));
  }
  const std::string title = table.cells.front().distribution + " swd: mse vs multiplier";
  detail::write_text_file(path,
                          detail::render_lineplot(title, "multiplier", "mse", std::move(series)));
}

/// Uniform-error sweep figure: mean sup error against the ensemble size,
/// single curve, band recovered from the 99% interval.
inline void emit_svg_lineplot(const UniformSweepTable& table, const std::string& path) {
  if (table.cells.empty()) throw arity_error("emit_svg_lineplot: table has no cells");
  detail::PlotSeries s{table.method, {}, {}, {}};
  for (const SweepCell& c : table.cells) {
    s.xs.push_back(static_cast<double>(c.s));
    s.ys.push_back(c.mean_sup_err);
    const double hw99 = (c.hi - c.lo) / 2.0;
    s.bands.push_back(0.5 * hw99 * std::sqrt(static_cast<double>(table.trials)) /
                      detail::normal_q995);
  }
  const std::string title = table.kernel + " kernel: sup error vs s";
  std::vector<detail::PlotSeries> series;
  series.push_back(std::move(s));
  detail::write_text_file(
      path, detail::render_lineplot(title, "s", "mean sup error", std::move(series)));
}

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_out(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / name).string();
}

inline void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw io_error("cannot create output directory '" + out_dir + "': " + ec.message());
}

/// Evaluation pairs for the kernel benchmark: rows of a dataset when one is
/// configured, otherwise mildly scaled Gaussian points.  Either way the
/// choice depends only on the master seed.
inline std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> benchmark_pairs(
    const BenchKernelConfig& bk, std::uint64_t master_seed) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  pairs.reserve(static_cast<std::size_t>(bk.pair_count));
  Rng rng(derive_seed(master_seed, stream::pair_sampling, 0));
  if (!bk.dataset.empty()) {
    const Dataset ds = load_dataset(bk.dataset);
    const long n = ds.points.rows();
    if (n < 2) throw parameter_error("dataset needs at least 2 points to form pairs");
    if (ds.points.cols() != bk.d)
      throw dimension_error("dataset dimension " + std::to_string(ds.points.cols()) +
                            " does not match configured d = " + std::to_string(bk.d));
    for (long k = 0; k < bk.pair_count; ++k) {
      const long i = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      long j = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
      if (j >= i) ++j;
      pairs.emplace_back(ds.points.row(i).transpose(), ds.points.row(j).transpose());
    }
  } else {
    for (long k = 0; k < bk.pair_count; ++k) {
      Eigen::VectorXd x(bk.d), y(bk.d);
      for (long j = 0; j < bk.d; ++j) x(j) = 0.5 * rng.normal();
      for (long j = 0; j < bk.d; ++j) y(j) = 0.5 * rng.normal();
      pairs.emplace_back(std::move(x), std::move(y));
    }
  }
  return pairs;
}

/// Deterministic evaluation cloud for the sweep diagnostic: points uniform
/// in the ball of the configured radius.
inline std::vector<Eigen::VectorXd> sweep_grid(int d, long points, double radius,
                                               std::uint64_t master_seed) {
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(static_cast<std::size_t>(points));
  Rng rng(derive_seed(master_seed, stream::cloud, 0));
  for (long k = 0; k < points; ++k) {
    Eigen::VectorXd dir(d);
    double norm2 = 0.0;
    do {
      for (int j = 0; j < d; ++j) dir(j) = rng.normal();
      norm2 = dir.squaredNorm();
    } while (norm2 == 0.0);
    const double r =
        radius * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(d));
    grid.push_back(dir * (r / std::sqrt(norm2)));
  }
  return grid;
}

}  // namespace detail

/// Execute a parsed run.  Creates the output directory, dispatches to the
/// library, and returns the artifact paths in emission order.  Thread count
/// affects wall time only, never bytes.
inline RunResult run(const RunConfig& cfg, int threads = 1) {
  if (threads < 1) throw parameter_error("run: thread count must be positive");
  detail::ensure_out_dir(cfg.out);
  RunResult result;
  const auto out_path = [&](const std::string& name) {
    return detail::join_out(cfg.out, name);
  };

  switch (cfg.command) {
    case Command::Sample: {
      const SampleConfig& sc = *cfg.sample;
      MethodEnsembleFactory factory(sc.law, sc.s, cfg.seed, {sc.method}, sc.nomc);
      const Ensemble e = factory.draw(sc.method, cfg.seed);
      const std::string name = "ensemble_" + method_tag(sc.method) + "_d" +
                               std::to_string(sc.law.d) + "_s" + std::to_string(sc.s) + ".txt";
      const std::string path = out_path(name);
      save_ensemble(e, path);
      result.files.push_back(path);
      break;
    }
    case Command::BuildNomc: {
      const BuildNomcConfig& bc = *cfg.build_nomc;
      if (bc.algebraic) {
        const Ensemble e = alg_nomc_build(bc.alg, cfg.seed);
        std::string name = "nomc_alg_p" + std::to_string(bc.alg.p) + "_r" +
                           std::to_string(bc.alg.r);
        if (bc.alg.selected_count) name += "_c" + std::to_string(*bc.alg.selected_count);
        const std::string path = out_path(name + ".txt");
        save_ensemble(e, path);
        result.files.push_back(path);
      } else {
        OptNomcConfig oc = bc.opt;
        oc.seed = cfg.seed;
        const OptNomcResult r = opt_nomc_build(bc.d, bc.s, oc);
        const std::string path = out_path("nomc_opt_d" + std::to_string(bc.d) + "_s" +
                                          std::to_string(bc.s) + ".txt");
        save_ensemble(r.ensemble, path);
        result.files.push_back(path);
      }
      break;
    }
    case Command::Coherence: {
      const CoherenceConfig& cc = *cfg.coherence_cfg;
      const Ensemble e = load_ensemble(cc.input);
      const double value = coherence(e);
      std::string j = "{\n";
      j += "  \"input\": \"" + detail::json_escape(cc.input) + "\",\n";
      j += "  \"method\": \"" + method_tag(e.method) + "\",\n";
      j += "  \"law\": \"" + detail::json_escape(e.law.tag_string()) + "\",\n";
      j += "  \"d\": " + std::to_string(e.d()) + ",\n";
      j += "  \"s\": " + std::to_string(e.s()) + ",\n";
      j += "  \"coherence\": " + fmt17(value) + "\n";
      j += "}\n";
      const std::string path = out_path("coherence.json");
      detail::write_text_file(path, j);
      result.files.push_back(path);
      break;
    }
    case Command::BenchKernel: {
      const BenchKernelConfig& bk = *cfg.bench_kernel;
      const auto pairs = detail::benchmark_pairs(bk, cfg.seed);
      const MseTable table = mse_benchmark(bk.kernel, bk.methods, bk.d, bk.multipliers,
                                           bk.trials, pairs, cfg.seed, threads, bk.nomc);
      const std::string csv_path = out_path("bench_kernel.csv");
      detail::write_text_file(csv_path, table.to_csv());
      result.files.push_back(csv_path);
      const std::string svg_path = out_path("bench_kernel.svg");
      emit_svg_lineplot(table, svg_path);
      result.files.push_back(svg_path);
      break;
    }
    case Command::BenchSwd: {
      const BenchSwdConfig& bs = *cfg.bench_swd;
      const SwdTable table =
          swd_benchmark(bs.dist_a, bs.dist_b, bs.methods, bs.multipliers, bs.trials,
                        bs.cloud_size, cfg.seed, threads, bs.nomc, bs.order,
                        bs.reference_directions);
      const std::string csv_path = out_path("bench_swd.csv");
      detail::write_text_file(csv_path, table.to_csv());
      result.files.push_back(csv_path);
      const std::string svg_path = out_path("bench_swd.svg");
      emit_svg_lineplot(table, svg_path);
      result.files.push_back(svg_path);
      break;
    }
    case Command::Diagnose: {
      const DiagnoseConfig& dc = *cfg.diagnose;
      switch (dc.claim) {
        case Claim::Nd: {
          const DiagnosticReport r =
              nd_empirical_test(dc.d, dc.z, dc.thresholds, dc.trials, cfg.seed, threads);
          const std::string path = out_path("nd.json");
          save_report(r, path);
          result.files.push_back(path);
          break;
        }
        case Claim::Mgf: {
          const DiagnosticReport r = mgf_dominance_test(dc.f, dc.lambdas, dc.d,
                                                        static_cast<int>(dc.s), dc.z, dc.trials,
                                                        cfg.seed, threads);
          const std::string path = out_path("mgf.json");
          save_report(r, path);
          result.files.push_back(path);
          break;
        }
        case Claim::Mse: {
          const DiagnosticReport r =
              mse_ordering_test(dc.f, dc.d, dc.multipliers, dc.trials, dc.z, cfg.seed, threads);
          const std::string path = out_path("mse.json");
          save_report(r, path);
          result.files.push_back(path);
          break;
        }
        case Claim::Tail: {
          const DiagnosticReport r = tail_comparison(dc.f, dc.d, static_cast<int>(dc.s), dc.eps,
                                                     dc.trials, dc.z, cfg.seed, threads);
          const std::string path = out_path("tail.json");
          save_report(r, path);
          result.files.push_back(path);
          break;
        }
        case Claim::Sweep: {
          const auto grid = detail::sweep_grid(dc.d, dc.grid_points, dc.grid_radius, cfg.seed);
          const UniformSweepTable table = uniform_error_sweep(dc.kernel, grid, dc.s_values,
                                                              dc.method, dc.trials, cfg.seed,
                                                              threads);
          const std::string csv_path = out_path("uniform_error_sweep.csv");
          detail::write_text_file(csv_path, table.to_csv());
          result.files.push_back(csv_path);
          const std::string svg_path = out_path("uniform_error_sweep.svg");
          emit_svg_lineplot(table, svg_path);
          result.files.push_back(svg_path);
          break;
        }
      }
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

namespace detail {

inline int env_thread_fallback() {
  const char* env = std::getenv("STRUCTMC_THREADS");
  if (!env || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 1024));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Full command-line front end.  Exit code 0: every requested artifact was
/// written (paths are echoed to stdout, one per line).  Exit code 2:
/// configuration or computation errors, reported verbatim on stderr.  Exit
/// code 3: I/O failures.
inline int cli_main(int argc, char** argv) {
  CLI::App app{"structured Monte Carlo ensembles, benchmarks, and diagnostics"};
  std::string command, config_path, out_override;
  int threads = 0;
  app.add_option("command", command,
                 "one of: sample, build-nomc, coherence, bench-kernel, bench-swd, diagnose")
      ->required();
  app.add_option("--config", config_path, "path to a JSON run configuration")->required();
  app.add_option("--threads", threads, "worker thread count (default: STRUCTMC_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_override, "output directory (overrides the config's \"out\")");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!command_from_tag(command))
      throw config_error("unknown command '" + command +
                         "' (use sample, build-nomc, coherence, bench-kernel, bench-swd, or "
                         "diagnose)");
    const std::string text = detail::read_text_file(config_path);
    RunConfig cfg = parse_config(text);
    if (command_tag(cfg.command) != command)
      throw config_error("config requests command '" + command_tag(cfg.command) +
                         "' but the command line says '" + command + "'");
    if (!out_override.empty()) cfg.out = out_override;
    int t = threads;
    if (t == 0) t = detail::env_thread_fallback();
    if (t < 1) throw config_error("--threads must be a positive integer");
    const RunResult res = run(cfg, t);
    for (const std::string& f : res.files) std::cout << f << "\n";
    return 0;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace structmc
