#pragma once

/// Near-orthogonal ensembles: particle-energy minimization on the unit
/// sphere, the finite-field polynomial character construction, the coherence
/// statistic, and the decimal ensemble file format.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "structmc/common.hpp"
#include "structmc/ensembles.hpp"

namespace structmc {

// ---------------------------------------------------------------------------
// Particle-energy optimization
// ---------------------------------------------------------------------------

/// Hyperparameters of the repulsion descent.  early_stop_window = 0 disables
/// the stopping heuristic (the default); when enabled, the canonical window
/// is 5000 iterations with tolerance 0.01 on the change of D_max - D_min.
struct OptNomcConfig {
    double delta = 0.1;  // energy scale
    double eta = 1.0;    // step size
    long iterations = 50000;
    long early_stop_window = 0;
    double early_stop_tol = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(delta > 0.0)) throw parameter_error("OptNomcConfig: delta must be positive");
        if (!(eta > 0.0)) throw parameter_error("OptNomcConfig: eta must be positive");
        if (iterations < 0) throw parameter_error("OptNomcConfig: iterations must be >= 0");
        if (early_stop_window < 0)
            throw parameter_error("OptNomcConfig: early_stop_window must be >= 0");
        if (!(early_stop_tol >= 0.0))
            throw parameter_error("OptNomcConfig: early_stop_tol must be >= 0");
    }
};

/// Per-iteration record of the descent: total pairwise energy and the
/// extreme pairwise distances.  Entry 0 describes the initialization; entry
/// t describes the state after iteration t.
struct OptNomcTrace {
    std::vector<double> energy;
    std::vector<double> d_max;
    std::vector<double> d_min;
    long iterations_run = 0;
};

struct OptNomcResult {
    Ensemble ensemble;
    OptNomcTrace trace;
};

/// Interaction energy of one particle pair: delta / (delta + |a - b|^2).
inline double pair_energy(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b,
                          double delta) {
    if (!(delta > 0.0)) throw parameter_error("pair_energy: delta must be positive");
    return delta / (delta + (a - b).squaredNorm());
}

/// Gradient of the total energy with respect to each particle: row i holds
/// d/dw_i of sum_{j != i} E(w_i, w_j) = sum_{j != i} -2 delta (w_i - w_j) /
/// (delta + |w_i - w_j|^2)^2.
inline Eigen::MatrixXd energy_gradient(const Eigen::MatrixXd& particles, double delta) {
    if (!(delta > 0.0)) throw parameter_error("energy_gradient: delta must be positive");
    const auto s = particles.rows();
    const auto d = particles.cols();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(s, d);
    Eigen::RowVectorXd diff(d);
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = i + 1; j < s; ++j) {
            diff = particles.row(i) - particles.row(j);
            const double denom = delta + diff.squaredNorm();
            const double coef = -2.0 * delta / (denom * denom);
            grad.row(i) += coef * diff;
            grad.row(j) -= coef * diff;
        }
    }
    return grad;
}

namespace detail {

/// One pass over all pairs: total energy, extreme distances, and (optionally)
/// the gradient.  Pairs are visited in a fixed order so accumulation is
/// reproducible.
inline void pairwise_pass(const Eigen::MatrixXd& w, double delta, Eigen::MatrixXd* grad,
                          double& energy, double& dist_max, double& dist_min) {
    const auto s = w.rows();
    const auto d = w.cols();
    if (grad) grad->setZero();
    energy = 0.0;
    dist_max = 0.0;
    dist_min = std::numeric_limits<double>::infinity();
    Eigen::RowVectorXd diff(d);
    for (Eigen::Index i = 0; i < s; ++i) {
        for (Eigen::Index j = i + 1; j < s; ++j) {
            diff = w.row(i) - w.row(j);
            const double dist2 = diff.squaredNorm();
            const double denom = delta + dist2;
            energy += delta / denom;
            const double dist = std::sqrt(dist2);
            dist_max = std::max(dist_max, dist);
            dist_min = std::min(dist_min, dist);
            if (grad) {
                const double coef = -2.0 * delta / (denom * denom);
                grad->row(i) += coef * diff;
                grad->row(j) -= coef * diff;
            }
        }
    }
    if (s < 2) dist_min = 0.0;
}

}  // namespace detail

/// Near-orthogonal ensemble by repulsion descent: B-OMC sphere directions,
/// T synchronous steps of w_i <- normalize(w_i - eta F_i), then a Haar
/// rotation.  Returns unit rows (method OptNOMC) plus the descent trace.
inline OptNomcResult opt_nomc_build(int d, int s, const OptNomcConfig& cfg) {
    cfg.validate();
    if (d < 2) throw parameter_error("opt_nomc_build: d must be >= 2");
    if (s < 1) throw parameter_error("opt_nomc_build: s must be >= 1");

    const IsotropicLaw sphere = IsotropicLaw::unit_sphere(d);
    Eigen::MatrixXd w =
        sample_bomc(sphere, s, derive_seed(cfg.seed, stream::nomc_init)).rows;

    OptNomcTrace trace;
    const std::size_t expected =
        static_cast<std::size_t>(std::min<long>(cfg.iterations, 200000L) + 1);
    trace.energy.reserve(expected);
    trace.d_max.reserve(expected);
    trace.d_min.reserve(expected);

    Eigen::MatrixXd grad(s, d);
    double energy, dist_max, dist_min;
    detail::pairwise_pass(w, cfg.delta, &grad, energy, dist_max, dist_min);
    trace.energy.push_back(energy);
    trace.d_max.push_back(dist_max);
    trace.d_min.push_back(dist_min);

    long t = 0;
    while (t < cfg.iterations) {
        for (int i = 0; i < s; ++i) {
            Eigen::RowVectorXd stepped = w.row(i) - cfg.eta * grad.row(i);
            const double n = stepped.norm();
            if (n > 1e-12) w.row(i) = stepped / n;  // a zero residual keeps the old position
        }
        ++t;
        detail::pairwise_pass(w, cfg.delta, &grad, energy, dist_max, dist_min);
        trace.energy.push_back(energy);
        trace.d_max.push_back(dist_max);
        trace.d_min.push_back(dist_min);
        if (cfg.early_stop_window > 0 && t >= cfg.early_stop_window) {
            const std::size_t now = static_cast<std::size_t>(t);
            const std::size_t before = now - static_cast<std::size_t>(cfg.early_stop_window);
            const double gap_now = trace.d_max[now] - trace.d_min[now];
            const double gap_before = trace.d_max[before] - trace.d_min[before];
            if (std::fabs(gap_now - gap_before) < cfg.early_stop_tol) break;
        }
    }
    trace.iterations_run = t;

    const Eigen::MatrixXd rotation =
        random_rotation(d, derive_seed(cfg.seed, stream::nomc_rotation));
    Ensemble e{w * rotation.transpose(), Method::OptNOMC, sphere, cfg.seed, std::nullopt};
    return OptNomcResult{std::move(e), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Polynomial character ensembles
// ---------------------------------------------------------------------------

/// Row budget guards: the full enumeration has p^r rows of width 2p.
inline constexpr long alg_nomc_max_rows = 4L * 1024L * 1024L;
inline constexpr long alg_nomc_max_entries = 64L * 1024L * 1024L;

/// Parameters of the character construction: dimension 2p, p^r available
/// rows (optionally subsampled to selected_count).
struct AlgNomcSpec {
    long p = 3;
    int r = 2;
    std::optional<long> selected_count;

    long row_pool() const {
        long pool = 1;
        for (int k = 0; k < r; ++k) {
            if (pool > alg_nomc_max_rows / p)
                throw capacity_error("AlgNomcSpec: p^r exceeds the row budget");
            pool *= p;
        }
        return pool;
    }

    void validate() const {
        if (!is_prime(p) || p == 2)
            throw parameter_error("AlgNomcSpec: p must be an odd prime");
        if (r < 2) throw parameter_error("AlgNomcSpec: r must be >= 2");
        const long pool = row_pool();
        if (pool * 2L * p > alg_nomc_max_entries)
            throw capacity_error("AlgNomcSpec: ensemble entry count exceeds the budget");
        if (selected_count) {
            if (*selected_count < 1)
                throw parameter_error("AlgNomcSpec: selected_count must be >= 1");
            if (*selected_count > pool)
                throw parameter_error("AlgNomcSpec: selected_count exceeds p^r");
        }
    }

    /// Validate a caller-requested ambient dimension.
    static void check_dimension(int requested_d) {
        if (requested_d < 2 || requested_d % 2 != 0 || !is_prime(requested_d / 2) ||
            requested_d / 2 == 2)
            throw dimension_error(
                "alg_nomc: dimension must equal 2p for an odd prime p; requested " +
                std::to_string(requested_d) +
                " is not of that form (choose the nearest prime)");
    }
};

/// The unit vector in R^{2p} encoding x -> (1/sqrt(p)) exp(2 pi i (c_r x^r +
/// ... + c_1 x)/p) sampled at x = 0..p-1, interleaved as (a_1, b_1, ...,
/// a_p, b_p).  Exponents are reduced mod p in exact integer arithmetic
/// before the single trig call per coordinate.
inline Eigen::VectorXd poly_character_vector(long p, const std::vector<long>& coeffs) {
    if (!is_prime(p)) throw parameter_error("poly_character_vector: p must be prime");
    if (coeffs.empty()) throw parameter_error("poly_character_vector: empty coefficients");
    for (long c : coeffs)
        if (c < 0 || c >= p)
            throw parameter_error("poly_character_vector: coefficients must lie in [0, p)");
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
    Eigen::VectorXd v(2 * p);
    for (long j = 0; j < p; ++j) {
        const long x = j;
        long exponent = 0;
        long power = 1;
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            power = (power * x) % p;  // power = x^{k+1} mod p
            exponent = (exponent + coeffs[k] * power) % p;
        }
        const double angle = 2.0 * M_PI * static_cast<double>(exponent) / static_cast<double>(p);
        v(2 * j) = inv_sqrt_p * std::cos(angle);
        v(2 * j + 1) = inv_sqrt_p * std::sin(angle);
    }
    return v;
}

/// All p^r coefficient tuples (or a seeded uniform subsample excluding the
/// all-zero tuple), rotated by a Haar rotation of R^{2p}.
inline Ensemble alg_nomc_build(const AlgNomcSpec& spec, std::uint64_t seed) {
    spec.validate();
    const long pool = spec.row_pool();
    const long count = spec.selected_count.value_or(pool);

    std::vector<long> chosen;
    chosen.reserve(static_cast<std::size_t>(count));
    if (count == pool) {
        for (long n = 0; n < pool; ++n) chosen.push_back(n);
    } else {
        // Seeded Fisher-Yates prefix over the nonzero tuples.
        std::vector<long> indices;
        indices.reserve(static_cast<std::size_t>(pool - 1));
        for (long n = 1; n < pool; ++n) indices.push_back(n);
        if (count > static_cast<long>(indices.size()))
            throw parameter_error("alg_nomc_build: subsample larger than the nonzero pool");
        Rng rng(derive_seed(seed, stream::nomc_subsample));
        for (long i = 0; i < count; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) +
                static_cast<std::size_t>(rng.uniform_index(indices.size() - static_cast<std::size_t>(i)));
            std::swap(indices[static_cast<std::size_t>(i)], indices[j]);
            chosen.push_back(indices[static_cast<std::size_t>(i)]);
        }
    }

    const int d = static_cast<int>(2 * spec.p);
    Eigen::MatrixXd rows(count, d);
    std::vector<long> coeffs(static_cast<std::size_t>(spec.r));
    for (long row = 0; row < count; ++row) {
        long n = chosen[static_cast<std::size_t>(row)];
        for (int k = 0; k < spec.r; ++k) {
            coeffs[static_cast<std::size_t>(k)] = n % spec.p;  // c_{k+1}
            n /= spec.p;
        }
        rows.row(row) = poly_character_vector(spec.p, coeffs).transpose();
    }

    const Eigen::MatrixXd rotation =
        random_rotation(d, derive_seed(seed, stream::nomc_rotation));
    return Ensemble{rows * rotation.transpose(), Method::AlgNOMC,
                    IsotropicLaw::unit_sphere(d), seed, std::nullopt};
}

// ---------------------------------------------------------------------------
// Coherence
// ---------------------------------------------------------------------------

/// max over i != j of |<w_i, w_j>| / (|w_i| |w_j|), computed blockwise so
/// large ensembles never materialize a full Gram matrix.
inline double coherence(const Ensemble& e) {
    const Eigen::Index s = e.rows.rows();
    if (s < 2) throw arity_error("coherence: need at least 2 rows");
    Eigen::MatrixXd unit(s, e.rows.cols());
    for (Eigen::Index i = 0; i < s; ++i) {
        const double n = e.rows.row(i).norm();
        if (n == 0.0) throw precondition_error("coherence: zero row " + std::to_string(i));
        unit.row(i) = e.rows.row(i) / n;
    }
    const Eigen::Index block = 256;
    double best = 0.0;
    for (Eigen::Index i0 = 0; i0 < s; i0 += block) {
        const Eigen::Index bi = std::min(block, s - i0);
        for (Eigen::Index j0 = i0; j0 < s; j0 += block) {
            const Eigen::Index bj = std::min(block, s - j0);
            const Eigen::MatrixXd g =
                unit.middleRows(i0, bi) * unit.middleRows(j0, bj).transpose();
            for (Eigen::Index a = 0; a < bi; ++a) {
                const Eigen::Index jstart = (i0 == j0) ? a + 1 : 0;
                for (Eigen::Index b = jstart; b < bj; ++b)
                    best = std::max(best, std::fabs(g(a, b)));
            }
        }
    }
    return std::min(best, 1.0);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Write an ensemble as `# structmc-ensemble v1 ...` followed by s rows of d
/// comma-separated decimals with 17 significant digits (LF endings).
inline void save_ensemble(const Ensemble& e, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_ensemble: cannot open '" + path + "' for writing");
    out << "# structmc-ensemble v1 method=" << method_tag(e.method)
        << " law=" << e.law.tag_string() << " d=" << e.d() << " s=" << e.s()
        << " seed=" << e.seed << "\n";
    for (int i = 0; i < e.s(); ++i) {
        for (int j = 0; j < e.d(); ++j) {
            if (j) out << ',';
            out << fmt17(e.rows(i, j));
        }
        out << '\n';
    }
    if (!out) throw io_error("save_ensemble: write failed for '" + path + "'");
}

namespace detail {

inline std::string expect_kv(std::istringstream& header, const std::string& key,
                             const std::string& path) {
    std::string token;
    if (!(header >> token) || token.rfind(key + "=", 0) != 0)
        throw parse_error("load_ensemble: '" + path + "' line 1: expected " + key + "=<value>");
    return token.substr(key.size() + 1);
}

}  // namespace detail

inline Ensemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_ensemble: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line))
        throw parse_error("load_ensemble: '" + path + "' line 1: missing header");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    std::string word;
    header >> word;
    if (tag != "#" || word != "structmc-ensemble")
        throw parse_error("load_ensemble: '" + path + "' line 1: not a structmc ensemble file");
    header >> word;
    if (word != "v1")
        throw parse_error("load_ensemble: '" + path + "' line 1: unsupported version '" + word +
                          "'");
    const std::string method_text = detail::expect_kv(header, "method", path);
    const std::string law_text = detail::expect_kv(header, "law", path);
    const std::string d_text = detail::expect_kv(header, "d", path);
    const std::string s_text = detail::expect_kv(header, "s", path);
    const std::string seed_text = detail::expect_kv(header, "seed", path);

    int d = 0, s = 0;
    std::uint64_t seed = 0;
    try {
        d = std::stoi(d_text);
        s = std::stoi(s_text);
        seed = std::stoull(seed_text);
    } catch (const std::exception&) {
        throw parse_error("load_ensemble: '" + path + "' line 1: malformed numeric field");
    }
    if (d < 1 || s < 1)
        throw parse_error("load_ensemble: '" + path + "' line 1: d and s must be positive");

    const Method method = method_from_tag(method_text);
    const IsotropicLaw law = IsotropicLaw::from_tag_string(law_text, d);

    Eigen::MatrixXd rows(s, d);
    for (int i = 0; i < s; ++i) {
        const int line_no = i + 2;
        if (!std::getline(in, line))
            throw parse_error("load_ensemble: '" + path + "' line " + std::to_string(line_no) +
                              ": file truncated (expected " + std::to_string(s) + " data rows)");
        std::size_t pos = 0;
        for (int j = 0; j < d; ++j) {
            const std::size_t comma = line.find(',', pos);
            const bool last = (j == d - 1);
            if (last != (comma == std::string::npos))
                throw parse_error("load_ensemble: '" + path + "' line " +
                                  std::to_string(line_no) + ": expected " + std::to_string(d) +
                                  " comma-separated values");
            const std::string field =
                line.substr(pos, last ? std::string::npos : comma - pos);
            try {
                std::size_t used = 0;
                rows(i, j) = std::stod(field, &used);
                if (used != field.size()) throw parse_error("trailing characters");
            } catch (const std::exception&) {
                throw parse_error("load_ensemble: '" + path + "' line " +
                                  std::to_string(line_no) + ": bad numeric field '" + field +
                                  "'");
            }
            if (!std::isfinite(rows(i, j)))
                throw parse_error("load_ensemble: '" + path + "' line " +
                                  std::to_string(line_no) + ": non-finite value");
            pos = last ? pos : comma + 1;
        }
    }
    while (std::getline(in, line)) {
        if (!line.empty())
            throw parse_error("load_ensemble: '" + path + "' has more data rows than s=" +
                              std::to_string(s));
    }

    std::optional<int> block_size;
    if (method == Method::OMC || method == Method::BOMC) block_size = d;
    return Ensemble{std::move(rows), method, law, seed, block_size};
}

}  // namespace structmc
