#pragma once

/// Sample ensembles of frequency vectors from isotropic laws: iid Monte
/// Carlo, orthogonal and block-orthogonal variants, Halton quasi-Monte
/// Carlo, plus Haar rotations and radial renormalization.  Every operation
/// is a pure function of its arguments (seed included), so outputs are
/// byte-identical across runs and thread counts.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "structmc/common.hpp"

namespace structmc {

// ---------------------------------------------------------------------------
// Isotropic laws
// ---------------------------------------------------------------------------

enum class LawTag { GaussianStd, UnitSphere, GaussianScaled, MaternSpectral, LaplaceProduct };

/// A sampling law for frequency vectors in R^d.  Draws from every tag except
/// LaplaceProduct decompose as (uniform direction) x (radius from the tag's
/// radial law); LaplaceProduct is the coordinate-wise Laplace law e^{-|w|_1},
/// which is not isotropic (see `isotropic()`).
struct IsotropicLaw {
    LawTag tag = LawTag::GaussianStd;
    int d = 1;
    double param = 0.0;  // lengthscale for GaussianScaled, smoothness for MaternSpectral

    static IsotropicLaw gaussian_std(int d) { return make(LawTag::GaussianStd, d, 0.0); }
    static IsotropicLaw unit_sphere(int d) { return make(LawTag::UnitSphere, d, 0.0); }
    static IsotropicLaw gaussian_scaled(int d, double lengthscale) {
        return make(LawTag::GaussianScaled, d, lengthscale);
    }
    static IsotropicLaw matern_spectral(int d, double nu) {
        return make(LawTag::MaternSpectral, d, nu);
    }
    static IsotropicLaw laplace_product(int d) { return make(LawTag::LaplaceProduct, d, 0.0); }

    /// LaplaceProduct draws have isotropic norms but non-uniform directions.
    bool isotropic() const { return tag != LawTag::LaplaceProduct; }

    void validate() const {
        if (d < 1) throw parameter_error("IsotropicLaw: dimension must be >= 1");
        if (tag == LawTag::GaussianScaled && !(param > 0.0))
            throw parameter_error("IsotropicLaw: lengthscale must be positive");
        if (tag == LawTag::MaternSpectral && !(param > 0.0))
            throw parameter_error("IsotropicLaw: smoothness must be positive");
    }

    /// Compact tag used in ensemble file headers, e.g. "gauss_scaled:0.5".
    std::string tag_string() const {
        switch (tag) {
            case LawTag::GaussianStd: return "gauss_std";
            case LawTag::UnitSphere: return "unit_sphere";
            case LawTag::GaussianScaled: return "gauss_scaled:" + fmt17(param);
            case LawTag::MaternSpectral: return "matern:" + fmt17(param);
            case LawTag::LaplaceProduct: return "laplace_prod";
        }
        throw parameter_error("IsotropicLaw: unknown tag");
    }

    static IsotropicLaw from_tag_string(const std::string& text, int d) {
        const auto colon = text.find(':');
        const std::string head = text.substr(0, colon);
        double value = 0.0;
        if (colon != std::string::npos) {
            try {
                value = std::stod(text.substr(colon + 1));
            } catch (const std::exception&) {
                throw parse_error("IsotropicLaw: bad parameter in law tag '" + text + "'");
            }
        }
        if (head == "gauss_std") return gaussian_std(d);
        if (head == "unit_sphere") return unit_sphere(d);
        if (head == "gauss_scaled") return gaussian_scaled(d, value);
        if (head == "matern") return matern_spectral(d, value);
        if (head == "laplace_prod") return laplace_product(d);
        throw parse_error("IsotropicLaw: unknown law tag '" + text + "'");
    }

  private:
    static IsotropicLaw make(LawTag tag, int d, double param) {
        IsotropicLaw law;
        law.tag = tag;
        law.d = d;
        law.param = param;
        law.validate();
        return law;
    }
};

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

enum class Method { MC, QMC, OMC, BOMC, OptNOMC, AlgNOMC };

inline std::string method_tag(Method m) {
    switch (m) {
        case Method::MC: return "mc";
        case Method::QMC: return "qmc";
        case Method::OMC: return "omc";
        case Method::BOMC: return "bomc";
        case Method::OptNOMC: return "opt_nomc";
        case Method::AlgNOMC: return "alg_nomc";
    }
    throw parameter_error("method_tag: unknown method");
}

inline Method method_from_tag(const std::string& tag) {
    if (tag == "mc") return Method::MC;
    if (tag == "qmc") return Method::QMC;
    if (tag == "omc") return Method::OMC;
    if (tag == "bomc") return Method::BOMC;
    if (tag == "opt_nomc") return Method::OptNOMC;
    if (tag == "alg_nomc") return Method::AlgNOMC;
    throw parse_error("method_from_tag: unknown method tag '" + tag + "'");
}

/// An s x d matrix of frequency samples together with how it was made.
/// Immutable by convention after construction; safe to share across threads.
struct Ensemble {
    Eigen::MatrixXd rows;  // one sample per row
    Method method = Method::MC;
    IsotropicLaw law;
    std::uint64_t seed = 0;
    std::optional<int> block_size;  // set for OMC/B-OMC outputs

    int s() const { return static_cast<int>(rows.rows()); }
    int d() const { return static_cast<int>(rows.cols()); }
};

// ---------------------------------------------------------------------------
// Per-law draw primitives
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::RowVectorXd gaussian_row(Rng& rng, int d) {
    Eigen::RowVectorXd row(d);
    for (int j = 0; j < d; ++j) row(j) = rng.normal();
    return row;
}

inline Eigen::RowVectorXd laplace_row(Rng& rng, int d) {
    Eigen::RowVectorXd row(d);
    for (int j = 0; j < d; ++j) row(j) = rng.laplace();
    return row;
}

/// One iid draw from the law.
inline Eigen::RowVectorXd law_iid_row(const IsotropicLaw& law, Rng& rng) {
    switch (law.tag) {
        case LawTag::GaussianStd: return gaussian_row(rng, law.d);
        case LawTag::UnitSphere: {
            Eigen::RowVectorXd g = gaussian_row(rng, law.d);
            double n = g.norm();
            while (n == 0.0) {
                g = gaussian_row(rng, law.d);
                n = g.norm();
            }
            return g / n;
        }
        case LawTag::GaussianScaled: return gaussian_row(rng, law.d) / law.param;
        case LawTag::MaternSpectral: {
            const Eigen::RowVectorXd g = gaussian_row(rng, law.d);
            const double u = rng.chi_square(2.0 * law.param);
            return g * std::sqrt(2.0 * law.param / u);
        }
        case LawTag::LaplaceProduct: return laplace_row(rng, law.d);
    }
    throw parameter_error("law_iid_row: unknown tag");
}

/// One draw from the law's radial law (the norm of an iid draw).
inline double law_radius(const IsotropicLaw& law, Rng& rng) {
    switch (law.tag) {
        case LawTag::GaussianStd: return rng.chi(law.d);
        case LawTag::UnitSphere: return 1.0;
        case LawTag::GaussianScaled: return rng.chi(law.d) / law.param;
        case LawTag::MaternSpectral: {
            const double r = rng.chi(law.d);
            const double u = rng.chi_square(2.0 * law.param);
            return r * std::sqrt(2.0 * law.param / u);
        }
        case LawTag::LaplaceProduct: return laplace_row(rng, law.d).norm();
    }
    throw parameter_error("law_radius: unknown tag");
}

/// Rows fed to Gram-Schmidt when building orthogonal blocks.  Isotropic laws
/// orthogonalize Gaussian draws (whose orthonormalization is Haar); the
/// non-isotropic LaplaceProduct orthogonalizes its own product-law draws.
inline Eigen::RowVectorXd law_source_row(const IsotropicLaw& law, Rng& rng) {
    if (law.tag == LawTag::LaplaceProduct) return laplace_row(rng, law.d);
    return gaussian_row(rng, law.d);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampling operations
// ---------------------------------------------------------------------------

/// s independent draws from the law.
inline Ensemble sample_iid(const IsotropicLaw& law, int s, std::uint64_t seed) {
    law.validate();
    if (s < 1) throw parameter_error("sample_iid: s must be >= 1");
    Rng rng(seed);
    Eigen::MatrixXd rows(s, law.d);
    for (int i = 0; i < s; ++i) rows.row(i) = detail::law_iid_row(law, rng);
    return Ensemble{std::move(rows), Method::MC, law, seed, std::nullopt};
}

/// Modified Gram-Schmidt with a second orthogonalization sweep.  Returns
/// nullopt when a residual norm drops below 1e-10 (degenerate input); the
/// caller is expected to resample.
inline std::optional<Eigen::MatrixXd> gram_schmidt(const Eigen::MatrixXd& rows) {
    const auto k = rows.rows();
    const auto d = rows.cols();
    if (k > d) throw dimension_error("gram_schmidt: more rows than dimensions");
    Eigen::MatrixXd q = rows;
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::RowVectorXd v = q.row(i);
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < i; ++j) v -= v.dot(q.row(j)) * q.row(j);
        const double n = v.norm();
        if (n < 1e-10) return std::nullopt;
        q.row(i) = v / n;
    }
    return q;
}

/// One orthogonal block: s <= d rows, pairwise orthogonal, each an
/// orthonormal direction scaled by an independent radius from the law.
inline Ensemble sample_omc_block(const IsotropicLaw& law, int s, std::uint64_t seed) {
    law.validate();
    if (s < 1) throw parameter_error("sample_omc_block: s must be >= 1");
    if (s > law.d) throw dimension_error("sample_omc_block: s exceeds dimension d");
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(seed, stream::block_retry, attempt));
        Eigen::MatrixXd src(s, law.d);
        for (int i = 0; i < s; ++i) src.row(i) = detail::law_source_row(law, rng);
        const auto q = gram_schmidt(src);
        if (!q) continue;  // degenerate draw: discard the block, next substream
        Eigen::MatrixXd rows(s, law.d);
        for (int i = 0; i < s; ++i) rows.row(i) = q->row(i) * detail::law_radius(law, rng);
        Ensemble e{std::move(rows), Method::OMC, law, seed, law.d};
        return e;
    }
}

/// ceil(s/d) independently seeded orthogonal blocks, concatenated; the final
/// block holds the s mod d leftover rows.
inline Ensemble sample_bomc(const IsotropicLaw& law, int s, std::uint64_t seed) {
    law.validate();
    if (s < 1) throw parameter_error("sample_bomc: s must be >= 1");
    const int d = law.d;
    Eigen::MatrixXd rows(s, d);
    for (int b = 0, row0 = 0; row0 < s; ++b, row0 += d) {
        const int sb = std::min(d, s - row0);
        const Ensemble block =
            sample_omc_block(law, sb, derive_seed(seed, stream::bomc_block, b));
        rows.middleRows(row0, sb) = block.rows;
    }
    return Ensemble{std::move(rows), Method::BOMC, law, seed, d};
}

/// Haar-distributed rotation on O(d): QR of a Gaussian matrix with the
/// R-diagonal sign fix.
inline Eigen::MatrixXd random_rotation(int d, std::uint64_t seed) {
    if (d < 1) throw parameter_error("random_rotation: d must be >= 1");
    Rng rng(seed);
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR();
    for (int i = 0; i < d; ++i)
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    return q;
}

/// Row-wise application of a rotation: each sample w becomes R w.
inline Ensemble apply_rotation(const Ensemble& e, const Eigen::MatrixXd& rotation) {
    if (rotation.rows() != e.d() || rotation.cols() != e.d())
        throw dimension_error("apply_rotation: rotation shape does not match ensemble");
    Ensemble out = e;
    out.rows = e.rows * rotation.transpose();
    return out;
}

/// Coordinate j of Halton point `index` is the radical inverse of `index`
/// in the j-th prime base.
inline std::vector<double> halton_point(long index, int dims) {
    if (index < 1) throw parameter_error("halton_point: index must be >= 1");
    if (dims < 1) throw parameter_error("halton_point: dims must be >= 1");
    if (dims > static_cast<int>(first_primes().size()))
        throw capacity_error("halton_point: dims exceeds the 512-prime table");
    std::vector<double> point(static_cast<std::size_t>(dims));
    for (int j = 0; j < dims; ++j) {
        const int base = first_primes()[static_cast<std::size_t>(j)];
        double value = 0.0;
        double scale = 1.0 / base;
        for (long i = index; i > 0; i /= base) {
            value += scale * static_cast<double>(i % base);
            scale /= base;
        }
        point[static_cast<std::size_t>(j)] = value;
    }
    return point;
}

/// Standard normal quantile function (Wichura's AS241, double precision).
inline double inverse_normal_cdf(double u) {
    if (!(u > 0.0 && u < 1.0))
        throw domain_error("inverse_normal_cdf: u must lie strictly inside (0,1)");
    const double q = u - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) *
                        r +
                    4.5921953931549871457e+4) *
                       r +
                   1.3731693765509461125e+4) *
                      r +
                  1.9715909503065514427e+3) *
                     r +
                 1.3314166789178437745e+2) *
                    r +
                3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) *
                        r +
                    2.1213794301586595867e+4) *
                       r +
                   5.3941960214247511077e+3) *
                      r +
                  6.8718700749205790830e+2) *
                     r +
                 4.2313330701600911252e+1) *
                    r +
                1.0);
    }
    r = (q < 0.0) ? u : 1.0 - u;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) *
                         r +
                     1.27045825245236838258e+0) *
                        r +
                    3.64784832476320460504e+0) *
                       r +
                   5.76949722146069140550e+0) *
                      r +
                  4.63033784615654529590e+0) *
                     r +
                 1.42343711074968357734e+0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) *
                         r +
                     1.48103976427480074590e-1) *
                        r +
                    6.89767334985100004550e-1) *
                       r +
                   1.67638483018380384940e+0) *
                      r +
                  2.05319162663775882187e+0) *
                     r +
                 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) *
                         r +
                     2.65321895265761230930e-2) *
                        r +
                    2.96560571828504891230e-1) *
                       r +
                   1.78482653991729133580e+0) *
                      r +
                  5.46378491116411436990e+0) *
                     r +
                 6.65790464350110377720e+0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) *
                         r +
                     7.86869131145613259100e-4) *
                        r +
                    1.48753612908506148525e-2) *
                       r +
                   1.36929880922735805310e-1) *
                      r +
                  5.99832206555887937690e-1) *
                     r +
                 1.0);
    }
    return (q < 0.0) ? -value : value;
}

/// Scale unit direction rows by independent radii from the law.
inline Ensemble radial_renormalize(const Eigen::MatrixXd& directions, const IsotropicLaw& law,
                                   std::uint64_t seed, Method method = Method::MC) {
    law.validate();
    if (directions.cols() != law.d)
        throw dimension_error("radial_renormalize: direction width does not match law.d");
    for (Eigen::Index i = 0; i < directions.rows(); ++i)
        if (std::fabs(directions.row(i).norm() - 1.0) > 1e-8)
            throw precondition_error("radial_renormalize: row " + std::to_string(i) +
                                     " is not unit length");
    Rng rng(seed);
    Eigen::MatrixXd rows(directions.rows(), directions.cols());
    for (Eigen::Index i = 0; i < directions.rows(); ++i)
        rows.row(i) = directions.row(i) * detail::law_radius(law, rng);
    return Ensemble{std::move(rows), method, law, seed, std::nullopt};
}

/// Number of leading Halton points discarded before use.
inline constexpr long halton_skip = 20;

/// The Gaussianized Halton points behind sample_qmc, before normalization:
/// Halton indices skip+1..skip+s, Cranley-Patterson shifted modulo 1 by a
/// seed-derived offset, then pushed through the normal quantile per
/// coordinate.
inline Eigen::MatrixXd qmc_gaussian_points(int d, int s, std::uint64_t seed) {
    if (d < 1) throw parameter_error("qmc_gaussian_points: d must be >= 1");
    if (s < 1) throw parameter_error("qmc_gaussian_points: s must be >= 1");
    Rng shift_rng(derive_seed(seed, stream::qmc_shift));
    std::vector<double> shift(static_cast<std::size_t>(d));
    for (auto& v : shift) v = shift_rng.uniform();
    Eigen::MatrixXd points(s, d);
    for (int i = 0; i < s; ++i) {
        const auto h = halton_point(halton_skip + 1 + i, d);
        for (int j = 0; j < d; ++j) {
            double u = h[static_cast<std::size_t>(j)] + shift[static_cast<std::size_t>(j)];
            u -= std::floor(u);
            if (u <= 0.0) u = 0x1.0p-53;  // frac() can land exactly on 0
            points(i, j) = inverse_normal_cdf(u);
        }
    }
    return points;
}

/// Halton-QMC ensemble: shifted low-discrepancy points Gaussianized, then
/// direction-normalized and radially renormalized to the law.
inline Ensemble sample_qmc(const IsotropicLaw& law, int s, std::uint64_t seed) {
    law.validate();
    if (s < 1) throw parameter_error("sample_qmc: s must be >= 1");
    Eigen::MatrixXd g = qmc_gaussian_points(law.d, s, seed);
    for (int i = 0; i < s; ++i) {
        const double n = g.row(i).norm();
        g.row(i) /= n;
    }
    Ensemble e = radial_renormalize(g, law, derive_seed(seed, stream::qmc_radii), Method::QMC);
    e.seed = seed;
    return e;
}

}  // namespace structmc
