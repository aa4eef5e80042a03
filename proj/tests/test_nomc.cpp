#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "structmc/nomc.hpp"

using namespace structmc;

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

double total_energy(const Eigen::MatrixXd& w, double delta) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = i + 1; j < w.rows(); ++j)
            sum += pair_energy(w.row(i), w.row(j), delta);
    return sum;
}

/// Central finite differences of the total pairwise energy.
Eigen::MatrixXd fd_gradient(const Eigen::MatrixXd& w, double delta, double h) {
    Eigen::MatrixXd grad(w.rows(), w.cols());
    Eigen::MatrixXd probe = w;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            probe(i, j) = w(i, j) + h;
            const double up = total_energy(probe, delta);
            probe(i, j) = w(i, j) - h;
            const double down = total_energy(probe, delta);
            probe(i, j) = w(i, j);
            grad(i, j) = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

Eigen::MatrixXd random_unit_rows(int s, int d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd w(s, d);
    for (int i = 0; i < s; ++i) {
        for (int j = 0; j < d; ++j) w(i, j) = rng.normal();
        w.row(i).normalize();
    }
    return w;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

}  // namespace

TEST_CASE("pair_energy formula", "[nomc]") {
    Eigen::RowVectorXd a(3), b(3);
    a << 1, 2, 3;
    b = a;
    REQUIRE(pair_energy(a, b, 0.5) == Catch::Approx(1.0).margin(1e-15));

    b << 1, 2, 3 + std::sqrt(0.5);
    REQUIRE(pair_energy(a, b, 0.5) == Catch::Approx(0.5).margin(1e-12));

    b << 1, 2, 3 + std::sqrt(0.9);
    REQUIRE(pair_energy(a, b, 0.1) == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(pair_energy(a, b, 0.1) == Catch::Approx(pair_energy(b, a, 0.1)).margin(1e-15));

    REQUIRE_THROWS_AS(pair_energy(a, b, 0.0), parameter_error);
}

TEST_CASE("energy_gradient of a single particle is zero", "[nomc]") {
    const Eigen::MatrixXd w = random_unit_rows(1, 4, 5);
    REQUIRE(energy_gradient(w, 0.1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("energy_gradient of an antipodal pair", "[nomc]") {
    const double delta = 0.1;
    Eigen::MatrixXd w(2, 2);
    w << 1, 0, -1, 0;  // particles at +u and -u
    const Eigen::MatrixXd grad = energy_gradient(w, delta);
    const double magnitude = 4.0 * delta / ((delta + 4.0) * (delta + 4.0));
    // The pull is toward the other particle: particle 1 is dragged along -u.
    REQUIRE(grad(0, 0) == Catch::Approx(-magnitude).margin(1e-14));
    REQUIRE(grad(0, 1) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(grad(1, 0) == Catch::Approx(magnitude).margin(1e-14));
    REQUIRE(grad(1, 1) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("energy_gradient matches finite differences", "[nomc]") {
    const Eigen::MatrixXd w = random_unit_rows(5, 3, 11);
    const Eigen::MatrixXd grad = energy_gradient(w, 0.1);
    const Eigen::MatrixXd fd = fd_gradient(w, 0.1, 1e-6);
    const double scale = grad.cwiseAbs().maxCoeff();
    REQUIRE((grad - fd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
}

TEST_CASE("energy_gradient matches finite differences on 100 random instances", "[nomc]") {
    Rng shape_rng(99);
    for (int inst = 0; inst < 100; ++inst) {
        const int s = 2 + static_cast<int>(shape_rng.uniform_index(7));  // s <= 8
        const int d = 2 + static_cast<int>(shape_rng.uniform_index(4));  // d <= 5
        const Eigen::MatrixXd w = random_unit_rows(s, d, 3000u + inst);
        const Eigen::MatrixXd grad = energy_gradient(w, 0.1);
        const Eigen::MatrixXd fd = fd_gradient(w, 0.1, 1e-6);
        const double scale = std::max(grad.cwiseAbs().maxCoeff(), 1e-12);
        REQUIRE((grad - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
    }
}

TEST_CASE("opt_nomc_build descends the energy", "[nomc]") {
    OptNomcConfig cfg;
    cfg.iterations = 5000;
    cfg.seed = 123;
    const OptNomcResult result = opt_nomc_build(3, 15, cfg);
    REQUIRE(result.trace.iterations_run == 5000);
    REQUIRE(result.trace.energy.size() == 5001);
    REQUIRE(result.trace.energy.back() <= result.trace.energy.front());
    for (int i = 0; i < result.ensemble.s(); ++i)
        REQUIRE(result.ensemble.rows.row(i).norm() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(result.ensemble.method == Method::OptNOMC);
}

TEST_CASE("opt_nomc_build with T=0 returns the rotated initialization", "[nomc]") {
    OptNomcConfig cfg;
    cfg.iterations = 0;
    cfg.seed = 9;
    const OptNomcResult result = opt_nomc_build(4, 6, cfg);
    const Ensemble init =
        sample_bomc(IsotropicLaw::unit_sphere(4), 6, derive_seed(9, stream::nomc_init));
    const Eigen::MatrixXd rotation = random_rotation(4, derive_seed(9, stream::nomc_rotation));
    REQUIRE(max_abs_diff(result.ensemble.rows, init.rows * rotation.transpose()) == 0.0);
    REQUIRE(result.trace.iterations_run == 0);
    REQUIRE(result.trace.energy.size() == 1);
}

TEST_CASE("opt_nomc_build improves coherence over the initialization", "[nomc]") {
    OptNomcConfig cfg;
    cfg.iterations = 20000;
    int improved = 0;
    const int seeds = 50;
    for (int t = 0; t < seeds; ++t) {
        cfg.seed = 600u + t;
        const OptNomcResult result = opt_nomc_build(3, 15, cfg);
        const Ensemble init = sample_bomc(IsotropicLaw::unit_sphere(3), 15,
                                          derive_seed(cfg.seed, stream::nomc_init));
        if (coherence(result.ensemble) < coherence(init)) ++improved;
    }
    REQUIRE(improved >= 45);  // >= 90% of seeds
}

TEST_CASE("opt_nomc_build early stop fires only when enabled", "[nomc]") {
    OptNomcConfig cfg;
    cfg.iterations = 300;
    cfg.seed = 5;
    cfg.early_stop_window = 10;
    cfg.early_stop_tol = 1e9;  // any change passes, so it stops at the window
    const OptNomcResult stopped = opt_nomc_build(3, 8, cfg);
    REQUIRE(stopped.trace.iterations_run == 10);

    cfg.early_stop_window = 0;
    const OptNomcResult full = opt_nomc_build(3, 8, cfg);
    REQUIRE(full.trace.iterations_run == 300);
}

TEST_CASE("opt_nomc config validation", "[nomc]") {
    OptNomcConfig cfg;
    cfg.delta = 0.0;
    REQUIRE_THROWS_AS(opt_nomc_build(3, 4, cfg), parameter_error);
    cfg = OptNomcConfig{};
    cfg.eta = -1.0;
    REQUIRE_THROWS_AS(opt_nomc_build(3, 4, cfg), parameter_error);
    cfg = OptNomcConfig{};
    REQUIRE_THROWS_AS(opt_nomc_build(1, 4, cfg), parameter_error);
}

TEST_CASE("poly_character_vector at p=3", "[nomc]") {
    const double inv = 1.0 / std::sqrt(3.0);
    const Eigen::VectorXd zero = poly_character_vector(3, {0, 0});
    Eigen::VectorXd expect_zero(6);
    expect_zero << inv, 0, inv, 0, inv, 0;
    REQUIRE((zero - expect_zero).cwiseAbs().maxCoeff() <= 1e-12);

    const Eigen::VectorXd linear = poly_character_vector(3, {1, 0});
    Eigen::VectorXd expect_linear(6);
    expect_linear << inv, 0, inv * -0.5, inv * std::sqrt(3.0) / 2.0, inv * -0.5,
        inv * -std::sqrt(3.0) / 2.0;
    REQUIRE((linear - expect_linear).cwiseAbs().maxCoeff() <= 1e-12);

    REQUIRE(std::fabs(zero.dot(linear)) <= 1e-12);
    REQUIRE(linear.norm() == Catch::Approx(1.0).margin(1e-12));

    REQUIRE_THROWS_AS(poly_character_vector(4, {1, 0}), parameter_error);
    REQUIRE_THROWS_AS(poly_character_vector(3, {3, 0}), parameter_error);
}

TEST_CASE("alg_nomc_build enumerates p^r unit rows", "[nomc]") {
    AlgNomcSpec spec;
    spec.p = 3;
    spec.r = 2;
    const Ensemble e = alg_nomc_build(spec, 4);
    REQUIRE(e.s() == 9);
    REQUIRE(e.d() == 6);
    for (int i = 0; i < e.s(); ++i)
        REQUIRE(e.rows.row(i).norm() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(coherence(e) <= 1.0 / std::sqrt(3.0) + 1e-9);
    REQUIRE(e.method == Method::AlgNOMC);
}

TEST_CASE("alg_nomc_build coherence meets the Weil bound at p=7", "[nomc]") {
    AlgNomcSpec spec;
    spec.p = 7;
    spec.r = 2;
    const Ensemble e = alg_nomc_build(spec, 1);
    REQUIRE(e.s() == 49);
    REQUIRE(coherence(e) <= 1.0 / std::sqrt(7.0) + 1e-9);
}

TEST_CASE("alg_nomc_build degree-3 coherence at p=13", "[nomc]") {
    AlgNomcSpec spec;
    spec.p = 13;
    spec.r = 3;
    const Ensemble e = alg_nomc_build(spec, 2);
    REQUIRE(e.s() == 2197);
    REQUIRE(e.d() == 26);
    REQUIRE(coherence(e) <= 2.0 / std::sqrt(13.0) + 1e-9);
}

TEST_CASE("alg_nomc_build subsampling excludes the zero tuple", "[nomc]") {
    AlgNomcSpec full_spec;
    full_spec.p = 3;
    full_spec.r = 2;
    const Ensemble full = alg_nomc_build(full_spec, 31);

    AlgNomcSpec sub_spec = full_spec;
    sub_spec.selected_count = 8;  // every nonzero tuple
    const Ensemble sub = alg_nomc_build(sub_spec, 31);
    REQUIRE(sub.s() == 8);

    // Both builds share the rotation substream, so subsampled rows must match
    // rows 1..8 of the full enumeration (row 0 is the all-zero tuple).
    for (int i = 0; i < sub.s(); ++i) {
        double best = 1e300;
        for (int j = 1; j < full.s(); ++j)
            best = std::min(best, (sub.rows.row(i) - full.rows.row(j)).cwiseAbs().maxCoeff());
        REQUIRE(best <= 1e-12);
        REQUIRE((sub.rows.row(i) - full.rows.row(0)).cwiseAbs().maxCoeff() > 1e-3);
    }

    sub_spec.selected_count = 10;
    REQUIRE_THROWS_AS(alg_nomc_build(sub_spec, 31), parameter_error);
}

TEST_CASE("alg_nomc spec validation and dimension guidance", "[nomc]") {
    AlgNomcSpec spec;
    spec.p = 4;
    REQUIRE_THROWS_AS(alg_nomc_build(spec, 1), parameter_error);
    spec.p = 2;
    REQUIRE_THROWS_AS(alg_nomc_build(spec, 1), parameter_error);
    spec.p = 5;
    spec.r = 1;
    REQUIRE_THROWS_AS(alg_nomc_build(spec, 1), parameter_error);

    REQUIRE_THROWS_AS(AlgNomcSpec::check_dimension(8), dimension_error);
    REQUIRE_THROWS_AS(AlgNomcSpec::check_dimension(4), dimension_error);
    REQUIRE_THROWS_AS(AlgNomcSpec::check_dimension(7), dimension_error);
    REQUIRE_NOTHROW(AlgNomcSpec::check_dimension(6));
    REQUIRE_NOTHROW(AlgNomcSpec::check_dimension(10));
}

TEST_CASE("coherence extremes", "[nomc]") {
    Ensemble ortho;
    ortho.rows = Eigen::MatrixXd::Identity(3, 3);
    REQUIRE(coherence(ortho) <= 1e-8);

    Ensemble dup;
    dup.rows = Eigen::MatrixXd(2, 3);
    dup.rows << 1, 2, 3, 2, 4, 6;
    REQUIRE(coherence(dup) == Catch::Approx(1.0).margin(1e-12));

    Ensemble single;
    single.rows = Eigen::MatrixXd::Ones(1, 3);
    REQUIRE_THROWS_AS(coherence(single), arity_error);

    Ensemble zero;
    zero.rows = Eigen::MatrixXd::Zero(2, 3);
    REQUIRE_THROWS_AS(coherence(zero), precondition_error);
}

TEST_CASE("iid coherence dominates the character ensemble", "[nomc]") {
    AlgNomcSpec spec;
    spec.p = 17;
    spec.r = 2;
    const double alg = coherence(alg_nomc_build(spec, 3));

    std::vector<double> iid;
    for (int t = 0; t < 50; ++t)
        iid.push_back(coherence(sample_iid(IsotropicLaw::unit_sphere(16), 256, 9000u + t)));
    std::sort(iid.begin(), iid.end());
    REQUIRE(iid[25] > alg);
}

TEST_CASE("coherence is rotation invariant", "[nomc]") {
    const Ensemble e = sample_iid(IsotropicLaw::gaussian_std(5), 12, 44);
    const Eigen::MatrixXd r = random_rotation(5, 45);
    REQUIRE(std::fabs(coherence(apply_rotation(e, r)) - coherence(e)) <= 1e-9);
}

TEST_CASE("total energy is permutation and rotation invariant", "[nomc]") {
    const Eigen::MatrixXd w = random_unit_rows(7, 4, 8);
    const double base = total_energy(w, 0.1);

    Eigen::MatrixXd permuted = w;
    permuted.row(0).swap(permuted.row(5));
    permuted.row(2).swap(permuted.row(6));
    REQUIRE(std::fabs(total_energy(permuted, 0.1) - base) <= 1e-9);

    const Eigen::MatrixXd r = random_rotation(4, 91);
    const Eigen::MatrixXd rotated = w * r.transpose();
    REQUIRE(std::fabs(total_energy(rotated, 0.1) - base) <= 1e-9);
}

TEST_CASE("save and load round trip an ensemble exactly", "[nomc]") {
    TempFile file("structmc_roundtrip.csv");
    const Ensemble e = sample_bomc(IsotropicLaw::gaussian_scaled(3, 0.5), 7, 271828);
    save_ensemble(e, file.path);
    const Ensemble back = load_ensemble(file.path);
    REQUIRE(max_abs_diff(back.rows, e.rows) == 0.0);
    REQUIRE(back.method == e.method);
    REQUIRE(back.seed == e.seed);
    REQUIRE(back.law.tag == e.law.tag);
    REQUIRE(back.law.param == e.law.param);
    REQUIRE(back.block_size == e.block_size);
}

TEST_CASE("load_ensemble rejects malformed files", "[nomc]") {
    TempFile file("structmc_malformed.csv");

    {
        std::ofstream out(file.path);
        out << "# structmc-ensemble v1 method=mc law=gauss_std d=3 s=3 seed=1\n";
        out << "1,2,3\n0.5,0.25,0.125\n";
    }
    REQUIRE_THROWS_AS(load_ensemble(file.path), parse_error);  // truncated: 2 of 3 rows

    {
        std::ofstream out(file.path);
        out << "# structmc-ensemble v1 method=mc law=gauss_std d=3 s=1 seed=1\n";
        out << "1,2\n";
    }
    REQUIRE_THROWS_AS(load_ensemble(file.path), parse_error);  // width mismatch

    {
        std::ofstream out(file.path);
        out << "# structmc-ensemble v1 method=mc law=gauss_std d=3 s=1 seed=1\n";
        out << "1,nan,3\n";
    }
    REQUIRE_THROWS_AS(load_ensemble(file.path), parse_error);  // non-finite value

    {
        std::ofstream out(file.path);
        out << "# other-format v9\n1,2,3\n";
    }
    REQUIRE_THROWS_AS(load_ensemble(file.path), parse_error);

    REQUIRE_THROWS_AS(load_ensemble("/nonexistent/structmc.csv"), io_error);
}
