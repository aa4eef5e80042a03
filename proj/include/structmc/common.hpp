#pragma once

/// Shared plumbing for the structmc library: error taxonomy, seeded RNG with
/// substream derivation, a deterministic parallel-for, and number formatting.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace structmc {

// ---------------------------------------------------------------------------
// Error taxonomy.  Every module throws one of these; the CLI maps them onto
// exit codes (config/module errors -> 2, filesystem errors -> 3).
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parameter_error : error { using error::error; };
struct dimension_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct capacity_error : error { using error::error; };
struct precondition_error : error { using error::error; };
struct arity_error : error { using error::error; };
struct parse_error : error { using error::error; };
struct config_error : error { using error::error; };
struct io_error : error { using error::error; };

// ---------------------------------------------------------------------------
// Seed mixing.  All randomness in the library flows through substreams
// derived from a master seed with the SplitMix64 finalizer; distinct
// (stream, index) pairs yield decorrelated generator states, so per-trial
// work can be farmed out to threads without sharing RNG state.
// ---------------------------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derive the seed of substream (stream, index) of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
    return mix64(mix64(mix64(master) ^ stream) ^ index);
}

// Stream ids used by the sampling pipeline.  Public so tests can reproduce
// intermediate stages (e.g. the block seeds of a B-OMC ensemble).
namespace stream {
inline constexpr std::uint64_t bomc_block = 0xB10Cull;
inline constexpr std::uint64_t block_retry = 0x9E7297ull;
inline constexpr std::uint64_t qmc_shift = 0x5817F7ull;
inline constexpr std::uint64_t qmc_radii = 0x9AD117ull;
inline constexpr std::uint64_t nomc_init = 0x201C17ull;
inline constexpr std::uint64_t nomc_rotation = 0x207A7Eull;
inline constexpr std::uint64_t nomc_subsample = 0x5AB5ull;
inline constexpr std::uint64_t trial = 0x7217ull;
inline constexpr std::uint64_t bootstrap = 0xB007ull;
inline constexpr std::uint64_t phases = 0xFA5E5ull;
inline constexpr std::uint64_t radii = 0x7AD11ull;
inline constexpr std::uint64_t nomc_base = 0x0B5Eull;
inline constexpr std::uint64_t pair_sampling = 0xFA127ull;
inline constexpr std::uint64_t paired = 0xD1FFull;
inline constexpr std::uint64_t reference = 0x2EFull;
inline constexpr std::uint64_t cloud = 0xC10Dull;
}  // namespace stream

// ---------------------------------------------------------------------------
// Rng: mt19937_64 wrapped with explicitly specified real-valued draws.
// std::mt19937_64 output is pinned by the standard; the transformations here
// (53-bit uniforms, Box-Muller normals, Marsaglia-Tsang gammas) are our own,
// so streams are reproducible across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1); safe to pass to log().
    double uniform_open() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (pair cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Exp(1).
    double exponential() { return -std::log(uniform_open()); }

    /// Standard Laplace (density exp(-|x|)/2): random sign times Exp(1).
    double laplace() {
        const double e = exponential();
        return uniform() < 0.5 ? -e : e;
    }

    /// Gamma(alpha, 1) by Marsaglia-Tsang, with the alpha < 1 boost.
    double gamma_draw(double alpha) {
        if (!(alpha > 0.0)) throw parameter_error("gamma_draw: alpha must be positive");
        if (alpha < 1.0) {
            const double u = uniform_open();
            return gamma_draw(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Chi-square with df degrees of freedom (df > 0, not necessarily integer).
    double chi_square(double df) { return 2.0 * gamma_draw(0.5 * df); }

    /// Chi with df degrees of freedom.
    double chi(double df) { return std::sqrt(chi_square(df)); }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw parameter_error("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Deterministic parallel-for.  Each worker claims indices from a shared
// counter and writes only to its own output slot, so the observable result
// is independent of the thread count; reductions happen serially afterwards.
// ---------------------------------------------------------------------------

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), n));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load() && first_error) std::rethrow_exception(first_error);
}

namespace detail {

/// Percentile-bootstrap confidence interval for the mean of values
/// (500 resamples by default).
inline std::pair<double, double> bootstrap_mean_interval(const std::vector<double>& values,
                                                         Rng& rng, int resamples = 500,
                                                         double level = 0.95) {
    const long n = static_cast<long>(values.size());
    if (n < 2) {
        const double v = values.empty() ? 0.0 : values.front();
        return {v, v};
    }
    std::vector<double> stats(resamples);
    for (int b = 0; b < resamples; ++b) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i) acc += values[rng.uniform_index(n)];
        stats[b] = acc / static_cast<double>(n);
    }
    std::sort(stats.begin(), stats.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        const long lo = static_cast<long>(pos);
        const long hi = std::min<long>(lo + 1, resamples - 1);
        const double w = pos - static_cast<double>(lo);
        return (1.0 - w) * stats[lo] + w * stats[hi];
    };
    const double tail = (1.0 - level) / 2.0;
    return {quantile(tail), quantile(1.0 - tail)};
}

/// Half-width of the 95% percentile-bootstrap interval for the mean.
inline double bootstrap_mean_half_width(const std::vector<double>& values, Rng& rng,
                                        int resamples = 500) {
    const auto [lo, hi] = bootstrap_mean_interval(values, rng, resamples, 0.95);
    return (hi - lo) / 2.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Number formatting.  All persisted decimals use 17 significant digits so
// doubles round trip bit-identically.
// ---------------------------------------------------------------------------

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Compact formatting for plot coordinates and labels.
inline std::string fmt6(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// First 512 primes, used by the Halton sequence and the character ensembles.
// ---------------------------------------------------------------------------

inline const std::array<int, 512>& first_primes() {
    static const std::array<int, 512> table = [] {
        std::array<int, 512> out{};
        int found = 0;
        for (int n = 2; found < 512; ++n) {
            bool prime = true;
            for (int q = 2; q * q <= n; ++q) {
                if (n % q == 0) {
                    prime = false;
                    break;
                }
            }
            if (prime) out[found++] = n;
        }
        return out;
    }();
    return table;
}

inline bool is_prime(long n) {
    if (n < 2) return false;
    for (long q = 2; q * q <= n; ++q)
        if (n % q == 0) return false;
    return true;
}

}  // namespace structmc
