#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace selbench {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Deterministic random source. mt19937_64 output is fixed by the standard and
// all distributions are implemented here rather than via std::*_distribution,
// so a seed reproduces the same stream on every platform and toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        gen_.seed(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0,n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller with a cached spare draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Gamma(shape, 1) by Marsaglia-Tsang; shape > 0.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0,n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k && i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    // Independent substream keyed by (seed, index); scheduling-order free.
    Rng stream(std::uint64_t index) const {
        std::uint64_t s = seed_ ^ (0xa0761d6478bd642fULL + index * 0xe7037ed1a0b428dbULL);
        return Rng(detail::splitmix64(s));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace selbench
