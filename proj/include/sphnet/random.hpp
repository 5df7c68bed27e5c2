#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sphnet {

// Thin wrapper around std::mt19937_64 that pins the exact bit stream used for
// every random decision in the library. mt19937_64 itself is fully specified
// by the standard; the uniform mappings below avoid std::uniform_*_distribution,
// whose output is implementation-defined, so runs are reproducible per seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [-a, a].
    double next_symmetric(double a) {
        return a * (2.0 * next_unit() - 1.0);
    }

    /// Uniform integer in [0, m). Rejection sampling, no modulo bias.
    std::uint64_t next_below(std::uint64_t m) {
        const std::uint64_t threshold = (0 - m) % m; // 2^64 mod m
        for (;;) {
            const std::uint64_t x = gen_();
            if (x >= threshold) return x % m;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace sphnet
