#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace diffusyn {

/// Seedable generator with platform-stable sampling helpers.
///
/// Only the raw `std::mt19937_64` stream is standardized, so every sampling
/// routine here is written out explicitly instead of relying on the
/// implementation-defined `<random>` distributions. Seeded runs therefore
/// produce identical draws on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Seed derived from a base seed and a list of string labels.
    static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::string_view> labels);
    static Rng named(std::uint64_t seed, std::initializer_list<std::string_view> labels) {
        return Rng(derive(seed, labels));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n). `n` must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            using std::swap;
            swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace diffusyn
