#include "diffusyn/rng.hpp"

#include <string>

#include "diffusyn/digest.hpp"

namespace diffusyn {

std::uint64_t Rng::derive(std::uint64_t seed, std::initializer_list<std::string_view> labels) {
    std::string key = std::to_string(seed);
    for (auto label : labels) {
        key.push_back('\x1f');
        key.append(label);
    }
    return sha256_u64(key);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    // Rejection on the top of the range keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

}  // namespace diffusyn
