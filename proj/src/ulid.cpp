#include "diffusyn/ulid.hpp"

namespace diffusyn {
namespace {
constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
}

std::string make_ulid(std::uint64_t time_field, Rng& rng) {
    time_field &= (std::uint64_t{1} << 48) - 1;
    const std::uint64_t hi = rng.next_u64() & 0xFFFF;  // 16 bits
    const std::uint64_t lo = rng.next_u64();           // 64 bits

    std::string out(26, '0');
    // 10 chars of time (50 bits, top 2 always zero).
    for (int i = 9; i >= 0; --i) {
        out[i] = kCrockford[time_field & 31];
        time_field >>= 5;
    }
    // 16 chars of randomness: 80 bits = hi(16) . lo(64).
    unsigned __int128 r = (static_cast<unsigned __int128>(hi) << 64) | lo;
    for (int i = 25; i >= 10; --i) {
        out[i] = kCrockford[static_cast<int>(r & 31)];
        r >>= 5;
    }
    return out;
}

bool is_ulid(std::string_view s) noexcept {
    if (s.size() != 26) return false;
    if (s[0] > '7') return false;
    for (char c : s) {
        bool found = false;
        for (const char* p = kCrockford; *p; ++p) {
            if (*p == c) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace diffusyn
