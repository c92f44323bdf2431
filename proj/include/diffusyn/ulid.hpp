#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "diffusyn/rng.hpp"

namespace diffusyn {

/// Crockford base32 ULID from a 48-bit time field and 80 bits drawn from `rng`.
///
/// Generated item ids use the draw sequence number as the time field so ids
/// sort in generation order and seeded runs reproduce them exactly.
std::string make_ulid(std::uint64_t time_field, Rng& rng);

bool is_ulid(std::string_view s) noexcept;

}  // namespace diffusyn
