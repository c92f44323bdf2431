#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace diffusyn {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

/// First 8 bytes of SHA-256(data), big-endian. Used to derive named seeds.
std::uint64_t sha256_u64(std::string_view data);

bool is_sha256_hex(std::string_view s) noexcept;

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace diffusyn
