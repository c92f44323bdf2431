#include "diffusyn/digest.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <array>

#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {
namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> sha256_raw(const void* data, std::size_t size) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
    SHA256(static_cast<const unsigned char*>(data), size, out.data());
    return out;
}

std::string to_hex(std::span<const unsigned char> bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0f]);
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) { return to_hex(sha256_raw(data.data(), data.size())); }

std::string sha256_hex(std::span<const std::uint8_t> data) { return to_hex(sha256_raw(data.data(), data.size())); }

std::uint64_t sha256_u64(std::string_view data) {
    const auto raw = sha256_raw(data.data(), data.size());
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | raw[i];
    return v;
}

bool is_sha256_hex(std::string_view s) noexcept {
    if (s.size() != 64) return false;
    for (char c : s) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
    }
    if (clean.size() % 4 != 0) fail(ErrorKind::Parse, "base64 input length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * clean.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) fail(ErrorKind::Parse, "invalid base64 input");
    std::size_t padding = 0;
    if (!clean.empty() && clean.back() == '=') ++padding;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

}  // namespace diffusyn
