#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "diffusyn/model.hpp"

namespace diffusyn {

/// 8-bit interleaved RGB pixels.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

inline constexpr const char* kNormalizedMediaType = "image/png";

/// Decodes PNG or JPEG bytes. Throws `Media` on anything else.
Raster decode_image(std::span<const std::uint8_t> bytes);

/// Center-crop to a square, then bilinear-resample to `side` x `side`.
Raster normalize_raster(const Raster& src, int side = kNormalizedImageSide);

std::vector<std::uint8_t> encode_png(const Raster& raster);

/// Decode, normalize and store. Idempotent: storing the same bytes again
/// returns the same ref without rewriting the file.
ImageRef store_image(std::span<const std::uint8_t> bytes, const std::filesystem::path& store_dir);

/// Normalizes and stores an already-decoded raster.
ImageRef store_raster(const Raster& raster, const std::filesystem::path& store_dir);

std::filesystem::path image_path(const std::filesystem::path& store_dir, const std::string& digest);

/// Reads stored bytes and verifies them against the digest.
std::vector<std::uint8_t> read_image(const std::filesystem::path& store_dir, const std::string& digest);

}  // namespace diffusyn
