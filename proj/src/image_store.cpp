#include "diffusyn/image_store.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <system_error>

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {
namespace {

bool looks_like_png(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

bool looks_like_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        fail(ErrorKind::Media, std::string("undecodable PNG: ") + image.message);
    image.format = PNG_FORMAT_RGB;
    Raster r;
    r.width = static_cast<int>(image.width);
    r.height = static_cast<int>(image.height);
    r.rgb.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, r.rgb.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorKind::Media, "undecodable PNG: " + msg);
    }
    return r;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    // Only trivially destructible state lives across setjmp.
    Raster* out = new Raster();
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        delete out;
        fail(ErrorKind::Media, std::string("undecodable JPEG: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out->width = static_cast<int>(cinfo.output_width);
    out->height = static_cast<int>(cinfo.output_height);
    out->rgb.resize(static_cast<std::size_t>(out->width) * out->height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out->rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * out->width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    Raster result = std::move(*out);
    delete out;
    return result;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) fail(ErrorKind::Media, "empty image blob");
    Raster r;
    if (looks_like_png(bytes)) {
        r = decode_png(bytes);
    } else if (looks_like_jpeg(bytes)) {
        r = decode_jpeg(bytes);
    } else {
        fail(ErrorKind::Media, "unsupported image format (expected PNG or JPEG)");
    }
    if (r.width <= 0 || r.height <= 0) fail(ErrorKind::Media, "image has no pixels");
    return r;
}

Raster normalize_raster(const Raster& src, int side) {
    if (src.width <= 0 || src.height <= 0) fail(ErrorKind::Media, "image has no pixels");
    if (src.rgb.size() != static_cast<std::size_t>(src.width) * src.height * 3)
        fail(ErrorKind::Media, "raster buffer does not match its dimensions");
    if (src.width == side && src.height == side) return src;

    const int crop = std::min(src.width, src.height);
    const int x0 = (src.width - crop) / 2;
    const int y0 = (src.height - crop) / 2;
    const double scale = static_cast<double>(crop) / side;

    Raster dst;
    dst.width = side;
    dst.height = side;
    dst.rgb.resize(static_cast<std::size_t>(side) * side * 3);

    auto src_coord = [&](int o) {
        double s = (o + 0.5) * scale - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(crop - 1));
    };
    for (int oy = 0; oy < side; ++oy) {
        const double sy = src_coord(oy);
        const int y_lo = static_cast<int>(std::floor(sy));
        const int y_hi = std::min(y_lo + 1, crop - 1);
        const double fy = sy - y_lo;
        for (int ox = 0; ox < side; ++ox) {
            const double sx = src_coord(ox);
            const int x_lo = static_cast<int>(std::floor(sx));
            const int x_hi = std::min(x_lo + 1, crop - 1);
            const double fx = sx - x_lo;
            const auto* p00 = src.pixel(x0 + x_lo, y0 + y_lo);
            const auto* p10 = src.pixel(x0 + x_hi, y0 + y_lo);
            const auto* p01 = src.pixel(x0 + x_lo, y0 + y_hi);
            const auto* p11 = src.pixel(x0 + x_hi, y0 + y_hi);
            auto* d = dst.pixel(ox, oy);
            for (int c = 0; c < 3; ++c) {
                const double top = p00[c] + (p10[c] - p00[c]) * fx;
                const double bottom = p01[c] + (p11[c] - p01[c]) * fx;
                const double v = top + (bottom - top) * fy;
                d[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return dst;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorKind::Media, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(ErrorKind::Media, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Media, "PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed settings: the digest is taken over these bytes.
    png_set_compression_level(png, 1);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(raster.pixel(0, y)));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::filesystem::path image_path(const std::filesystem::path& store_dir, const std::string& digest) {
    if (!is_sha256_hex(digest)) fail(ErrorKind::Validation, "not a SHA-256 digest: " + digest);
    return store_dir / digest.substr(0, 2) / digest;
}

ImageRef store_raster(const Raster& raster, const std::filesystem::path& store_dir) {
    const Raster normalized = normalize_raster(raster);
    const auto bytes = encode_png(normalized);
    ImageRef ref;
    ref.digest = sha256_hex(bytes);
    ref.width = normalized.width;
    ref.height = normalized.height;
    ref.media_type = kNormalizedMediaType;

    const auto path = image_path(store_dir, ref.digest);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return ref;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return ref;
}

ImageRef store_image(std::span<const std::uint8_t> bytes, const std::filesystem::path& store_dir) {
    return store_raster(decode_image(bytes), store_dir);
}

std::vector<std::uint8_t> read_image(const std::filesystem::path& store_dir, const std::string& digest) {
    const auto path = image_path(store_dir, digest);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) fail(ErrorKind::NotFound, "image " + digest + " is not in the store");
    const auto text = read_file(path);
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    if (sha256_hex(bytes) != digest) fail(ErrorKind::Media, "stored image " + digest + " fails digest verification");
    return bytes;
}

}  // namespace diffusyn
