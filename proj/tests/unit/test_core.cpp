#include <doctest.h>

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>

#include <fstream>
#include <set>

#include "diffusyn/error.hpp"
#include "diffusyn/image_store.hpp"
#include "diffusyn/manifest.hpp"
#include "diffusyn/templates.hpp"
#include "diffusyn/topic_pool.hpp"
#include "diffusyn/util.hpp"
#include "fixtures.hpp"

using namespace diffusyn;
namespace fs = std::filesystem;

namespace {

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

template <class Fn>
std::string message_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    FAIL("expected an error");
    return {};
}

Raster gradient(int w, int h) {
    Raster r{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto* p = r.pixel(x, y);
            p[0] = static_cast<std::uint8_t>(x * 255 / std::max(1, w - 1));
            p[1] = static_cast<std::uint8_t>(y * 255 / std::max(1, h - 1));
            p[2] = 77;
        }
    return r;
}

std::vector<std::uint8_t> encode_jpeg(const Raster& r) {
    jpeg_compress_struct cinfo{};
    jpeg_error_mgr jerr{};
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    unsigned char* buf = nullptr;
    unsigned long size = 0;
    jpeg_mem_dest(&cinfo, &buf, &size);
    cinfo.image_width = r.width;
    cinfo.image_height = r.height;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 90, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(r.pixel(0, static_cast<int>(cinfo.next_scanline)));
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(buf, buf + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    return out;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) ++n;
    return n;
}

}  // namespace

TEST_CASE("sha256 and base64") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(is_sha256_hex(sha256_hex("x")));
    CHECK_FALSE(is_sha256_hex("ABC"));
    CHECK_FALSE(is_sha256_hex(std::string(64, 'G')));

    for (std::size_t n = 0; n < 8; ++n) {
        std::vector<std::uint8_t> data(n);
        for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<std::uint8_t>(i * 37 + 1);
        CHECK(base64_decode(base64_encode(data)) == data);
    }
    CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
}

TEST_CASE("rng is reproducible and sampling helpers stay in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng::derive(1, {"a", "b"}) == Rng::derive(1, {"a", "b"}));
    CHECK(Rng::derive(1, {"a", "b"}) != Rng::derive(1, {"ab"}));
    Rng r(5);
    std::array<int, 7> hits{};
    for (int i = 0; i < 7000; ++i) {
        const auto k = r.uniform_index(7);
        REQUIRE(k < 7);
        ++hits[k];
    }
    for (int h : hits) CHECK(h > 800);
}

TEST_CASE("ulid format and ordering") {
    Rng rng(9);
    std::set<std::string> seen;
    std::string prev;
    for (std::uint64_t t = 0; t < 200; ++t) {
        const auto id = make_ulid(t, rng);
        CHECK(id.size() == 26);
        CHECK(is_ulid(id));
        CHECK(seen.insert(id).second);
        CHECK(id > prev);
        prev = id;
    }
    CHECK_FALSE(is_ulid("not-a-ulid"));
    CHECK_FALSE(is_ulid("0000000000000000000000000U"));
}

TEST_CASE("categories and curation status") {
    CHECK(kAllCategories.size() == 3);
    for (auto c : kAllCategories) {
        CHECK(parse_category(to_string(c)) == c);
        CHECK(parse_category(display_name(c)) == c);
    }
    CHECK(parse_category("temporal") == ErrorCategory::MismatchedEra);
    CHECK(parse_category("Logical") == ErrorCategory::LogicalInconsistency);
    CHECK_FALSE(parse_category("cosmic").has_value());
    CHECK(parse_curation_status("accepted") == CurationStatus::Accepted);
    CHECK_FALSE(parse_curation_status("maybe").has_value());
}

TEST_CASE("validate_item") {
    Rng rng(1);
    auto item = fixture::make_item(rng, 0, ErrorCategory::Biological, "kitchen");
    CHECK(validate_item(item).empty());

    auto bad_cat = item;
    bad_cat.category = ErrorCategory::MismatchedEra;
    const auto v1 = validate_item(bad_cat);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0].find("mismatched_era") != std::string::npos);
    CHECK(v1[0].find("biological") != std::string::npos);

    auto bad_gt = item;
    bad_gt.ground_truth_error = "something else";
    CHECK(validate_item(bad_gt).size() == 1);

    auto bad_img = item;
    bad_img.image.width = 640;
    CHECK_FALSE(validate_item(bad_img).empty());

    auto bad_topic = item;
    bad_topic.prompt.error.topic.scenario_tag = "Living Room";
    CHECK_FALSE(validate_item(bad_topic).empty());
}

TEST_CASE("manifest round trip") {
    fixture::TempDir dir("manifest");
    Rng rng(2);

    SUBCASE("empty set writes only a header") {
        auto set = fixture::random_set(rng, 0);
        const auto path = dir / "empty.dsb.jsonl";
        save_manifest(set, path);
        const auto text = read_file(path);
        CHECK(std::count(text.begin(), text.end(), '\n') == 1);
        CHECK(load_manifest(path) == set);
    }
    SUBCASE("two items give three lines and reload equal") {
        auto set = fixture::random_set(rng, 2);
        const auto path = dir / "two.dsb.jsonl";
        save_manifest(set, path);
        const auto text = read_file(path);
        CHECK(std::count(text.begin(), text.end(), '\n') == 3);
        CHECK(text.find('\r') == std::string::npos);
        CHECK(load_manifest(path) == set);
        save_manifest(load_manifest(path), path);
        CHECK(read_file(path) == text);
    }
    SUBCASE("duplicate ids are refused and nothing is written") {
        auto set = fixture::random_set(rng, 3);
        set.items[2].id = set.items[0].id;
        const auto path = dir / "dup.dsb.jsonl";
        CHECK(kind_of([&] { save_manifest(set, path); }) == ErrorKind::Validation);
        CHECK_FALSE(fs::exists(path));
    }
    SUBCASE("unknown schema version") {
        auto set = fixture::random_set(rng, 1);
        auto text = render_manifest(set);
        text.replace(text.find("\"schema_version\":1"), 18, "\"schema_version\":99");
        CHECK(kind_of([&] { parse_manifest(text, "m"); }) == ErrorKind::VersionedFormat);
    }
    SUBCASE("truncated last line names its line number") {
        auto set = fixture::random_set(rng, 3);
        auto text = render_manifest(set);
        text.resize(text.size() - 40);
        CHECK(kind_of([&] { parse_manifest(text, "m.dsb.jsonl"); }) == ErrorKind::Parse);
        CHECK(message_of([&] { parse_manifest(text, "m.dsb.jsonl"); }).find("m.dsb.jsonl:4:") == 0);
    }
    SUBCASE("invariant violation on load names the item") {
        auto set = fixture::random_set(rng, 2);
        auto j = json::parse(manifest_item_line(set.items[1]));
        j["ground_truth_error"] = set.items[1].ground_truth_error + " edited";
        const auto fixed = manifest_header_line(set) + "\n" + j.dump() + "\n";
        const auto msg = message_of([&] { parse_manifest(fixed, "m"); });
        CHECK(msg.find(set.items[1].id) != std::string::npos);
        CHECK(kind_of([&] { parse_manifest(fixed, "m"); }) == ErrorKind::Validation);
    }
}

TEST_CASE("property: manifest round trip on fuzzed sets") {
    fixture::TempDir dir("manifest-fuzz");
    Rng rng(77);
    for (int i = 0; i < 40; ++i) {
        const auto set = fixture::random_set(rng, rng.uniform_index(12));
        const auto path = dir / "f.dsb.jsonl";
        save_manifest(set, path);
        const auto loaded = load_manifest(path);
        CHECK(loaded == set);
        for (const auto& item : loaded.items) CHECK(validate_item(item).empty());
        CHECK(render_manifest(loaded) == read_file(path));
    }
}

namespace {

struct CrashAt : FaultInjector {
    std::string where;
    std::size_t line = 0;
    void checkpoint(std::string_view w, std::size_t lines) override {
        if (w == where && (line == 0 || lines == line)) throw std::runtime_error("injected crash");
    }
};

}  // namespace

TEST_CASE("fault-injected saves leave the previous manifest intact") {
    fixture::TempDir dir("fault");
    Rng rng(5);
    const auto path = dir / "m.dsb.jsonl";
    const auto before = fixture::random_set(rng, 4);
    save_manifest(before, path);
    const auto bytes = read_file(path);

    auto after = before;
    after.items.pop_back();
    for (std::size_t line = 1; line <= after.items.size() + 1; ++line) {
        CrashAt crash;
        crash.where = "line";
        crash.line = line;
        CHECK_THROWS(save_manifest(after, path, &crash));
        CHECK(read_file(path) == bytes);
    }
    CrashAt crash;
    crash.where = "before-rename";
    CHECK_THROWS(save_manifest(after, path, &crash));
    CHECK(read_file(path) == bytes);
    std::size_t stray = 0;
    for (const auto& e : fs::directory_iterator(dir.path()))
        if (e.path() != path) ++stray;
    CHECK(stray == 0);
}

TEST_CASE("streaming writer matches the rendered manifest") {
    fixture::TempDir dir("writer");
    Rng rng(6);
    const auto set = fixture::random_set(rng, 5);
    const auto path = dir / "s.dsb.jsonl";
    {
        ManifestWriter w(path, set);
        for (const auto& item : set.items) w.append(item);
        CHECK(kind_of([&] { w.append(set.items[0]); }) == ErrorKind::Validation);
        w.close();
    }
    CHECK(read_file(path) == render_manifest(set));
    CHECK(manifest_sidecar(path, ".audit.jsonl") == dir / "s.audit.jsonl");
    CHECK(manifest_sidecar("x/plain.jsonl", ".stats.json") == fs::path("x/plain.stats.json"));
}

TEST_CASE("image store normalizes, deduplicates and verifies") {
    fixture::TempDir dir("store");
    const auto png = encode_png(gradient(1024, 768));

    const auto ref = store_image(png, dir.path());
    CHECK(ref.width == 512);
    CHECK(ref.height == 512);
    CHECK(ref.media_type == "image/png");
    CHECK(is_sha256_hex(ref.digest));
    CHECK(fs::exists(dir.path() / ref.digest.substr(0, 2) / ref.digest));
    CHECK(image_path(dir.path(), ref.digest) == dir.path() / ref.digest.substr(0, 2) / ref.digest);

    const auto again = store_image(png, dir.path());
    CHECK(again == ref);
    CHECK(count_files(dir.path()) == 1);

    const auto bytes = read_image(dir.path(), ref.digest);
    CHECK(sha256_hex(bytes) == ref.digest);
    const auto decoded = decode_image(bytes);
    CHECK(decoded.width == 512);

    const auto jpeg_ref = store_image(encode_jpeg(gradient(300, 900)), dir.path());
    CHECK(jpeg_ref.width == 512);
    CHECK(jpeg_ref.height == 512);

    CHECK(kind_of([&] { store_image(std::vector<std::uint8_t>{}, dir.path()); }) == ErrorKind::Media);
    const std::string junk = "GIF89a not really";
    CHECK(kind_of([&] {
              store_image(std::span(reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size()), dir.path());
          }) == ErrorKind::Media);
    CHECK(kind_of([&] { read_image(dir.path(), sha256_hex("missing")); }) == ErrorKind::NotFound);

    // Tampered bytes fail verification.
    std::ofstream(image_path(dir.path(), ref.digest), std::ios::binary | std::ios::app) << "x";
    CHECK(kind_of([&] { read_image(dir.path(), ref.digest); }) == ErrorKind::Media);
}

TEST_CASE("center crop keeps the middle of a wide image") {
    Raster wide{30, 10, std::vector<std::uint8_t>(30 * 10 * 3, 0)};
    for (int y = 0; y < 10; ++y)
        for (int x = 10; x < 20; ++x) wide.pixel(x, y)[0] = 255;
    const auto n = normalize_raster(wide, 10);
    CHECK(n.width == 10);
    CHECK(n.height == 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) CHECK(n.pixel(x, y)[0] == 255);
}

TEST_CASE("topic pool parsing") {
    const auto pool = parse_topic_pool("# header\nkitchen\ta family breakfast\n\noffice\tlate meeting\n");
    REQUIRE(pool.size() == 2);
    CHECK(pool[0] == Topic{"a family breakfast", "kitchen"});
    CHECK(kind_of([] { parse_topic_pool("kitchen a family\n", "p"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse_topic_pool("Kitchen\ta family\n", "p"); }) == ErrorKind::Parse);
    CHECK(topic_pool_digest(pool) == topic_pool_digest(pool));
    CHECK(load_topic_pool(fixture::source_dir() / "data" / "topics.tsv").size() >= 25);
}

TEST_CASE("templates") {
    const auto t = PromptTemplate::parse("system line\n---\nuser {name} {{literal}}\n");
    CHECK(t.system == "system line");
    CHECK(render_template(t.user, {{"name", "x"}}).find("user x {literal}") == 0);
    CHECK(kind_of([&] { render_template(t.user, {}); }) == ErrorKind::Config);
    CHECK_NOTHROW(PipelineTemplates::load(fixture::templates_dir()));
    CHECK_NOTHROW(DiscernTemplates::load(fixture::templates_dir()));
    CHECK_NOTHROW(EvalTemplates::load(fixture::templates_dir()));
}
