#include "diffusyn/manifest.hpp"

#include <system_error>
#include <unistd.h>

#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {
namespace {

std::string dump_line(const json& j, std::string_view what) {
    try {
        return j.dump();
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string(what) + " is not serializable: " + e.what());
    }
}

void require_valid(const BenchmarkSet& set) {
    const auto violations = validate_set(set);
    if (violations.empty()) return;
    std::string msg = "refusing to write invalid manifest: " + violations.front();
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    fail(ErrorKind::Validation, msg);
}

}  // namespace

std::string manifest_header_line(const BenchmarkSet& set) {
    json header{{"schema_version", set.schema_version},
                {"generator_config_digest", set.generator_config_digest},
                {"topic_pool_digest", set.topic_pool_digest}};
    return dump_line(header, "manifest header");
}

std::string manifest_item_line(const BenchmarkItem& item) { return dump_line(json(item), "item " + item.id); }

std::string render_manifest(const BenchmarkSet& set) {
    std::string out = manifest_header_line(set);
    out.push_back('\n');
    for (const auto& item : set.items) {
        out += manifest_item_line(item);
        out.push_back('\n');
    }
    return out;
}

void save_manifest(const BenchmarkSet& set, const std::filesystem::path& path, FaultInjector* fault) {
    require_valid(set);
    auto tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    auto cleanup = [&] {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
    };
    try {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
        std::size_t lines = 0;
        auto put = [&](const std::string& line) {
            out << line << '\n';
            out.flush();
            if (!out) fail(ErrorKind::Io, "write failed for manifest " + path.string());
            ++lines;
            if (fault) fault->checkpoint("line", lines);
        };
        put(manifest_header_line(set));
        for (const auto& item : set.items) put(manifest_item_line(item));
        out.close();
        if (fault) fault->checkpoint("before-rename", lines);
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) fail(ErrorKind::Io, "cannot replace manifest " + path.string() + ": " + ec.message());
    } catch (...) {
        cleanup();
        throw;
    }
}

BenchmarkSet parse_manifest(std::string_view text, std::string_view origin) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    const std::string where(origin);
    if (lines.empty()) fail(ErrorKind::Parse, where + ":1: missing manifest header");

    BenchmarkSet set;
    json header;
    try {
        header = json::parse(lines[0]);
        if (!header.is_object()) fail(ErrorKind::Parse, "header is not a JSON object");
        if (!header.contains("schema_version") || !header["schema_version"].is_number_integer())
            fail(ErrorKind::Parse, "header lacks an integer schema_version");
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, where + ":1: " + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::Parse, where + ":1: " + e.what());
    }
    set.schema_version = header["schema_version"].get<int>();
    if (set.schema_version != kManifestSchemaVersion) {
        fail(ErrorKind::VersionedFormat, where + ": schema_version " + std::to_string(set.schema_version) +
                                             " is not supported (expected " +
                                             std::to_string(kManifestSchemaVersion) + ")");
    }
    try {
        header.at("generator_config_digest").get_to(set.generator_config_digest);
        header.at("topic_pool_digest").get_to(set.topic_pool_digest);
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, where + ":1: " + e.what());
    }

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line_no = std::to_string(i + 1);
        if (trim(lines[i]).empty()) fail(ErrorKind::Parse, where + ":" + line_no + ": empty line");
        try {
            set.items.push_back(json::parse(lines[i]).get<BenchmarkItem>());
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, where + ":" + line_no + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::Parse, where + ":" + line_no + ": " + e.what());
        }
    }

    const auto violations = validate_set(set);
    if (!violations.empty()) fail(ErrorKind::Validation, where + ": " + violations.front());
    return set;
}

BenchmarkSet load_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_file(path), path.string());
}

ManifestWriter::ManifestWriter(const std::filesystem::path& path, const BenchmarkSet& header) : path_(path) {
    BenchmarkSet empty = header;
    empty.items.clear();
    require_valid(empty);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorKind::Io, "cannot write manifest " + path.string());
    out_ << manifest_header_line(empty) << '\n';
    out_.flush();
}

ManifestWriter::~ManifestWriter() {
    if (out_.is_open()) out_.close();
}

void ManifestWriter::append(const BenchmarkItem& item) {
    if (const auto v = validate_item(item); !v.empty()) fail(ErrorKind::Validation, v.front());
    if (!ids_.insert(item.id).second) fail(ErrorKind::Validation, "duplicate item id " + item.id);
    out_ << manifest_item_line(item) << '\n';
    out_.flush();
    if (!out_) fail(ErrorKind::Io, "append failed for manifest " + path_.string());
}

void ManifestWriter::close() {
    out_.close();
    if (out_.fail()) fail(ErrorKind::Io, "close failed for manifest " + path_.string());
}

std::filesystem::path manifest_sidecar(const std::filesystem::path& manifest, std::string_view suffix) {
    std::string name = manifest.filename().string();
    for (std::string_view ext : {".dsb.jsonl", ".jsonl", ".json"}) {
        if (name.size() > ext.size() && name.ends_with(ext)) {
            name.resize(name.size() - ext.size());
            break;
        }
    }
    return manifest.parent_path() / (name + std::string(suffix));
}

}  // namespace diffusyn
