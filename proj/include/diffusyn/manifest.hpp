#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "diffusyn/model.hpp"

namespace diffusyn {

/// Test seam for crash-safety checks. `checkpoint` is called after each
/// line reaches the temporary file and once more just before the rename;
/// throwing from it simulates a crash at that point.
class FaultInjector {
public:
    virtual ~FaultInjector() = default;
    virtual void checkpoint(std::string_view where, std::size_t lines_written) = 0;
};

std::string manifest_header_line(const BenchmarkSet& set);
std::string manifest_item_line(const BenchmarkItem& item);

/// Serialized manifest bytes: header line, then one line per item, LF-terminated.
std::string render_manifest(const BenchmarkSet& set);

/// Validates the set, writes it to a sibling temp file and renames it over
/// `path`. A failure at any point leaves the previous file untouched.
void save_manifest(const BenchmarkSet& set, const std::filesystem::path& path,
                   FaultInjector* fault = nullptr);

BenchmarkSet load_manifest(const std::filesystem::path& path);
BenchmarkSet parse_manifest(std::string_view text, std::string_view origin = "<memory>");

/// Single-writer streaming manifest used while a pipeline is running. On
/// `close()` the file holds exactly `render_manifest` of the streamed set.
class ManifestWriter {
public:
    ManifestWriter(const std::filesystem::path& path, const BenchmarkSet& header);
    ~ManifestWriter();

    ManifestWriter(const ManifestWriter&) = delete;
    ManifestWriter& operator=(const ManifestWriter&) = delete;

    void append(const BenchmarkItem& item);
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::unordered_set<std::string> ids_;
};

/// `bench.dsb.jsonl` -> `bench.audit.jsonl` and friends.
std::filesystem::path manifest_sidecar(const std::filesystem::path& manifest, std::string_view suffix);

}  // namespace diffusyn
