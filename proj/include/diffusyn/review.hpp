#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "diffusyn/manifest.hpp"
#include "diffusyn/model.hpp"

namespace httplib {
class Server;
}

namespace diffusyn::review {

enum class Decision { Accept, Reject };

std::string_view to_string(Decision d) noexcept;
std::optional<Decision> parse_decision(std::string_view text);

struct CurationDecision {
    std::string item_id;
    Decision decision = Decision::Accept;
    std::optional<std::string> note;
    std::string decided_at;  // audit log only
};

/// Changes curation_status and curation_note of one item and nothing else.
/// Throws `NotFound` for an unknown id and `Conflict` when the item was
/// already decided and `allow_redecide` is false.
BenchmarkSet apply_decision(const BenchmarkSet& set, const CurationDecision& d, bool allow_redecide = false);

struct ItemQuery {
    std::optional<CurationStatus> status;
    std::optional<ErrorCategory> category;
    std::size_t offset = 0;
    std::size_t limit = 100;
};

struct ReviewOptions {
    bool allow_redecide = false;
    FaultInjector* fault = nullptr;
    /// UTC timestamp source for audit entries.
    std::function<std::string()> clock;
};

std::string utc_timestamp();

/// Curation state behind the review API. Reads take a shared lock and see
/// a consistent snapshot; decisions are serialized and each one rewrites
/// the manifest atomically before becoming visible.
class ReviewService {
public:
    ReviewService(std::filesystem::path manifest, std::filesystem::path store_dir, ReviewOptions options = {});

    json list_items(const ItemQuery& query) const;
    json get_item(const std::string& id) const;
    /// Body: {"decision": "accept"|"reject", "note": "..."}. Returns the updated item.
    json decide(const std::string& id, const json& body);
    json stats() const;
    std::vector<std::uint8_t> image_bytes(const std::string& digest) const;
    std::string image_media_type(const std::string& digest) const;

    BenchmarkSet snapshot() const;
    const std::filesystem::path& audit_log() const { return audit_path_; }

private:
    std::filesystem::path manifest_;
    std::filesystem::path store_;
    std::filesystem::path audit_path_;
    std::filesystem::path stats_path_;
    ReviewOptions options_;
    mutable std::shared_mutex mutex_;
    BenchmarkSet set_;
};

json item_view(const BenchmarkItem& item);

struct ServerOptions {
    /// Shared secret; when set, requests need `Authorization: Bearer <token>`.
    std::string token;
    /// Static files mounted at `/` (the curation UI build), optional.
    std::optional<std::filesystem::path> ui_dir;
};

/// HTTP front end for a ReviewService.
class ReviewServer {
public:
    ReviewServer(ReviewService& service, ServerOptions options = {});
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port. Throws `Io`.
    int bind(const std::string& host, int port);
    /// Blocks until `stop()`.
    void listen();
    /// Blocks until a concurrent `listen()` accepts connections.
    void wait_until_ready() const;
    void stop();

private:
    ReviewService& service_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace diffusyn::review
