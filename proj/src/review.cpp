#include "diffusyn/review.hpp"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <mutex>

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/image_store.hpp"
#include "diffusyn/stats.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn::review {

std::string_view to_string(Decision d) noexcept { return d == Decision::Accept ? "accept" : "reject"; }

std::optional<Decision> parse_decision(std::string_view text) {
    if (iequals(text, "accept") || iequals(text, "accepted")) return Decision::Accept;
    if (iequals(text, "reject") || iequals(text, "rejected")) return Decision::Reject;
    return std::nullopt;
}

BenchmarkSet apply_decision(const BenchmarkSet& set, const CurationDecision& d, bool allow_redecide) {
    BenchmarkSet out = set;
    for (auto& item : out.items) {
        if (item.id != d.item_id) continue;
        if (item.curation_status != CurationStatus::Pending && !allow_redecide)
            fail(ErrorKind::Conflict, "item " + item.id + " is already " +
                                          std::string(diffusyn::to_string(item.curation_status)));
        item.curation_status = d.decision == Decision::Accept ? CurationStatus::Accepted : CurationStatus::Rejected;
        item.curation_note = d.note;
        return out;
    }
    fail(ErrorKind::NotFound, "no item with id " + d.item_id);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json item_view(const BenchmarkItem& item) {
    json j = item;
    j["image_url"] = "/api/images/" + item.image.digest;
    return j;
}

ReviewService::ReviewService(std::filesystem::path manifest, std::filesystem::path store_dir, ReviewOptions options)
    : manifest_(std::move(manifest)),
      store_(std::move(store_dir)),
      audit_path_(manifest_sidecar(manifest_, ".audit.jsonl")),
      stats_path_(manifest_sidecar(manifest_, ".stats.json")),
      options_(std::move(options)),
      set_(load_manifest(manifest_)) {
    if (!options_.clock) options_.clock = utc_timestamp;
}

json ReviewService::list_items(const ItemQuery& query) const {
    std::shared_lock lock(mutex_);
    json items = json::array();
    std::size_t matched = 0;
    for (const auto& item : set_.items) {
        if (query.status && item.curation_status != *query.status) continue;
        if (query.category && item.category != *query.category) continue;
        if (matched >= query.offset && items.size() < query.limit) items.push_back(item_view(item));
        ++matched;
    }
    return json{{"items", std::move(items)}, {"total", matched}};
}

json ReviewService::get_item(const std::string& id) const {
    std::shared_lock lock(mutex_);
    for (const auto& item : set_.items)
        if (item.id == id) return item_view(item);
    fail(ErrorKind::NotFound, "no item with id " + id);
}

json ReviewService::decide(const std::string& id, const json& body) {
    if (!body.is_object()) fail(ErrorKind::Validation, "decision body must be a JSON object");
    const auto dv = body.find("decision");
    if (dv == body.end() || !dv->is_string()) fail(ErrorKind::Validation, "missing string field 'decision'");
    const auto decision = parse_decision(dv->get<std::string>());
    if (!decision) fail(ErrorKind::Validation, "decision must be 'accept' or 'reject'");
    CurationDecision d{id, *decision, std::nullopt, options_.clock()};
    if (auto nv = body.find("note"); nv != body.end() && !nv->is_null()) {
        if (!nv->is_string()) fail(ErrorKind::Validation, "note must be a string");
        if (!nv->get<std::string>().empty()) d.note = nv->get<std::string>();
    }

    std::unique_lock lock(mutex_);
    auto next = apply_decision(set_, d, options_.allow_redecide);
    save_manifest(next, manifest_, options_.fault);
    set_ = std::move(next);
    json entry{{"item_id", d.item_id}, {"decision", to_string(d.decision)}, {"decided_at", d.decided_at}};
    if (d.note) entry["note"] = *d.note;
    append_line(audit_path_, entry.dump());
    for (const auto& item : set_.items)
        if (item.id == id) return item_view(item);
    fail(ErrorKind::NotFound, "no item with id " + id);
}

json ReviewService::stats() const {
    std::shared_lock lock(mutex_);
    json out;
    if (std::filesystem::exists(stats_path_)) {
        try {
            out["pipeline"] = json::parse(read_file(stats_path_)).get<PipelineStats>();
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, stats_path_.string() + ": " + e.what());
        }
    } else {
        out["pipeline"] = nullptr;
    }
    out["diversity"] = stats::diversity_report(set_);
    std::uint64_t pending = 0, accepted = 0, rejected = 0;
    for (const auto& item : set_.items) {
        switch (item.curation_status) {
            case CurationStatus::Pending: ++pending; break;
            case CurationStatus::Accepted: ++accepted; break;
            case CurationStatus::Rejected: ++rejected; break;
        }
    }
    out["curation"] = json{{"pending", pending}, {"accepted", accepted}, {"rejected", rejected},
                           {"total", set_.items.size()}};
    return out;
}

std::vector<std::uint8_t> ReviewService::image_bytes(const std::string& digest) const {
    if (!is_sha256_hex(digest)) fail(ErrorKind::NotFound, "no image " + digest);
    return read_image(store_, digest);
}

std::string ReviewService::image_media_type(const std::string& digest) const {
    std::shared_lock lock(mutex_);
    for (const auto& item : set_.items)
        if (item.image.digest == digest && !item.image.media_type.empty()) return item.image.media_type;
    return std::string(kNormalizedMediaType);
}

BenchmarkSet ReviewService::snapshot() const {
    std::shared_lock lock(mutex_);
    return set_;
}

namespace {

int http_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict: return 409;
        case ErrorKind::Validation:
        case ErrorKind::Parse:
        case ErrorKind::Usage:
        case ErrorKind::Precondition: return 400;
        default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    send_json(res, status, json{{"error", code}, {"message", message}});
}

std::size_t parse_count(const httplib::Request& req, const char* name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const auto text = req.get_param_value(name);
    std::size_t v = 0;
    if (text.empty() || text.size() > 9) fail(ErrorKind::Validation, std::string(name) + " must be a non-negative integer");
    for (char c : text) {
        if (c < '0' || c > '9') fail(ErrorKind::Validation, std::string(name) + " must be a non-negative integer");
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
}

template <class Fn>
httplib::Server::Handler guarded(const ServerOptions& opts, Fn fn) {
    return [&opts, fn](const httplib::Request& req, httplib::Response& res) {
        if (!opts.token.empty() && req.get_header_value("Authorization") != "Bearer " + opts.token) {
            send_error(res, 401, "unauthorized", "missing or wrong bearer token");
            return;
        }
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "parse", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

ReviewServer::ReviewServer(ReviewService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/api/items", guarded(options_, [this](const httplib::Request& req, httplib::Response& res) {
                ItemQuery q;
                if (req.has_param("status")) {
                    q.status = parse_curation_status(req.get_param_value("status"));
                    if (!q.status) fail(ErrorKind::Validation, "unknown status " + req.get_param_value("status"));
                }
                if (req.has_param("category")) {
                    q.category = parse_category(req.get_param_value("category"));
                    if (!q.category) fail(ErrorKind::Validation, "unknown category " + req.get_param_value("category"));
                }
                q.offset = parse_count(req, "offset", 0);
                q.limit = parse_count(req, "limit", q.limit);
                send_json(res, 200, service_.list_items(q));
            }));
    srv.Get(R"(/api/items/([^/]+))", guarded(options_, [this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service_.get_item(req.matches[1]));
            }));
    srv.Post(R"(/api/items/([^/]+)/decision)",
             guarded(options_, [this](const httplib::Request& req, httplib::Response& res) {
                 json body;
                 try {
                     body = json::parse(req.body);
                 } catch (const json::exception& e) {
                     fail(ErrorKind::Validation, std::string("body is not JSON: ") + e.what());
                 }
                 send_json(res, 200, service_.decide(req.matches[1], body));
             }));
    srv.Get(R"(/api/images/([0-9a-fA-F]+))",
            guarded(options_, [this](const httplib::Request& req, httplib::Response& res) {
                const std::string digest = req.matches[1];
                const auto bytes = service_.image_bytes(digest);
                res.status = 200;
                res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(),
                                service_.image_media_type(digest));
            }));
    srv.Get("/api/stats", guarded(options_, [this](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, service_.stats());
            }));

    if (options_.ui_dir && !srv.set_mount_point("/", options_.ui_dir->string()))
        fail(ErrorKind::Io, "cannot serve UI directory " + options_.ui_dir->string());
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    if (port < 0 || port > 65535) fail(ErrorKind::Config, "port " + std::to_string(port) + " out of range");
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
    } else if (!server_->bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) fail(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ReviewServer::listen() { server_->listen_after_bind(); }

void ReviewServer::wait_until_ready() const { server_->wait_until_ready(); }

void ReviewServer::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

}  // namespace diffusyn::review
