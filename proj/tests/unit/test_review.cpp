#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "diffusyn/error.hpp"
#include "diffusyn/evalharness.hpp"
#include "diffusyn/image_store.hpp"
#include "diffusyn/review.hpp"
#include "diffusyn/util.hpp"
#include "fixtures.hpp"

using namespace diffusyn;
using namespace diffusyn::review;
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

struct CrashAt : FaultInjector {
    std::string where;
    void checkpoint(std::string_view w, std::size_t) override {
        if (w == where) throw std::runtime_error("injected crash");
    }
};

BenchmarkSet pending_set(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    auto set = fixture::random_set(rng, n);
    for (auto& item : set.items) {
        item.curation_status = CurationStatus::Pending;
        item.curation_note.reset();
    }
    return set;
}

std::size_t line_count(const fs::path& p) {
    if (!fs::exists(p)) return 0;
    const auto text = read_file(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Review server on an ephemeral port, stopped on scope exit.
struct LiveServer {
    ReviewServer server;
    int port = 0;
    std::thread thread;

    LiveServer(ReviewService& svc, ServerOptions opts = {}) : server(svc, std::move(opts)) {
        port = server.bind("127.0.0.1", 0);
        thread = std::thread([this] { server.listen(); });
        server.wait_until_ready();
    }
    ~LiveServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_connection_timeout(5);
        return c;
    }
};

json post_decision(httplib::Client& c, const std::string& id, const std::string& decision) {
    auto res = c.Post("/api/items/" + id + "/decision", json{{"decision", decision}}.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    return json::parse(res->body);
}

}  // namespace

TEST_CASE("apply_decision changes exactly two fields of one item") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto set = fixture::random_set(rng, 1 + rng.uniform_index(10));
        const auto& target = set.items[rng.uniform_index(set.items.size())];
        const CurationDecision d{target.id, rng.bernoulli(0.5) ? Decision::Accept : Decision::Reject,
                                 rng.bernoulli(0.5) ? std::optional<std::string>("looks fine") : std::nullopt,
                                 "2026-01-01T00:00:00Z"};
        const auto out = apply_decision(set, d, true);
        REQUIRE(out.items.size() == set.items.size());
        CHECK(out.generator_config_digest == set.generator_config_digest);
        CHECK(out.topic_pool_digest == set.topic_pool_digest);
        for (std::size_t i = 0; i < set.items.size(); ++i) {
            if (set.items[i].id != d.item_id) {
                CHECK(manifest_item_line(out.items[i]) == manifest_item_line(set.items[i]));
                continue;
            }
            CHECK(out.items[i].curation_status ==
                  (d.decision == Decision::Accept ? CurationStatus::Accepted : CurationStatus::Rejected));
            CHECK(out.items[i].curation_note == d.note);
            auto restored = out.items[i];
            restored.curation_status = set.items[i].curation_status;
            restored.curation_note = set.items[i].curation_note;
            CHECK(manifest_item_line(restored) == manifest_item_line(set.items[i]));
        }
    }
}

TEST_CASE("apply_decision errors") {
    const auto set = pending_set(1, 3);
    const auto id = set.items[1].id;
    const auto rejected = apply_decision(set, {id, Decision::Reject, std::nullopt, ""});
    CHECK(rejected.items[1].curation_status == CurationStatus::Rejected);
    CHECK(kind_of([&] { apply_decision(rejected, {id, Decision::Accept, std::nullopt, ""}); }) ==
          ErrorKind::Conflict);
    CHECK(apply_decision(rejected, {id, Decision::Accept, std::nullopt, ""}, true).items[1].curation_status ==
          CurationStatus::Accepted);
    CHECK(kind_of([&] { apply_decision(set, {"nope", Decision::Accept, std::nullopt, ""}); }) ==
          ErrorKind::NotFound);
    CHECK(parse_decision("accepted") == Decision::Accept);
    CHECK(parse_decision("REJECT") == Decision::Reject);
    CHECK_FALSE(parse_decision("maybe"));
}

TEST_CASE("review service persists decisions") {
    fixture::TempDir dir("service");
    const auto path = dir / "set.dsb.jsonl";
    save_manifest(pending_set(2, 4), path);
    int tick = 0;
    ReviewService svc(path, dir / "store", {false, nullptr, [&] { return "t" + std::to_string(tick++); }});
    const auto id = svc.snapshot().items[2].id;

    const auto updated = svc.decide(id, {{"decision", "reject"}, {"note", "blurry"}});
    CHECK(updated["curation_status"] == "rejected");
    CHECK(updated["curation_note"] == "blurry");
    CHECK(load_manifest(path).items[2].curation_status == CurationStatus::Rejected);
    const auto audit = json::parse(read_file(svc.audit_log()));
    CHECK(audit["item_id"] == id);
    CHECK(audit["decision"] == "reject");
    CHECK(audit["decided_at"] == "t0");
    CHECK(read_file(path).find("t0") == std::string::npos);

    CHECK(kind_of([&] { svc.decide(id, {{"decision", "accept"}}); }) == ErrorKind::Conflict);
    CHECK(kind_of([&] { svc.decide(id, {{"verdict", "accept"}}); }) == ErrorKind::Validation);
    CHECK(kind_of([&] { svc.decide(id, {{"decision", "accept"}, {"note", 4}}); }) == ErrorKind::Validation);
    CHECK(line_count(svc.audit_log()) == 1);
    CHECK(kind_of([&] { ReviewService(dir / "missing.dsb.jsonl", dir.path()); }) == ErrorKind::Io);
}

TEST_CASE("fault-injected decisions leave the manifest intact") {
    fixture::TempDir dir("review-fault");
    const auto path = dir / "set.dsb.jsonl";
    save_manifest(pending_set(3, 6), path);
    const auto bytes = read_file(path);
    for (const char* where : {"line", "before-rename"}) {
        CrashAt crash;
        crash.where = where;
        ReviewService svc(path, dir.path(), {false, &crash, {}});
        const auto id = svc.snapshot().items[0].id;
        CHECK_THROWS(svc.decide(id, {{"decision", "accept"}}));
        CHECK(read_file(path) == bytes);
        CHECK(svc.snapshot().items[0].curation_status == CurationStatus::Pending);
        CHECK(line_count(svc.audit_log()) == 0);
        CHECK_NOTHROW(load_manifest(path));
    }
    std::size_t stray = 0;
    for (const auto& e : fs::directory_iterator(dir.path()))
        if (e.path().filename().string().find(".tmp-") != std::string::npos) ++stray;
    CHECK(stray == 0);
}

TEST_CASE("HTTP review API") {
    fixture::TempDir dir("http");
    const auto path = dir / "set.dsb.jsonl";
    auto set = pending_set(4, 5);
    Raster raster;
    raster.width = raster.height = kNormalizedImageSide;
    raster.rgb.assign(static_cast<std::size_t>(raster.width) * raster.height * 3, 90);
    const auto image = store_raster(raster, dir / "store");
    set.items[0].image = image;
    save_manifest(set, path);
    ReviewService svc(path, dir / "store");
    LiveServer live(svc);
    auto c = live.client();

    auto res = c.Get("/api/items?status=pending");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto body = json::parse(res->body);
    CHECK(body["total"] == 5);
    CHECK(body["items"].size() == 5);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");

    res = c.Get("/api/items?status=pending&offset=1&limit=2");
    body = json::parse(res->body);
    CHECK(body["total"] == 5);
    REQUIRE(body["items"].size() == 2);
    CHECK(body["items"][0]["id"] == set.items[1].id);

    const auto id = set.items[0].id;
    CHECK(post_decision(c, id, "accept")["curation_status"] == "accepted");
    res = c.Get("/api/items/" + id);
    REQUIRE(res);
    body = json::parse(res->body);
    CHECK(body["curation_status"] == "accepted");
    CHECK(body["image_url"] == "/api/images/" + image.digest);

    res = c.Get("/api/items?status=accepted");
    CHECK(json::parse(res->body)["total"] == 1);

    res = c.Post("/api/items/" + id + "/decision", R"({"decision":"reject"})", "application/json");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["error"] == "conflict");

    res = c.Post("/api/items/NOPE/decision", R"({"decision":"reject"})", "application/json");
    CHECK(res->status == 404);
    body = json::parse(res->body);
    CHECK(body["error"] == "not-found");
    CHECK(body["message"].get<std::string>().find("NOPE") != std::string::npos);
    CHECK(c.Get("/api/items/NOPE")->status == 404);

    CHECK(c.Post("/api/items/" + set.items[1].id + "/decision", "{oops", "application/json")->status == 400);
    CHECK(c.Post("/api/items/" + set.items[1].id + "/decision", R"({"decision":"later"})", "application/json")
              ->status == 400);
    CHECK(c.Get("/api/items?status=unknown")->status == 400);
    CHECK(c.Get("/api/items?limit=-3")->status == 400);

    res = c.Get("/api/images/" + image.digest);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(res->body == std::string(reinterpret_cast<const char*>(read_image(dir / "store", image.digest).data()),
                                   read_image(dir / "store", image.digest).size()));
    CHECK(c.Get("/api/images/" + std::string(64, 'a'))->status == 404);

    res = c.Get("/api/stats");
    body = json::parse(res->body);
    CHECK(body["curation"]["accepted"] == 1);
    CHECK(body["curation"]["pending"] == 4);
    CHECK(body["pipeline"].is_null());
    CHECK(body["diversity"].contains("max_share"));

    CHECK(c.Options("/api/items")->status == 204);
}

TEST_CASE("HTTP review API with a token") {
    fixture::TempDir dir("http-token");
    const auto path = dir / "set.dsb.jsonl";
    save_manifest(pending_set(5, 2), path);
    ReviewService svc(path, dir.path());
    LiveServer live(svc, {"s3cret", std::nullopt});
    auto c = live.client();
    CHECK(c.Get("/api/items")->status == 401);
    CHECK(json::parse(c.Get("/api/items")->body)["error"] == "unauthorized");
    c.set_bearer_token_auth("wrong");
    CHECK(c.Get("/api/items")->status == 401);
    c.set_bearer_token_auth("s3cret");
    CHECK(c.Get("/api/items")->status == 200);
}

TEST_CASE("curation round trip through the HTTP API") {
    fixture::TempDir dir("roundtrip");
    const auto path = dir / "set.dsb.jsonl";
    const auto set = pending_set(20, 20);
    save_manifest(set, path);
    {
        ReviewService svc(path, dir.path());
        LiveServer live(svc);
        auto c = live.client();
        for (int i = 0; i < 5; ++i) post_decision(c, set.items[i].id, "accept");
        for (int i = 5; i < 8; ++i) post_decision(c, set.items[i].id, "reject");
        const auto curation = json::parse(c.Get("/api/stats")->body)["curation"];
        CHECK(curation["pending"] == 12);
        CHECK(curation["accepted"] == 5);
        CHECK(curation["rejected"] == 3);
        CHECK(line_count(svc.audit_log()) == 8);
    }
    const auto saved = load_manifest(path);
    const auto templates = EvalTemplates::load(fixture::templates_dir());
    const auto run = eval::run_benchmark(saved, *make_mock(MockScript{}), *make_mock(MockScript{}), templates);
    REQUIRE(run.records.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(run.records[i].item_id == set.items[i].id);
}

TEST_CASE("concurrent decisions on one item are serialized") {
    fixture::TempDir dir("concurrent");
    const auto path = dir / "set.dsb.jsonl";
    save_manifest(pending_set(6, 3), path);
    ReviewService svc(path, dir.path());
    LiveServer live(svc);
    const auto id = svc.snapshot().items[1].id;
    std::vector<int> codes(8);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            auto c = live.client();
            auto res = c.Post("/api/items/" + id + "/decision",
                              json{{"decision", t % 2 ? "accept" : "reject"}}.dump(), "application/json");
            codes[t] = res ? res->status : -1;
        });
    }
    for (auto& th : threads) th.join();
    CHECK(std::count(codes.begin(), codes.end(), 200) == 1);
    CHECK(std::count(codes.begin(), codes.end(), 409) == 7);
    CHECK(line_count(svc.audit_log()) == 1);
    CHECK(load_manifest(path) == svc.snapshot());
}
