#include "diffusyn/run_config.hpp"

#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

namespace {

constexpr std::string_view kGeneratorSlots[] = {stage::kScript, stage::kError, stage::kSynthesis, stage::kJudge,
                                                 stage::kImage};

std::filesystem::path resolve(const json& paths, const char* key, const std::filesystem::path& base,
                              const std::filesystem::path& fallback) {
    std::filesystem::path p = fallback;
    if (auto it = paths.find(key); it != paths.end()) {
        if (!it->is_string()) fail(ErrorKind::Config, std::string("paths.") + key + " must be a string");
        p = it->get<std::string>();
    }
    if (p.empty()) return p;
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

ProviderConfig RunConfig::provider(const std::string& slot) const {
    if (auto it = providers.find(slot); it != providers.end()) return it->second;
    ProviderConfig pc;
    pc.provider_id = "mock-" + slot;
    return pc;
}

void RunConfig::force_mock() {
    for (auto* table : {&providers, &generator.providers}) {
        for (auto& [slot, pc] : *table) pc.endpoint = "mock";
    }
    if (!mock) {
        mock = MockScript{};
        mock->seed = generator.seed;
    }
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
    RunConfig rc;
    try {
        if (auto it = doc.find("generator"); it != doc.end()) it->get_to(rc.generator);
        if (auto it = doc.find("providers"); it != doc.end()) {
            for (const auto& [slot, pc] : it->items()) {
                auto cfg = pc.get<ProviderConfig>();
                cfg.validate();
                rc.providers[slot] = std::move(cfg);
            }
        }
        if (auto it = doc.find("mock"); it != doc.end() && !it->is_null()) {
            rc.mock = it->get<MockScript>();
            if (!it->contains("seed")) rc.mock->seed = rc.generator.seed;
            rc.mock->validate();
        }
        const json paths = doc.value("paths", json::object());
        rc.paths.topic_pool = resolve(paths, "topic_pool", base_dir, "data/topics.tsv");
        rc.paths.image_store = resolve(paths, "image_store", base_dir, "store");
        rc.paths.manifest = resolve(paths, "manifest", base_dir, "benchmark.dsb.jsonl");
        rc.paths.templates_dir = resolve(paths, "templates_dir", base_dir, "templates");
        if (auto it = doc.find("review"); it != doc.end()) {
            rc.review.listen_address = it->value("listen_address", rc.review.listen_address);
            rc.review.port = it->value("port", rc.review.port);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("malformed config: ") + e.what());
    }
    if (rc.review.port < 1 || rc.review.port > 65535)
        fail(ErrorKind::Config, "review.port " + std::to_string(rc.review.port) + " is outside [1, 65535]");
    for (auto slot : kGeneratorSlots) {
        const std::string key(slot);
        if (auto it = rc.providers.find(key); it != rc.providers.end() && !rc.generator.providers.contains(key))
            rc.generator.providers[key] = it->second;
    }
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

}  // namespace diffusyn
