#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "diffusyn/genpipeline.hpp"
#include "diffusyn/providers.hpp"

namespace diffusyn {

struct RunPaths {
    std::filesystem::path topic_pool;
    std::filesystem::path image_store;
    std::filesystem::path manifest;
    std::filesystem::path templates_dir;
};

struct ReviewEndpoint {
    std::string listen_address = "127.0.0.1";
    int port = 8080;
};

/// Single JSON document driving every subcommand. Relative paths resolve
/// against the config file's directory.
struct RunConfig {
    gen::GeneratorConfig generator;
    std::map<std::string, ProviderConfig> providers;
    std::optional<MockScript> mock;
    RunPaths paths;
    ReviewEndpoint review;

    /// Slot config, or a default mock config when the slot is absent.
    ProviderConfig provider(const std::string& slot) const;
    /// Rewrites every slot to the mock endpoint and ensures a mock script.
    void force_mock();
};

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace diffusyn
