#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "diffusyn/model.hpp"

namespace diffusyn {

/// Parses `scenario_tag<TAB>phrase` lines; `#` lines and blank lines are skipped.
std::vector<Topic> parse_topic_pool(std::string_view text, std::string_view origin = "<memory>");
std::vector<Topic> load_topic_pool(const std::filesystem::path& path);

/// Digest over the canonical `tag\tphrase\n` rendering of the pool.
std::string topic_pool_digest(const std::vector<Topic>& pool);

}  // namespace diffusyn
