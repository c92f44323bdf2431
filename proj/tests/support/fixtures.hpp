#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "diffusyn/digest.hpp"
#include "diffusyn/discern.hpp"
#include "diffusyn/evalharness.hpp"
#include "diffusyn/model.hpp"
#include "diffusyn/rng.hpp"
#include "diffusyn/templates.hpp"
#include "diffusyn/ulid.hpp"

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("diffusyn-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline fs::path source_dir() { return DIFFUSYN_SOURCE_DIR; }
inline fs::path templates_dir() { return source_dir() / "templates"; }

inline std::vector<diffusyn::Topic> uniform_pool(int scenarios, int phrases_per_scenario = 1) {
    std::vector<diffusyn::Topic> pool;
    for (int s = 0; s < scenarios; ++s)
        for (int p = 0; p < phrases_per_scenario; ++p)
            pool.push_back({"scene " + std::to_string(s) + " variant " + std::to_string(p),
                            "scenario" + std::to_string(s)});
    return pool;
}

inline diffusyn::BenchmarkItem make_item(diffusyn::Rng& rng, std::uint64_t index, diffusyn::ErrorCategory category,
                                         const std::string& scenario) {
    using namespace diffusyn;
    const Topic topic{"a scene in the " + scenario + " number " + std::to_string(rng.uniform_index(1000)), scenario};
    BenchmarkItem item;
    item.id = make_ulid(index, rng);
    item.prompt.script = {topic, "Script text " + std::to_string(rng.next_u64() % 100000) + "."};
    item.prompt.error = {topic, category, "Error text \"quoted\" \\ unicode \xc3\xa9 " + std::to_string(index)};
    item.prompt.text = item.prompt.script.text + " " + item.prompt.error.description;
    item.ground_truth_error = item.prompt.error.description;
    item.category = category;
    item.image = {sha256_hex("image " + std::to_string(rng.next_u64())), kNormalizedImageSide, kNormalizedImageSide,
                  "image/png"};
    item.provenance = {"topic:" + std::to_string(index), "script:" + std::to_string(index)};
    const auto status = rng.uniform_index(3);
    item.curation_status = status == 0 ? CurationStatus::Pending
                           : status == 1 ? CurationStatus::Accepted
                                         : CurationStatus::Rejected;
    if (rng.bernoulli(0.3)) item.curation_note = "note\twith\ncontrol chars " + std::to_string(index);
    return item;
}

inline diffusyn::BenchmarkSet random_set(diffusyn::Rng& rng, std::size_t n) {
    using namespace diffusyn;
    BenchmarkSet set;
    set.generator_config_digest = sha256_hex("cfg " + std::to_string(rng.next_u64()));
    set.topic_pool_digest = sha256_hex("pool " + std::to_string(rng.next_u64()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto cat = kAllCategories[rng.uniform_index(3)];
        set.items.push_back(make_item(rng, i, cat, "scenario" + std::to_string(rng.uniform_index(30))));
    }
    return set;
}

// Labelled images with fake digests; nothing is read from disk.
inline std::vector<diffusyn::discern::LabeledImage> labeled_images(std::size_t n_ai, std::size_t n_human) {
    using namespace diffusyn;
    std::vector<discern::LabeledImage> out;
    for (std::size_t i = 0; i < n_ai + n_human; ++i) {
        const bool ai = i < n_ai;
        out.push_back({{sha256_hex("image " + std::to_string(i)), 512, 512, "image/png"},
                       ai ? BinaryLabel::AiGenerated : BinaryLabel::HumanGenerated,
                       ai ? "generated" : "photo"});
    }
    return out;
}

// Accepted items with exactly `counts[c]` items per category, in category order.
inline diffusyn::BenchmarkSet sized_set(diffusyn::Rng& rng, const std::map<diffusyn::ErrorCategory, std::size_t>& counts) {
    using namespace diffusyn;
    BenchmarkSet set;
    set.generator_config_digest = sha256_hex("cfg");
    set.topic_pool_digest = sha256_hex("pool");
    std::uint64_t index = 0;
    for (const auto& [cat, n] : counts) {
        for (std::size_t i = 0; i < n; ++i) {
            auto item = make_item(rng, index++, cat, "scenario" + std::to_string(rng.uniform_index(30)));
            item.curation_status = CurationStatus::Accepted;
            set.items.push_back(std::move(item));
        }
    }
    return set;
}

// A mock model that answers every item with its ground truth.
inline diffusyn::MockScript echo_script(const diffusyn::BenchmarkSet& set, const diffusyn::PromptTemplate& respond) {
    diffusyn::MockScript s;
    for (const auto& item : set.items)
        s.stage_tables[{"respond", diffusyn::input_digest(diffusyn::eval::response_request(item, respond))}] =
            item.ground_truth_error;
    return s;
}

}  // namespace fixture

