#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffusyn/model.hpp"
#include "diffusyn/providers.hpp"
#include "diffusyn/rng.hpp"
#include "diffusyn/templates.hpp"

namespace diffusyn::gen {

inline constexpr std::uint64_t kQuotaBurnIn = 40;
inline constexpr int kMaxTopicDraws = 1000;

struct GeneratorConfig {
    std::map<ErrorCategory, std::uint64_t> target_counts;
    double scenario_quota = 0.05;
    std::uint64_t seed = 0;
    int max_attempts_per_item = 3;
    double judge_renderability_threshold = 0.5;
    double judge_salience_threshold = 0.3;
    std::map<std::string, ProviderConfig> providers;
    /// Draws issued per scheduling round. Part of the output contract:
    /// changing it changes the manifest, changing `workers` does not.
    int wave_size = 16;
    int workers = 1;

    void validate() const;
    std::uint64_t total_target() const;
};

void to_json(json& j, const GeneratorConfig& v);
void from_json(const json& j, GeneratorConfig& v);

/// Digest of everything that affects generated output (excludes `workers`).
std::string config_digest(const GeneratorConfig& cfg);

struct QuotaState {
    std::map<std::string, std::uint64_t> scenario_counts;
    std::uint64_t total_accepted = 0;

    void record(const std::string& scenario_tag);
};

/// Picks already issued in the current round but not yet committed.
struct PendingPicks {
    std::map<std::string, std::uint64_t> per_scenario;
    std::uint64_t total = 0;

    void add(const std::string& scenario_tag);
};

/// Whether accepting one more item of `scenario_tag` keeps its share within
/// `quota`. Pending picks of the same scenario are assumed to succeed and
/// pending picks of other scenarios to fail, so a later commit can never
/// overshoot. Unconstrained until accepted + pending reaches the burn-in.
bool scenario_admissible(const std::string& scenario_tag, const QuotaState& q, double quota,
                         const PendingPicks& pending = {});

/// Uniform rejection sampling over `pool` under the scenario quota.
/// Throws `QuotaExhausted` when no scenario is admissible or 1000 draws fail.
Topic pick_topic(std::span<const Topic> pool, Rng& rng, const QuotaState& q, double quota,
                 const PendingPicks& pending = {});

NarrativeScript generate_script(const Topic& topic, const Provider& provider, const PromptTemplate& tmpl,
                                std::uint64_t nonce = 0);

ErrorSpec generate_error(const Topic& topic, ErrorCategory category, const Provider& provider,
                         const PromptTemplate& tmpl, std::uint64_t nonce = 0);

/// Throws `Precondition` when the script and error disagree on the topic.
SynthesizedPrompt synthesize_prompt(const NarrativeScript& script, const ErrorSpec& error,
                                    const Provider& provider, const PromptTemplate& tmpl,
                                    std::uint64_t nonce = 0);

struct ParsedVerdict {
    bool accepted = false;
    double renderability = 0.0;
    double salience = 0.0;
    std::string reason;
};

/// Parses `VERDICT accepted=<yes|no> renderability=<0..1> salience=<0..1> reason=<text>`
/// (case-insensitive, first matching line wins).
std::optional<ParsedVerdict> parse_verdict(std::string_view text);

/// Never throws for model behaviour: provider failures and unparseable
/// output become rejected verdicts.
JudgeVerdict judge_prompt(const SynthesizedPrompt& prompt, const GeneratorConfig& cfg, const Provider& judge,
                          const PromptTemplate& tmpl, std::uint64_t nonce = 0);

/// Generates and stores the image and assembles a pending item. Throws
/// `GenerationRefused` (or a provider error) when no image is produced.
BenchmarkItem produce_item(const SynthesizedPrompt& prompt, const Provider& image_provider,
                           const std::filesystem::path& store_dir, std::string item_id,
                           std::vector<std::string> provenance, std::uint64_t nonce = 0);

/// One stage's output for one draw, addressed by a content id.
struct StageTranscript {
    std::string id;
    std::string stage;
    std::uint64_t draw = 0;
    bool ok = true;
    json payload;
};

void to_json(json& j, const StageTranscript& v);

/// `<stage>:<16 hex>` over (stage, draw, payload).
std::string transcript_id(std::string_view stage_name, std::uint64_t draw, const json& payload);

struct StageProviders {
    ProviderHandle script;
    ProviderHandle error;
    ProviderHandle synthesis;
    ProviderHandle judge;
    ProviderHandle image;

    /// Slot configs default to mock when the generator config omits them.
    static StageProviders from_config(const GeneratorConfig& cfg, const MockScript* mock,
                                      const HttpOptions& http = {});
};

struct PipelineResult {
    BenchmarkSet set;
    PipelineStats stats;
    std::vector<StageTranscript> transcripts;
    bool completed = true;
    std::optional<std::string> warning;
};

struct PipelineIo {
    std::filesystem::path store_dir;
    /// Items are streamed here as they are committed when set.
    std::optional<std::filesystem::path> manifest;
};

/// Runs draws until every category reaches its target or the attempt budget
/// (`max_attempts_per_item` x total target) is spent. Quota or budget
/// exhaustion returns a partial result with `completed == false`.
PipelineResult run_pipeline(const GeneratorConfig& cfg, std::span<const Topic> pool,
                            const StageProviders& providers, const PipelineTemplates& templates,
                            const PipelineIo& io);

std::map<ErrorCategory, std::uint64_t> category_counts(const BenchmarkSet& set);

}  // namespace diffusyn::gen
