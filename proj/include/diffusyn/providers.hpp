#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diffusyn/model.hpp"
#include "diffusyn/templates.hpp"

namespace diffusyn {

/// Provider slot names. Each pipeline stage owns one slot.
namespace stage {
inline constexpr std::string_view kTopic = "topic";
inline constexpr std::string_view kScript = "script";
inline constexpr std::string_view kError = "error";
inline constexpr std::string_view kSynthesis = "synthesis";
inline constexpr std::string_view kJudge = "judge";
inline constexpr std::string_view kImage = "image";
inline constexpr std::string_view kDescribe = "describe";
inline constexpr std::string_view kInterpret = "interpret";
inline constexpr std::string_view kRespond = "respond";
inline constexpr std::string_view kScore = "score";
}  // namespace stage

inline constexpr int kMaxRetriesLimit = 10;

struct ProviderConfig {
    std::string provider_id = "mock";
    std::string endpoint = "mock";  // URL, or "mock"
    std::string model_name = "mock";
    double temperature = 0.0;
    int max_retries = 3;
    double timeout_seconds = 60.0;
    double backoff_base_seconds = 0.5;

    bool is_mock() const { return endpoint == "mock"; }
    void validate() const;
    bool operator==(const ProviderConfig&) const = default;
};

void to_json(json& j, const ProviderConfig& v);
void from_json(const json& j, ProviderConfig& v);

struct TextRequest {
    std::string stage;
    std::string system_prompt;
    std::string user_prompt;
    std::optional<ImageRef> image;
    /// Template inputs. Mock providers synthesize from these; the HTTP
    /// adapter only sends the rendered prompts.
    TemplateVars vars;
    /// Distinguishes repeated identical requests (draw index, retry round).
    std::uint64_t nonce = 0;
};

/// Content digest of a request: system prompt, user prompt, image digest.
/// Keys mock stage tables.
std::string input_digest(const TextRequest& request);

struct TextResponse {
    std::string text;
    std::string provider_id;
    int attempt_count = 1;
};

struct ImageRequest {
    std::string prompt;
    std::uint64_t nonce = 0;
};

class Provider {
public:
    virtual ~Provider() = default;

    virtual const ProviderConfig& config() const = 0;

    /// Retries transient failures up to `max_retries`. Throws
    /// `ProviderUnavailable` when retries run out and `ProviderRejected` on
    /// an application-level refusal.
    virtual TextResponse complete_text(const TextRequest& request) const = 0;

    /// Returns a stored, normalized image. A refusal throws
    /// `GenerationRefused` and is not retried.
    virtual ImageRef generate_image(const ImageRequest& request,
                                    const std::filesystem::path& store_dir) const = 0;
};

using ProviderHandle = std::shared_ptr<const Provider>;

struct WeightedOutput {
    std::string text;
    double weight = 1.0;

    bool operator==(const WeightedOutput&) const = default;
};

std::vector<std::string> default_interpreter_keywords();

/// Behaviour table for offline providers.
///
/// Lookup order for a text request: `stage_tables[(stage, input_digest)]`,
/// then `stage_tables[(stage, "*")]`, then a weighted draw from
/// `stage_choices[stage]`, then a synthetic reply derived from the request.
/// `failure_rates` are per-attempt transient failures for text stages and
/// refusal probabilities for the image stage.
struct MockScript {
    std::uint64_t seed = 0;
    std::map<std::pair<std::string, std::string>, std::string> stage_tables;
    std::map<std::string, double> failure_rates;
    std::map<std::string, std::vector<WeightedOutput>> stage_choices;
    std::vector<std::string> interpreter_keywords = default_interpreter_keywords();

    void validate() const;
    bool operator==(const MockScript&) const = default;
};

void to_json(json& j, const MockScript& v);
void from_json(const json& j, MockScript& v);

using Sleeper = std::function<void(std::chrono::duration<double>)>;

struct HttpOptions {
    /// Where vision requests read image bytes and generated images are stored.
    std::filesystem::path image_store;
    /// Bearer credential; when empty, read from `DIFFUSYN_API_KEY_<PROVIDER_ID>`.
    std::string api_key;
    Sleeper sleeper;  // defaults to std::this_thread::sleep_for
};

ProviderHandle make_mock(MockScript script, ProviderConfig cfg = {});
ProviderHandle make_http_provider(ProviderConfig cfg, HttpOptions options = {});

/// Mock when `cfg.endpoint == "mock"` (requires `mock`), HTTP otherwise.
ProviderHandle make_provider(const ProviderConfig& cfg, const MockScript* mock, const HttpOptions& options = {});

/// `DIFFUSYN_API_KEY_` + provider id upper-cased, non-alphanumerics as `_`.
std::string api_key_env_var(std::string_view provider_id);

/// Full-jitter exponential backoff: uniform in [0, base * 2^(retry-1)].
std::chrono::duration<double> backoff_delay(const ProviderConfig& cfg, int retry, double unit_draw);

/// Builds a request from a template and its variables.
TextRequest make_request(std::string_view stage, const PromptTemplate& tmpl, TemplateVars vars,
                         std::uint64_t nonce = 0);

/// Mock judge contract: 10 on an exact normalized match, 0 when the
/// content-word sets are disjoint, otherwise round(10 x Jaccard) clamped to
/// [1, 9].
int mock_overlap_score(std::string_view ground_truth, std::string_view response);

/// Synthetic placeholder used by the mock image stage: a pure function of
/// (seed, prompt digest).
struct Raster;
Raster mock_placeholder_image(std::uint64_t seed, std::string_view prompt);

}  // namespace diffusyn
