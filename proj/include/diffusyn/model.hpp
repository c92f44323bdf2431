#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace diffusyn {

using json = nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kNormalizedImageSide = 512;

struct Topic {
    std::string phrase;
    std::string scenario_tag;

    bool operator==(const Topic&) const = default;
};

/// Empty when the topic is well formed.
std::vector<std::string> topic_violations(const Topic& topic);

enum class ErrorCategory { Biological, MismatchedEra, LogicalInconsistency };

inline constexpr std::array<ErrorCategory, 3> kAllCategories = {
    ErrorCategory::Biological, ErrorCategory::MismatchedEra, ErrorCategory::LogicalInconsistency};

/// Wire name: "biological", "mismatched_era", "logical_inconsistency".
std::string_view to_string(ErrorCategory category) noexcept;
/// Human-readable name injected into stage prompts.
std::string_view display_name(ErrorCategory category) noexcept;
/// Case-insensitive; accepts wire names, display names and the aliases
/// "temporal" / "logical".
std::optional<ErrorCategory> parse_category(std::string_view text);

struct NarrativeScript {
    Topic topic;
    std::string text;

    bool operator==(const NarrativeScript&) const = default;
};

struct ErrorSpec {
    Topic topic;
    ErrorCategory category = ErrorCategory::Biological;
    std::string description;

    bool operator==(const ErrorSpec&) const = default;
};

struct SynthesizedPrompt {
    NarrativeScript script;
    ErrorSpec error;
    std::string text;

    bool operator==(const SynthesizedPrompt&) const = default;
};

struct JudgeVerdict {
    bool accepted = false;
    std::string reason;
    double renderability = 0.0;
    double error_salience = 0.0;

    bool operator==(const JudgeVerdict&) const = default;
};

struct ImageRef {
    std::string digest;
    int width = 0;
    int height = 0;
    std::string media_type;

    bool operator==(const ImageRef&) const = default;
};

enum class CurationStatus { Pending, Accepted, Rejected };

std::string_view to_string(CurationStatus status) noexcept;
std::optional<CurationStatus> parse_curation_status(std::string_view text);

struct BenchmarkItem {
    std::string id;
    SynthesizedPrompt prompt;
    std::string ground_truth_error;
    ErrorCategory category = ErrorCategory::Biological;
    ImageRef image;
    std::vector<std::string> provenance;
    CurationStatus curation_status = CurationStatus::Pending;
    std::optional<std::string> curation_note;

    bool operator==(const BenchmarkItem&) const = default;
};

struct BenchmarkSet {
    int schema_version = kManifestSchemaVersion;
    std::vector<BenchmarkItem> items;
    std::string generator_config_digest;
    std::string topic_pool_digest;

    bool operator==(const BenchmarkSet&) const = default;
};

struct PipelineStats {
    std::uint64_t attempts = 0;
    std::uint64_t accepted = 0;
    std::map<std::string, std::uint64_t> rejections;
    std::map<std::string, std::uint64_t> scenario_counts;

    std::uint64_t rejected() const;
    bool operator==(const PipelineStats&) const = default;
};

/// Violations of the BenchmarkItem invariants; empty iff the item is valid.
std::vector<std::string> validate_item(const BenchmarkItem& item);

/// Item invariants plus set-level ones (unique ids, schema version, digests).
std::vector<std::string> validate_set(const BenchmarkSet& set);

void to_json(json& j, const Topic& v);
void from_json(const json& j, Topic& v);
void to_json(json& j, const NarrativeScript& v);
void from_json(const json& j, NarrativeScript& v);
void to_json(json& j, const ErrorSpec& v);
void from_json(const json& j, ErrorSpec& v);
void to_json(json& j, const SynthesizedPrompt& v);
void from_json(const json& j, SynthesizedPrompt& v);
void to_json(json& j, const JudgeVerdict& v);
void from_json(const json& j, JudgeVerdict& v);
void to_json(json& j, const ImageRef& v);
void from_json(const json& j, ImageRef& v);
void to_json(json& j, const BenchmarkItem& v);
void from_json(const json& j, BenchmarkItem& v);
void to_json(json& j, const PipelineStats& v);
void from_json(const json& j, PipelineStats& v);
void to_json(json& j, ErrorCategory v);
void from_json(const json& j, ErrorCategory& v);

}  // namespace diffusyn
