#include "diffusyn/model.hpp"

#include <cctype>
#include <numeric>
#include <unordered_set>

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/ulid.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

std::vector<std::string> topic_violations(const Topic& topic) {
    std::vector<std::string> out;
    if (trim(topic.phrase).empty()) out.emplace_back("topic phrase is empty");
    if (topic.scenario_tag.empty()) {
        out.emplace_back("scenario_tag is empty");
    } else {
        for (char c : topic.scenario_tag) {
            if (std::isspace(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) {
                out.push_back("scenario_tag '" + topic.scenario_tag + "' must be lowercase without whitespace");
                break;
            }
        }
    }
    return out;
}

std::string_view to_string(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::Biological: return "biological";
        case ErrorCategory::MismatchedEra: return "mismatched_era";
        case ErrorCategory::LogicalInconsistency: return "logical_inconsistency";
    }
    return "biological";
}

std::string_view display_name(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::Biological: return "Biological Error";
        case ErrorCategory::MismatchedEra: return "Mismatched Era";
        case ErrorCategory::LogicalInconsistency: return "Logical Inconsistency";
    }
    return "Biological Error";
}

std::optional<ErrorCategory> parse_category(std::string_view text) {
    std::string key;
    for (char c : trim(text)) {
        if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
    }
    if (key == "biological" || key == "biologicalerror" || key == "biologicalerrors") return ErrorCategory::Biological;
    if (key == "mismatchedera" || key == "mismatchederas" || key == "temporal" || key == "temporalerror")
        return ErrorCategory::MismatchedEra;
    if (key == "logicalinconsistency" || key == "logicalinconsistencies" || key == "logical" ||
        key == "logicalerror")
        return ErrorCategory::LogicalInconsistency;
    return std::nullopt;
}

std::string_view to_string(CurationStatus status) noexcept {
    switch (status) {
        case CurationStatus::Pending: return "pending";
        case CurationStatus::Accepted: return "accepted";
        case CurationStatus::Rejected: return "rejected";
    }
    return "pending";
}

std::optional<CurationStatus> parse_curation_status(std::string_view text) {
    const auto t = to_lower(trim(text));
    if (t == "pending") return CurationStatus::Pending;
    if (t == "accepted") return CurationStatus::Accepted;
    if (t == "rejected") return CurationStatus::Rejected;
    return std::nullopt;
}

std::uint64_t PipelineStats::rejected() const {
    return std::accumulate(rejections.begin(), rejections.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

std::vector<std::string> validate_item(const BenchmarkItem& item) {
    std::vector<std::string> out;
    const std::string who = "item " + (item.id.empty() ? std::string("<no id>") : item.id) + ": ";
    if (!is_ulid(item.id)) out.push_back(who + "id is not a ULID");
    if (item.category != item.prompt.error.category) {
        out.push_back(who + "category " + std::string(to_string(item.category)) + " != prompt.error.category " +
                      std::string(to_string(item.prompt.error.category)));
    }
    if (item.ground_truth_error != item.prompt.error.description)
        out.push_back(who + "ground_truth_error differs from prompt.error.description");
    if (trim(item.prompt.text).empty()) out.push_back(who + "prompt text is empty");
    if (trim(item.prompt.script.text).empty()) out.push_back(who + "script text is empty");
    if (trim(item.prompt.error.description).empty()) out.push_back(who + "error description is empty");
    if (item.prompt.script.topic != item.prompt.error.topic) out.push_back(who + "script and error topics differ");
    for (const auto& v : topic_violations(item.prompt.script.topic)) out.push_back(who + v);
    if (!is_sha256_hex(item.image.digest)) out.push_back(who + "image digest is not 64 lowercase hex chars");
    if (item.image.width != kNormalizedImageSide || item.image.height != kNormalizedImageSide)
        out.push_back(who + "image is " + std::to_string(item.image.width) + "x" + std::to_string(item.image.height) +
                      ", expected 512x512");
    if (item.image.media_type.empty()) out.push_back(who + "image media_type is empty");
    return out;
}

std::vector<std::string> validate_set(const BenchmarkSet& set) {
    std::vector<std::string> out;
    if (set.schema_version != kManifestSchemaVersion)
        out.push_back("schema_version " + std::to_string(set.schema_version) + " is not supported");
    if (!is_sha256_hex(set.generator_config_digest)) out.emplace_back("generator_config_digest is not SHA-256 hex");
    if (!is_sha256_hex(set.topic_pool_digest)) out.emplace_back("topic_pool_digest is not SHA-256 hex");
    std::unordered_set<std::string> seen;
    for (const auto& item : set.items) {
        if (!seen.insert(item.id).second) out.push_back("duplicate item id " + item.id);
        for (auto& v : validate_item(item)) out.push_back(std::move(v));
    }
    return out;
}

// --- JSON ---------------------------------------------------------------

void to_json(json& j, ErrorCategory v) { j = std::string(to_string(v)); }

void from_json(const json& j, ErrorCategory& v) {
    const auto parsed = parse_category(j.get<std::string>());
    if (!parsed) fail(ErrorKind::Parse, "unknown error category '" + j.get<std::string>() + "'");
    v = *parsed;
}

void to_json(json& j, const Topic& v) { j = json{{"phrase", v.phrase}, {"scenario_tag", v.scenario_tag}}; }

void from_json(const json& j, Topic& v) {
    j.at("phrase").get_to(v.phrase);
    j.at("scenario_tag").get_to(v.scenario_tag);
}

void to_json(json& j, const NarrativeScript& v) { j = json{{"topic", v.topic}, {"text", v.text}}; }

void from_json(const json& j, NarrativeScript& v) {
    j.at("topic").get_to(v.topic);
    j.at("text").get_to(v.text);
}

void to_json(json& j, const ErrorSpec& v) {
    j = json{{"topic", v.topic}, {"category", v.category}, {"description", v.description}};
}

void from_json(const json& j, ErrorSpec& v) {
    j.at("topic").get_to(v.topic);
    j.at("category").get_to(v.category);
    j.at("description").get_to(v.description);
}

void to_json(json& j, const SynthesizedPrompt& v) {
    j = json{{"script", v.script}, {"error", v.error}, {"text", v.text}};
}

void from_json(const json& j, SynthesizedPrompt& v) {
    j.at("script").get_to(v.script);
    j.at("error").get_to(v.error);
    j.at("text").get_to(v.text);
}

void to_json(json& j, const JudgeVerdict& v) {
    j = json{{"accepted", v.accepted},
             {"reason", v.reason},
             {"renderability", v.renderability},
             {"error_salience", v.error_salience}};
}

void from_json(const json& j, JudgeVerdict& v) {
    j.at("accepted").get_to(v.accepted);
    j.at("reason").get_to(v.reason);
    j.at("renderability").get_to(v.renderability);
    j.at("error_salience").get_to(v.error_salience);
}

void to_json(json& j, const ImageRef& v) {
    j = json{{"digest", v.digest}, {"width", v.width}, {"height", v.height}, {"media_type", v.media_type}};
}

void from_json(const json& j, ImageRef& v) {
    j.at("digest").get_to(v.digest);
    j.at("width").get_to(v.width);
    j.at("height").get_to(v.height);
    j.at("media_type").get_to(v.media_type);
}

void to_json(json& j, const BenchmarkItem& v) {
    j = json{{"id", v.id},
             {"prompt", v.prompt},
             {"ground_truth_error", v.ground_truth_error},
             {"category", v.category},
             {"image", v.image},
             {"provenance", v.provenance},
             {"curation_status", std::string(to_string(v.curation_status))}};
    if (v.curation_note) j["curation_note"] = *v.curation_note;
}

void from_json(const json& j, BenchmarkItem& v) {
    j.at("id").get_to(v.id);
    j.at("prompt").get_to(v.prompt);
    j.at("ground_truth_error").get_to(v.ground_truth_error);
    j.at("category").get_to(v.category);
    j.at("image").get_to(v.image);
    j.at("provenance").get_to(v.provenance);
    const auto status = j.at("curation_status").get<std::string>();
    const auto parsed = parse_curation_status(status);
    if (!parsed) fail(ErrorKind::Parse, "unknown curation_status '" + status + "'");
    v.curation_status = *parsed;
    if (auto it = j.find("curation_note"); it != j.end() && !it->is_null()) {
        v.curation_note = it->get<std::string>();
    } else {
        v.curation_note.reset();
    }
}

void to_json(json& j, const PipelineStats& v) {
    j = json{{"attempts", v.attempts},
             {"accepted", v.accepted},
             {"rejections", v.rejections},
             {"scenario_counts", v.scenario_counts}};
}

void from_json(const json& j, PipelineStats& v) {
    j.at("attempts").get_to(v.attempts);
    j.at("accepted").get_to(v.accepted);
    j.at("rejections").get_to(v.rejections);
    j.at("scenario_counts").get_to(v.scenario_counts);
}

}  // namespace diffusyn
