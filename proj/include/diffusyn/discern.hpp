#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffusyn/confusion.hpp"
#include "diffusyn/model.hpp"
#include "diffusyn/providers.hpp"
#include "diffusyn/rng.hpp"
#include "diffusyn/templates.hpp"

namespace diffusyn::discern {

struct LabeledImage {
    ImageRef image;
    BinaryLabel truth = BinaryLabel::AiGenerated;
    std::string source;

    bool operator==(const LabeledImage&) const = default;
};

void to_json(json& j, const LabeledImage& v);
void from_json(const json& j, LabeledImage& v);

/// JSON Lines dataset listing, `truth` is "ai" or "human".
std::vector<LabeledImage> parse_dataset(std::string_view text, std::string_view origin = "<memory>");
std::vector<LabeledImage> load_dataset(const std::filesystem::path& path);

/// Free-text description of the image's anomalies, returned verbatim.
std::string elicit_description(const LabeledImage& img, const PromptTemplate& tmpl, const Provider& model,
                               std::uint64_t nonce = 0);

/// Accepts exactly "AI" or "HUMAN" (case-insensitive, surrounding
/// whitespace, quotes and a trailing period tolerated).
std::optional<BinaryLabel> parse_binary_answer(std::string_view text);

/// Asks the interpreter for AI / HUMAN, retrying once. Throws
/// `IndeterminateResponse` when both answers are unusable.
BinaryLabel binarize(std::string_view description, const Provider& interpreter, const PromptTemplate& tmpl);

enum class Outcome { Scored, Indeterminate, Unscored };

struct ImageOutcome {
    Outcome outcome = Outcome::Scored;
    std::optional<BinaryLabel> predicted;
    std::string description;
    std::string detail;
};

struct DiscernResult {
    ConfusionMatrix matrix;
    std::uint64_t indeterminate = 0;
    /// Elicitation failed (provider error); excluded like indeterminates.
    std::uint64_t unscored = 0;
    std::vector<ImageOutcome> outcomes;  // parallel to the dataset

    std::uint64_t processed() const { return matrix.total() + indeterminate + unscored; }
};

DiscernResult run_discern(std::span<const LabeledImage> dataset, const Provider& model,
                          const Provider& interpreter, const DiscernTemplates& templates, int workers = 1);

/// Stratified sample without replacement, shuffled. Throws
/// `InsufficientStratum` naming the short stratum.
std::vector<LabeledImage> sample_session(std::span<const LabeledImage> dataset, std::size_t n_ai,
                                         std::size_t n_human, Rng& rng);

}  // namespace diffusyn::discern
