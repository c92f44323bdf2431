#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "diffusyn/model.hpp"

namespace diffusyn {

/// Positive class is AI-generated.
enum class BinaryLabel { AiGenerated, HumanGenerated };

std::string_view to_string(BinaryLabel label) noexcept;  // "ai" | "human"
std::optional<BinaryLabel> parse_label(std::string_view text);

/// Rows are the actual label, columns the prediction.
struct ConfusionMatrix {
    std::uint64_t tp = 0;   // actual AI, predicted AI
    std::uint64_t fn_ = 0;  // actual AI, predicted human
    std::uint64_t fp = 0;   // actual human, predicted AI
    std::uint64_t tn = 0;   // actual human, predicted human

    std::uint64_t total() const { return tp + fn_ + fp + tn; }
    void add(BinaryLabel actual, BinaryLabel predicted);

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;
};

void to_json(json& j, const ConfusionMatrix& v);
void from_json(const json& j, ConfusionMatrix& v);

}  // namespace diffusyn
