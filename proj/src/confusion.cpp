#include "diffusyn/confusion.hpp"

#include "diffusyn/util.hpp"

namespace diffusyn {

std::string_view to_string(BinaryLabel label) noexcept {
    return label == BinaryLabel::AiGenerated ? "ai" : "human";
}

std::optional<BinaryLabel> parse_label(std::string_view text) {
    const auto t = to_lower(trim(text));
    if (t == "ai" || t == "ai-generated" || t == "ai_generated") return BinaryLabel::AiGenerated;
    if (t == "human" || t == "human-generated" || t == "human_generated") return BinaryLabel::HumanGenerated;
    return std::nullopt;
}

void ConfusionMatrix::add(BinaryLabel actual, BinaryLabel predicted) {
    const bool actual_ai = actual == BinaryLabel::AiGenerated;
    const bool predicted_ai = predicted == BinaryLabel::AiGenerated;
    if (actual_ai && predicted_ai) ++tp;
    else if (actual_ai) ++fn_;
    else if (predicted_ai) ++fp;
    else ++tn;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fn_ += o.fn_;
    fp += o.fp;
    tn += o.tn;
    return *this;
}

void to_json(json& j, const ConfusionMatrix& v) {
    j = json{{"tp", v.tp}, {"fn", v.fn_}, {"fp", v.fp}, {"tn", v.tn}};
}

void from_json(const json& j, ConfusionMatrix& v) {
    auto count = [&](const char* key) {
        const auto n = j.at(key).get<std::int64_t>();
        if (n < 0) throw json::other_error::create(501, std::string("negative count for ") + key, &j);
        return static_cast<std::uint64_t>(n);
    };
    v.tp = count("tp");
    v.fn_ = count("fn");
    v.fp = count("fp");
    v.tn = count("tn");
}

}  // namespace diffusyn
