#include "diffusyn/discern.hpp"

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn::discern {

void to_json(json& j, const LabeledImage& v) {
    j = json{{"image", v.image}, {"truth", std::string(to_string(v.truth))}, {"source", v.source}};
}

void from_json(const json& j, LabeledImage& v) {
    j.at("image").get_to(v.image);
    const auto truth = j.at("truth").get<std::string>();
    const auto label = parse_label(truth);
    if (!label) fail(ErrorKind::Parse, "truth must be 'ai' or 'human', got '" + truth + "'");
    v.truth = *label;
    v.source = j.value("source", std::string());
}

std::vector<LabeledImage> parse_dataset(std::string_view text, std::string_view origin) {
    std::vector<LabeledImage> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        try {
            auto img = json::parse(line).get<LabeledImage>();
            if (!is_sha256_hex(img.image.digest)) fail(ErrorKind::Parse, "image digest is not SHA-256 hex");
            out.push_back(std::move(img));
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, where + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::Parse, where + e.what());
        }
    }
    return out;
}

std::vector<LabeledImage> load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_file(path), path.string());
}

std::string elicit_description(const LabeledImage& img, const PromptTemplate& tmpl, const Provider& model,
                               std::uint64_t nonce) {
    auto req = make_request(stage::kDescribe, tmpl, {}, nonce);
    req.image = img.image;
    return model.complete_text(req).text;
}

std::optional<BinaryLabel> parse_binary_answer(std::string_view text) {
    auto t = trim(text);
    while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '`')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '`' || t.back() == '.')) t.remove_suffix(1);
    t = trim(t);
    if (iequals(t, "AI")) return BinaryLabel::AiGenerated;
    if (iequals(t, "HUMAN")) return BinaryLabel::HumanGenerated;
    return std::nullopt;
}

BinaryLabel binarize(std::string_view description, const Provider& interpreter, const PromptTemplate& tmpl) {
    require(!trim(description).empty(), "description is empty");
    TemplateVars vars{{"description", std::string(description)}};
    std::string last;
    for (std::uint64_t round = 0; round < 2; ++round) {
        auto req = make_request(stage::kInterpret, tmpl, vars, round);
        last = interpreter.complete_text(req).text;
        if (auto label = parse_binary_answer(last)) return *label;
    }
    fail(ErrorKind::IndeterminateResponse, "interpreter answered '" + std::string(trim(last)).substr(0, 80) +
                                               "' twice; expected AI or HUMAN");
}

DiscernResult run_discern(std::span<const LabeledImage> dataset, const Provider& model, const Provider& interpreter,
                          const DiscernTemplates& templates, int workers) {
    require(!dataset.empty(), "discern dataset is empty");
    DiscernResult result;
    result.outcomes.resize(dataset.size());
    parallel_for(dataset.size(), workers, [&](std::size_t i) {
        auto& out = result.outcomes[i];
        try {
            out.description = elicit_description(dataset[i], templates.elicit, model);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ProviderUnavailable && e.kind() != ErrorKind::ProviderRejected) throw;
            out.outcome = Outcome::Unscored;
            out.detail = e.what();
            return;
        }
        try {
            out.predicted = binarize(out.description.empty() ? std::string("(empty response)") : out.description,
                                     interpreter, templates.interpret);
            out.outcome = Outcome::Scored;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::IndeterminateResponse && e.kind() != ErrorKind::ProviderUnavailable &&
                e.kind() != ErrorKind::ProviderRejected)
                throw;
            out.outcome = Outcome::Indeterminate;
            out.detail = e.what();
        }
    });
    // Cell-wise sums commute, so the fold order does not matter.
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& out = result.outcomes[i];
        switch (out.outcome) {
            case Outcome::Scored: result.matrix.add(dataset[i].truth, *out.predicted); break;
            case Outcome::Indeterminate: ++result.indeterminate; break;
            case Outcome::Unscored: ++result.unscored; break;
        }
    }
    return result;
}

std::vector<LabeledImage> sample_session(std::span<const LabeledImage> dataset, std::size_t n_ai,
                                         std::size_t n_human, Rng& rng) {
    std::vector<std::size_t> ai, human;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        (dataset[i].truth == BinaryLabel::AiGenerated ? ai : human).push_back(i);
    if (ai.size() < n_ai)
        fail(ErrorKind::InsufficientStratum, "stratum 'ai' has " + std::to_string(ai.size()) + " images, " +
                                                 std::to_string(n_ai) + " requested");
    if (human.size() < n_human)
        fail(ErrorKind::InsufficientStratum, "stratum 'human' has " + std::to_string(human.size()) + " images, " +
                                                 std::to_string(n_human) + " requested");
    rng.shuffle(std::span(ai));
    rng.shuffle(std::span(human));
    std::vector<std::size_t> picked(ai.begin(), ai.begin() + static_cast<std::ptrdiff_t>(n_ai));
    picked.insert(picked.end(), human.begin(), human.begin() + static_cast<std::ptrdiff_t>(n_human));
    rng.shuffle(std::span(picked));
    std::vector<LabeledImage> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(dataset[i]);
    return out;
}

}  // namespace diffusyn::discern
