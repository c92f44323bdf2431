#include "diffusyn/templates.hpp"

#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

PromptTemplate PromptTemplate::parse(std::string_view text) {
    PromptTemplate t;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        if (trim(text.substr(pos, end - pos)) == "---") {
            t.system = std::string(trim(text.substr(0, pos)));
            t.user = std::string(trim(nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1)));
            return t;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    t.user = std::string(trim(text));
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    auto t = parse(read_file(path));
    if (t.user.empty()) fail(ErrorKind::Config, "template " + path.string() + " has an empty user prompt");
    return t;
}

std::string render_template(std::string_view text, const TemplateVars& vars) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            ++i;
        } else if (c == '{') {
            const auto close = text.find('}', i);
            if (close == std::string_view::npos) fail(ErrorKind::Config, "unterminated placeholder in template");
            const auto name = text.substr(i + 1, close - i - 1);
            const auto it = vars.find(name);
            if (it == vars.end()) fail(ErrorKind::Config, "template placeholder {" + std::string(name) + "} has no value");
            out += it->second;
            i = close;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

PipelineTemplates PipelineTemplates::load(const std::filesystem::path& dir) {
    return {PromptTemplate::load(dir / "script.txt"), PromptTemplate::load(dir / "error.txt"),
            PromptTemplate::load(dir / "synthesis.txt"), PromptTemplate::load(dir / "judge.txt")};
}

DiscernTemplates DiscernTemplates::load(const std::filesystem::path& dir) {
    return {PromptTemplate::load(dir / "discern" / "elicit.txt"),
            PromptTemplate::load(dir / "discern" / "interpret.txt")};
}

EvalTemplates EvalTemplates::load(const std::filesystem::path& dir) {
    return {PromptTemplate::load(dir / "eval" / "respond.txt"), PromptTemplate::load(dir / "eval" / "score.txt")};
}

}  // namespace diffusyn
