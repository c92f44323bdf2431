#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace diffusyn {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// A stage prompt. Template files hold an optional system part, a line
/// containing only `---`, then the user part. `{name}` placeholders are
/// substituted at render time; `{{` and `}}` emit literal braces.
struct PromptTemplate {
    std::string system;
    std::string user;

    static PromptTemplate parse(std::string_view text);
    static PromptTemplate load(const std::filesystem::path& path);
};

/// Throws `Config` when a placeholder has no value.
std::string render_template(std::string_view text, const TemplateVars& vars);

struct PipelineTemplates {
    PromptTemplate script;
    PromptTemplate error;
    PromptTemplate synthesis;
    PromptTemplate judge;

    static PipelineTemplates load(const std::filesystem::path& dir);
};

struct DiscernTemplates {
    PromptTemplate elicit;
    PromptTemplate interpret;

    static DiscernTemplates load(const std::filesystem::path& dir);
};

struct EvalTemplates {
    PromptTemplate respond;
    PromptTemplate score;

    static EvalTemplates load(const std::filesystem::path& dir);
};

}  // namespace diffusyn
