#include "diffusyn/topic_pool.hpp"

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

std::vector<Topic> parse_topic_pool(std::string_view text, std::string_view origin) {
    std::vector<Topic> pool;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        if (tab == std::string_view::npos) fail(ErrorKind::Parse, where + "expected scenario_tag<TAB>phrase");
        Topic t{std::string(trim(line.substr(tab + 1))), std::string(trim(line.substr(0, tab)))};
        if (const auto v = topic_violations(t); !v.empty()) fail(ErrorKind::Parse, where + v.front());
        pool.push_back(std::move(t));
    }
    return pool;
}

std::vector<Topic> load_topic_pool(const std::filesystem::path& path) {
    return parse_topic_pool(read_file(path), path.string());
}

std::string topic_pool_digest(const std::vector<Topic>& pool) {
    std::string canon;
    for (const auto& t : pool) {
        canon += t.scenario_tag;
        canon += '\t';
        canon += t.phrase;
        canon += '\n';
    }
    return sha256_hex(canon);
}

}  // namespace diffusyn
