#include "diffusyn/providers.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <unordered_map>
#include <thread>

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/image_store.hpp"
#include "diffusyn/rng.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

// --- config -------------------------------------------------------------

void ProviderConfig::validate() const {
    if (provider_id.empty()) fail(ErrorKind::Config, "provider_id is empty");
    if (endpoint.empty()) fail(ErrorKind::Config, "provider " + provider_id + ": endpoint is empty");
    if (!(temperature >= 0.0)) fail(ErrorKind::Config, "provider " + provider_id + ": temperature must be >= 0");
    if (max_retries < 0 || max_retries > kMaxRetriesLimit)
        fail(ErrorKind::Config, "provider " + provider_id + ": max_retries must be in [0, 10]");
    if (!(timeout_seconds > 0.0)) fail(ErrorKind::Config, "provider " + provider_id + ": timeout must be > 0");
    if (!(backoff_base_seconds >= 0.0))
        fail(ErrorKind::Config, "provider " + provider_id + ": backoff base must be >= 0");
}

void to_json(json& j, const ProviderConfig& v) {
    j = json{{"provider_id", v.provider_id},         {"endpoint", v.endpoint},
             {"model_name", v.model_name},           {"temperature", v.temperature},
             {"max_retries", v.max_retries},         {"timeout", v.timeout_seconds},
             {"backoff_base", v.backoff_base_seconds}};
}

void from_json(const json& j, ProviderConfig& v) {
    ProviderConfig d;
    v.provider_id = j.value("provider_id", d.provider_id);
    v.endpoint = j.value("endpoint", d.endpoint);
    v.model_name = j.value("model_name", d.model_name);
    v.temperature = j.value("temperature", d.temperature);
    v.max_retries = j.value("max_retries", d.max_retries);
    v.timeout_seconds = j.value("timeout", d.timeout_seconds);
    v.backoff_base_seconds = j.value("backoff_base", d.backoff_base_seconds);
}

std::string input_digest(const TextRequest& request) {
    std::string key = request.system_prompt;
    key.push_back('\0');
    key += request.user_prompt;
    key.push_back('\0');
    if (request.image) key += request.image->digest;
    return sha256_hex(key);
}

std::string api_key_env_var(std::string_view provider_id) {
    std::string name = "DIFFUSYN_API_KEY_";
    for (char c : provider_id) {
        const auto u = static_cast<unsigned char>(c);
        name.push_back(std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_');
    }
    return name;
}

std::chrono::duration<double> backoff_delay(const ProviderConfig& cfg, int retry, double unit_draw) {
    const double cap = cfg.backoff_base_seconds * std::ldexp(1.0, std::max(0, retry - 1));
    return std::chrono::duration<double>(std::clamp(unit_draw, 0.0, 1.0) * cap);
}

TextRequest make_request(std::string_view stage, const PromptTemplate& tmpl, TemplateVars vars, std::uint64_t nonce) {
    TextRequest req;
    req.stage = std::string(stage);
    req.system_prompt = render_template(tmpl.system, vars);
    req.user_prompt = render_template(tmpl.user, vars);
    req.vars = std::move(vars);
    req.nonce = nonce;
    require(!trim(req.user_prompt).empty(), std::string(stage) + " request has an empty user prompt");
    return req;
}

// --- mock ---------------------------------------------------------------

std::vector<std::string> default_interpreter_keywords() {
    return {"anatomically incorrect", "extra fingers", "impossible lighting", "artifact",
            "distorted",              "unnatural",     "melted",              "garbled text"};
}

void MockScript::validate() const {
    for (const auto& [stage_name, p] : failure_rates) {
        if (!(p >= 0.0 && p <= 1.0))
            fail(ErrorKind::Config, "mock failure rate for '" + stage_name + "' must be in [0, 1]");
    }
    for (const auto& [stage_name, choices] : stage_choices) {
        double sum = 0.0;
        for (const auto& c : choices) {
            if (!(c.weight >= 0.0)) fail(ErrorKind::Config, "mock choice weight for '" + stage_name + "' is negative");
            sum += c.weight;
        }
        if (!choices.empty() && !(sum > 0.0))
            fail(ErrorKind::Config, "mock choices for '" + stage_name + "' have zero total weight");
    }
}

void to_json(json& j, const MockScript& v) {
    json tables = json::array();
    for (const auto& [key, out] : v.stage_tables)
        tables.push_back({{"stage", key.first}, {"input_digest", key.second}, {"output", out}});
    json choices = json::object();
    for (const auto& [stage_name, list] : v.stage_choices) {
        json arr = json::array();
        for (const auto& c : list) arr.push_back({{"text", c.text}, {"weight", c.weight}});
        choices[stage_name] = std::move(arr);
    }
    j = json{{"seed", v.seed},
             {"stage_tables", std::move(tables)},
             {"failure_rates", v.failure_rates},
             {"stage_choices", std::move(choices)},
             {"interpreter_keywords", v.interpreter_keywords}};
}

void from_json(const json& j, MockScript& v) {
    v = MockScript{};
    v.seed = j.value("seed", std::uint64_t{0});
    if (auto it = j.find("stage_tables"); it != j.end()) {
        for (const auto& e : *it)
            v.stage_tables[{e.at("stage").get<std::string>(), e.value("input_digest", std::string("*"))}] =
                e.at("output").get<std::string>();
    }
    if (auto it = j.find("failure_rates"); it != j.end()) it->get_to(v.failure_rates);
    if (auto it = j.find("stage_choices"); it != j.end()) {
        for (const auto& [stage_name, arr] : it->items()) {
            auto& list = v.stage_choices[stage_name];
            for (const auto& c : arr) {
                if (c.is_string()) {
                    list.push_back({c.get<std::string>(), 1.0});
                } else {
                    list.push_back({c.at("text").get<std::string>(), c.value("weight", 1.0)});
                }
            }
        }
    }
    if (auto it = j.find("interpreter_keywords"); it != j.end()) it->get_to(v.interpreter_keywords);
    v.validate();
}

namespace {

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a",  "an", "and", "are", "as",  "at",   "be",   "by",  "for", "from", "has", "in",
        "is", "it", "its", "of",  "on",  "or",   "that", "the", "to",  "was",  "with", "this"};
    return words;
}

std::set<std::string> content_words(std::string_view s) {
    std::set<std::string> out;
    for (auto& t : tokenize(s)) {
        if (!stopwords().contains(t)) out.insert(std::move(t));
    }
    return out;
}

std::string joined_tokens(std::string_view s) {
    std::string out;
    for (const auto& t : tokenize(s)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

std::string var_or(const TemplateVars& vars, std::string_view key, std::string_view fallback) {
    const auto it = vars.find(key);
    return it == vars.end() ? std::string(fallback) : it->second;
}

std::string fixed2(double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

int mock_overlap_score(std::string_view ground_truth, std::string_view response) {
    const auto a = joined_tokens(ground_truth);
    if (!a.empty() && a == joined_tokens(response)) return 10;
    const auto wa = content_words(ground_truth);
    const auto wb = content_words(response);
    std::size_t common = 0;
    for (const auto& w : wa) common += wb.count(w);
    if (common == 0) return 0;
    const double jaccard = static_cast<double>(common) / static_cast<double>(wa.size() + wb.size() - common);
    return static_cast<int>(std::clamp(std::lround(10.0 * jaccard), 1L, 9L));
}

Raster mock_placeholder_image(std::uint64_t seed, std::string_view prompt) {
    auto rng = Rng::named(seed, {"pixels", sha256_hex(prompt)});
    std::uint8_t base[3], stripe[3];
    for (auto& c : base) c = static_cast<std::uint8_t>(rng.uniform_index(256));
    for (auto& c : stripe) c = static_cast<std::uint8_t>(rng.uniform_index(256));
    const int period = 8 + static_cast<int>(rng.uniform_index(32));
    const int dx = 1 + static_cast<int>(rng.uniform_index(3));
    const int dy = static_cast<int>(rng.uniform_index(3));

    Raster r;
    r.width = kNormalizedImageSide;
    r.height = kNormalizedImageSide;
    r.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const auto* src = ((x * dx + y * dy) / period) % 2 ? stripe : base;
            std::copy(src, src + 3, r.pixel(x, y));
        }
    }
    return r;
}

namespace {

class MockProvider final : public Provider {
public:
    MockProvider(MockScript script, ProviderConfig cfg) : script_(std::move(script)), cfg_(std::move(cfg)) {
        script_.validate();
        cfg_.validate();
    }

    const ProviderConfig& config() const override { return cfg_; }

    TextResponse complete_text(const TextRequest& request) const override {
        require(!request.user_prompt.empty(), "text request has an empty user prompt");
        const auto digest = input_digest(request);
        const double p = failure_rate(request.stage);
        const auto nonce = std::to_string(request.nonce);
        const int max_attempts = cfg_.max_retries + 1;
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (p > 0.0) {
                auto rng = Rng::named(script_.seed, {"fail", request.stage, digest, nonce, std::to_string(attempt)});
                if (rng.bernoulli(p)) continue;
            }
            return {output(request, digest), cfg_.provider_id, attempt};
        }
        fail(ErrorKind::ProviderUnavailable, "provider " + cfg_.provider_id + " unavailable for stage '" +
                                                 request.stage + "' after " + std::to_string(max_attempts) +
                                                 " attempts");
    }

    ImageRef generate_image(const ImageRequest& request, const std::filesystem::path& store_dir) const override {
        require(!trim(request.prompt).empty(), "image prompt is empty");
        const double p = failure_rate(std::string(stage::kImage));
        if (p > 0.0) {
            auto rng = Rng::named(script_.seed, {"refuse", sha256_hex(request.prompt), std::to_string(request.nonce)});
            if (rng.bernoulli(p))
                fail(ErrorKind::GenerationRefused, "provider " + cfg_.provider_id + " refused the image prompt");
        }
        const auto key = store_dir.string() + '\n' + request.prompt;
        {
            std::lock_guard lock(cache_mutex_);
            if (auto it = rendered_.find(key);
                it != rendered_.end() && std::filesystem::exists(image_path(store_dir, it->second.digest)))
                return it->second;
        }
        auto ref = store_raster(mock_placeholder_image(script_.seed, request.prompt), store_dir);
        std::lock_guard lock(cache_mutex_);
        rendered_.emplace(key, ref);
        return ref;
    }

private:
    double failure_rate(const std::string& stage_name) const {
        const auto it = script_.failure_rates.find(stage_name);
        return it == script_.failure_rates.end() ? 0.0 : it->second;
    }

    std::string output(const TextRequest& req, const std::string& digest) const {
        if (auto it = script_.stage_tables.find({req.stage, digest}); it != script_.stage_tables.end())
            return it->second;
        if (auto it = script_.stage_tables.find({req.stage, "*"}); it != script_.stage_tables.end())
            return it->second;
        if (auto it = script_.stage_choices.find(req.stage); it != script_.stage_choices.end() && !it->second.empty())
            return choose(it->second, req, digest);
        return synthesize(req, digest);
    }

    std::string choose(const std::vector<WeightedOutput>& choices, const TextRequest& req,
                       const std::string& digest) const {
        double total = 0.0;
        for (const auto& c : choices) total += c.weight;
        auto rng = Rng::named(script_.seed, {"choice", req.stage, digest, std::to_string(req.nonce)});
        double u = rng.uniform01() * total;
        for (const auto& c : choices) {
            if (u < c.weight) return c.text;
            u -= c.weight;
        }
        return choices.back().text;
    }

    std::string synthesize(const TextRequest& req, const std::string& digest) const {
        const std::string ref = digest.substr(0, 12);
        const auto& v = req.vars;
        if (req.stage == stage::kScript) {
            return "A detailed scene showing " + var_or(v, "topic", "an everyday place") +
                   ", rendered with natural light. Ref " + ref + ".";
        }
        if (req.stage == stage::kError) {
            return "A deliberate " + to_lower(var_or(v, "category", "logical")) + " flaw in the scene of " +
                   var_or(v, "topic", "an everyday place") + ". Ref " + ref + ".";
        }
        if (req.stage == stage::kSynthesis) {
            return var_or(v, "script", "A scene " + ref + ".") + " The picture must also show: " +
                   var_or(v, "error", "a flaw");
        }
        if (req.stage == stage::kJudge) {
            auto rng = Rng::named(script_.seed, {"judge", digest, std::to_string(req.nonce)});
            const double render = 0.55 + 0.45 * rng.uniform01();
            const double salience = 0.45 + 0.55 * rng.uniform01();
            return "VERDICT accepted=yes renderability=" + fixed2(render) + " salience=" + fixed2(salience) +
                   " reason=mock judge " + ref;
        }
        if (req.stage == stage::kDescribe) {
            return "The picture shows a coherent scene with consistent perspective and plausible detail. Ref " + ref +
                   ".";
        }
        if (req.stage == stage::kInterpret) {
            const auto text = to_lower(var_or(v, "description", req.user_prompt));
            for (const auto& kw : script_.interpreter_keywords) {
                if (!kw.empty() && text.find(to_lower(kw)) != std::string::npos) return "AI";
            }
            return "HUMAN";
        }
        if (req.stage == stage::kRespond) {
            return "Nothing unusual stands out in this picture. Ref " + ref + ".";
        }
        if (req.stage == stage::kScore) {
            return std::to_string(mock_overlap_score(var_or(v, "ground_truth", ""), var_or(v, "response", "")));
        }
        return "synthetic " + req.stage + " output " + digest.substr(0, 16);
    }

    MockScript script_;
    ProviderConfig cfg_;
    // Placeholder renders are pure, so re-encoding the same prompt is skipped.
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::string, ImageRef> rendered_;
};

// --- HTTP ---------------------------------------------------------------

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::Config, "endpoint '" + url + "' is not an http(s) URL");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") fail(ErrorKind::Config, "unsupported endpoint scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return out;
}

std::string error_message(const std::string& body) {
    try {
        const auto j = json::parse(body);
        if (auto it = j.find("error"); it != j.end()) {
            if (it->is_string()) return it->get<std::string>();
            if (it->is_object() && it->contains("message")) return (*it)["message"].get<std::string>();
        }
        if (auto it = j.find("message"); it != j.end() && it->is_string()) return it->get<std::string>();
    } catch (const json::exception&) {
    }
    return body.substr(0, 200);
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

class HttpProvider final : public Provider {
public:
    HttpProvider(ProviderConfig cfg, HttpOptions options) : cfg_(std::move(cfg)), options_(std::move(options)) {
        cfg_.validate();
        url_ = parse_url(cfg_.endpoint);
        if (options_.api_key.empty()) {
            if (const char* key = std::getenv(api_key_env_var(cfg_.provider_id).c_str())) options_.api_key = key;
        }
        if (!options_.sleeper) options_.sleeper = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
    }

    const ProviderConfig& config() const override { return cfg_; }

    TextResponse complete_text(const TextRequest& request) const override {
        json body{{"stage", request.stage},
                  {"model", cfg_.model_name},
                  {"temperature", cfg_.temperature},
                  {"system_prompt", request.system_prompt},
                  {"user_prompt", request.user_prompt}};
        if (request.image) {
            if (options_.image_store.empty())
                fail(ErrorKind::Precondition, "vision request needs an image store to read " + request.image->digest);
            const auto bytes = read_image(options_.image_store, request.image->digest);
            body["image"] = {{"media_type", request.image->media_type}, {"data", base64_encode(bytes)}};
        }
        auto [payload, attempts] = post_with_retries(body.dump(), input_digest(request), false);
        try {
            const auto j = json::parse(payload);
            return {j.at("text").get<std::string>(), cfg_.provider_id, attempts};
        } catch (const json::exception& e) {
            fail(ErrorKind::ProviderRejected, "provider " + cfg_.provider_id + " returned a malformed body: " + e.what());
        }
    }

    ImageRef generate_image(const ImageRequest& request, const std::filesystem::path& store_dir) const override {
        require(!trim(request.prompt).empty(), "image prompt is empty");
        json body{{"stage", std::string(stage::kImage)},
                  {"model", cfg_.model_name},
                  {"temperature", cfg_.temperature},
                  {"prompt", request.prompt}};
        auto [payload, attempts] = post_with_retries(body.dump(), sha256_hex(request.prompt), true);
        (void)attempts;
        std::vector<std::uint8_t> bytes;
        try {
            bytes = base64_decode(json::parse(payload).at("image_base64").get<std::string>());
        } catch (const json::exception& e) {
            fail(ErrorKind::ProviderRejected, "provider " + cfg_.provider_id + " returned a malformed image body: " +
                                                  e.what());
        }
        return store_image(bytes, store_dir);
    }

private:
    std::pair<std::string, int> post_with_retries(const std::string& body, const std::string& digest,
                                                  bool image) const {
        const int max_attempts = cfg_.max_retries + 1;
        std::string last_problem;
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (attempt > 1) {
                auto rng = Rng::named(0, {"jitter", digest, std::to_string(attempt)});
                options_.sleeper(backoff_delay(cfg_, attempt - 1, rng.uniform01()));
            }
            httplib::Client client(url_.origin);
            const auto secs = std::chrono::duration<double>(cfg_.timeout_seconds);
            client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
            httplib::Headers headers;
            if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
            auto res = client.Post(url_.path, headers, body, "application/json");
            if (!res) {
                last_problem = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 200 && res->status < 300) return {res->body, attempt};
            if (transient_status(res->status)) {
                last_problem = "HTTP " + std::to_string(res->status);
                continue;
            }
            const auto msg = error_message(res->body);
            if (image) fail(ErrorKind::GenerationRefused, "provider " + cfg_.provider_id + " refused: " + msg);
            fail(ErrorKind::ProviderRejected, "provider " + cfg_.provider_id + " rejected the request (HTTP " +
                                                  std::to_string(res->status) + "): " + msg);
        }
        fail(ErrorKind::ProviderUnavailable, "provider " + cfg_.provider_id + " unavailable after " +
                                                 std::to_string(max_attempts) + " attempts (" + last_problem + ")");
    }

    ProviderConfig cfg_;
    HttpOptions options_;
    ParsedUrl url_;
};

}  // namespace

ProviderHandle make_mock(MockScript script, ProviderConfig cfg) {
    cfg.endpoint = "mock";
    return std::make_shared<MockProvider>(std::move(script), std::move(cfg));
}

ProviderHandle make_http_provider(ProviderConfig cfg, HttpOptions options) {
    return std::make_shared<HttpProvider>(std::move(cfg), std::move(options));
}

ProviderHandle make_provider(const ProviderConfig& cfg, const MockScript* mock, const HttpOptions& options) {
    if (cfg.is_mock()) {
        if (!mock) fail(ErrorKind::Config, "provider " + cfg.provider_id + " is a mock but no mock script is configured");
        return make_mock(*mock, cfg);
    }
    return make_http_provider(cfg, options);
}

}  // namespace diffusyn
