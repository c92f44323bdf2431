#include "diffusyn/genpipeline.hpp"

#include <algorithm>
#include <limits>
#include <regex>

#include "diffusyn/digest.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/manifest.hpp"
#include "diffusyn/topic_pool.hpp"
#include "diffusyn/ulid.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn::gen {

// --- config -------------------------------------------------------------

void GeneratorConfig::validate() const {
    if (!(scenario_quota > 0.0 && scenario_quota <= 1.0)) fail(ErrorKind::Config, "scenario_quota must be in (0, 1]");
    if (max_attempts_per_item < 1) fail(ErrorKind::Config, "max_attempts_per_item must be >= 1");
    if (!(judge_renderability_threshold >= 0.0 && judge_renderability_threshold <= 1.0))
        fail(ErrorKind::Config, "judge_renderability_threshold must be in [0, 1]");
    if (!(judge_salience_threshold >= 0.0 && judge_salience_threshold <= 1.0))
        fail(ErrorKind::Config, "judge_salience_threshold must be in [0, 1]");
    if (wave_size < 1) fail(ErrorKind::Config, "wave_size must be >= 1");
    if (workers < 1) fail(ErrorKind::Config, "workers must be >= 1");
    for (const auto& [slot, p] : providers) p.validate();
}

std::uint64_t GeneratorConfig::total_target() const {
    std::uint64_t n = 0;
    for (const auto& [c, t] : target_counts) n += t;
    return n;
}

void to_json(json& j, const GeneratorConfig& v) {
    json targets = json::object();
    for (const auto& [c, n] : v.target_counts) targets[std::string(to_string(c))] = n;
    j = json{{"target_counts", std::move(targets)},
             {"scenario_quota", v.scenario_quota},
             {"seed", v.seed},
             {"max_attempts_per_item", v.max_attempts_per_item},
             {"judge_renderability_threshold", v.judge_renderability_threshold},
             {"judge_salience_threshold", v.judge_salience_threshold},
             {"providers", v.providers},
             {"wave_size", v.wave_size},
             {"workers", v.workers}};
}

void from_json(const json& j, GeneratorConfig& v) {
    GeneratorConfig d;
    v = d;
    if (auto it = j.find("target_counts"); it != j.end()) {
        for (const auto& [name, n] : it->items()) {
            const auto c = parse_category(name);
            if (!c) fail(ErrorKind::Config, "unknown category '" + name + "' in target_counts");
            const auto count = n.get<std::int64_t>();
            if (count < 0) fail(ErrorKind::Config, "target count for '" + name + "' is negative");
            v.target_counts[*c] = static_cast<std::uint64_t>(count);
        }
    }
    v.scenario_quota = j.value("scenario_quota", d.scenario_quota);
    v.seed = j.value("seed", d.seed);
    v.max_attempts_per_item = j.value("max_attempts_per_item", d.max_attempts_per_item);
    v.judge_renderability_threshold = j.value("judge_renderability_threshold", d.judge_renderability_threshold);
    v.judge_salience_threshold = j.value("judge_salience_threshold", d.judge_salience_threshold);
    if (auto it = j.find("providers"); it != j.end()) it->get_to(v.providers);
    v.wave_size = j.value("wave_size", d.wave_size);
    v.workers = j.value("workers", d.workers);
}

std::string config_digest(const GeneratorConfig& cfg) {
    json j = cfg;
    j.erase("workers");
    return sha256_hex(j.dump());
}

// --- topic selection ----------------------------------------------------

void QuotaState::record(const std::string& scenario_tag) {
    ++scenario_counts[scenario_tag];
    ++total_accepted;
}

void PendingPicks::add(const std::string& scenario_tag) {
    ++per_scenario[scenario_tag];
    ++total;
}

namespace {
std::uint64_t lookup(const std::map<std::string, std::uint64_t>& m, const std::string& key) {
    const auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
}
}  // namespace

bool scenario_admissible(const std::string& scenario_tag, const QuotaState& q, double quota,
                         const PendingPicks& pending) {
    if (q.total_accepted + pending.total < kQuotaBurnIn) return true;
    const auto mine = lookup(pending.per_scenario, scenario_tag);
    const double numerator = static_cast<double>(lookup(q.scenario_counts, scenario_tag) + mine + 1);
    const double denominator = static_cast<double>(q.total_accepted + mine + 1);
    return numerator <= quota * denominator + 1e-9;
}

Topic pick_topic(std::span<const Topic> pool, Rng& rng, const QuotaState& q, double quota,
                 const PendingPicks& pending) {
    require(!pool.empty(), "topic pool is empty");
    std::map<std::string, bool> admissible;
    bool any = false;
    for (const auto& t : pool) {
        auto [it, inserted] = admissible.try_emplace(t.scenario_tag, false);
        if (inserted) it->second = scenario_admissible(t.scenario_tag, q, quota, pending);
        any = any || it->second;
    }
    // Just past burn-in the strict share bound can admit nothing even though
    // the pool is wide enough for the quota in the long run. Keep drawing
    // from the least-used scenarios until the bound catches up.
    if (!any && static_cast<double>(admissible.size()) * quota >= 1.0 - 1e-9) {
        std::uint64_t least = std::numeric_limits<std::uint64_t>::max();
        for (const auto& [tag, ok] : admissible)
            least = std::min(least, lookup(q.scenario_counts, tag) + lookup(pending.per_scenario, tag));
        for (auto& [tag, ok] : admissible)
            ok = lookup(q.scenario_counts, tag) + lookup(pending.per_scenario, tag) == least;
        any = true;
    }
    if (any) {
        for (int draw = 0; draw < kMaxTopicDraws; ++draw) {
            const auto& t = pool[rng.uniform_index(pool.size())];
            if (admissible[t.scenario_tag]) return t;
        }
        // Admissible topics are rare in a skewed pool; sample them directly.
        std::vector<const Topic*> open;
        for (const auto& t : pool)
            if (admissible[t.scenario_tag]) open.push_back(&t);
        return *open[rng.uniform_index(open.size())];
    }
    fail(ErrorKind::QuotaExhausted, "every scenario is at its quota of " + std::to_string(quota) + " after " +
                                        std::to_string(q.total_accepted) +
                                        " accepted items; enlarge the topic pool or raise scenario_quota");
}

// --- stages -------------------------------------------------------------

namespace {

TemplateVars topic_vars(const Topic& topic) { return {{"topic", topic.phrase}, {"scenario", topic.scenario_tag}}; }

std::string nonempty_reply(const TextResponse& resp, std::string_view stage_name, const Provider& provider) {
    auto text = std::string(trim(resp.text));
    if (text.empty())
        fail(ErrorKind::ProviderRejected,
             "provider " + provider.config().provider_id + " returned an empty " + std::string(stage_name));
    return text;
}

}  // namespace

NarrativeScript generate_script(const Topic& topic, const Provider& provider, const PromptTemplate& tmpl,
                                std::uint64_t nonce) {
    auto req = make_request(stage::kScript, tmpl, topic_vars(topic), nonce);
    return {topic, nonempty_reply(provider.complete_text(req), stage::kScript, provider)};
}

ErrorSpec generate_error(const Topic& topic, ErrorCategory category, const Provider& provider,
                         const PromptTemplate& tmpl, std::uint64_t nonce) {
    auto vars = topic_vars(topic);
    vars["category"] = std::string(display_name(category));
    auto req = make_request(stage::kError, tmpl, std::move(vars), nonce);
    return {topic, category, nonempty_reply(provider.complete_text(req), stage::kError, provider)};
}

SynthesizedPrompt synthesize_prompt(const NarrativeScript& script, const ErrorSpec& error, const Provider& provider,
                                    const PromptTemplate& tmpl, std::uint64_t nonce) {
    require(script.topic == error.topic, "script topic '" + script.topic.phrase + "' does not match error topic '" +
                                             error.topic.phrase + "'");
    auto vars = topic_vars(script.topic);
    vars["category"] = std::string(display_name(error.category));
    vars["script"] = script.text;
    vars["error"] = error.description;
    auto req = make_request(stage::kSynthesis, tmpl, std::move(vars), nonce);
    return {script, error, nonempty_reply(provider.complete_text(req), stage::kSynthesis, provider)};
}

std::optional<ParsedVerdict> parse_verdict(std::string_view text) {
    static const std::regex line_re(
        R"(^\s*VERDICT\s+accepted\s*=\s*(yes|no)\s+renderability\s*=\s*([0-9]*\.?[0-9]+)\s+salience\s*=\s*([0-9]*\.?[0-9]+)\s+reason\s*=\s*(.*)$)",
        std::regex::icase);
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string line(trim(text.substr(pos, nl - pos)));
        pos = nl + 1;
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        ParsedVerdict v;
        v.accepted = iequals(m[1].str(), "yes");
        v.renderability = std::stod(m[2].str());
        v.salience = std::stod(m[3].str());
        v.reason = std::string(trim(m[4].str()));
        if (v.renderability > 1.0 || v.salience > 1.0) continue;
        return v;
    }
    return std::nullopt;
}

JudgeVerdict judge_prompt(const SynthesizedPrompt& prompt, const GeneratorConfig& cfg, const Provider& judge,
                          const PromptTemplate& tmpl, std::uint64_t nonce) {
    auto vars = topic_vars(prompt.script.topic);
    vars["category"] = std::string(display_name(prompt.error.category));
    vars["script"] = prompt.script.text;
    vars["error"] = prompt.error.description;
    vars["prompt"] = prompt.text;
    for (std::uint64_t round = 0; round < 2; ++round) {
        auto req = make_request(stage::kJudge, tmpl, vars, nonce * 2 + round);
        std::string reply;
        try {
            reply = judge.complete_text(req).text;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ProviderUnavailable && e.kind() != ErrorKind::ProviderRejected) throw;
            return {false, std::string("judge-unavailable: ") + e.what(), 0.0, 0.0};
        }
        const auto parsed = parse_verdict(reply);
        if (!parsed) continue;
        JudgeVerdict v;
        v.renderability = parsed->renderability;
        v.error_salience = parsed->salience;
        const bool render_ok = v.renderability >= cfg.judge_renderability_threshold;
        const bool salience_ok = v.error_salience >= cfg.judge_salience_threshold;
        v.accepted = render_ok && salience_ok;
        v.reason = parsed->reason;
        if (!render_ok) v.reason = "renderability below threshold; " + v.reason;
        if (!salience_ok) v.reason = "error salience below threshold; " + v.reason;
        return v;
    }
    return {false, "judge-unparseable", 0.0, 0.0};
}

std::string transcript_id(std::string_view stage_name, std::uint64_t draw, const json& payload) {
    json key{{"stage", stage_name}, {"draw", draw}, {"payload", payload}};
    return std::string(stage_name) + ":" + sha256_hex(key.dump()).substr(0, 16);
}

BenchmarkItem produce_item(const SynthesizedPrompt& prompt, const Provider& image_provider,
                           const std::filesystem::path& store_dir, std::string item_id,
                           std::vector<std::string> provenance, std::uint64_t nonce) {
    BenchmarkItem item;
    item.image = image_provider.generate_image({prompt.text, nonce}, store_dir);
    item.id = std::move(item_id);
    item.prompt = prompt;
    item.ground_truth_error = prompt.error.description;
    item.category = prompt.error.category;
    item.provenance = std::move(provenance);
    item.provenance.push_back(transcript_id(stage::kImage, nonce, json(item.image)));
    item.curation_status = CurationStatus::Pending;
    return item;
}

void to_json(json& j, const StageTranscript& v) {
    j = json{{"id", v.id}, {"stage", v.stage}, {"draw", v.draw}, {"ok", v.ok}, {"payload", v.payload}};
}

StageProviders StageProviders::from_config(const GeneratorConfig& cfg, const MockScript* mock,
                                           const HttpOptions& http) {
    MockScript fallback;
    fallback.seed = cfg.seed;
    const MockScript* script = mock ? mock : &fallback;
    auto slot = [&](std::string_view name) {
        ProviderConfig pc;
        if (auto it = cfg.providers.find(std::string(name)); it != cfg.providers.end()) pc = it->second;
        return make_provider(pc, script, http);
    };
    return {slot(stage::kScript), slot(stage::kError), slot(stage::kSynthesis), slot(stage::kJudge),
            slot(stage::kImage)};
}

// --- orchestration ------------------------------------------------------

namespace {

struct DrawPlan {
    std::uint64_t draw = 0;
    Topic topic;
    ErrorCategory category = ErrorCategory::Biological;
};

struct DrawOutcome {
    std::optional<BenchmarkItem> item;
    std::string rejected_stage;
    std::vector<StageTranscript> transcripts;
};

bool is_stage_failure(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::ProviderRejected:
        case ErrorKind::GenerationRefused:
        case ErrorKind::Media:
            return true;
        default:
            return false;
    }
}

class ChainRunner {
public:
    ChainRunner(const GeneratorConfig& cfg, const StageProviders& providers, const PipelineTemplates& templates,
                const std::filesystem::path& store)
        : cfg_(cfg), providers_(providers), templates_(templates), store_(store) {}

    DrawOutcome run(const DrawPlan& plan) const {
        DrawOutcome out;
        const auto draw = plan.draw;
        record(out, stage::kTopic, draw, true, json{{"topic", plan.topic}, {"category", plan.category}});

        std::optional<NarrativeScript> script;
        std::optional<ErrorSpec> error;
        std::optional<SynthesizedPrompt> prompt;
        try {
            script = generate_script(plan.topic, *providers_.script, templates_.script, draw);
            record(out, stage::kScript, draw, true, json(*script));
        } catch (const Error& e) {
            return reject(std::move(out), stage::kScript, draw, e);
        }
        try {
            error = generate_error(plan.topic, plan.category, *providers_.error, templates_.error, draw);
            record(out, stage::kError, draw, true, json(*error));
        } catch (const Error& e) {
            return reject(std::move(out), stage::kError, draw, e);
        }
        try {
            prompt = synthesize_prompt(*script, *error, *providers_.synthesis, templates_.synthesis, draw);
            record(out, stage::kSynthesis, draw, true, json{{"text", prompt->text}});
        } catch (const Error& e) {
            return reject(std::move(out), stage::kSynthesis, draw, e);
        }
        const auto verdict = judge_prompt(*prompt, cfg_, *providers_.judge, templates_.judge, draw);
        record(out, stage::kJudge, draw, verdict.accepted, json(verdict));
        if (!verdict.accepted) {
            out.rejected_stage = std::string(stage::kJudge);
            return out;
        }
        std::vector<std::string> provenance;
        for (const auto& t : out.transcripts) provenance.push_back(t.id);
        auto id_rng = Rng::named(cfg_.seed, {"item-id", std::to_string(draw)});
        try {
            auto item = produce_item(*prompt, *providers_.image, store_, make_ulid(draw, id_rng),
                                     std::move(provenance), draw);
            StageTranscript t{item.provenance.back(), std::string(stage::kImage), draw, true, json(item.image)};
            out.transcripts.push_back(std::move(t));
            out.item = std::move(item);
        } catch (const Error& e) {
            return reject(std::move(out), stage::kImage, draw, e);
        }
        return out;
    }

private:
    static void record(DrawOutcome& out, std::string_view stage_name, std::uint64_t draw, bool ok, json payload) {
        StageTranscript t;
        t.id = transcript_id(stage_name, draw, payload);
        t.stage = std::string(stage_name);
        t.draw = draw;
        t.ok = ok;
        t.payload = std::move(payload);
        out.transcripts.push_back(std::move(t));
    }

    static DrawOutcome reject(DrawOutcome out, std::string_view stage_name, std::uint64_t draw, const Error& e) {
        if (!is_stage_failure(e)) throw e;
        record(out, stage_name, draw, false, json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}});
        out.rejected_stage = std::string(stage_name);
        return out;
    }

    const GeneratorConfig& cfg_;
    const StageProviders& providers_;
    const PipelineTemplates& templates_;
    const std::filesystem::path& store_;
};

}  // namespace

PipelineResult run_pipeline(const GeneratorConfig& cfg, std::span<const Topic> pool, const StageProviders& providers,
                            const PipelineTemplates& templates, const PipelineIo& io) {
    cfg.validate();
    PipelineResult result;
    result.set.generator_config_digest = config_digest(cfg);
    result.set.topic_pool_digest = topic_pool_digest(std::vector<Topic>(pool.begin(), pool.end()));

    std::optional<ManifestWriter> writer;
    if (io.manifest) writer.emplace(*io.manifest, result.set);

    const std::uint64_t total_target = cfg.total_target();
    if (total_target > 0) require(!pool.empty(), "topic pool is empty");
    const std::uint64_t budget = static_cast<std::uint64_t>(cfg.max_attempts_per_item) * total_target;

    std::map<ErrorCategory, std::uint64_t> accepted_per_category;
    auto target_of = [&](ErrorCategory c) {
        const auto it = cfg.target_counts.find(c);
        return it == cfg.target_counts.end() ? std::uint64_t{0} : it->second;
    };

    QuotaState quota;
    Rng topic_rng = Rng::named(cfg.seed, {"topics"});
    ChainRunner chain(cfg, providers, templates, io.store_dir);
    std::uint64_t next_draw = 0;

    auto remaining = [&] {
        std::uint64_t r = 0;
        for (auto c : kAllCategories) r += target_of(c) - accepted_per_category[c];
        return r;
    };

    while (remaining() > 0) {
        if (result.stats.attempts >= budget) {
            result.completed = false;
            result.warning = "attempt budget of " + std::to_string(budget) + " exhausted with " +
                             std::to_string(remaining()) + " items still missing";
            break;
        }
        const auto wave_cap = std::min<std::uint64_t>(static_cast<std::uint64_t>(cfg.wave_size),
                                                      budget - result.stats.attempts);
        std::vector<DrawPlan> plans;
        PendingPicks pending;
        std::map<ErrorCategory, std::uint64_t> pending_per_category;
        std::optional<std::string> quota_problem;
        while (plans.size() < wave_cap) {
            std::optional<ErrorCategory> category;
            std::uint64_t best = 0;
            for (auto c : kAllCategories) {
                const auto have = accepted_per_category[c] + pending_per_category[c];
                const auto deficit = target_of(c) > have ? target_of(c) - have : 0;
                if (deficit > best) {
                    best = deficit;
                    category = c;
                }
            }
            if (!category) break;
            try {
                auto topic = pick_topic(pool, topic_rng, quota, cfg.scenario_quota, pending);
                pending.add(topic.scenario_tag);
                ++pending_per_category[*category];
                plans.push_back({next_draw++, std::move(topic), *category});
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::QuotaExhausted) throw;
                quota_problem = e.what();
                break;
            }
        }
        if (plans.empty()) {
            result.completed = false;
            result.warning = quota_problem.value_or("no draw could be scheduled");
            break;
        }

        std::vector<DrawOutcome> outcomes(plans.size());
        parallel_for(plans.size(), cfg.workers, [&](std::size_t i) { outcomes[i] = chain.run(plans[i]); });

        for (auto& outcome : outcomes) {
            ++result.stats.attempts;
            if (outcome.item) {
                auto& item = *outcome.item;
                const auto& tag = item.prompt.script.topic.scenario_tag;
                ++result.stats.accepted;
                ++result.stats.scenario_counts[tag];
                quota.record(tag);
                ++accepted_per_category[item.category];
                if (writer) writer->append(item);
                result.set.items.push_back(std::move(item));
            } else {
                ++result.stats.rejections[outcome.rejected_stage];
            }
            for (auto& t : outcome.transcripts) result.transcripts.push_back(std::move(t));
        }
    }
    if (writer) writer->close();
    return result;
}

std::map<ErrorCategory, std::uint64_t> category_counts(const BenchmarkSet& set) {
    std::map<ErrorCategory, std::uint64_t> out;
    for (auto c : kAllCategories) out[c] = 0;
    for (const auto& item : set.items) ++out[item.category];
    return out;
}

}  // namespace diffusyn::gen
