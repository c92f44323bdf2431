#include "diffusyn/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <iostream>
#include <optional>

#include "diffusyn/discern.hpp"
#include "diffusyn/error.hpp"
#include "diffusyn/evalharness.hpp"
#include "diffusyn/genpipeline.hpp"
#include "diffusyn/image_store.hpp"
#include "diffusyn/manifest.hpp"
#include "diffusyn/review.hpp"
#include "diffusyn/run_config.hpp"
#include "diffusyn/stats.hpp"
#include "diffusyn/topic_pool.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn {

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool mock = false;
    bool csv = false;
    int workers = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "run config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", c.seed, "override the generator and mock seed");
    cmd->add_flag("--mock", c.mock, "force mock providers");
    cmd->add_flag("--csv", c.csv, "CSV output where supported");
    cmd->add_option("--workers", c.workers, "parallel provider calls")->check(CLI::Range(1, 256));
}

RunConfig load_config(const Common& c) {
    RunConfig rc = c.config.empty() ? parse_run_config(json::object(), std::filesystem::current_path())
                                    : load_run_config(c.config);
    if (c.seed) {
        rc.generator.seed = *c.seed;
        if (rc.mock) rc.mock->seed = *c.seed;
    }
    if (c.mock) rc.force_mock();
    if (!rc.mock) {
        rc.mock = MockScript{};
        rc.mock->seed = rc.generator.seed;
    }
    rc.generator.workers = c.workers;
    return rc;
}

HttpOptions http_options(const RunConfig& rc) {
    HttpOptions h;
    h.image_store = rc.paths.image_store;
    return h;
}

void print(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

int cmd_generate(const Common& c, const std::string& out_path, std::ostream& out, std::ostream& err) {
    auto rc = load_config(c);
    if (!out_path.empty()) rc.paths.manifest = out_path;
    if (const auto dir = rc.paths.manifest.parent_path(); !dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }
    const auto pool = load_topic_pool(rc.paths.topic_pool);
    const auto templates = PipelineTemplates::load(rc.paths.templates_dir);
    const auto providers = gen::StageProviders::from_config(rc.generator, &*rc.mock, http_options(rc));
    const auto started = std::chrono::steady_clock::now();
    const auto result = gen::run_pipeline(rc.generator, pool, providers, templates,
                                          gen::PipelineIo{rc.paths.image_store, rc.paths.manifest});
    save_manifest(result.set, rc.paths.manifest);
    write_file_atomic(manifest_sidecar(rc.paths.manifest, ".stats.json"), json(result.stats).dump(2) + "\n");
    std::string transcripts;
    for (const auto& t : result.transcripts) transcripts += json(t).dump() + "\n";
    write_file_atomic(manifest_sidecar(rc.paths.manifest, ".transcripts.jsonl"), transcripts);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - started;
    append_line(manifest_sidecar(rc.paths.manifest, ".run.log"),
                json{{"finished_at", review::utc_timestamp()},
                     {"wall_seconds", wall.count()},
                     {"seed", rc.generator.seed},
                     {"items", result.set.items.size()}}
                    .dump());

    json summary{{"manifest", rc.paths.manifest.string()},
                 {"items", result.set.items.size()},
                 {"completed", result.completed},
                 {"generator_config_digest", result.set.generator_config_digest},
                 {"topic_pool_digest", result.set.topic_pool_digest},
                 {"stats", result.stats},
                 {"noise_rate", result.stats.attempts ? json(stats::noise_rate(result.stats)) : json(nullptr)}};
    json per_cat = json::object();
    for (const auto& [cat, n] : gen::category_counts(result.set)) per_cat[std::string(to_string(cat))] = n;
    summary["per_category"] = per_cat;
    summary["warning"] = result.warning ? json(*result.warning) : json(nullptr);
    if (result.warning) err << "warning: " << *result.warning << '\n';
    print(out, summary);
    return 0;
}

struct DiscernArgs {
    std::string dataset;
    std::string model_slot = "discern_model";
    std::string interpreter_slot = "interpreter";
    std::size_t sample_ai = 0;
    std::size_t sample_human = 0;
    bool yates = false;
    std::string outcomes_path;
};

int cmd_discern(const Common& c, const DiscernArgs& a, std::ostream& out) {
    const auto rc = load_config(c);
    auto dataset = discern::load_dataset(a.dataset);
    if (a.sample_ai || a.sample_human) {
        auto rng = Rng::named(rc.generator.seed, {"discern-session"});
        dataset = discern::sample_session(dataset, a.sample_ai, a.sample_human, rng);
    }
    const auto http = http_options(rc);
    const auto model = make_provider(rc.provider(a.model_slot), &*rc.mock, http);
    const auto interpreter = make_provider(rc.provider(a.interpreter_slot), &*rc.mock, http);
    const auto templates = DiscernTemplates::load(rc.paths.templates_dir);
    const auto result = discern::run_discern(dataset, *model, *interpreter, templates, c.workers);

    if (!a.outcomes_path.empty()) {
        std::string lines;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            const auto& o = result.outcomes[i];
            json j{{"digest", dataset[i].image.digest},
                   {"truth", to_string(dataset[i].truth)},
                   {"outcome", o.outcome == discern::Outcome::Scored          ? "scored"
                               : o.outcome == discern::Outcome::Indeterminate ? "indeterminate"
                                                                              : "unscored"},
                   {"predicted", o.predicted ? json(to_string(*o.predicted)) : json(nullptr)},
                   {"description", o.description}};
            lines += j.dump() + "\n";
        }
        write_file_atomic(a.outcomes_path, lines);
    }

    if (c.csv) {
        out << stats::heatmap_csv(result.matrix);
        return 0;
    }
    json j{{"matrix", result.matrix},
           {"indeterminate", result.indeterminate},
           {"unscored", result.unscored},
           {"processed", result.processed()}};
    if (result.matrix.total() > 0) j["metrics"] = stats::matrix_metrics(result.matrix, {a.yates});
    print(out, j);
    return 0;
}

struct EvaluateArgs {
    std::string manifest;
    std::vector<std::string> model_slots{"model"};
    std::string judge_slot = "scorer";
    bool include_pending = false;
    std::string records_path;
};

int cmd_evaluate(const Common& c, const EvaluateArgs& a, std::ostream& out) {
    const auto rc = load_config(c);
    const auto set = load_manifest(a.manifest.empty() ? rc.paths.manifest : std::filesystem::path(a.manifest));
    const auto http = http_options(rc);
    const auto judge = make_provider(rc.provider(a.judge_slot), &*rc.mock, http);
    const auto templates = EvalTemplates::load(rc.paths.templates_dir);

    std::vector<eval::EvaluationReport> reports;
    std::vector<eval::EvaluationRecord> records;
    for (const auto& slot : a.model_slots) {
        const auto model = make_provider(rc.provider(slot), &*rc.mock, http);
        auto run = eval::run_benchmark(set, *model, *judge, templates, {a.include_pending, c.workers});
        reports.push_back(run.report);
        records.insert(records.end(), run.records.begin(), run.records.end());
    }
    if (!a.records_path.empty()) write_file_atomic(a.records_path, eval::records_jsonl(records));
    if (c.csv) {
        out << eval::totals_csv(reports);
        return 0;
    }
    json j{{"reports", reports}};
    if (reports.size() >= 2) j["ranking"] = eval::rank_models(reports);
    print(out, j);
    return 0;
}

ConfusionMatrix parse_matrix(const json& j) {
    ConfusionMatrix m;
    const json& src = j.contains("matrix") ? j.at("matrix") : j;
    src.get_to(m);
    return m;
}

int cmd_stats(const Common& c, const std::string& path, std::string kind, bool yates, std::ostream& out) {
    const auto text = read_file(path);
    const auto body = trim(text);
    json doc;
    bool is_json = false;
    if (kind == "auto") {
        is_json = json::accept(body);
        if (is_json) doc = json::parse(body);
        if (is_json && doc.is_object() && (doc.contains("tp") || doc.contains("matrix"))) kind = "matrix";
        else if (is_json && doc.is_object() && doc.contains("reports")) kind = "reports";
        else if (body.find("\"schema_version\"") != std::string_view::npos) kind = "manifest";
        else kind = "reports";
    }
    if (kind == "matrix") {
        if (!is_json) doc = json::parse(body);
        const auto m = parse_matrix(doc);
        if (c.csv) out << stats::heatmap_csv(m);
        else print(out, stats::matrix_metrics(m, {yates}));
        return 0;
    }
    if (kind == "manifest") {
        const auto set = parse_manifest(body, path);
        json j{{"items", set.items.size()}, {"diversity", stats::diversity_report(set)}};
        const auto sidecar = manifest_sidecar(path, ".stats.json");
        if (std::filesystem::exists(sidecar)) {
            const auto ps = json::parse(read_file(sidecar)).get<PipelineStats>();
            j["pipeline"] = ps;
            if (ps.attempts) {
                j["noise_rate"] = stats::noise_rate(ps);
                json stages = json::object();
                for (const auto& [stage, n] : ps.rejections) stages[stage] = stats::stage_rejection_rate(ps, stage);
                j["stage_rejection_rates"] = stages;
            }
        }
        print(out, j);
        return 0;
    }
    if (kind == "reports") {
        std::vector<eval::EvaluationReport> reports;
        if (is_json && doc.is_object() && doc.contains("reports")) reports = doc.at("reports").get<decltype(reports)>();
        else reports = eval::parse_reports(body);
        if (c.csv) {
            out << eval::totals_csv(reports);
            return 0;
        }
        json j{{"reports", reports}};
        if (reports.size() >= 2) {
            j["ranking"] = eval::rank_models(reports);
            json per_cat = json::object();
            for (auto cat : kAllCategories) per_cat[std::string(to_string(cat))] = eval::rank_models(reports, cat);
            j["ranking_by_category"] = per_cat;
        }
        print(out, j);
        return 0;
    }
    fail(ErrorKind::Usage, "unknown stats kind '" + kind + "'");
}

std::vector<eval::EvaluationReport> read_reports(const std::string& path) {
    const auto text = read_file(path);
    const auto body = trim(text);
    if (json::accept(body)) {
        const auto doc = json::parse(body);
        if (doc.is_object() && doc.contains("reports")) return doc.at("reports").get<std::vector<eval::EvaluationReport>>();
    }
    return eval::parse_reports(body);
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& unit, const std::string& category,
                std::ostream& out) {
    eval::ComparisonSpec spec;
    if (unit == "grand") spec.unit = eval::ComparisonUnit::GrandTotal;
    else if (unit == "cells") spec.unit = eval::ComparisonUnit::Cells;
    else if (unit == "category") {
        spec.unit = eval::ComparisonUnit::Category;
        const auto cat = parse_category(category);
        if (!cat) fail(ErrorKind::Usage, "--unit category needs a valid --category");
        spec.category = *cat;
    }
    const auto ra = read_reports(a);
    const auto rb = read_reports(b);
    const auto r = eval::compare_benchmarks(ra, rb, spec);
    print(out, json{{"rho", r.statistic}, {"p_value", r.p_value}, {"dof", r.dof}, {"method", r.method}, {"unit", unit}});
    return 0;
}

int cmd_validate(const std::string& path, const std::string& store, std::ostream& out) {
    BenchmarkSet set;
    try {
        set = load_manifest(path);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Validation && e.kind() != ErrorKind::Parse &&
            e.kind() != ErrorKind::VersionedFormat)
            throw;
        print(out, json{{"valid", false}, {"errors", json::array({e.what()})}});
        return 1;
    }
    std::vector<std::string> errors = validate_set(set);
    if (!store.empty()) {
        for (const auto& item : set.items) {
            if (!std::filesystem::exists(image_path(store, item.image.digest)))
                errors.push_back("item " + item.id + ": image " + item.image.digest + " missing from store");
        }
    }
    if (!errors.empty()) {
        print(out, json{{"valid", false}, {"errors", errors}});
        return 1;
    }
    json per_cat = json::object();
    for (const auto& [cat, n] : gen::category_counts(set)) per_cat[std::string(to_string(cat))] = n;
    std::map<std::string, std::uint64_t> curation;
    for (const auto& item : set.items) ++curation[std::string(to_string(item.curation_status))];
    print(out, json{{"valid", true},
                    {"schema_version", set.schema_version},
                    {"items", set.items.size()},
                    {"per_category", per_cat},
                    {"curation", curation},
                    {"generator_config_digest", set.generator_config_digest},
                    {"topic_pool_digest", set.topic_pool_digest}});
    return 0;
}

review::ReviewServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

struct ServeArgs {
    std::string manifest;
    std::string store;
    std::string host;
    std::optional<int> port;
    std::string token;
    std::string ui_dir;
    bool allow_redecide = false;
};

int cmd_review_serve(const Common& c, const ServeArgs& a, std::ostream& out) {
    const auto rc = load_config(c);
    const std::filesystem::path manifest = a.manifest.empty() ? rc.paths.manifest : std::filesystem::path(a.manifest);
    const std::filesystem::path store = a.store.empty() ? rc.paths.image_store : std::filesystem::path(a.store);
    review::ReviewService service(manifest, store, {a.allow_redecide, nullptr, {}});
    review::ServerOptions opts;
    opts.token = a.token;
    if (!a.ui_dir.empty()) opts.ui_dir = a.ui_dir;
    review::ReviewServer server(service, opts);
    const auto host = a.host.empty() ? rc.review.listen_address : a.host;
    const int port = server.bind(host, a.port.value_or(rc.review.port));
    out << json{{"listening", host + ":" + std::to_string(port)}, {"manifest", manifest.string()}}.dump() << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"diffusyn: synthetic image benchmark generation and evaluation", "diffusyn"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;

    auto* gen_cmd = app.add_subcommand("generate", "run the generation pipeline");
    add_common(gen_cmd, common, true);
    std::string gen_out;
    gen_cmd->add_option("--out", gen_out, "manifest path (overrides paths.manifest)");

    auto* dis_cmd = app.add_subcommand("discern", "AI-vs-human discernment study");
    add_common(dis_cmd, common, false);
    DiscernArgs dis;
    dis_cmd->add_option("--dataset", dis.dataset, "labeled image listing (JSON Lines)")->required();
    dis_cmd->add_option("--model", dis.model_slot, "provider slot of the model under test");
    dis_cmd->add_option("--interpreter", dis.interpreter_slot, "provider slot of the interpreter");
    dis_cmd->add_option("--sample-ai", dis.sample_ai, "stratified session size, AI images");
    dis_cmd->add_option("--sample-human", dis.sample_human, "stratified session size, human images");
    dis_cmd->add_flag("--yates", dis.yates, "Yates continuity correction");
    dis_cmd->add_option("--outcomes", dis.outcomes_path, "write per-image outcomes (JSON Lines)");

    auto* eval_cmd = app.add_subcommand("evaluate", "score models on a benchmark set");
    add_common(eval_cmd, common, false);
    EvaluateArgs ev;
    eval_cmd->add_option("--manifest", ev.manifest, "benchmark manifest (defaults to paths.manifest)");
    eval_cmd->add_option("--model", ev.model_slots, "provider slot(s) of the models under test");
    eval_cmd->add_option("--judge", ev.judge_slot, "provider slot of the scoring judge");
    eval_cmd->add_flag("--include-pending", ev.include_pending, "also score uncurated items");
    eval_cmd->add_option("--records", ev.records_path, "write per-item records (JSON Lines)");

    auto* stats_cmd = app.add_subcommand("stats", "metrics over stored results");
    add_common(stats_cmd, common, false);
    std::string stats_path, stats_kind = "auto";
    bool stats_yates = false;
    stats_cmd->add_option("input", stats_path, "manifest, confusion matrix or reports file")->required();
    stats_cmd->add_option("--kind", stats_kind, "input kind")
        ->check(CLI::IsMember({"auto", "manifest", "matrix", "reports"}));
    stats_cmd->add_flag("--yates", stats_yates, "Yates continuity correction");

    auto* cmp_cmd = app.add_subcommand("compare", "Spearman correlation between two report sets");
    std::string cmp_a, cmp_b, cmp_unit = "grand", cmp_category;
    cmp_cmd->add_option("first", cmp_a, "reports file")->required();
    cmp_cmd->add_option("second", cmp_b, "reports file")->required();
    cmp_cmd->add_option("--unit", cmp_unit, "paired unit")->check(CLI::IsMember({"grand", "category", "cells"}));
    cmp_cmd->add_option("--category", cmp_category, "category for --unit category");

    auto* serve_cmd = app.add_subcommand("review-serve", "serve the curation API");
    add_common(serve_cmd, common, false);
    ServeArgs serve;
    serve_cmd->add_option("--manifest", serve.manifest, "manifest to curate");
    serve_cmd->add_option("--store", serve.store, "image store directory");
    serve_cmd->add_option("--host", serve.host, "listen address");
    serve_cmd->add_option("--port", serve.port, "listen port (0 picks one)")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--token", serve.token, "shared secret for Authorization: Bearer");
    serve_cmd->add_option("--ui-dir", serve.ui_dir, "static UI files to serve at /");
    serve_cmd->add_flag("--allow-redecide", serve.allow_redecide, "permit changing a decided item");

    auto* val_cmd = app.add_subcommand("validate", "check a manifest");
    std::string val_path, val_store;
    val_cmd->add_option("manifest", val_path, "manifest path")->required();
    val_cmd->add_option("--store", val_store, "also check images exist in this store");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*gen_cmd) return cmd_generate(common, gen_out, out, err);
        if (*dis_cmd) return cmd_discern(common, dis, out);
        if (*eval_cmd) return cmd_evaluate(common, ev, out);
        if (*stats_cmd) return cmd_stats(common, stats_path, stats_kind, stats_yates, out);
        if (*cmp_cmd) return cmd_compare(cmp_a, cmp_b, cmp_unit, cmp_category, out);
        if (*serve_cmd) return cmd_review_serve(common, serve, out);
        if (*val_cmd) return cmd_validate(val_path, val_store, out);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Usage) {
            err << "error: " << e.what() << '\n';
            return 2;
        }
        print(out, json{{"error", to_string(e.kind())}, {"message", e.what()}});
        return 1;
    } catch (const json::exception& e) {
        print(out, json{{"error", "parse"}, {"message", e.what()}});
        return 1;
    }
    return 2;
}

}  // namespace diffusyn
