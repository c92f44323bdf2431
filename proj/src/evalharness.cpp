#include "diffusyn/evalharness.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "diffusyn/error.hpp"
#include "diffusyn/util.hpp"

namespace diffusyn::eval {

std::int64_t EvaluationReport::total_for(std::optional<ErrorCategory> category) const {
    if (!category) return grand_total;
    const auto it = per_category.find(*category);
    return it == per_category.end() ? 0 : it->second.total;
}

void to_json(json& j, const EvaluationRecord& v) {
    j = json{{"item_id", v.item_id},
             {"model_id", v.model_id},
             {"category", v.category},
             {"response_text", v.response_text},
             {"score", v.score}};
}

void from_json(const json& j, EvaluationRecord& v) {
    j.at("item_id").get_to(v.item_id);
    j.at("model_id").get_to(v.model_id);
    j.at("category").get_to(v.category);
    j.at("response_text").get_to(v.response_text);
    j.at("score").get_to(v.score);
}

void to_json(json& j, const EvaluationReport& v) {
    json cats = json::object();
    for (const auto& [c, t] : v.per_category) {
        json entry{{"total", t.total}, {"count", t.count}};
        if (auto m = t.mean()) entry["mean"] = *m;
        else entry["mean"] = nullptr;
        cats[std::string(to_string(c))] = std::move(entry);
    }
    j = json{{"model_id", v.model_id},
             {"per_category", std::move(cats)},
             {"grand_total", v.grand_total},
             {"unscorable", v.unscorable},
             {"failed", v.failed}};
}

void from_json(const json& j, EvaluationReport& v) {
    v = EvaluationReport{};
    j.at("model_id").get_to(v.model_id);
    for (const auto& [name, entry] : j.at("per_category").items()) {
        const auto c = parse_category(name);
        if (!c) fail(ErrorKind::Parse, "unknown category '" + name + "' in report");
        CategoryTotals t;
        entry.at("total").get_to(t.total);
        entry.at("count").get_to(t.count);
        v.per_category[*c] = t;
    }
    j.at("grand_total").get_to(v.grand_total);
    v.unscorable = j.value("unscorable", std::uint64_t{0});
    v.failed = j.value("failed", std::uint64_t{0});
}

std::optional<int> parse_score(std::string_view text) {
    auto t = trim(text);
    while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == '"' || t.back() == '\'')) t.remove_suffix(1);
    if (t.empty() || t.size() > 2) return std::nullopt;
    int v = 0;
    for (char c : t) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    if (v < kMinScore || v > kMaxScore) return std::nullopt;
    return v;
}

int score_response(std::string_view ground_truth, std::string_view response, const Provider& judge,
                   const PromptTemplate& tmpl, std::uint64_t nonce) {
    require(!trim(ground_truth).empty(), "ground truth is empty");
    require(!trim(response).empty(), "response is empty");
    TemplateVars vars{{"ground_truth", std::string(ground_truth)}, {"response", std::string(response)}};
    std::string last;
    for (std::uint64_t round = 0; round < 2; ++round) {
        last = judge.complete_text(make_request(stage::kScore, tmpl, vars, nonce * 2 + round)).text;
        if (auto s = parse_score(last)) return *s;
    }
    fail(ErrorKind::UnscorableResponse,
         "judge replied '" + std::string(trim(last)).substr(0, 80) + "' twice; expected an integer 0-10");
}

TextRequest response_request(const BenchmarkItem& item, const PromptTemplate& tmpl) {
    auto req = make_request(stage::kRespond, tmpl, {});
    req.image = item.image;
    return req;
}

EvaluationReport aggregate(std::string model_id, std::span<const EvaluationRecord> records) {
    EvaluationReport report;
    report.model_id = std::move(model_id);
    for (auto c : kAllCategories) report.per_category[c] = {};
    for (const auto& r : records) {
        if (r.score < kMinScore || r.score > kMaxScore)
            fail(ErrorKind::Validation, "record for item " + r.item_id + " has score " + std::to_string(r.score) +
                                            " outside [0, 10]");
        auto& t = report.per_category[r.category];
        t.total += r.score;
        ++t.count;
        report.grand_total += r.score;
    }
    return report;
}

EvaluationRun run_benchmark(const BenchmarkSet& set, const Provider& model, const Provider& judge,
                            const EvalTemplates& templates, EvalOptions options) {
    require(!set.items.empty(), "benchmark set is empty");
    std::vector<const BenchmarkItem*> selected;
    for (const auto& item : set.items) {
        if (item.curation_status == CurationStatus::Accepted ||
            (options.include_pending && item.curation_status == CurationStatus::Pending))
            selected.push_back(&item);
    }

    const auto& mc = model.config();
    const std::string model_id = mc.model_name.empty() || mc.model_name == "mock" ? mc.provider_id : mc.model_name;

    enum class Status { Scored, Unscorable, Failed };
    struct Slot {
        Status status = Status::Scored;
        EvaluationRecord record;
    };
    std::vector<Slot> slots(selected.size());
    parallel_for(selected.size(), options.workers, [&](std::size_t i) {
        const auto& item = *selected[i];
        auto& slot = slots[i];
        slot.record.item_id = item.id;
        slot.record.model_id = model_id;
        slot.record.category = item.category;
        try {
            slot.record.response_text = model.complete_text(response_request(item, templates.respond)).text;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ProviderUnavailable && e.kind() != ErrorKind::ProviderRejected) throw;
            slot.status = Status::Failed;
            return;
        }
        if (trim(slot.record.response_text).empty()) {
            slot.status = Status::Unscorable;
            return;
        }
        try {
            slot.record.score = score_response(item.ground_truth_error, slot.record.response_text, judge,
                                               templates.score, i);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnscorableResponse && e.kind() != ErrorKind::ProviderUnavailable &&
                e.kind() != ErrorKind::ProviderRejected)
                throw;
            slot.status = Status::Unscorable;
        }
    });

    EvaluationRun run;
    for (auto& slot : slots) {
        switch (slot.status) {
            case Status::Scored: run.records.push_back(std::move(slot.record)); break;
            case Status::Unscorable: run.unscorable_ids.push_back(slot.record.item_id); break;
            case Status::Failed: run.failed_ids.push_back(slot.record.item_id); break;
        }
    }
    run.report = aggregate(model_id, run.records);
    run.report.unscorable = run.unscorable_ids.size();
    run.report.failed = run.failed_ids.size();
    return run;
}

std::vector<std::string> rank_models(std::span<const EvaluationReport> reports, std::optional<ErrorCategory> category) {
    if (reports.size() < 2) fail(ErrorKind::InsufficientInput, "ranking needs at least 2 reports");
    std::vector<const EvaluationReport*> order;
    for (const auto& r : reports) order.push_back(&r);
    std::sort(order.begin(), order.end(), [&](const auto* a, const auto* b) {
        const auto ta = a->total_for(category), tb = b->total_for(category);
        if (ta != tb) return ta > tb;
        return a->model_id < b->model_id;
    });
    std::vector<std::string> out;
    for (const auto* r : order) out.push_back(r->model_id);
    return out;
}

namespace {

std::map<std::string, const EvaluationReport*> index_reports(std::span<const EvaluationReport> reports,
                                                             std::string_view side) {
    std::map<std::string, const EvaluationReport*> out;
    for (const auto& r : reports) {
        if (!out.emplace(r.model_id, &r).second)
            fail(ErrorKind::Comparison, "model '" + r.model_id + "' appears twice in " + std::string(side));
    }
    return out;
}

}  // namespace

stats::TestResult compare_benchmarks(std::span<const EvaluationReport> a, std::span<const EvaluationReport> b,
                                     ComparisonSpec spec) {
    const auto ia = index_reports(a, "the first report list");
    const auto ib = index_reports(b, "the second report list");
    std::vector<std::string> only_a, only_b;
    for (const auto& [id, r] : ia)
        if (!ib.contains(id)) only_a.push_back(id);
    for (const auto& [id, r] : ib)
        if (!ia.contains(id)) only_b.push_back(id);
    if (!only_a.empty() || !only_b.empty()) {
        std::string msg = "model sets differ:";
        for (const auto& id : only_a) msg += " only-in-first=" + id;
        for (const auto& id : only_b) msg += " only-in-second=" + id;
        fail(ErrorKind::Comparison, msg);
    }
    if (ia.size() < 2) fail(ErrorKind::Comparison, "comparison needs at least 2 models");

    std::vector<double> xs, ys;
    for (const auto& [id, ra] : ia) {
        const auto* rb = ib.at(id);
        switch (spec.unit) {
            case ComparisonUnit::GrandTotal:
                xs.push_back(static_cast<double>(ra->grand_total));
                ys.push_back(static_cast<double>(rb->grand_total));
                break;
            case ComparisonUnit::Category:
                xs.push_back(static_cast<double>(ra->total_for(spec.category)));
                ys.push_back(static_cast<double>(rb->total_for(spec.category)));
                break;
            case ComparisonUnit::Cells:
                for (auto c : kAllCategories) {
                    xs.push_back(static_cast<double>(ra->total_for(c)));
                    ys.push_back(static_cast<double>(rb->total_for(c)));
                }
                break;
        }
    }
    return stats::spearman(xs, ys);
}

std::string totals_csv(std::span<const EvaluationReport> reports) {
    std::ostringstream out;
    out << "model_id";
    for (auto c : kAllCategories) out << ',' << to_string(c);
    out << ",grand_total\n";
    for (const auto& r : reports) {
        out << r.model_id;
        for (auto c : kAllCategories) out << ',' << r.total_for(c);
        out << ',' << r.grand_total << '\n';
    }
    return out.str();
}

std::string records_jsonl(std::span<const EvaluationRecord> records) {
    std::string out;
    for (const auto& r : records) {
        out += json(r).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<EvaluationReport> parse_reports(std::string_view text) {
    const auto body = trim(text);
    std::vector<EvaluationReport> out;
    try {
        if (!body.empty() && body.front() == '[') return json::parse(body).get<std::vector<EvaluationReport>>();
        if (json::accept(body)) {
            out.push_back(json::parse(body).get<EvaluationReport>());
            return out;
        }
        std::size_t pos = 0;
        while (pos < body.size()) {
            auto nl = body.find('\n', pos);
            if (nl == std::string_view::npos) nl = body.size();
            const auto line = trim(body.substr(pos, nl - pos));
            pos = nl + 1;
            if (!line.empty()) out.push_back(json::parse(line).get<EvaluationReport>());
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("malformed report: ") + e.what());
    }
    return out;
}

}  // namespace diffusyn::eval
