#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffusyn/model.hpp"
#include "diffusyn/providers.hpp"
#include "diffusyn/stats.hpp"
#include "diffusyn/templates.hpp"

namespace diffusyn::eval {

inline constexpr int kMinScore = 0;
inline constexpr int kMaxScore = 10;

struct EvaluationRecord {
    std::string item_id;
    std::string model_id;
    ErrorCategory category = ErrorCategory::Biological;
    std::string response_text;
    int score = 0;

    bool operator==(const EvaluationRecord&) const = default;
};

struct CategoryTotals {
    std::int64_t total = 0;
    std::uint64_t count = 0;

    std::optional<double> mean() const {
        if (count == 0) return std::nullopt;
        return static_cast<double>(total) / static_cast<double>(count);
    }
    bool operator==(const CategoryTotals&) const = default;
};

struct EvaluationReport {
    std::string model_id;
    std::map<ErrorCategory, CategoryTotals> per_category;
    std::int64_t grand_total = 0;
    std::uint64_t unscorable = 0;
    std::uint64_t failed = 0;

    std::int64_t total_for(std::optional<ErrorCategory> category) const;
    bool operator==(const EvaluationReport&) const = default;
};

void to_json(json& j, const EvaluationRecord& v);
void from_json(const json& j, EvaluationRecord& v);
void to_json(json& j, const EvaluationReport& v);
void from_json(const json& j, EvaluationReport& v);

/// Accepts a reply that is a single integer token in [0, 10].
std::optional<int> parse_score(std::string_view text);

/// Throws `UnscorableResponse` after one retry on malformed judge output.
int score_response(std::string_view ground_truth, std::string_view response, const Provider& judge,
                   const PromptTemplate& tmpl, std::uint64_t nonce = 0);

/// The request a model under test receives for an item.
TextRequest response_request(const BenchmarkItem& item, const PromptTemplate& tmpl);

struct EvalOptions {
    bool include_pending = false;
    int workers = 1;
};

struct EvaluationRun {
    std::vector<EvaluationRecord> records;
    EvaluationReport report;
    std::vector<std::string> unscorable_ids;
    std::vector<std::string> failed_ids;
};

/// Evaluates accepted items (and pending ones when asked). Records come out
/// in manifest order.
EvaluationRun run_benchmark(const BenchmarkSet& set, const Provider& model, const Provider& judge,
                            const EvalTemplates& templates, EvalOptions options = {});

/// Folds records into per-category totals. Throws `Validation` on an
/// out-of-range score.
EvaluationReport aggregate(std::string model_id, std::span<const EvaluationRecord> records);

/// Descending by the selected total, ties broken by model id.
std::vector<std::string> rank_models(std::span<const EvaluationReport> reports,
                                     std::optional<ErrorCategory> category = std::nullopt);

enum class ComparisonUnit { GrandTotal, Category, Cells };

struct ComparisonSpec {
    ComparisonUnit unit = ComparisonUnit::GrandTotal;
    ErrorCategory category = ErrorCategory::Biological;  // for ComparisonUnit::Category
};

/// Spearman correlation of paired totals across the same set of models.
/// `Cells` pairs every (model, category) total.
stats::TestResult compare_benchmarks(std::span<const EvaluationReport> a, std::span<const EvaluationReport> b,
                                     ComparisonSpec spec = {});

/// Per-category totals table: one row per model.
std::string totals_csv(std::span<const EvaluationReport> reports);

std::string records_jsonl(std::span<const EvaluationRecord> records);

/// Reads a JSON array of reports, a single report, or JSON Lines of reports.
std::vector<EvaluationReport> parse_reports(std::string_view text);

}  // namespace diffusyn::eval
