#include "diffusyn/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diffusyn/error.hpp"

namespace diffusyn::stats {

void to_json(json& j, const TestResult& v) {
    j = json{{"statistic", v.statistic}, {"p_value", v.p_value}, {"dof", v.dof}, {"method", v.method}};
}

void from_json(const json& j, TestResult& v) {
    j.at("statistic").get_to(v.statistic);
    j.at("p_value").get_to(v.p_value);
    j.at("dof").get_to(v.dof);
    j.at("method").get_to(v.method);
}

namespace {
double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double accuracy(const ConfusionMatrix& m) {
    if (m.total() == 0) fail(ErrorKind::UndefinedMetric, "accuracy of an empty confusion matrix is undefined");
    return ratio(m.tp + m.tn, m.total());
}

double f1(const ConfusionMatrix& m) { return ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn_); }

PrecisionRecall precision_recall(const ConfusionMatrix& m) {
    return {ratio(m.tp, m.tp + m.fp), ratio(m.tp, m.tp + m.fn_)};
}

double bias_index(const ConfusionMatrix& m) {
    if (m.total() == 0) fail(ErrorKind::UndefinedMetric, "bias index of an empty confusion matrix is undefined");
    const auto human = static_cast<double>(m.fn_ + m.tn);
    const auto ai = static_cast<double>(m.tp + m.fp);
    return (human - ai) / static_cast<double>(m.total());
}

TestResult chi_square_independence(const ConfusionMatrix& m, ChiSquareOptions options) {
    const long double a = m.tp, b = m.fn_, c = m.fp, d = m.tn;
    const long double n = a + b + c + d;
    const long double row_ai = a + b, row_human = c + d;
    const long double col_ai = a + c, col_human = b + d;
    if (n == 0 || row_ai == 0 || row_human == 0 || col_ai == 0 || col_human == 0)
        fail(ErrorKind::DegenerateTable, "chi-square needs every row and column sum to be positive");
    long double diff = std::fabs(a * d - b * c);
    if (options.yates) diff = std::max(0.0L, diff - n / 2);
    const long double statistic = n * diff * diff / (row_ai * row_human * col_ai * col_human);
    TestResult r;
    r.statistic = static_cast<double>(statistic);
    r.p_value = std::clamp(std::erfc(std::sqrt(r.statistic / 2.0)), 0.0, 1.0);
    r.dof = 1;
    r.method = options.yates ? "chi-square independence (Yates)" : "chi-square independence";
    return r;
}

double chi_square_sf(double x, int dof) {
    if (dof < 1) fail(ErrorKind::UndefinedMetric, "chi-square needs dof >= 1");
    if (!(x > 0.0)) return 1.0;
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        fail(ErrorKind::UndefinedMetric, "correlation needs two equal-length vectors of length >= 2");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::UndefinedMetric, "correlation of a constant vector is undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

TestResult spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        fail(ErrorKind::UndefinedMetric, "spearman inputs differ in length (" + std::to_string(xs.size()) + " vs " +
                                             std::to_string(ys.size()) + ")");
    if (xs.size() < 2) fail(ErrorKind::UndefinedMetric, "spearman needs at least 2 pairs");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double rho = pearson(rx, ry);
    const std::size_t n = xs.size();

    TestResult r;
    r.statistic = rho;
    r.dof = static_cast<int>(std::max<std::size_t>(n, 3) - 2);
    if (n <= kExactPermutationMaxN) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<double> permuted(n);
        std::uint64_t extreme = 0, total = 0;
        const double threshold = std::fabs(rho) - 1e-12;
        do {
            for (std::size_t i = 0; i < n; ++i) permuted[i] = ry[perm[i]];
            if (std::fabs(pearson(rx, permuted)) >= threshold) ++extreme;
            ++total;
        } while (std::next_permutation(perm.begin(), perm.end()));
        r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        r.method = "spearman (exact permutation)";
    } else {
        if (std::fabs(rho) >= 1.0) {
            r.p_value = 0.0;
        } else {
            const double df = static_cast<double>(n - 2);
            const double t = rho * std::sqrt(df / (1.0 - rho * rho));
            boost::math::students_t_distribution<double> dist(df);
            r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))), 0.0, 1.0);
        }
        r.method = "spearman (t approximation)";
    }
    return r;
}

void to_json(json& j, const DiversityReport& v) {
    j = json{{"shares", v.shares}, {"max_share", v.max_share}, {"entropy", v.entropy}};
}

DiversityReport diversity_from_counts(const std::map<std::string, std::uint64_t>& counts) {
    DiversityReport r;
    std::uint64_t total = 0;
    for (const auto& [tag, n] : counts) total += n;
    if (total == 0) return r;
    for (const auto& [tag, n] : counts) {
        if (n == 0) continue;
        const double p = static_cast<double>(n) / static_cast<double>(total);
        r.shares[tag] = p;
        r.max_share = std::max(r.max_share, p);
        r.entropy -= p * std::log(p);
    }
    r.entropy = std::max(0.0, r.entropy);
    return r;
}

DiversityReport diversity_report(const BenchmarkSet& set) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& item : set.items) {
        if (item.curation_status == CurationStatus::Rejected) continue;
        ++counts[item.prompt.script.topic.scenario_tag];
    }
    return diversity_from_counts(counts);
}

double noise_rate(const PipelineStats& s) {
    if (s.attempts == 0) fail(ErrorKind::UndefinedMetric, "noise rate of a run with zero attempts is undefined");
    return static_cast<double>(s.attempts - s.accepted) / static_cast<double>(s.attempts);
}

double stage_rejection_rate(const PipelineStats& s, const std::string& stage_name) {
    if (s.attempts == 0) fail(ErrorKind::UndefinedMetric, "rejection rate of a run with zero attempts is undefined");
    const auto it = s.rejections.find(stage_name);
    return it == s.rejections.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(s.attempts);
}

json matrix_metrics(const ConfusionMatrix& m, ChiSquareOptions options) {
    const auto pr = precision_recall(m);
    json out = m;
    out["total"] = m.total();
    out["accuracy"] = accuracy(m);
    out["precision"] = pr.precision;
    out["recall"] = pr.recall;
    out["f1"] = f1(m);
    out["bias_index"] = bias_index(m);
    try {
        out["chi_square"] = chi_square_independence(m, options);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateTable) throw;
        out["chi_square"] = nullptr;
    }
    return out;
}

std::string heatmap_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "actual,guessed_ai,guessed_human\n";
    out << "ai," << m.tp << ',' << m.fn_ << '\n';
    out << "human," << m.fp << ',' << m.tn << '\n';
    return out.str();
}

}  // namespace diffusyn::stats
