#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "diffusyn/confusion.hpp"
#include "diffusyn/model.hpp"

namespace diffusyn::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 1;
    std::string method;
};

void to_json(json& j, const TestResult& v);
void from_json(const json& j, TestResult& v);

/// (tp + tn) / total. Throws `UndefinedMetric` on an empty matrix.
double accuracy(const ConfusionMatrix& m);

/// 2·TP / (2·TP + FP + FN); 0 when the denominator is 0.
double f1(const ConfusionMatrix& m);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// Each ratio is 0 when its denominator is 0.
PrecisionRecall precision_recall(const ConfusionMatrix& m);

/// ((fn + tn) - (tp + fp)) / total. Positive values mean the classifier
/// over-predicts "human".
double bias_index(const ConfusionMatrix& m);

struct ChiSquareOptions {
    bool yates = false;
};

/// Pearson chi-square test of independence on the 2x2 table, 1 dof,
/// p = erfc(sqrt(x / 2)). Throws `DegenerateTable` on a zero marginal.
TestResult chi_square_independence(const ConfusionMatrix& m, ChiSquareOptions options = {});

/// Upper tail of the chi-square distribution, via the regularized upper
/// incomplete gamma Q(dof/2, x/2).
double chi_square_sf(double x, int dof);

/// 1-based ranks, ties receive the mean of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> xs, std::span<const double> ys);

inline constexpr std::size_t kExactPermutationMaxN = 8;

/// Spearman's rho as the Pearson correlation of average ranks. Two-sided p:
/// exact permutation over all n! orderings for n <= 8, otherwise Student t
/// with n - 2 dof.
TestResult spearman(std::span<const double> xs, std::span<const double> ys);

struct DiversityReport {
    std::map<std::string, double> shares;
    double max_share = 0.0;
    double entropy = 0.0;  // nats
};

void to_json(json& j, const DiversityReport& v);

DiversityReport diversity_from_counts(const std::map<std::string, std::uint64_t>& counts);

/// Scenario shares over the items of a set, skipping curation-rejected ones.
DiversityReport diversity_report(const BenchmarkSet& set);

/// (attempts - accepted) / attempts.
double noise_rate(const PipelineStats& s);

/// Rejections at one stage divided by attempts.
double stage_rejection_rate(const PipelineStats& s, const std::string& stage);

/// Flat metrics object for the `stats` subcommand.
json matrix_metrics(const ConfusionMatrix& m, ChiSquareOptions options = {});

/// Heatmap data, rows = actual label, columns = predicted label.
std::string heatmap_csv(const ConfusionMatrix& m);

}  // namespace diffusyn::stats
