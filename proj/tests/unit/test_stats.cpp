#include <doctest.h>

#include <cmath>

#include "diffusyn/error.hpp"
#include "diffusyn/rng.hpp"
#include "diffusyn/stats.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace diffusyn;
using doctest::Approx;

namespace {

ConfusionMatrix cm(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) { return {tp, fn, fp, tn}; }

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

ConfusionMatrix random_matrix(Rng& rng, std::uint64_t hi) {
    return cm(rng.uniform_index(hi), rng.uniform_index(hi), rng.uniform_index(hi), rng.uniform_index(hi));
}

}  // namespace

TEST_CASE("accuracy") {
    CHECK(stats::accuracy(cm(100, 0, 0, 100)) == 1.0);
    CHECK(stats::accuracy(cm(90, 10, 13, 87)) == Approx(0.885).epsilon(1e-12));
    CHECK(kind_of([] { stats::accuracy(cm(0, 0, 0, 0)); }) == ErrorKind::UndefinedMetric);
}

TEST_CASE("f1 and precision/recall") {
    CHECK(stats::f1(cm(2, 1, 1, 0)) == Approx(4.0 / 6.0));
    CHECK(std::round(stats::f1(cm(2, 1, 1, 0)) * 1e4) / 1e4 == 0.6667);
    CHECK(stats::f1(cm(7, 0, 0, 3)) == 1.0);
    CHECK(stats::f1(cm(0, 0, 0, 0)) == 0.0);
    CHECK(stats::f1(cm(0, 0, 0, 9)) == 0.0);

    const auto pr = stats::precision_recall(cm(2, 1, 1, 0));
    CHECK(pr.precision == Approx(2.0 / 3.0));
    CHECK(pr.recall == Approx(2.0 / 3.0));
    CHECK(stats::precision_recall(cm(0, 0, 5, 3)).precision == 0.0);
    CHECK(stats::precision_recall(cm(0, 0, 5, 3)).recall == 0.0);
}

TEST_CASE("bias index") {
    CHECK(stats::bias_index(cm(5, 5, 5, 5)) == 0.0);
    CHECK(stats::bias_index(cm(0, 40, 0, 60)) == 1.0);
    CHECK(stats::bias_index(cm(40, 0, 60, 0)) == -1.0);
    CHECK(stats::bias_index(cm(10, 90, 5, 95)) == Approx(0.85).epsilon(1e-12));
    CHECK(kind_of([] { stats::bias_index(cm(0, 0, 0, 0)); }) == ErrorKind::UndefinedMetric);
}

TEST_CASE("chi-square independence") {
    auto r = stats::chi_square_independence(cm(25, 25, 25, 25));
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.dof == 1);

    r = stats::chi_square_independence(cm(50, 0, 0, 50));
    CHECK(r.statistic == 100.0);
    CHECK(r.p_value < 1e-20);

    r = stats::chi_square_independence(cm(40, 10, 20, 30));
    CHECK(r.statistic == Approx(16.6667).epsilon(1e-4));
    CHECK(r.p_value < 0.001);
    // 3.841 is the tabulated 5% critical value at 1 dof.
    CHECK(stats::chi_square_sf(3.841, 1) == Approx(0.05).epsilon(1e-3));

    CHECK(kind_of([] { stats::chi_square_independence(cm(10, 10, 0, 0)); }) == ErrorKind::DegenerateTable);
    CHECK(kind_of([] { stats::chi_square_independence(cm(10, 0, 10, 0)); }) == ErrorKind::DegenerateTable);

    // Yates shrinks |ad - bc| by n/2.
    const auto y = stats::chi_square_independence(cm(40, 10, 20, 30), {true});
    CHECK(y.statistic == Approx(100.0 * (1000 - 50) * (1000 - 50) / (50.0 * 50 * 60 * 40)));
}

TEST_CASE("chi-square survival agrees with the incomplete-gamma oracle for several dof") {
    for (int dof : {1, 2, 3, 5, 10})
        for (double x : {0.1, 1.0, 3.0, 7.5, 20.0, 60.0})
            CHECK(stats::chi_square_sf(x, dof) == Approx(oracle::gamma_q(dof / 2.0, x / 2.0)).epsilon(1e-9));
}

TEST_CASE("spearman fixed cases") {
    const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 4, 3}, rev{4, 3, 2, 1};
    CHECK(stats::spearman(a, a).statistic == Approx(1.0));
    CHECK(stats::spearman(a, rev).statistic == Approx(-1.0));
    const auto r = stats::spearman(a, b);
    CHECK(r.statistic == Approx(0.8));
    CHECK(r.p_value == Approx(oracle::spearman_exact_p({1, 2, 3, 4}, {1, 2, 4, 3})));
    CHECK(std::fabs(r.p_value * 24 - std::round(r.p_value * 24)) < 1e-12);

    const std::vector<double> ties{1, 1, 2, 3};
    const auto ranks = stats::average_ranks(ties);
    CHECK(ranks == std::vector<double>{1.5, 1.5, 3, 4});

    CHECK(kind_of([&] { stats::spearman(a, std::vector<double>{1, 2, 3}); }) == ErrorKind::UndefinedMetric);
    CHECK(kind_of([&] { stats::spearman(a, std::vector<double>{5, 5, 5, 5}); }) == ErrorKind::UndefinedMetric);
    CHECK(kind_of([&] { stats::spearman(std::vector<double>{1}, std::vector<double>{1}); }) ==
          ErrorKind::UndefinedMetric);
}

TEST_CASE("spearman large n uses the t approximation") {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(i);
        y.push_back(i % 7 + 0.1 * i);
    }
    const auto r = stats::spearman(x, y);
    CHECK(r.method.find("t approximation") != std::string::npos);
    CHECK(r.dof == 18);
    CHECK(r.statistic == Approx(oracle::spearman_rho(x, y)).epsilon(1e-12));
    CHECK(r.p_value == Approx(oracle::spearman_t_p(r.statistic, 20)).epsilon(1e-9));
}

TEST_CASE("property: metric ranges and harmonic-mean consistency") {
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto m = random_matrix(rng, 50);
        if (m.total() == 0) continue;
        const double acc = stats::accuracy(m), f = stats::f1(m), b = stats::bias_index(m);
        const auto pr = stats::precision_recall(m);
        CHECK((acc >= 0 && acc <= 1));
        CHECK((f >= 0 && f <= 1));
        CHECK((b >= -1 && b <= 1));
        CHECK((pr.precision >= 0 && pr.precision <= 1 && pr.recall >= 0 && pr.recall <= 1));
        if (pr.precision + pr.recall > 0)
            CHECK(f == Approx(2 * pr.precision * pr.recall / (pr.precision + pr.recall)).epsilon(1e-12));
        try {
            const auto c = stats::chi_square_independence(m);
            CHECK((c.p_value >= 0 && c.p_value <= 1));
            CHECK(c.statistic >= 0);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateTable);
        }
    }
}

TEST_CASE("property: count scaling") {
    Rng rng(12);
    for (int i = 0; i < 300; ++i) {
        const auto m = random_matrix(rng, 40);
        const std::uint64_t k = 1 + rng.uniform_index(9);
        const auto s = cm(m.tp * k, m.fn_ * k, m.fp * k, m.tn * k);
        if (m.total() == 0) continue;
        CHECK(stats::accuracy(s) == Approx(stats::accuracy(m)).epsilon(1e-12));
        CHECK(stats::f1(s) == Approx(stats::f1(m)).epsilon(1e-12));
        CHECK(stats::bias_index(s) == Approx(stats::bias_index(m)).epsilon(1e-12));
        CHECK(stats::precision_recall(s).precision == Approx(stats::precision_recall(m).precision).epsilon(1e-12));
        CHECK(stats::precision_recall(s).recall == Approx(stats::precision_recall(m).recall).epsilon(1e-12));
        if (m.tp + m.fn_ && m.fp + m.tn && m.tp + m.fp && m.fn_ + m.tn) {
            const double base = stats::chi_square_independence(m).statistic;
            CHECK(stats::chi_square_independence(s).statistic == Approx(base * k).epsilon(1e-10));
            // Swapping both rows and columns maps (tp, fn, fp, tn) to (tn, fp, fn, tp).
            CHECK(stats::chi_square_independence(cm(m.tn, m.fp, m.fn_, m.tp)).statistic ==
                  Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: spearman symmetry and monotone invariance") {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + rng.uniform_index(7);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = static_cast<double>(rng.uniform_index(6));
        for (auto& v : y) v = static_cast<double>(rng.uniform_index(6));
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
            continue;
        const auto r = stats::spearman(x, y);
        const auto s = stats::spearman(y, x);
        CHECK(r.statistic == Approx(s.statistic).epsilon(1e-12));
        CHECK(r.p_value == Approx(s.p_value).epsilon(1e-12));
        std::vector<double> tx(n);
        for (std::size_t k = 0; k < n; ++k) tx[k] = std::exp(x[k]) + 3 * x[k];
        CHECK(stats::spearman(tx, y).statistic == Approx(r.statistic).epsilon(1e-12));
        CHECK((r.p_value >= 0 && r.p_value <= 1));
        if (n == 4) CHECK(std::fabs(r.p_value * 24 - std::round(r.p_value * 24)) < 1e-9);
    }
}

TEST_CASE("diversity report") {
    auto one = stats::diversity_from_counts({{"kitchen", 12}});
    CHECK(one.max_share == 1.0);
    CHECK(one.entropy == 0.0);

    std::map<std::string, std::uint64_t> uniform;
    for (int i = 0; i < 20; ++i) uniform["s" + std::to_string(i)] = 7;
    const auto u = stats::diversity_from_counts(uniform);
    CHECK(u.max_share == Approx(0.05).epsilon(1e-15));
    CHECK(u.entropy == Approx(std::log(20.0)).epsilon(1e-12));
    double sum = 0;
    for (const auto& [k, v] : u.shares) sum += v;
    CHECK(sum == Approx(1.0).epsilon(1e-9));

    CHECK(stats::diversity_report(BenchmarkSet{}).max_share == 0.0);
    CHECK(stats::diversity_report(BenchmarkSet{}).shares.empty());

    Rng rng(3);
    auto set = fixture::random_set(rng, 60);
    const auto rep = stats::diversity_report(set);
    std::map<std::string, std::uint64_t> counts;
    for (const auto& item : set.items)
        if (item.curation_status != CurationStatus::Rejected) ++counts[item.prompt.script.topic.scenario_tag];
    CHECK(rep.shares.size() == counts.size());
}

TEST_CASE("noise rate") {
    PipelineStats s;
    s.attempts = 1000;
    s.accepted = 942;
    s.rejections["image"] = 58;
    CHECK(stats::noise_rate(s) == Approx(0.058).epsilon(1e-12));
    s.accepted = 719;
    s.rejections["image"] = 281;
    CHECK(stats::noise_rate(s) == Approx(0.281).epsilon(1e-12));
    CHECK(stats::stage_rejection_rate(s, "image") == Approx(0.281).epsilon(1e-12));
    CHECK(stats::stage_rejection_rate(s, "judge") == 0.0);
    s.accepted = 1000;
    s.rejections.clear();
    CHECK(stats::noise_rate(s) == 0.0);
    CHECK(kind_of([] { stats::noise_rate(PipelineStats{}); }) == ErrorKind::UndefinedMetric);
}

TEST_CASE("heatmap csv layout") {
    CHECK(stats::heatmap_csv(cm(1, 2, 3, 4)) == "actual,guessed_ai,guessed_human\nai,1,2\nhuman,3,4\n");
    const auto j = stats::matrix_metrics(cm(10, 0, 0, 0));
    CHECK(j["chi_square"].is_null());
}
