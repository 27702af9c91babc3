#include <doctest.h>

#include <random>

#include "memlabel/error.hpp"
#include "memlabel/eval.hpp"
#include "memlabel/synthetic.hpp"
#include "test_util.hpp"

using namespace memlabel;

namespace {

SyntheticData three_clusters(std::int64_t seed) {
    SyntheticSpec spec;
    spec.classes = {{.name = "a", .count = 40, .center = {0.0, 0.0}, .dispersion = 0.4},
                    {.name = "b", .count = 40, .center = {10.0, 0.0}, .dispersion = 0.4},
                    {.name = "c", .count = 40, .center = {0.0, 10.0}, .dispersion = 0.4}};
    return generate_synthetic(spec, seed);
}

}  // namespace

TEST_CASE("perfect predictions") {
    const auto r = score_labels({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
    CHECK(r.accuracy == 1.0);
    CHECK(r.weighted_f1 == 1.0);
    for (const auto& c : r.per_class) CHECK(c.f1 == 1.0);
}

TEST_CASE("binary hand example") {
    const auto r = score_labels({1, 1, 0, 0}, {1, 0, 0, 0}, 2, 1);
    CHECK(r.accuracy == 0.75);
    CHECK(r.per_class[1].precision == 0.5);
    CHECK(r.per_class[1].recall == 1.0);
    CHECK(r.binary_f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(r.f1() == r.binary_f1);
    CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{2, 1}, {0, 1}});
}

TEST_CASE("empty class gets zero F1 and zero weight") {
    const auto r = score_labels({0, 0, 1}, {0, 1, 1}, 3);
    CHECK(r.per_class[2].f1 == 0.0);
    CHECK(r.per_class[2].support == 0);
    const double f0 = r.per_class[0].f1, f1 = r.per_class[1].f1;
    CHECK(r.weighted_f1 == (1 * f0 + 2 * f1) / 3);
}

TEST_CASE("scores match a brute-force recount") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) {
        const std::size_t classes = 2 + k % 4;
        const std::size_t n = 1 + rng() % 50;
        std::vector<ClassIndex> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<ClassIndex>(rng() % classes);
            truth[i] = static_cast<ClassIndex>(rng() % classes);
        }
        const auto r = score_labels(pred, truth, classes);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < n; ++i) hit += pred[i] == truth[i];
        CHECK(r.accuracy == static_cast<double>(hit) / n);
        double weighted = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool p = pred[i] == (ClassIndex)c, t = truth[i] == (ClassIndex)c;
                tp += p && t;
                fp += p && !t;
                fn += !p && t;
            }
            const double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
            const double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            CHECK(r.per_class[c].precision == doctest::Approx(prec).epsilon(1e-14));
            CHECK(r.per_class[c].recall == doctest::Approx(rec).epsilon(1e-14));
            CHECK(r.per_class[c].f1 == doctest::Approx(f1).epsilon(1e-14));
            std::size_t row = 0;
            for (auto v : r.confusion[c]) row += v;
            CHECK(row == tp + fn);
            CHECK(r.per_class[c].support == tp + fn);
            weighted += (tp + fn) * r.per_class[c].f1;
        }
        CHECK(r.weighted_f1 == weighted / n);
    }
}

TEST_CASE("score over probabilistic labels checks ids") {
    const auto ds = testutil::points_1d({0, 1});
    const LabelSpace space({"n", "p"});
    const GroundTruth gt(ds, space, {{"p0", 0}, {"p1", 1}});
    ProbabilisticLabels pl{{"p0", "p1"}, 2, {{0.9, 0.1}, {0.2, 0.8}}};
    CHECK(score(pl, gt).accuracy == 1.0);
    ProbabilisticLabels bad{{"p0", "zz"}, 2, {{0.9, 0.1}, {0.2, 0.8}}};
    CHECK_THROWS_AS(score(bad, gt), ValidationError);
    const auto r = score(pl, gt, 1);
    CHECK(format_report_text(r, space).find("accuracy") != std::string::npos);
    CHECK(format_report_csv(r, space).find("p") != std::string::npos);
}

TEST_CASE("one-vs-all on three separated clusters") {
    const auto data = three_clusters(8);
    const auto m = build_distance_matrix(data.dataset, {DistanceKind::euclidean});
    ExperimentOptions opts;
    opts.pipeline = {.base = {.distance_threshold = 2.5}, .seeds = {1, 2, 3}, .max_labels = 60};
    const auto r = one_vs_all_suite(data.dataset, m, data.ground_truth, data.label_space, {0, 1, 2}, opts,
                                    Aggregator::majority);
    REQUIRE(r.reports.size() == 3);
    double acc = 0, f1 = 0;
    for (const auto& rep : r.reports) {
        CHECK(rep.accuracy >= 0.95);
        CHECK(rep.positive_class == std::optional<ClassIndex>(1));
        acc += rep.accuracy;
        f1 += rep.f1();
    }
    CHECK(std::abs(r.mean_accuracy - acc / 3) <= 1e-12);
    CHECK(std::abs(r.mean_f1 - f1 / 3) <= 1e-12);
    CHECK(r.std_accuracy >= 0.0);
    CHECK(format_one_vs_all_text(r, data.label_space).find("average") != std::string::npos);
}

TEST_CASE("ablation sweep") {
    const auto data = three_clusters(9);
    const auto m = build_distance_matrix(data.dataset, {DistanceKind::euclidean});
    ExperimentOptions opts;
    opts.pipeline = {.seeds = {1, 2}, .max_labels = 80};
    opts.aggregators = {Aggregator::majority, Aggregator::label_model};
    const std::vector<double> ts{100.0, 6.0, 2.5, 1.5, 1.0};
    const auto rows = ablation_sweep(data.dataset, m, data.ground_truth, data.label_space, ts, opts, std::nullopt);
    REQUIRE(rows.size() == ts.size() * 2);

    // above the diameter every seed has one memory, fewer than |Y|
    CHECK_FALSE(rows[0].accuracy);
    CHECK_FALSE(rows[0].note.empty());
    CHECK(rows[0].seed_sizes == std::vector<std::size_t>{1, 1});

    for (std::size_t i = 2; i < rows.size(); i += 2)
        for (std::size_t k = 0; k < 2; ++k) CHECK(rows[i].seed_sizes[k] >= rows[i - 2].seed_sizes[k]);
    for (const auto& row : rows) {
        CHECK(row.consumed <= row.max_labels);
        CHECK(row.functions <= row.max_labels / 3);
        if (row.accuracy) CHECK(*row.accuracy >= 0.9);
    }

    const auto again = ablation_sweep(data.dataset, m, data.ground_truth, data.label_space, ts, opts, std::nullopt);
    CHECK(format_ablation_csv(again) == format_ablation_csv(rows));
    const auto csv = format_ablation_csv(rows);
    CHECK(csv.rfind("t,N_L,N_s,N_w,aggregator,accuracy,f1\n", 0) == 0);
    CHECK(csv.find("100,80,0,0,majority,,\n") != std::string::npos);
    CHECK_FALSE(format_ablation_text(rows).empty());
}
