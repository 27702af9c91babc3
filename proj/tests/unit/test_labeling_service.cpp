#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "memlabel/error.hpp"
#include "memlabel/labeling_service.hpp"
#include "test_util.hpp"

using namespace memlabel;

namespace {

std::vector<LabelQuery> queries_for(const Dataset& ds, std::int64_t seed, std::vector<std::size_t> idx) {
    std::vector<LabelQuery> out;
    for (auto i : idx) out.push_back({make_query_id(seed, i), ds.id(i), i, seed});
    return out;
}

const LabelSpace kSpace({"normal", "desat", "artifact"});

}  // namespace

TEST_CASE("oracle provider") {
    const auto ds = testutil::points_1d({0, 1, 2});
    const GroundTruth gt(ds, kSpace, {{"p0", 2}, {"p1", 0}});
    OracleProvider oracle(gt);
    const auto ok = oracle.label(queries_for(ds, 1, {0, 1}));
    CHECK(ok == std::vector<std::optional<ClassIndex>>{2, 0});
    try {
        oracle.label(queries_for(ds, 1, {2}));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("p2") != std::string::npos);
    }
}

TEST_CASE("label flips") {
    std::vector<double> xs(2000, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    const auto ds = testutil::points_1d(xs);
    std::unordered_map<std::string, ClassIndex> labels;
    for (std::size_t i = 0; i < ds.size(); ++i) labels[ds.id(i)] = static_cast<ClassIndex>(i % 3);
    const GroundTruth gt(ds, kSpace, labels);
    CHECK(flip_labels(gt, ds, kSpace, 0.0, 1).labels() == gt.labels());
    const auto all = flip_labels(gt, ds, kSpace, 1.0, 1);
    for (const auto& [id, c] : all.labels()) CHECK(c != gt.at(id));
    const auto some = flip_labels(gt, ds, kSpace, 0.1, 4);
    std::size_t changed = 0;
    for (const auto& [id, c] : some.labels()) changed += c != gt.at(id);
    CHECK(changed > 140);
    CHECK(changed < 260);
    CHECK(flip_labels(gt, ds, kSpace, 0.1, 4).labels() == some.labels());
}

TEST_CASE("session submissions") {
    testutil::TempDir dir;
    const auto ds = testutil::points_1d({0, 1, 2, 3});
    auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 3);
    CHECK(s->status() == SessionStatus::open);
    s->enqueue(queries_for(ds, 7, {0, 1, 2, 3}));
    s->enqueue(queries_for(ds, 7, {0}));  // idempotent
    CHECK(s->pending().size() == 4);
    CHECK(s->pending(2).size() == 2);

    CHECK(s->submit("7:0", 1).status == SubmitStatus::accepted);
    CHECK(s->consumed() == 1);
    CHECK(s->submit("7:0", 2).status == SubmitStatus::duplicate);
    CHECK(s->submit("9:0", 1).status == SubmitStatus::unknown_query);
    CHECK(s->submit("7:1", 3).status == SubmitStatus::invalid_class);
    CHECK(s->submit("7:1", -1).status == SubmitStatus::invalid_class);
    CHECK(s->consumed() == 1);
    CHECK(s->submit("7:1", 0).status == SubmitStatus::accepted);
    CHECK(s->skip("7:2"));
    CHECK(s->submit("7:2", 0).status == SubmitStatus::duplicate);
    CHECK(s->submit("7:3", 2).status == SubmitStatus::accepted);
    CHECK(s->consumed() == 3);
    CHECK(s->status() == SessionStatus::complete);

    const auto prog = s->progress();
    CHECK(prog.total_queries == 4);
    CHECK(prog.answered == 3);
    CHECK(prog.skipped == 1);
    CHECK(prog.per_seed.at(7).answered == 3);

    s->enqueue(queries_for(ds, 8, {0}));
    CHECK(s->submit("8:0", 0).status == SubmitStatus::over_budget);
    CHECK(s->consumed() == 3);
}

TEST_CASE("session survives reopen, torn tail is dropped") {
    testutil::TempDir dir;
    const auto ds = testutil::points_1d({0, 1, 2});
    {
        auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
        s->enqueue(queries_for(ds, 1, {0, 1, 2}));
        s->submit("1:0", 2);
        s->skip("1:1");
    }
    // a crash mid-write leaves a partial record
    {
        std::ofstream j(dir.file("s/journal.csv"), std::ios::app);
        j << "1:2,p2,1,0,17";
    }
    auto s = LabelSession::open_existing(dir.file("s"));
    CHECK(s->consumed() == 1);
    CHECK(s->query("1:0")->label == std::optional<ClassIndex>(2));
    CHECK(s->query("1:1")->skipped);
    CHECK_FALSE(s->query("1:2")->resolved());
    CHECK(s->pending().size() == 1);
    CHECK(s->submit("1:2", 1).status == SubmitStatus::accepted);
    s.reset();

    auto again = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
    CHECK(again->consumed() == 2);
    CHECK(again->accepted().size() == 2);
    CHECK(again->status() == SessionStatus::complete);
    const auto journal = testutil::read_text(dir.file("s/journal.csv"));
    CHECK(journal.rfind("query_id,sample_id,seed,class_index,timestamp\n", 0) == 0);
    CHECK(std::count(journal.begin(), journal.end(), '\n') == 3);
    again.reset();
    CHECK_THROWS_AS(LabelSession::open(dir.file("s"), "other", kSpace, 10), ValidationError);
    CHECK_THROWS_AS(LabelSession::open(dir.file("s"), "demo", kSpace, 11), ValidationError);
}

TEST_CASE("abort refuses further labels") {
    testutil::TempDir dir;
    const auto ds = testutil::points_1d({0, 1});
    auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
    s->enqueue(queries_for(ds, 1, {0, 1}));
    s->abort();
    CHECK(s->status() == SessionStatus::aborted);
    CHECK(s->submit("1:0", 0).status == SubmitStatus::not_open);
    CHECK_FALSE(s->wait_resolved({"1:0"}));
}

TEST_CASE("session provider blocks until labels arrive") {
    testutil::TempDir dir;
    const auto ds = testutil::points_1d({0, 1, 2});
    auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
    SessionProvider provider(*s);
    std::jthread annotator([&] {
        while (s->pending().size() < 3) std::this_thread::sleep_for(std::chrono::milliseconds(1));
        for (const auto& q : s->pending()) {
            if (q.sample_id == "p1")
                s->skip(q.query_id);
            else
                s->submit(q.query_id, static_cast<ClassIndex>(q.sample_index));
        }
    });
    const auto answers = provider.label(queries_for(ds, 4, {0, 1, 2}));
    CHECK(answers == std::vector<std::optional<ClassIndex>>{0, std::nullopt, 2});
}

TEST_CASE("session provider surfaces abort as refusal") {
    testutil::TempDir dir;
    const auto ds = testutil::points_1d({0, 1});
    auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
    SessionProvider provider(*s);
    std::jthread annotator([&] {
        while (s->pending().empty()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
        s->abort();
    });
    CHECK_THROWS_AS(provider.label(queries_for(ds, 1, {0, 1})), ProviderRefusal);
}

TEST_CASE("concurrent submissions never exceed the budget") {
    testutil::TempDir dir;
    std::vector<double> xs(60);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    const auto ds = testutil::points_1d(xs);
    auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 25);
    std::vector<std::size_t> idx(60);
    std::iota(idx.begin(), idx.end(), 0);
    s->enqueue(queries_for(ds, 1, idx));
    std::atomic<int> accepted{0};
    {
        std::vector<std::jthread> workers;
        for (int w = 0; w < 4; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = 0; i < 60; ++i) {
                    const auto r = s->submit(make_query_id(1, (i * 7 + w * 13) % 60), w % 3);
                    if (r.status == SubmitStatus::accepted) ++accepted;
                    CHECK(r.consumed <= 25);
                }
            });
    }
    CHECK(accepted == 25);
    CHECK(s->consumed() == 25);
    CHECK(s->accepted().size() == 25);
    std::set<std::string> distinct;
    for (const auto& [q, c] : s->accepted()) distinct.insert(q);
    CHECK(distinct.size() == 25);
}

TEST_CASE("interactive provider") {
    testutil::TempDir dir;
    const Dataset ds(Modality::time_series, {{"a", {90, 95, 97}}, {"b", {97, 88, 85}}, {"c", {96, 96, 96}}});
    const auto batch = queries_for(ds, 3, {0, 1, 2});

    SUBCASE("valid, invalid and skip") {
        auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
        std::istringstream in("1\n7\nfoo\n0\nskip\n");
        std::ostringstream out;
        InteractiveProvider provider(in, out, *s, ds);
        const auto answers = provider.label(batch);
        CHECK(answers == std::vector<std::optional<ClassIndex>>{1, 0, std::nullopt});
        CHECK(s->consumed() == 2);
        CHECK(out.str().find("not a class index") != std::string::npos);
        CHECK(out.str().find("desat") != std::string::npos);
    }
    SUBCASE("abort then resume") {
        {
            auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
            std::istringstream in("2\nabort\n");
            std::ostringstream out;
            InteractiveProvider provider(in, out, *s, ds);
            CHECK_THROWS_AS(provider.label(batch), ProviderRefusal);
            CHECK(s->consumed() == 1);
        }
        auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
        CHECK(s->pending().size() == 2);
        CHECK(s->pending()[0].sample_id == "b");
        std::istringstream in("1\n1\n");
        std::ostringstream out;
        InteractiveProvider provider(in, out, *s, ds);
        const auto answers = provider.label(batch);
        CHECK(answers == std::vector<std::optional<ClassIndex>>{2, 1, 1});
        CHECK(s->consumed() == 3);
        // the already-answered sample is not asked again
        CHECK(out.str().find("sample a") == std::string::npos);
    }
    SUBCASE("end of input counts as abort") {
        auto s = LabelSession::open(dir.file("s"), "demo", kSpace, 10);
        std::istringstream in("");
        std::ostringstream out;
        InteractiveProvider provider(in, out, *s, ds);
        CHECK_THROWS_AS(provider.label(batch), ProviderRefusal);
    }
}

TEST_CASE("previews") {
    CHECK_FALSE(preview_text({"a", {1, 2, 3, 2, 1}}, Modality::time_series).empty());
    CHECK(preview_text({"v", {0.1, 0.9}}, Modality::probability_vector).find("0.9") != std::string::npos);
}
