// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [path-to-memlabel-cli]

#include <sys/wait.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "memlabel/distance.hpp"
#include "memlabel/error.hpp"
#include "memlabel/eval.hpp"
#include "memlabel/http_service.hpp"
#include "memlabel/label_model.hpp"
#include "memlabel/labeling_service.hpp"
#include "memlabel/memory_gen.hpp"
#include "memlabel/stages.hpp"
#include "memlabel/synthetic.hpp"
#include "memlabel/text.hpp"
#include "memlabel/weak_label.hpp"
#include "simulate.hpp"
#include "test_util.hpp"

using namespace memlabel;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail += " [over time limit " + text::format_double(limit_s) + " s]";
    }
    if (!o.pass) ++failures;
    char t[32];
    std::snprintf(t, sizeof t, "%.2f", secs);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << t << " s)  " << o.detail << std::endl;
}

// ---- DTW oracle ---------------------------------------------------------

using V = std::vector<double>;

double enumerate_paths(const V& a, const V& b, std::size_t i, std::size_t j, double acc) {
    acc += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) return acc;
    double best = INFINITY;
    if (i + 1 < a.size()) best = std::min(best, enumerate_paths(a, b, i + 1, j, acc));
    if (j + 1 < b.size()) best = std::min(best, enumerate_paths(a, b, i, j + 1, acc));
    if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, enumerate_paths(a, b, i + 1, j + 1, acc));
    return best;
}

Outcome dtw_oracle() {
    std::vector<V> series;
    const double grid[] = {0.0, 1.0, 3.0};
    for (std::size_t len = 1; len <= 5; ++len) {
        std::size_t total = 1;
        for (std::size_t k = 0; k < len; ++k) total *= 3;
        for (std::size_t code = 0; code < total; ++code) {
            V s(len);
            std::size_t c = code;
            for (auto& x : s) {
                x = grid[c % 3];
                c /= 3;
            }
            series.push_back(s);
        }
    }
    std::size_t pairs = 0, mismatches = 0;
    for (std::size_t i = 0; i < series.size(); ++i)
        for (std::size_t j = i; j < series.size(); ++j) {
            ++pairs;
            if (dtw_distance(series[i], series[j]) != enumerate_paths(series[i], series[j], 0, 0, 0.0)) ++mismatches;
        }
    return {mismatches == 0 && pairs >= 2000,
            std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches"};
}

// ---- memory generation -----------------------------------------------------

double brute_cost(const DistanceMatrix& m, const std::vector<std::size_t>& mem) {
    double total = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double best = INFINITY;
        for (auto q : mem) best = std::min(best, m(q, i));
        total += best;
    }
    return total;
}

double best_subset_cost(const DistanceMatrix& m, std::size_t r) {
    const std::size_t n = m.size();
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(r), true);
    double best = INFINITY;
    do {
        std::vector<std::size_t> mem;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) mem.push_back(i);
        best = std::min(best, brute_cost(m, mem));
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// r clusters of points in the plane, radius <= 1, centers >= 12 apart.
std::vector<std::array<double, 2>> clustered_points(std::mt19937_64& rng, std::size_t r, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::array<double, 2>> centers{{0, 0}, {15, 0}, {0, 15}};
    std::vector<std::array<double, 2>> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[i % r];
        double x, y;
        do {
            x = u(rng);
            y = u(rng);
        } while (x * x + y * y > 1.0);
        pts.push_back({c[0] + x, c[1] + y});
    }
    std::shuffle(pts.begin(), pts.end(), rng);
    return pts;
}

DistanceMatrix plane_matrix(const std::vector<std::array<double, 2>>& pts) {
    return make_distance_matrix(pts.size(), [&](std::size_t i, std::size_t j) {
        return std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
    });
}

Outcome optimality() {
    std::mt19937_64 rng(7);
    int optimal = 0, unsound = 0, bad_r = 0;
    std::ostringstream worst;
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t r = 1 + static_cast<std::size_t>(inst % 3);
        const std::size_t n = 6 + rng() % 7;  // 6..12
        const auto m = plane_matrix(clustered_points(rng, r, n));
        const auto set = generate_memories(m, {.max_global_steps = 5, .max_local_steps = 30,
                                               .distance_threshold = 2.5, .random_seed = inst});
        if (set.size() != r) ++bad_r;
        const double opt = best_subset_cost(m, set.size());
        if (set.cost < opt - 1e-9) ++unsound;
        if (std::abs(set.cost - opt) <= 1e-9) ++optimal;
    }
    return {optimal >= 18 && unsound == 0 && bad_r == 0,
            std::to_string(optimal) + "/20 optimal, " + std::to_string(unsound) + " below optimum, " +
                std::to_string(bad_r) + " with r != cluster count"};
}

Outcome cost_monotonicity() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 30);
    int restarts = 0, violations = 0, accepted = 0;
    for (int d = 0; d < 20; ++d) {
        std::vector<double> xs(80);
        for (auto& x : xs) x = u(rng);
        const auto m = testutil::matrix_1d(xs);
        MemoryGenTrace trace;
        generate_memories(m, {.max_global_steps = 5, .max_local_steps = 30, .distance_threshold = 1.0 + d * 0.2,
                              .random_seed = d},
                          &trace);
        for (const auto& r : trace.restarts) {
            ++restarts;
            double prev = r.initial_cost;
            for (double c : r.accepted_costs) {
                ++accepted;
                if (!(c < prev)) ++violations;
                prev = c;
            }
            if (std::abs(brute_cost(m, r.final_memories) - r.final_cost) > 1e-9) ++violations;
        }
    }
    return {violations == 0 && restarts >= 100 && accepted > 0,
            std::to_string(restarts) + " restarts, " + std::to_string(accepted) + " accepted steps, " +
                std::to_string(violations) + " violations"};
}

Outcome coverage() {
    std::mt19937_64 rng(13);
    int violations = 0;
    for (int d = 0; d < 100; ++d) {
        const std::size_t n = 5 + rng() % 120;
        std::vector<std::array<double, 2>> pts(n);
        std::uniform_real_distribution<double> u(0, 10);
        for (auto& p : pts) p = {u(rng), u(rng)};
        const auto m = plane_matrix(pts);
        const double t = std::uniform_real_distribution<double>(0.05, 8.0)(rng);
        const auto mem = generate_initial_memories(m, t, rng);
        double worst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = INFINITY;
            for (auto q : mem) best = std::min(best, m(q, i));
            worst = std::max(worst, best);
        }
        if (worst > t) ++violations;
    }
    return {violations == 0, "100 draws, " + std::to_string(violations) + " violations"};
}

// ---- budget ----------------------------------------------------------------

Outcome budget() {
    std::mt19937_64 rng(17);
    int violations = 0, feasible = 0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t n_classes = 2 + rng() % 9;
        const std::size_t max_labels = rng() % 200;
        std::vector<std::size_t> sizes(1 + rng() % 10);
        for (auto& s : sizes) s = 1 + rng() % 60;
        try {
            const auto plan = plan_seeds(max_labels, n_classes, sizes);
            ++feasible;
            std::size_t sum = 0;
            for (std::size_t i = 0; i < plan.accepted; ++i) {
                if (sizes[i] < n_classes) ++violations;
                sum += sizes[i];
            }
            if (sum != plan.labels || plan.labels > max_labels || plan.accepted > max_labels / n_classes) ++violations;
        } catch (const BudgetInfeasible&) {
            // only legitimate when the first seed cannot be taken
            if (sizes[0] >= n_classes && sizes[0] <= max_labels) ++violations;
        }
    }
    return {violations == 0, "1000 cases (" + std::to_string(feasible) + " feasible), " + std::to_string(violations) +
                                 " violations"};
}

// ---- label model -----------------------------------------------------------

struct FitLog {
    int runs = 0;
    int violations = 0;
    void check(const FitReport& r, bool smoothed) {
        ++runs;
        const auto& seq = smoothed ? r.objective : r.log_likelihood;
        for (std::size_t i = 1; i < seq.size(); ++i)
            if (seq[i] < seq[i - 1] - 1e-8) {
                ++violations;
                break;
            }
    }
};

FitLog fit_log;

// Both per-seed checks must hold together on at least 8 of 10 draws.
Outcome recovery() {
    const double truth[] = {0.9, 0.7, 0.6};
    int holds = 0, within = 0, lm_wins = 0;
    std::ostringstream detail;
    for (int s = 0; s < 10; ++s) {
        const auto sim = testutil::simulate_votes(5000, {0.5, 0.5}, {0.9, 0.7, 0.6}, 1000 + s);
        FitReport rep;
        const auto params = fit_label_model(sim.matrix, 2, {}, &rep);
        fit_log.check(rep, true);
        double err = 0;
        for (std::size_t f = 0; f < 3; ++f)
            for (ClassIndex y = 0; y < 2; ++y) err = std::max(err, std::abs(params.accuracy(f, y) - truth[f]));
        const double lm = testutil::hard_accuracy(predict(params, sim.matrix), sim.truth);
        const double mv = testutil::hard_accuracy(majority_vote(sim.matrix, 2), sim.truth);
        within += err <= 0.05;
        lm_wins += lm >= mv;
        const bool ok = err <= 0.05 && lm >= mv;
        holds += ok;
        char buf[96];
        std::snprintf(buf, sizeof buf, " s%d:err=%.3f lm=%.4f mv=%.4f%s", s, err, lm, mv, ok ? "" : "*");
        detail << buf;
    }
    return {holds >= 8, std::to_string(holds) + "/10 seeds hold (accuracies within 0.05: " + std::to_string(within) +
                            ", model >= majority: " + std::to_string(lm_wins) + ");" + detail.str()};
}

Outcome em_monotone() {
    // extra fits over varied shapes, smoothed and plain
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.3, 0.95);
    for (int k = 0; k < 60; ++k) {
        const std::size_t classes = 2 + k % 4;
        std::vector<double> prior(classes);
        for (auto& p : prior) p = u(rng);
        std::vector<double> acc(2 + k % 5);
        for (auto& a : acc) a = u(rng);
        const auto sim = testutil::simulate_votes(30 + 50 * k, prior, acc, rng(), (k % 3) * 0.2);
        FitReport a, b;
        fit_label_model(sim.matrix, classes, {}, &a);
        fit_log.check(a, true);
        EmOptions plain;
        plain.smoothing = 0.0;
        fit_label_model(sim.matrix, classes, plain, &b);
        fit_log.check(b, false);
    }
    return {fit_log.violations == 0 && fit_log.runs > 100,
            std::to_string(fit_log.runs) + " fits, " + std::to_string(fit_log.violations) + " decreasing"};
}

// ---- end to end ------------------------------------------------------------

SyntheticSpec series_spec(std::size_t per_class) {
    SyntheticSpec spec;
    spec.modality = Modality::time_series;
    SyntheticClass flat{.name = "steady", .count = per_class, .dispersion = 0.8};
    flat.shape = SeriesShape::flat;
    flat.level = 96;
    flat.length = 24;
    flat.length_jitter = 4;
    SyntheticClass drop = flat;
    drop.name = "desaturation";
    drop.shape = SeriesShape::step;
    drop.amplitude = -7;
    spec.classes = {flat, drop};
    return spec;
}

double column_accuracy(const WeakLabelMatrix& m, std::size_t col, const Dataset& ds, const GroundTruth& gt) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < m.n_samples(); ++i) ok += m.at(i, col) == gt.at(ds.id(i));
    return static_cast<double>(ok) / m.n_samples();
}

Outcome end_to_end() {
    int holds = 0, above = 0;
    std::ostringstream detail;
    for (int d = 0; d < 10; ++d) {
        const auto data = generate_synthetic(series_spec(500), 500 + d);
        const auto m = build_distance_matrix(data.dataset, {DistanceKind::dtw});
        const auto noisy = flip_labels(data.ground_truth, data.dataset, data.label_space, 0.10, 900 + d);
        OracleProvider oracle(noisy);
        const PipelineOptions opts{.base = {.max_global_steps = 5, .max_local_steps = 30, .distance_threshold = 16.0},
                                   .seeds = {1, 2},
                                   .max_labels = 200};
        const auto result = run_pipeline(data.dataset, m, data.label_space, opts, oracle);
        if (result.matrix.n_functions() != 2) {
            detail << " d" << d << ":N_w=" << result.matrix.n_functions();
            continue;
        }
        const double mv = score(majority_vote(result.matrix, 2), data.ground_truth).accuracy;
        const double c0 = column_accuracy(result.matrix, 0, data.dataset, data.ground_truth);
        const double c1 = column_accuracy(result.matrix, 1, data.dataset, data.ground_truth);
        FitReport rep;
        const auto params = fit_label_model(result.matrix, 2, {}, &rep);
        fit_log.check(rep, true);
        const double lm = score(predict(params, result.matrix), data.ground_truth).accuracy;
        // baseline: the first seed's column, what a one-seed run would return
        const bool ok = mv >= 0.85 && mv >= c0;
        holds += ok;
        above += mv >= 0.85;
        char buf[160];
        std::snprintf(buf, sizeof buf, " d%d:N_s=%zu mv=%.3f col0=%.3f col1=%.3f lm=%.3f%s", d, result.budget.consumed, mv,
                      c0, c1, lm, ok ? "" : "*");
        detail << buf;
    }
    return {holds >= 8, std::to_string(holds) + "/10 datasets hold (majority >= 0.85 in " + std::to_string(above) + ");" +
                            detail.str()};
}

// ---- determinism -------------------------------------------------------------

std::string write_e2e_config(const testutil::TempDir& dir) {
    const auto data = generate_synthetic(series_spec(150), 42);
    fs::create_directories(dir.file("data"));
    write_dataset(data.dataset, dir.file("data/dataset.txt"));
    write_label_space(data.label_space, dir.file("data/classes.txt"));
    write_ground_truth(data.ground_truth, data.dataset, dir.file("data/ground_truth.csv"));
    testutil::write_text(dir.file("run.ini"), R"([dataset]
path = data/dataset.txt
modality = time-series
label_space = data/classes.txt
ground_truth = data/ground_truth.csv
[distance]
kind = dtw
[memories]
threshold = 20
seeds = 1,2,3
[budget]
max_labels = 150
[labels]
provider = oracle
noise = 0.1
noise_seed = 5
[aggregate]
aggregators = both
)");
    return dir.file("run.ini");
}

int run_cli(const std::string& cli, const std::vector<std::string>& args) {
    const pid_t pid = fork();
    if (pid == 0) {
        std::vector<char*> argv{const_cast<char*>(cli.c_str())};
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        if (!std::freopen("/dev/null", "w", stderr)) _exit(126);
        execv(cli.c_str(), argv.data());
        _exit(127);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const std::string& cli) {
    testutil::TempDir dir;
    const auto cfg = write_e2e_config(dir);
    std::string how;
    if (!cli.empty()) {
        how = "cli";
        for (const auto* out : {"a", "b"}) {
            const int rc = run_cli(cli, {"--config", cfg, "--out", dir.file(out), "--threads", out[0] == 'a' ? "1" : "2", "run"});
            if (rc != 0) return {false, "cli exited with " + std::to_string(rc)};
        }
    } else {
        how = "in-process";
        std::ostringstream log;
        for (const auto* out : {"a", "b"}) {
            stages::Context ctx;
            ctx.config = load_run_config(cfg);
            ctx.config.output_dir = dir.file(out);
            ctx.log = &log;
            stages::run(ctx);
        }
    }
    std::vector<std::string> files{"weak_labels.csv", "labels_majority.csv", "labels_label-model.csv"};
    for (const auto& f : files) {
        const auto a = testutil::read_text(dir.file("a/" + f)), b = testutil::read_text(dir.file("b/" + f));
        if (a.empty() || a != b) return {false, f + " differs or is empty (" + how + ")"};
    }
    return {true, "weak-label matrix and both label files byte-identical across two " + how + " runs"};
}

// ---- crash safety --------------------------------------------------------------

struct Child {
    pid_t pid = -1;
    int port = 0;
};

Child spawn_service(const std::string& session_dir) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    const pid_t pid = fork();
    if (pid == 0) {
        close(fds[0]);
        try {
            auto session = LabelSession::open_existing(session_dir);
            LabelService service(*session, {.host = "127.0.0.1", .port = 0});
            const int port = service.bind();
            if (write(fds[1], &port, sizeof port) != sizeof port) _exit(3);
            close(fds[1]);
            service.run();
        } catch (...) {
            _exit(2);
        }
        _exit(0);
    }
    close(fds[1]);
    Child c{pid, 0};
    if (read(fds[0], &c.port, sizeof c.port) != sizeof c.port) throw std::runtime_error("service failed to start");
    close(fds[0]);
    return c;
}

void kill_child(Child& c) {
    kill(c.pid, SIGKILL);
    waitpid(c.pid, nullptr, 0);
    c.pid = -1;
}

Outcome crash_safety() {
    testutil::TempDir dir;
    const auto session_dir = dir.file("session");
    const LabelSpace space({"steady", "desaturation"});
    std::vector<LabelQuery> queries;
    for (std::int64_t seed : {3, 8})
        for (std::size_t i = 0; i < 20; ++i) {
            const std::size_t idx = i * 5 + static_cast<std::size_t>(seed);
            queries.push_back({make_query_id(seed, idx), "s" + std::to_string(idx), idx, seed});
        }
    {
        auto s = LabelSession::open(session_dir, "crash", space, queries.size());
        s->enqueue(queries);
    }

    std::mt19937_64 rng(23);
    std::vector<std::size_t> order(queries.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::set<std::size_t> kill_points;
    while (kill_points.size() < 10) kill_points.insert(1 + rng() % (queries.size() - 1));

    std::map<std::string, int> expected;
    int problems = 0, kills = 0;
    std::ostringstream why;
    auto child = spawn_service(session_dir);

    auto verify = [&](httplib::Client& c) {
        const auto prog = json::parse(c.Get("/progress")->body);
        if (prog["answered"].get<std::size_t>() != expected.size()) {
            ++problems;
            why << " answered=" << prog["answered"] << " expected=" << expected.size();
        }
        for (const auto& [qid, cls] : expected) {
            const auto r = c.Post("/labels", json{{"query_id", qid}, {"class_index", cls}}.dump(), "application/json");
            if (!r || r->status != 409) {
                ++problems;
                why << " resubmit " << qid << " -> " << (r ? r->status : -1);
            }
        }
        const auto pending = json::parse(c.Get("/queries/pending")->body);
        if (pending.size() != queries.size() - expected.size()) ++problems;
    };

    for (std::size_t k = 0; k < order.size(); ++k) {
        httplib::Client c("127.0.0.1", child.port);
        const auto& q = queries[order[k]];
        const int cls = static_cast<int>(rng() % 2);
        const auto r = c.Post("/labels", json{{"query_id", q.query_id}, {"class_index", cls}}.dump(), "application/json");
        if (!r || r->status != 200) {
            ++problems;
            why << " post " << q.query_id << " -> " << (r ? r->status : -1);
            continue;
        }
        expected[q.query_id] = cls;
        if (kill_points.count(k + 1)) {
            kill_child(child);
            ++kills;
            child = spawn_service(session_dir);
            httplib::Client fresh("127.0.0.1", child.port);
            verify(fresh);
        }
    }
    kill_child(child);

    // the journal holds each accepted label once, with the submitted class
    const auto lines = text::read_lines(session_dir + "/journal.csv");
    std::map<std::string, int> journal;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = text::split(lines[i], ',');
        const std::string qid(f[0]);
        if (journal.count(qid)) ++problems;
        journal[qid] = static_cast<int>(*text::parse_int(f[3]));
    }
    if (journal != expected) {
        ++problems;
        why << " journal mismatch";
    }
    auto s = LabelSession::open_existing(session_dir);
    if (s->consumed() != expected.size() || s->status() != SessionStatus::complete) ++problems;
    return {problems == 0 && kills == 10,
            std::to_string(kills) + " kill/restart cycles, " + std::to_string(expected.size()) + " labels, " +
                std::to_string(problems) + " problems" + why.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    std::cout << "acceptance suite" << std::endl;
    report("dtw equals exhaustive warping-path enumeration", 10, dtw_oracle);
    report("memory search reaches the brute-force optimum on tiny instances", 30, optimality);
    report("accepted local steps strictly decrease cost", 0, cost_monotonicity);
    report("initial memories cover every sample within t", 0, coverage);
    report("seed planning respects the labeling budget", 0, budget);
    report("label model recovers voter accuracies", 60, recovery);
    report("end-to-end synthetic series with noisy oracle", 300, end_to_end);
    report("EM likelihood is non-decreasing on every fit", 0, em_monotone);
    report("run is byte-for-byte deterministic", 0, [&] { return determinism(cli); });
    report("labeling service survives kill/restart", 0, crash_safety);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
