#include "memlabel/stages.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <pthread.h>

#include "memlabel/error.hpp"
#include "memlabel/eval.hpp"
#include "memlabel/http_service.hpp"
#include "memlabel/label_model.hpp"
#include "memlabel/labeling_service.hpp"
#include "memlabel/memory_gen.hpp"
#include "memlabel/synthetic.hpp"
#include "memlabel/text.hpp"
#include "memlabel/weak_label.hpp"

namespace memlabel::stages {

namespace fs = std::filesystem;

namespace {

std::ostream& log_of(const Context& ctx) { return ctx.log ? *ctx.log : std::cerr; }

std::string out_path(const RunConfig& c, const std::string& rel) { return (fs::path(c.output_dir) / rel).string(); }

std::string memory_file(const RunConfig& c, std::int64_t seed) {
    return out_path(c, "memories/seed_" + std::to_string(seed) + ".txt");
}

std::string labels_file(const RunConfig& c, Aggregator a) {
    return out_path(c, "labels_" + std::string(to_string(a)) + ".csv");
}

PipelineOptions pipeline_options(const Context& ctx) {
    const auto& c = ctx.config;
    PipelineOptions o;
    o.base.max_global_steps = c.max_global_steps;
    o.base.max_local_steps = c.max_local_steps;
    o.base.distance_threshold = c.threshold;
    o.seeds = c.seeds;
    o.max_labels = c.max_labels;
    o.threads = ctx.threads;
    return o;
}

struct PlanSummary {
    std::size_t max_labels = 0, consumed = 0, functions = 0;
};

PlanSummary read_plan(const RunConfig& c) {
    PlanSummary p;
    const auto path = out_path(c, "plan.txt");
    if (!fs::exists(path)) return p;
    for (const auto& line : text::read_lines(path)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = line.substr(0, eq);
        const auto v = text::parse_int(line.substr(eq + 1));
        if (!v || *v < 0) continue;
        if (key == "N_L") p.max_labels = static_cast<std::size_t>(*v);
        if (key == "N_s") p.consumed = static_cast<std::size_t>(*v);
        if (key == "N_w") p.functions = static_cast<std::size_t>(*v);
    }
    return p;
}

}  // namespace

Inputs load_inputs(const RunConfig& config) {
    config.validate();
    auto space = load_label_space(config.label_space_path);
    auto ds = load_dataset(config.dataset_path, config.modality);
    std::optional<GroundTruth> gt;
    if (!config.ground_truth_path.empty()) gt = load_ground_truth(config.ground_truth_path, ds, space);
    return Inputs{std::move(space), std::move(ds), std::move(gt)};
}

DistanceMatrix distances_for(const RunConfig& config, const Dataset& ds, unsigned threads) {
    if (!config.distance_cache.empty() && fs::exists(config.distance_cache)) {
        auto m = load_distance_matrix(config.distance_cache);
        if (m.size() != ds.size())
            throw ValidationError("distance cache " + config.distance_cache + " has n=" + std::to_string(m.size()) +
                                  " but the dataset has " + std::to_string(ds.size()) + " samples");
        return m;
    }
    auto m = build_distance_matrix(ds, config.distance, threads);
    if (!config.distance_cache.empty()) write_distance_matrix(m, config.distance_cache);
    return m;
}

void memories(const Context& ctx) {
    const auto& c = ctx.config;
    const auto in = load_inputs(c);
    const auto m = distances_for(c, in.dataset, ctx.threads);
    fs::create_directories(out_path(c, "memories"));
    for (const auto& set : generate_seed_memories(m, pipeline_options(ctx))) {
        write_memory_set(set, in.dataset, memory_file(c, set.seed));
        log_of(ctx) << "seed " << set.seed << ": " << set.size() << " memories, cost " << text::format_double(set.cost)
                    << "\n";
    }
}

void partition(const Context& ctx) {
    const auto& c = ctx.config;
    const auto in = load_inputs(c);
    const auto m = distances_for(c, in.dataset, ctx.threads);

    std::vector<MemorySet> candidates;
    for (auto seed : c.seeds) {
        const auto path = memory_file(c, seed);
        if (!fs::exists(path)) throw ValidationError("missing " + path + "; run the memories stage first");
        auto set = load_memory_set(path, in.dataset);
        if (set.seed != seed || set.threshold != c.threshold)
            throw ValidationError(path + " was produced with a different seed or threshold");
        candidates.push_back(std::move(set));
    }

    std::unique_ptr<LabelSession> session;
    std::unique_ptr<LabelService> service;
    std::unique_ptr<LabelProvider> provider;
    const auto session_dir = c.session_dir.empty() ? out_path(c, "session") : c.session_dir;
    switch (c.provider) {
        case ProviderMode::oracle: {
            auto gt = load_ground_truth(c.oracle_path, in.dataset, in.label_space);
            if (c.noise > 0.0) gt = flip_labels(gt, in.dataset, in.label_space, c.noise, c.noise_seed);
            provider = std::make_unique<OracleProvider>(std::move(gt));
            break;
        }
        case ProviderMode::interactive:
            session = LabelSession::open(session_dir, c.session_id, in.label_space, c.max_labels);
            provider = std::make_unique<InteractiveProvider>(ctx.in ? *ctx.in : std::cin, log_of(ctx), *session,
                                                             in.dataset);
            break;
        case ProviderMode::serve: {
            session = LabelSession::open(session_dir, c.session_id, in.label_space, c.max_labels);
            ServiceOptions so;
            so.host = c.serve_host;
            so.port = c.serve_port;
            so.dataset = &in.dataset;
            so.preview_dir = c.preview_dir;
            so.static_dir = c.static_dir;
            service = std::make_unique<LabelService>(*session, so);
            const int port = service->start();
            log_of(ctx) << "labeling service on http://" << c.serve_host << ":" << port << "\n";
            provider = std::make_unique<SessionProvider>(*session);
            break;
        }
    }

    auto result = label_and_induce(in.dataset, m, in.label_space, std::move(candidates), c.max_labels, *provider);
    if (service) service->stop();

    fs::create_directories(out_path(c, "partitions"));
    std::string labels = "seed,index,sample_id,class_index\n";
    std::string plan = "N_L=" + std::to_string(c.max_labels) + "\nN_s=" + std::to_string(result.budget.consumed) +
                       "\nN_w=" + std::to_string(result.matrix.n_functions()) + "\nqueries=" +
                       std::to_string(result.queries_issued) + "\n";
    for (const auto& s : result.seeds) {
        const auto seed = s.memories.seed;
        plan += "seed_" + std::to_string(seed) + "=" + (s.complete ? "used" : s.planned ? "incomplete" : "not-planned") +
                " memories=" + std::to_string(s.memories.size()) + "\n";
        if (!s.planned) continue;
        write_partition(s.partition, in.dataset, out_path(c, "partitions/seed_" + std::to_string(seed) + ".txt"));
        for (const auto& [idx, cls] : s.memory_labels)
            labels += std::to_string(seed) + "," + std::to_string(idx) + "," + in.dataset.id(idx) + "," +
                      std::to_string(cls) + "\n";
    }
    text::write_file_atomic(out_path(c, "memory_labels.csv"), labels);
    text::write_file_atomic(out_path(c, "plan.txt"), plan);
    write_weak_label_matrix(result.matrix, out_path(c, "weak_labels.csv"));
    log_of(ctx) << "N_s=" << result.budget.consumed << " N_w=" << result.matrix.n_functions() << "\n";
}

void aggregate(const Context& ctx, const std::string& matrix_path) {
    const auto& c = ctx.config;
    const auto space = load_label_space(c.label_space_path);
    const auto path = matrix_path.empty() ? out_path(c, "weak_labels.csv") : matrix_path;
    if (!fs::exists(path)) throw ValidationError("missing " + path + "; run the partition stage first");
    const auto matrix = load_weak_label_matrix(path);
    matrix.validate(space.size());
    fs::create_directories(c.output_dir);

    for (auto a : c.aggregators) {
        if (a == Aggregator::majority) {
            write_probabilistic_labels(majority_vote(matrix, space.size()), labels_file(c, a));
            continue;
        }
        if (matrix.n_functions() < 2) {
            log_of(ctx) << "label-model skipped: needs at least 2 weak-label columns, have " << matrix.n_functions()
                        << "\n";
            continue;
        }
        FitReport report;
        const auto params = fit_label_model(matrix, space.size(), c.em, &report);
        write_probabilistic_labels(predict(params, matrix), labels_file(c, a));
        text::write_file_atomic(out_path(c, "label_model_params.txt"),
                                format_label_model_params(params, matrix, space) + "iterations=" +
                                    std::to_string(report.iterations) + " converged=" +
                                    (report.converged ? "true" : "false") + "\n");
    }
}

void score(const Context& ctx, const std::string& pred_path, const std::string& gt_path) {
    const auto& c = ctx.config;
    const auto in = load_inputs(c);
    const auto gpath = gt_path.empty() ? c.ground_truth_path : gt_path;
    if (gpath.empty()) throw ConfigError("scoring needs ground truth ([dataset] ground_truth or --gt)");
    const auto gt = load_ground_truth(gpath, in.dataset, in.label_space);
    const auto plan = read_plan(c);

    auto emit = [&](const std::string& pred_file, const std::string& stem, const std::string& agg) {
        auto report = score(load_probabilistic_labels(pred_file), gt, c.positive_class);
        report.meta = {c.threshold, plan.max_labels, plan.consumed, plan.functions, agg};
        text::write_file_atomic(out_path(c, stem + ".txt"), format_report_text(report, in.label_space));
        text::write_file_atomic(out_path(c, stem + ".csv"), format_report_csv(report, in.label_space));
        log_of(ctx) << stem << ": accuracy " << text::format_double(report.accuracy) << ", f1 "
                    << text::format_double(report.f1()) << "\n";
    };
    fs::create_directories(c.output_dir);
    if (!pred_path.empty()) return emit(pred_path, "report", "");
    for (auto a : c.aggregators) {
        const auto f = labels_file(c, a);
        if (fs::exists(f)) emit(f, "report_" + std::string(to_string(a)), std::string(to_string(a)));
    }
}

void run(const Context& ctx) {
    const auto& c = ctx.config;
    c.validate();
    fs::create_directories(c.output_dir);
    memories(ctx);
    partition(ctx);
    aggregate(ctx);
    if (!c.ground_truth_path.empty()) score(ctx);

    if (c.one_vs_all) {
        const auto in = load_inputs(c);
        if (!in.ground_truth) throw ConfigError("one-vs-all needs [dataset] ground_truth");
        const auto m = distances_for(c, in.dataset, ctx.threads);
        ExperimentOptions eo{pipeline_options(ctx), c.aggregators, c.em};
        std::vector<ClassIndex> classes;
        for (std::size_t k = 0; k < in.label_space.size(); ++k) classes.push_back(static_cast<ClassIndex>(k));
        for (auto a : c.aggregators) {
            const auto r = one_vs_all_suite(in.dataset, m, *in.ground_truth, in.label_space, classes, eo, a);
            const auto rel = "one_vs_all_" + std::string(to_string(a)) + ".txt";
            text::write_file_atomic(out_path(c, rel), format_one_vs_all_text(r, in.label_space));
        }
    }

    std::string manifest = std::string("memlabel ") + kVersion + "\ncommand=run\n\n[config]\n" +
                           c.describe() + "\n[outputs]\n";
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(c.output_dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), c.output_dir).string();
        if (rel == "manifest.txt" || rel.rfind("session", 0) == 0) continue;
        files.push_back(rel + " bytes=" + std::to_string(e.file_size()));
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) manifest += f + "\n";
    manifest += "\n[plan]\n";
    for (const auto& l : text::read_lines(out_path(c, "plan.txt"))) manifest += l + "\n";
    text::write_file_atomic(out_path(c, "manifest.txt"), manifest);
}

void ablate(const Context& ctx) {
    const auto& c = ctx.config;
    const auto in = load_inputs(c);
    if (!in.ground_truth) throw ConfigError("ablation needs [dataset] ground_truth");
    if (c.ablate_thresholds.empty()) throw ConfigError("[ablate] thresholds is empty");
    const auto m = distances_for(c, in.dataset, ctx.threads);

    std::optional<GroundTruth> oracle;
    if (c.provider != ProviderMode::oracle) throw ConfigError("ablation runs with the oracle provider only");
    oracle = load_ground_truth(c.oracle_path, in.dataset, in.label_space);
    if (c.noise > 0.0) oracle = flip_labels(*oracle, in.dataset, in.label_space, c.noise, c.noise_seed);

    ExperimentOptions eo{pipeline_options(ctx), c.aggregators, c.em};
    const auto rows = ablation_sweep(in.dataset, m, *in.ground_truth, in.label_space, c.ablate_thresholds, eo,
                                     c.positive_class, &*oracle);
    fs::create_directories(c.output_dir);
    text::write_file_atomic(out_path(c, "ablation.csv"), format_ablation_csv(rows));
    text::write_file_atomic(out_path(c, "ablation.txt"), format_ablation_text(rows));
    log_of(ctx) << format_ablation_text(rows);
}

void serve(const Context& ctx, const std::string& bind_override) {
    auto c = ctx.config;
    if (!bind_override.empty()) {
        const auto colon = bind_override.rfind(':');
        const auto port = colon == std::string::npos ? std::nullopt : text::parse_int(bind_override.substr(colon + 1));
        if (!port || *port < 0 || *port > 65535) throw ConfigError("--bind expects <host>:<port>");
        c.serve_host = bind_override.substr(0, colon);
        c.serve_port = static_cast<int>(*port);
    }
    const auto in = load_inputs(c);
    const auto session_dir = c.session_dir.empty() ? out_path(c, "session") : c.session_dir;
    auto session = LabelSession::open(session_dir, c.session_id, in.label_space, c.max_labels);

    ServiceOptions so;
    so.host = c.serve_host;
    so.port = c.serve_port;
    so.dataset = &in.dataset;
    so.preview_dir = c.preview_dir;
    so.static_dir = c.static_dir;

    // handle SIGINT/SIGTERM synchronously on this thread; workers inherit the mask
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    LabelService service(*session, so);
    const int port = service.start();
    log_of(ctx) << "serving session '" << session->id() << "' from " << session_dir << " on http://" << c.serve_host
                << ":" << port << "\n"
                << std::flush;
    int sig = 0;
    sigwait(&sigs, &sig);
    service.stop();
}

void synth(const std::string& spec_path, const std::string& out_dir, std::optional<std::int64_t> seed) {
    const auto spec = load_synthetic_spec(spec_path);
    const auto data = generate_synthetic(spec, seed.value_or(spec.seed));
    fs::create_directories(out_dir);
    write_dataset(data.dataset, (fs::path(out_dir) / "dataset.txt").string());
    write_label_space(data.label_space, (fs::path(out_dir) / "classes.txt").string());
    write_ground_truth(data.ground_truth, data.dataset, (fs::path(out_dir) / "ground_truth.csv").string());
}

}  // namespace memlabel::stages
