// memlabel: prototype selection, expert labeling and weak-label aggregation.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memlabel/error.hpp"
#include "memlabel/run_config.hpp"
#include "memlabel/stages.hpp"

namespace ms = memlabel::stages;

namespace {

int fail(const std::string& stage, const std::exception& e, int code) {
    std::cerr << "memlabel: [" << stage << "] " << e.what() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Select prototype samples, collect expert labels for them, and aggregate the induced weak labels"};
    app.set_version_flag("--version", ms::kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, seed_override;
    unsigned threads = 1;
    app.add_option("--config", config_path, "run configuration file");
    app.add_option("--out", out_dir, "output directory (overrides [output] dir)");
    app.add_option("--threads", threads, "worker threads; results do not depend on it")->check(CLI::NonNegativeNumber);
    app.add_option("--seed-override", seed_override, "comma-separated seeds replacing [memories] seeds");

    auto* run = app.add_subcommand("run", "full pipeline: memories, labeling, aggregation, scoring, manifest");
    auto* memories = app.add_subcommand("memories", "generate memory sets for every seed");
    auto* partition = app.add_subcommand("partition", "label memories and induce the weak-label matrix");
    auto* aggregate = app.add_subcommand("aggregate", "majority vote and label model over a weak-label matrix");
    std::string matrix_path;
    aggregate->add_option("--matrix", matrix_path, "weak-label matrix to aggregate (default <out>/weak_labels.csv)");
    auto* score = app.add_subcommand("score", "score probabilistic labels against ground truth");
    std::string pred_path, gt_path;
    score->add_option("--pred", pred_path, "probabilistic-label file to score");
    score->add_option("--gt", gt_path, "ground-truth file (default [dataset] ground_truth)");
    auto* ablate = app.add_subcommand("ablate", "sweep the distance threshold and record accuracy vs labels used");
    auto* serve = app.add_subcommand("serve", "serve the labeling session over HTTP until interrupted");
    std::string bind;
    serve->add_option("--bind", bind, "<host>:<port> (overrides the config)");
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    std::string spec_path, synth_out;
    std::optional<std::int64_t> synth_seed;
    synth->add_option("--spec", spec_path, "synthetic spec file")->required();
    synth->add_option("--seed", synth_seed, "seed (default: the spec's seed)");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        try {
            ms::synth(spec_path, out_dir.empty() ? "." : out_dir, synth_seed);
            return 0;
        } catch (const memlabel::ConfigError& e) {
            return fail("synth", e, 2);
        } catch (const std::exception& e) {
            return fail("synth", e, 1);
        }
    }

    ms::Context ctx;
    try {
        if (config_path.empty()) throw memlabel::ConfigError("--config is required");
        ctx.config = memlabel::load_run_config(config_path);
        if (!out_dir.empty()) ctx.config.output_dir = out_dir;
        if (!seed_override.empty()) ctx.config.seeds = memlabel::parse_seed_list(seed_override);
        ctx.config.validate();
        ctx.threads = threads;
    } catch (const std::exception& e) {
        return fail("config", e, 2);
    }

    const auto stage = app.get_subcommands().front()->get_name();
    try {
        if (run->parsed()) ms::run(ctx);
        if (memories->parsed()) ms::memories(ctx);
        if (partition->parsed()) ms::partition(ctx);
        if (aggregate->parsed()) ms::aggregate(ctx, matrix_path);
        if (score->parsed()) ms::score(ctx, pred_path, gt_path);
        if (ablate->parsed()) ms::ablate(ctx);
        if (serve->parsed()) ms::serve(ctx, bind);
    } catch (const memlabel::ConfigError& e) {
        return fail(stage, e, 2);
    } catch (const memlabel::BudgetInfeasible& e) {
        return fail(stage, e, 3);
    } catch (const memlabel::ProviderRefusal& e) {
        return fail(stage, e, 4);
    } catch (const std::exception& e) {
        return fail(stage, e, 1);
    }
    return 0;
}
