#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "memlabel/dataset.hpp"
#include "memlabel/distance.hpp"
#include "memlabel/run_config.hpp"

// Stage-wise entry points behind the command-line tool. Each stage reads the
// previous stage's files from the output directory and writes its own, so
// running them in sequence reproduces `run` byte for byte:
//
//   memories   memories/seed_<s>.txt
//   partition  partitions/seed_<s>.txt, memory_labels.csv, plan.txt, weak_labels.csv
//   aggregate  labels_<aggregator>.csv, label_model_params.txt
//   score      report_<aggregator>.txt / .csv  (needs ground truth)
//   run        all of the above plus manifest.txt
namespace memlabel::stages {

inline constexpr const char* kVersion = "0.1.0";

struct Context {
    RunConfig config;
    unsigned threads = 1;
    std::istream* in = nullptr;   // interactive answers; stdin when null
    std::ostream* log = nullptr;  // progress and prompts; stderr when null
};

struct Inputs {
    LabelSpace label_space;
    Dataset dataset;
    std::optional<GroundTruth> ground_truth;
};

Inputs load_inputs(const RunConfig& config);

/// Builds the matrix, or loads it from `[distance] cache` when that file
/// exists (writing it there otherwise).
DistanceMatrix distances_for(const RunConfig& config, const Dataset& ds, unsigned threads);

void memories(const Context& ctx);
void partition(const Context& ctx);
/// `matrix_path` overrides `<out>/weak_labels.csv`, e.g. for imported LF columns.
void aggregate(const Context& ctx, const std::string& matrix_path = "");
/// Scores every aggregator's labels, or just `pred_path` against `gt_path` when given.
void score(const Context& ctx, const std::string& pred_path = "", const std::string& gt_path = "");
void run(const Context& ctx);
/// Writes ablation.csv and ablation.txt for `[ablate] thresholds`.
void ablate(const Context& ctx);
/// Serves the configured session directory until interrupted.
void serve(const Context& ctx, const std::string& bind_override = "");

/// Writes dataset.txt, classes.txt and ground_truth.csv into `out_dir`.
void synth(const std::string& spec_path, const std::string& out_dir, std::optional<std::int64_t> seed);

}  // namespace memlabel::stages
