#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"
#include "memlabel/distance.hpp"
#include "memlabel/label_model.hpp"

namespace memlabel {

enum class ProviderMode { oracle, interactive, serve };

/// Every knob of a reproducible run, read from an INI-style file:
///
///   [dataset]   path, modality, label_space, ground_truth, preview_dir
///   [distance]  kind, eps, cache
///   [memories]  threshold, seeds, max_global_steps, max_local_steps
///   [budget]    max_labels
///   [labels]    provider = oracle:<gt> | interactive | serve:<host>:<port>,
///               noise, noise_seed, session_dir, session_id, static_dir
///   [aggregate] aggregators = majority | label-model | both,
///               positive_class, fixed_prior, em_tol, em_max_iters, one_vs_all
///   [ablate]    thresholds
///   [output]    dir
///
/// Relative paths resolve against the config file's directory.
struct RunConfig {
    std::string dataset_path;
    Modality modality = Modality::feature_vector;
    std::string label_space_path;
    std::string ground_truth_path;  // optional
    std::string preview_dir;

    DistanceFunction distance;
    std::string distance_cache;  // optional

    double threshold = 1.0;
    std::vector<std::int64_t> seeds;
    int max_global_steps = 5;
    int max_local_steps = 30;

    std::size_t max_labels = 0;

    ProviderMode provider = ProviderMode::oracle;
    std::string oracle_path;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    double noise = 0.0;
    std::int64_t noise_seed = 0;
    std::string session_dir;  // default <output>/session
    std::string session_id = "session";
    std::string static_dir;

    std::vector<Aggregator> aggregators{Aggregator::majority, Aggregator::label_model};
    std::optional<ClassIndex> positive_class;
    EmOptions em;
    bool one_vs_all = false;

    std::vector<double> ablate_thresholds;

    std::string output_dir = "out";

    /// Cross-field checks: distance kind matches modality, seeds distinct and
    /// present, budget positive.
    void validate() const;

    /// Resolved settings as sorted `key=value` lines, for the run manifest.
    std::string describe() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& contents, const std::string& base_dir);

std::vector<std::int64_t> parse_seed_list(const std::string& list);

}  // namespace memlabel
