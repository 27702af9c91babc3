#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"
#include "memlabel/label_model.hpp"
#include "memlabel/weak_label.hpp"

namespace memlabel {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;    // true members
    std::size_t predicted = 0;  // predicted members
};

struct RunMetadata {
    double threshold = 0.0;
    std::size_t max_labels = 0;  // N_L
    std::size_t consumed = 0;    // N_s
    std::size_t functions = 0;   // N_w
    std::string aggregator;
};

/// Precision, recall and F1 are 0 whenever their denominator is 0.
struct EvalReport {
    std::size_t total = 0;
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    std::optional<ClassIndex> positive_class;
    double binary_f1 = 0.0;  // F1 of positive_class, when declared
    double weighted_f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    RunMetadata meta;

    /// Binary F1 when a positive class is declared, weighted F1 otherwise.
    double f1() const noexcept { return positive_class ? binary_f1 : weighted_f1; }
};

EvalReport score_labels(const std::vector<ClassIndex>& predicted, const std::vector<ClassIndex>& truth,
                        std::size_t n_classes, std::optional<ClassIndex> positive_class = std::nullopt);

/// Compares hard labels against `gt`; every predicted id must have ground truth.
EvalReport score(const ProbabilisticLabels& pred, const GroundTruth& gt,
                 std::optional<ClassIndex> positive_class = std::nullopt);

std::string format_report_text(const EvalReport& r, const LabelSpace& space);
std::string format_report_csv(const EvalReport& r, const LabelSpace& space);

/// Everything a full oracle-driven pipeline run needs.
struct ExperimentOptions {
    PipelineOptions pipeline;
    std::vector<Aggregator> aggregators{Aggregator::majority};
    EmOptions em;
};

struct OneVsAllResult {
    std::vector<ClassIndex> classes;
    std::vector<EvalReport> reports;  // reports[i] belongs to classes[i]
    double mean_accuracy = 0.0;
    double mean_f1 = 0.0;
    /// Population standard deviation across the binary problems.
    double std_accuracy = 0.0;
    double std_f1 = 0.0;
};

/// For each class c: relabel ground truth to {rest = 0, c = 1}, run the
/// whole pipeline with an oracle on the binary labels, and score with c as
/// the positive class. One aggregator per call.
OneVsAllResult one_vs_all_suite(const Dataset& ds, const DistanceMatrix& m, const GroundTruth& gt,
                                const LabelSpace& space, const std::vector<ClassIndex>& classes,
                                const ExperimentOptions& opts, Aggregator aggregator);

std::string format_one_vs_all_text(const OneVsAllResult& r, const LabelSpace& space);

struct AblationRow {
    double threshold = 0.0;
    std::size_t max_labels = 0;
    std::size_t consumed = 0;
    std::size_t functions = 0;
    Aggregator aggregator = Aggregator::majority;
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::vector<std::size_t> seed_sizes;  // |M^k| per candidate seed
    std::string note;                     // why the row was skipped; empty otherwise
};

/// One pipeline run per threshold with an oracle provider, scored under each
/// aggregator. Infeasible budgets become skipped rows rather than errors.
/// `ds` must be the dataset `m` was built from; `noisy_oracle`, when set,
/// answers queries in place of `gt`.
std::vector<AblationRow> ablation_sweep(const Dataset& ds, const DistanceMatrix& m, const GroundTruth& gt,
                                        const LabelSpace& space, const std::vector<double>& thresholds,
                                        const ExperimentOptions& opts, std::optional<ClassIndex> positive_class,
                                        const GroundTruth* noisy_oracle = nullptr);

/// `t,N_L,N_s,N_w,aggregator,accuracy,f1`; skipped rows leave the metrics empty.
std::string format_ablation_csv(const std::vector<AblationRow>& rows);
std::string format_ablation_text(const std::vector<AblationRow>& rows);

}  // namespace memlabel
