#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memlabel/weak_label.hpp"

namespace memlabel {

/// Per-sample distribution over the label space.
struct ProbabilisticLabels {
    std::vector<std::string> sample_ids;
    std::size_t n_classes = 0;
    std::vector<std::vector<double>> distribution;

    std::size_t size() const noexcept { return distribution.size(); }
    /// argmax, lowest class index on ties.
    ClassIndex hard_label(std::size_t i) const;
    double confidence(std::size_t i) const;
};

/// Vote frequencies over non-abstaining functions; uniform when all abstain.
ProbabilisticLabels majority_vote(const WeakLabelMatrix& m, std::size_t n_classes);

/// Conditionally independent labeling functions given the true class.
/// confusion[k][y][v] = P(function k votes v | class y), where v == n_classes
/// stands for ABSTAIN.
struct LabelModelParams {
    std::vector<double> class_prior;
    std::vector<std::vector<std::vector<double>>> confusion;

    std::size_t n_classes() const noexcept { return class_prior.size(); }
    std::size_t n_functions() const noexcept { return confusion.size(); }
    double accuracy(std::size_t function, ClassIndex y) const { return confusion[function][y][y]; }
};

struct EmOptions {
    double tol = 1e-6;
    int max_iters = 500;
    /// Pseudo-count added to every confusion cell in the M-step.
    double smoothing = 1.0;
    /// When set, the class prior is held at this value instead of estimated.
    std::optional<std::vector<double>> fixed_prior;
};

struct FitReport {
    int iterations = 0;
    bool converged = false;
    /// Observed-data log-likelihood after each M-step.
    std::vector<double> log_likelihood;
    /// log-likelihood plus the smoothing term, the quantity EM ascends.
    std::vector<double> objective;
};

/// EM fit initialized from majority-vote pseudo-labels. Statistics are
/// accumulated over distinct vote patterns in sorted order, so the result
/// does not depend on sample order.
LabelModelParams fit_label_model(const WeakLabelMatrix& m, std::size_t n_classes, const EmOptions& opts = {},
                                 FitReport* report = nullptr);

/// Posterior P(y | votes) for every sample.
ProbabilisticLabels predict(const LabelModelParams& params, const WeakLabelMatrix& m);

double log_likelihood(const LabelModelParams& params, const WeakLabelMatrix& m);

/// `id,p_0,...,p_{|Y|-1},hard_label,confidence` per sample.
std::string format_probabilistic_labels(const ProbabilisticLabels& labels);
void write_probabilistic_labels(const ProbabilisticLabels& labels, const std::string& path);
ProbabilisticLabels load_probabilistic_labels(const std::string& path);

enum class Aggregator { majority, label_model };
Aggregator parse_aggregator(std::string_view tag);
std::string_view to_string(Aggregator a);

/// Majority vote, or fit + predict with the generative model.
ProbabilisticLabels aggregate(const WeakLabelMatrix& m, std::size_t n_classes, Aggregator a,
                              const EmOptions& opts = {});

std::string format_label_model_params(const LabelModelParams& params, const WeakLabelMatrix& m,
                                      const LabelSpace& space);

}  // namespace memlabel
