#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"
#include "memlabel/distance.hpp"
#include "memlabel/memory_gen.hpp"

namespace memlabel {

/// Vote value for "no opinion"; rendered as -1 in files.
constexpr ClassIndex kAbstain = -1;

/// Nearest-memory assignment of every sample.
struct Partition {
    std::vector<std::size_t> memory_indices;  // sorted, as in the MemorySet
    std::vector<std::size_t> assignment;      // sample index -> dataset index of its memory

    /// Members of each memory's group, in memory order.
    std::vector<std::vector<std::size_t>> groups() const;
};

Partition partition(const DistanceMatrix& m, const MemorySet& memories);

/// Every sample takes its memory's label. Throws ValidationError naming the
/// sample id of any memory missing from `memory_labels`.
std::vector<ClassIndex> induce_weak_labels(const Partition& p, const std::map<std::size_t, ClassIndex>& memory_labels,
                                           const Dataset& ds);

/// `sample_id,memory_index,memory_id` per sample.
void write_partition(const Partition& p, const Dataset& ds, const std::string& path);

struct WeakLabelColumn {
    std::string name;  // "seed_<s>" for induced columns
    std::optional<std::int64_t> seed;
    std::vector<ClassIndex> votes;
};

/// N_u x N_w votes, one column per labeling source.
class WeakLabelMatrix {
public:
    WeakLabelMatrix() = default;
    explicit WeakLabelMatrix(std::vector<std::string> sample_ids) : sample_ids_(std::move(sample_ids)) {}

    void add_column(WeakLabelColumn column);

    std::size_t n_samples() const noexcept { return sample_ids_.size(); }
    std::size_t n_functions() const noexcept { return columns_.size(); }
    ClassIndex at(std::size_t sample, std::size_t function) const { return columns_[function].votes[sample]; }
    const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
    const std::vector<WeakLabelColumn>& columns() const noexcept { return columns_; }

    /// Row `sample` across all functions.
    std::vector<ClassIndex> row(std::size_t sample) const;

    /// Rejects votes outside [0, n_classes) other than kAbstain.
    void validate(std::size_t n_classes) const;

private:
    std::vector<std::string> sample_ids_;
    std::vector<WeakLabelColumn> columns_;
};

/// Header `sample_id,<col>,...`; ABSTAIN is -1.
std::string format_weak_label_matrix(const WeakLabelMatrix& m);
void write_weak_label_matrix(const WeakLabelMatrix& m, const std::string& path);
/// Accepts any column names; `seed_<n>` columns get their seed recorded.
WeakLabelMatrix load_weak_label_matrix(const std::string& path);

struct Budget {
    std::size_t max_labels = 0;  // N_L
    std::size_t consumed = 0;    // N_s
};

struct SeedPlan {
    std::size_t accepted = 0;  // N_w
    std::size_t labels = 0;    // N_s
};

/// Accepts candidate seeds in order while each has at least |Y| memories and
/// the running total stays within N_L. Throws BudgetInfeasible when none fit.
SeedPlan plan_seeds(std::size_t max_labels, std::size_t n_classes, std::span<const std::size_t> per_seed_sizes);

struct LabelQuery {
    std::string query_id;  // "<seed>:<sample index>"
    std::string sample_id;
    std::size_t sample_index = 0;
    std::int64_t seed = 0;
};

std::string make_query_id(std::int64_t seed, std::size_t sample_index);

/// Source of expert labels. Batches hold one seed's memories. A returned
/// nullopt means the expert skipped that query; throwing ProviderRefusal
/// aborts the run.
class LabelProvider {
public:
    virtual ~LabelProvider() = default;
    virtual std::vector<std::optional<ClassIndex>> label(std::span<const LabelQuery> batch) = 0;
};

struct SeedOutcome {
    MemorySet memories;
    Partition partition;
    std::map<std::size_t, ClassIndex> memory_labels;
    bool planned = false;  // fit in the budget plan
    bool complete = false; // every memory labeled; contributes a column
};

struct PipelineResult {
    std::vector<SeedOutcome> seeds;  // one per candidate seed, in input order
    WeakLabelMatrix matrix;
    Budget budget;
    std::size_t queries_issued = 0;
};

struct PipelineOptions {
    MemoryGenConfig base;  // random_seed is replaced per seed
    std::vector<std::int64_t> seeds;
    std::size_t max_labels = 0;
    unsigned threads = 1;
};

/// Memory generation for every candidate seed, budget planning, expert
/// queries per planned seed, then one induced column per fully labeled seed.
PipelineResult run_pipeline(const Dataset& ds, const DistanceMatrix& m, const LabelSpace& space,
                            const PipelineOptions& opts, LabelProvider& provider);

/// Stage halves of run_pipeline for the stage-wise CLI.
std::vector<MemorySet> generate_seed_memories(const DistanceMatrix& m, const PipelineOptions& opts);
PipelineResult label_and_induce(const Dataset& ds, const DistanceMatrix& m, const LabelSpace& space,
                                std::vector<MemorySet> candidates, std::size_t max_labels, LabelProvider& provider);

}  // namespace memlabel
