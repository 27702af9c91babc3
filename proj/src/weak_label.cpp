#include "memlabel/weak_label.hpp"

#include <algorithm>
#include <set>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

std::vector<std::vector<std::size_t>> Partition::groups() const {
    std::vector<std::vector<std::size_t>> out(memory_indices.size());
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const auto it = std::lower_bound(memory_indices.begin(), memory_indices.end(), assignment[i]);
        out[static_cast<std::size_t>(it - memory_indices.begin())].push_back(i);
    }
    return out;
}

Partition partition(const DistanceMatrix& m, const MemorySet& memories) {
    if (memories.memory_indices.empty()) throw ValidationError("partition: empty memory set");
    for (auto q : memories.memory_indices)
        if (q >= m.size()) throw ValidationError("partition: memory index out of range");
    Partition p;
    p.memory_indices = memories.memory_indices;
    std::sort(p.memory_indices.begin(), p.memory_indices.end());
    p.assignment.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) p.assignment[i] = p.memory_indices[nearest_memory(m, p.memory_indices, i)];
    return p;
}

std::vector<ClassIndex> induce_weak_labels(const Partition& p, const std::map<std::size_t, ClassIndex>& memory_labels,
                                           const Dataset& ds) {
    for (auto q : p.memory_indices)
        if (!memory_labels.count(q)) throw ValidationError("no expert label for memory '" + ds.id(q) + "'");
    std::vector<ClassIndex> column(p.assignment.size());
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = memory_labels.at(p.assignment[i]);
    return column;
}

void write_partition(const Partition& p, const Dataset& ds, const std::string& path) {
    std::string out;
    for (std::size_t i = 0; i < p.assignment.size(); ++i)
        out += ds.id(i) + "," + std::to_string(p.assignment[i]) + "," + ds.id(p.assignment[i]) + "\n";
    text::write_file_atomic(path, out);
}

void WeakLabelMatrix::add_column(WeakLabelColumn column) {
    if (column.votes.size() != sample_ids_.size())
        throw ValidationError("weak-label column '" + column.name + "' has " + std::to_string(column.votes.size()) +
                              " votes for " + std::to_string(sample_ids_.size()) + " samples");
    columns_.push_back(std::move(column));
}

std::vector<ClassIndex> WeakLabelMatrix::row(std::size_t sample) const {
    std::vector<ClassIndex> r(columns_.size());
    for (std::size_t k = 0; k < columns_.size(); ++k) r[k] = columns_[k].votes[sample];
    return r;
}

void WeakLabelMatrix::validate(std::size_t n_classes) const {
    for (const auto& c : columns_)
        for (std::size_t i = 0; i < c.votes.size(); ++i) {
            const auto v = c.votes[i];
            if (v != kAbstain && (v < 0 || static_cast<std::size_t>(v) >= n_classes))
                throw ValidationError("weak label " + std::to_string(v) + " for '" + sample_ids_[i] + "' in column '" +
                                      c.name + "' is out of range");
        }
}

std::string format_weak_label_matrix(const WeakLabelMatrix& m) {
    std::string out = "sample_id";
    for (const auto& c : m.columns()) out += "," + c.name;
    out += "\n";
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        out += m.sample_ids()[i];
        for (std::size_t k = 0; k < m.n_functions(); ++k) out += "," + std::to_string(m.at(i, k));
        out += "\n";
    }
    return out;
}

void write_weak_label_matrix(const WeakLabelMatrix& m, const std::string& path) {
    text::write_file_atomic(path, format_weak_label_matrix(m));
}

WeakLabelMatrix load_weak_label_matrix(const std::string& path) {
    const auto lines = text::read_lines(path);
    if (lines.empty()) throw ParseError(path, 1, "missing header");
    const auto header = text::split(text::trim(lines[0]), ',');
    if (header.empty() || text::trim(header[0]) != "sample_id") throw ParseError(path, 1, "header must start with sample_id");

    std::vector<WeakLabelColumn> cols;
    for (std::size_t k = 1; k < header.size(); ++k) {
        WeakLabelColumn c;
        c.name = std::string(text::trim(header[k]));
        if (c.name.rfind("seed_", 0) == 0) c.seed = text::parse_int(std::string_view(c.name).substr(5));
        cols.push_back(std::move(c));
    }
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != header.size())
            throw ParseError(path, ln + 1, "expected " + std::to_string(header.size()) + " fields");
        std::string id(text::trim(fields[0]));
        if (!seen.insert(id).second) throw ParseError(path, ln + 1, "duplicate sample id '" + id + "'");
        ids.push_back(std::move(id));
        for (std::size_t k = 1; k < fields.size(); ++k) {
            const auto v = text::parse_int(fields[k]);
            if (!v || *v < kAbstain) throw ParseError(path, ln + 1, "bad vote '" + std::string(fields[k]) + "'");
            cols[k - 1].votes.push_back(static_cast<ClassIndex>(*v));
        }
    }
    WeakLabelMatrix m(std::move(ids));
    for (auto& c : cols) m.add_column(std::move(c));
    return m;
}

SeedPlan plan_seeds(std::size_t max_labels, std::size_t n_classes, std::span<const std::size_t> per_seed_sizes) {
    SeedPlan plan;
    for (auto size : per_seed_sizes) {
        if (size < n_classes || plan.labels + size > max_labels) break;
        plan.labels += size;
        ++plan.accepted;
    }
    if (plan.accepted == 0) {
        std::string why = "labeling budget N_L=" + std::to_string(max_labels) + " admits no seed";
        if (max_labels < n_classes)
            why += " (fewer than |Y|=" + std::to_string(n_classes) + " labels)";
        else if (!per_seed_sizes.empty())
            why += " (first seed needs " + std::to_string(per_seed_sizes.front()) + " labels, at least " +
                   std::to_string(n_classes) + " required)";
        throw BudgetInfeasible(why);
    }
    return plan;
}

std::string make_query_id(std::int64_t seed, std::size_t sample_index) {
    return std::to_string(seed) + ":" + std::to_string(sample_index);
}

std::vector<MemorySet> generate_seed_memories(const DistanceMatrix& m, const PipelineOptions& opts) {
    std::set<std::int64_t> distinct(opts.seeds.begin(), opts.seeds.end());
    if (distinct.size() != opts.seeds.size()) throw ConfigError("seeds must be distinct");
    if (opts.seeds.empty()) throw ConfigError("no seeds given");
    std::vector<MemorySet> out;
    for (auto s : opts.seeds) {
        auto cfg = opts.base;
        cfg.random_seed = s;
        out.push_back(generate_memories(m, cfg, nullptr, opts.threads));
    }
    return out;
}

PipelineResult label_and_induce(const Dataset& ds, const DistanceMatrix& m, const LabelSpace& space,
                                std::vector<MemorySet> candidates, std::size_t max_labels, LabelProvider& provider) {
    PipelineResult result;
    result.budget.max_labels = max_labels;
    result.matrix = WeakLabelMatrix(
        [&] {
            std::vector<std::string> ids;
            for (const auto& s : ds.samples()) ids.push_back(s.id);
            return ids;
        }());

    std::vector<std::size_t> sizes;
    for (const auto& c : candidates) sizes.push_back(c.size());
    const auto plan = plan_seeds(max_labels, space.size(), sizes);

    for (std::size_t k = 0; k < candidates.size(); ++k) {
        SeedOutcome out;
        out.memories = std::move(candidates[k]);
        out.planned = k < plan.accepted;
        if (out.planned) {
            out.partition = partition(m, out.memories);
            std::vector<LabelQuery> batch;
            for (auto q : out.memories.memory_indices)
                batch.push_back({make_query_id(out.memories.seed, q), ds.id(q), q, out.memories.seed});
            result.queries_issued += batch.size();
            const auto answers = provider.label(batch);
            if (answers.size() != batch.size()) throw Error("label provider returned a short batch");
            for (std::size_t j = 0; j < batch.size(); ++j) {
                if (!answers[j]) continue;
                if (!space.contains(*answers[j]))
                    throw ValidationError("label " + std::to_string(*answers[j]) + " for '" + batch[j].sample_id +
                                          "' is outside the label space");
                out.memory_labels[batch[j].sample_index] = *answers[j];
                ++result.budget.consumed;
            }
            out.complete = out.memory_labels.size() == out.memories.size();
            if (out.complete)
                result.matrix.add_column({"seed_" + std::to_string(out.memories.seed), out.memories.seed,
                                          induce_weak_labels(out.partition, out.memory_labels, ds)});
        }
        result.seeds.push_back(std::move(out));
    }
    if (result.matrix.n_functions() == 0) throw ProviderRefusal("every planned seed had skipped memories; no weak labels");
    return result;
}

PipelineResult run_pipeline(const Dataset& ds, const DistanceMatrix& m, const LabelSpace& space,
                            const PipelineOptions& opts, LabelProvider& provider) {
    if (m.size() != ds.size()) throw ValidationError("distance matrix does not match dataset size");
    return label_and_induce(ds, m, space, generate_seed_memories(m, opts), opts.max_labels, provider);
}

}  // namespace memlabel
