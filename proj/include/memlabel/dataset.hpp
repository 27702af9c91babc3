#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memlabel {

using ClassIndex = int;

enum class Modality { time_series, feature_vector, probability_vector };

Modality parse_modality(std::string_view tag);
std::string_view to_string(Modality m);

/// Ordered, unique, non-empty class names; at least two of them.
class LabelSpace {
public:
    explicit LabelSpace(std::vector<std::string> classes);

    std::size_t size() const noexcept { return classes_.size(); }
    const std::string& name(ClassIndex c) const { return classes_.at(static_cast<std::size_t>(c)); }
    const std::vector<std::string>& classes() const noexcept { return classes_; }
    bool contains(ClassIndex c) const noexcept { return c >= 0 && static_cast<std::size_t>(c) < classes_.size(); }

private:
    std::vector<std::string> classes_;
};

struct Sample {
    std::string id;
    std::vector<double> values;
};

/// An unlabeled collection whose invariants hold from construction onward.
class Dataset {
public:
    /// Validates every invariant; throws ValidationError naming the offending sample.
    Dataset(Modality modality, std::vector<Sample> samples);

    Modality modality() const noexcept { return modality_; }
    std::size_t size() const noexcept { return samples_.size(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    std::span<const double> values(std::size_t i) const { return samples_[i].values; }
    const std::string& id(std::size_t i) const { return samples_[i].id; }

    /// Position of `id`, or size() when absent.
    std::size_t find(const std::string& id) const;

private:
    Modality modality_;
    std::vector<Sample> samples_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Sample id -> class index, checked against a dataset and label space.
class GroundTruth {
public:
    GroundTruth() = default;
    GroundTruth(const Dataset& ds, const LabelSpace& space,
                std::unordered_map<std::string, ClassIndex> labels);

    bool contains(const std::string& id) const { return labels_.count(id) != 0; }
    ClassIndex at(const std::string& id) const;
    std::size_t size() const noexcept { return labels_.size(); }
    const std::unordered_map<std::string, ClassIndex>& labels() const noexcept { return labels_; }

private:
    std::unordered_map<std::string, ClassIndex> labels_;
};

constexpr double kProbabilityTolerance = 1e-6;

LabelSpace load_label_space(const std::string& path);
void write_label_space(const LabelSpace& space, const std::string& path);

Dataset parse_dataset(std::string_view source, const std::vector<std::string>& lines, Modality modality);
Dataset load_dataset(const std::string& path, Modality modality);
std::string format_dataset(const Dataset& ds);
void write_dataset(const Dataset& ds, const std::string& path);

GroundTruth load_ground_truth(const std::string& path, const Dataset& ds, const LabelSpace& space);
/// One `id,class_index` line per sample present in `gt`, in dataset order.
void write_ground_truth(const GroundTruth& gt, const Dataset& ds, const std::string& path);

}  // namespace memlabel
