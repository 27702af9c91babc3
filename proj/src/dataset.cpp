#include "memlabel/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

Modality parse_modality(std::string_view tag) {
    tag = text::trim(tag);
    if (tag == "time-series") return Modality::time_series;
    if (tag == "feature-vector") return Modality::feature_vector;
    if (tag == "probability-vector") return Modality::probability_vector;
    throw ConfigError("unknown modality '" + std::string(tag) + "'");
}

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::time_series: return "time-series";
        case Modality::feature_vector: return "feature-vector";
        case Modality::probability_vector: return "probability-vector";
    }
    return "?";
}

LabelSpace::LabelSpace(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) throw ValidationError("label space needs at least 2 classes");
    std::unordered_set<std::string> seen;
    for (const auto& c : classes_) {
        if (c.empty()) throw ValidationError("label space contains an empty class name");
        if (!seen.insert(c).second) throw ValidationError("duplicate class name '" + c + "'");
    }
}

Dataset::Dataset(Modality modality, std::vector<Sample> samples)
    : modality_(modality), samples_(std::move(samples)) {
    if (samples_.empty()) throw ValidationError("dataset has no samples");
    index_.reserve(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (s.id.empty()) throw ValidationError("sample " + std::to_string(i) + " has an empty id");
        if (!index_.emplace(s.id, i).second) throw ValidationError("duplicate sample id '" + s.id + "'");
        if (s.values.empty()) throw ValidationError("sample '" + s.id + "' has no values");
        for (double v : s.values)
            if (!std::isfinite(v)) throw ValidationError("sample '" + s.id + "' contains a non-finite value");

        if (modality_ != Modality::time_series && s.values.size() != samples_.front().values.size())
            throw ValidationError("sample '" + s.id + "' has length " + std::to_string(s.values.size()) +
                                  ", expected " + std::to_string(samples_.front().values.size()));
        if (modality_ == Modality::probability_vector) {
            double sum = 0.0;
            for (double v : s.values) {
                if (v < 0.0) throw ValidationError("sample '" + s.id + "' has a negative probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > kProbabilityTolerance)
                throw ValidationError("sample '" + s.id + "' is not normalized (sum " + text::format_double(sum) + ")");
        }
    }
}

std::size_t Dataset::find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? samples_.size() : it->second;
}

GroundTruth::GroundTruth(const Dataset& ds, const LabelSpace& space,
                         std::unordered_map<std::string, ClassIndex> labels)
    : labels_(std::move(labels)) {
    for (const auto& [id, c] : labels_) {
        if (ds.find(id) == ds.size()) throw ValidationError("ground truth references unknown sample '" + id + "'");
        if (!space.contains(c))
            throw ValidationError("ground truth class " + std::to_string(c) + " for '" + id + "' is out of range");
    }
}

ClassIndex GroundTruth::at(const std::string& id) const {
    const auto it = labels_.find(id);
    if (it == labels_.end()) throw ValidationError("no ground truth for sample '" + id + "'");
    return it->second;
}

LabelSpace load_label_space(const std::string& path) {
    std::vector<std::string> classes;
    for (const auto& line : text::read_lines(path)) {
        const auto name = text::trim(line);
        if (!name.empty()) classes.emplace_back(name);
    }
    return LabelSpace(std::move(classes));
}

void write_label_space(const LabelSpace& space, const std::string& path) {
    std::string out;
    for (const auto& c : space.classes()) out += c + "\n";
    text::write_file_atomic(path, out);
}

Dataset parse_dataset(std::string_view source, const std::vector<std::string>& lines, Modality modality) {
    const std::string src(source);
    std::vector<Sample> samples;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;

        Sample s;
        std::string_view rest;
        if (modality == Modality::time_series) {
            const auto comma = line.find(',');
            if (comma == std::string_view::npos) throw ParseError(src, ln + 1, "expected id,v1,...");
            s.id = std::string(text::trim(line.substr(0, comma)));
            rest = line.substr(comma + 1);
        } else {
            const auto tab = line.find('\t');
            if (tab == std::string_view::npos) throw ParseError(src, ln + 1, "expected id<TAB>v1,...");
            s.id = std::string(text::trim(line.substr(0, tab)));
            rest = line.substr(tab + 1);
        }
        for (const auto field : text::split(rest, ',')) {
            const auto v = text::parse_double(field);
            if (!v) throw ParseError(src, ln + 1, "bad number '" + std::string(text::trim(field)) + "'");
            s.values.push_back(*v);
        }
        samples.push_back(std::move(s));
    }
    return Dataset(modality, std::move(samples));
}

Dataset load_dataset(const std::string& path, Modality modality) {
    return parse_dataset(path, text::read_lines(path), modality);
}

std::string format_dataset(const Dataset& ds) {
    const char sep = ds.modality() == Modality::time_series ? ',' : '\t';
    std::string out;
    for (const auto& s : ds.samples()) {
        out += s.id;
        out.push_back(sep);
        out += text::join_doubles(s.values);
        out.push_back('\n');
    }
    return out;
}

void write_dataset(const Dataset& ds, const std::string& path) { text::write_file_atomic(path, format_dataset(ds)); }

GroundTruth load_ground_truth(const std::string& path, const Dataset& ds, const LabelSpace& space) {
    std::unordered_map<std::string, ClassIndex> labels;
    const auto lines = text::read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 2) throw ParseError(path, ln + 1, "expected id,class_index");
        const auto c = text::parse_int(fields[1]);
        if (!c) throw ParseError(path, ln + 1, "bad class index");
        if (!labels.emplace(std::string(text::trim(fields[0])), static_cast<ClassIndex>(*c)).second)
            throw ParseError(path, ln + 1, "duplicate id");
    }
    return GroundTruth(ds, space, std::move(labels));
}

void write_ground_truth(const GroundTruth& gt, const Dataset& ds, const std::string& path) {
    std::string out;
    for (const auto& s : ds.samples()) {
        if (!gt.contains(s.id)) continue;
        out += s.id + "," + std::to_string(gt.at(s.id)) + "\n";
    }
    text::write_file_atomic(path, out);
}

}  // namespace memlabel
