#include "memlabel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {
namespace {

namespace pt = boost::property_tree;

SeriesShape parse_shape(const std::string& s) {
    if (s == "flat") return SeriesShape::flat;
    if (s == "step") return SeriesShape::step;
    if (s == "ramp") return SeriesShape::ramp;
    if (s == "sine") return SeriesShape::sine;
    throw ConfigError("unknown series shape '" + s + "'");
}

std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto f : text::split(s, ',')) {
        const auto v = text::parse_double(f);
        if (!v) throw ConfigError("bad number in '" + key + "'");
        out.push_back(*v);
    }
    return out;
}

template <class T>
T get_or(const pt::ptree& tree, const std::string& key, T fallback) {
    if (!tree.get_optional<std::string>(key)) return fallback;
    if (const auto v = tree.get_optional<T>(key)) return *v;
    throw ConfigError("bad value for '" + key + "'");
}

std::vector<double> make_series(const SyntheticClass& c, std::mt19937_64& rng) {
    std::size_t len = c.length;
    if (c.length_jitter > 0) {
        std::uniform_int_distribution<std::size_t> jitter(0, 2 * c.length_jitter);
        len = len + jitter(rng) - c.length_jitter;
    }
    len = std::max<std::size_t>(len, 1);

    // step onset drawn from the middle third
    std::uniform_int_distribution<std::size_t> onset_dist(len / 3, std::max(len / 3, 2 * len / 3));
    const std::size_t onset = onset_dist(rng);
    std::normal_distribution<double> noise(0.0, c.dispersion);

    std::vector<double> v(len);
    for (std::size_t i = 0; i < len; ++i) {
        double base = c.level;
        switch (c.shape) {
            case SeriesShape::flat: break;
            case SeriesShape::step: base -= i >= onset ? c.amplitude : 0.0; break;
            case SeriesShape::ramp:
                base -= len > 1 ? c.amplitude * static_cast<double>(i) / static_cast<double>(len - 1) : 0.0;
                break;
            case SeriesShape::sine:
                base += c.amplitude * std::sin(4.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
                break;
        }
        v[i] = base + noise(rng);
    }
    return v;
}

std::vector<double> make_vector(const SyntheticClass& c, Modality modality, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, c.dispersion);
    std::vector<double> v(c.center.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.center[i] + noise(rng);
    if (modality == Modality::probability_vector) {
        // softmax over noisy logits
        const double mx = *std::max_element(v.begin(), v.end());
        double sum = 0.0;
        for (auto& x : v) sum += (x = std::exp(x - mx));
        for (auto& x : v) x /= sum;
    }
    return v;
}

}  // namespace

SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::string contents;
    for (const auto& l : text::read_lines(path)) contents += l + "\n";
    return parse_synthetic_spec(contents);
}

SyntheticSpec parse_synthetic_spec(const std::string& contents) {
    pt::ptree tree;
    std::istringstream in(contents);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }

    SyntheticSpec spec;
    const pt::ptree empty;
    const auto top_opt = tree.get_child_optional("synthetic");
    const auto& top = top_opt ? *top_opt : empty;
    spec.modality = parse_modality(get_or<std::string>(top, "modality", "feature-vector"));
    spec.seed = get_or<std::int64_t>(top, "seed", 0);
    long declared = 0;
    for (const auto& [key, child] : tree)
        if (key.rfind("class.", 0) == 0) ++declared;
    const auto n_classes = get_or<long>(top, "classes", declared);
    if (n_classes <= 0) throw ConfigError("synthetic spec declares no classes");
    const auto default_count = get_or<long>(top, "count", 0);

    std::vector<double> counts;
    if (const auto list = top.get_optional<std::string>("counts")) counts = parse_list(*list, "counts");

    for (long k = 0; k < n_classes; ++k) {
        const auto section = "class." + std::to_string(k);
        const auto it = tree.find(section);
        const auto& node = it == tree.not_found() ? empty : it->second;
        SyntheticClass c;
        c.name = get_or<std::string>(node, "name", "class" + std::to_string(k));
        long count = static_cast<std::size_t>(k) < counts.size() ? static_cast<long>(counts[k]) : default_count;
        count = get_or<long>(node, "count", count);
        if (count <= 0) throw ConfigError(section + ": count must be positive");
        c.count = static_cast<std::size_t>(count);
        c.dispersion = get_or<double>(node, "dispersion", 1.0);
        if (!(c.dispersion > 0.0)) throw ConfigError(section + ": dispersion must be positive");

        if (spec.modality == Modality::time_series) {
            c.shape = parse_shape(get_or<std::string>(node, "shape", "flat"));
            c.level = get_or<double>(node, "level", 0.0);
            c.amplitude = get_or<double>(node, "amplitude", 1.0);
            const auto len = get_or<long>(node, "length", 32);
            if (len <= 0) throw ConfigError(section + ": length must be positive");
            c.length = static_cast<std::size_t>(len);
            c.length_jitter = static_cast<std::size_t>(std::max<long>(0, get_or<long>(node, "length_jitter", 0)));
        } else {
            const auto center = node.get_optional<std::string>("center");
            if (!center) throw ConfigError(section + ": center is required");
            c.center = parse_list(*center, section + ".center");
        }
        spec.classes.push_back(std::move(c));
    }
    if (spec.modality != Modality::time_series)
        for (const auto& c : spec.classes)
            if (c.center.size() != spec.classes.front().center.size())
                throw ConfigError("class centers have differing dimensions");
    return spec;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::int64_t seed) {
    if (spec.classes.empty()) throw ConfigError("synthetic spec declares no classes");
    for (const auto& c : spec.classes) {
        if (!(c.dispersion > 0.0)) throw ConfigError("dispersion must be positive");
        if (spec.modality != Modality::time_series && c.center.empty())
            throw ConfigError("class '" + c.name + "' has an empty center");
    }

    const auto useed = static_cast<std::uint64_t>(seed);
    std::seed_seq seq{static_cast<std::uint32_t>(useed), static_cast<std::uint32_t>(useed >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);

    std::vector<std::pair<std::vector<double>, ClassIndex>> drawn;
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
        const auto& c = spec.classes[k];
        for (std::size_t i = 0; i < c.count; ++i) {
            auto values = spec.modality == Modality::time_series ? make_series(c, rng)
                                                                 : make_vector(c, spec.modality, rng);
            drawn.emplace_back(std::move(values), static_cast<ClassIndex>(k));
        }
    }
    std::shuffle(drawn.begin(), drawn.end(), rng);

    const auto width = std::to_string(drawn.size()).size();
    std::vector<Sample> samples;
    std::unordered_map<std::string, ClassIndex> labels;
    for (std::size_t i = 0; i < drawn.size(); ++i) {
        auto num = std::to_string(i);
        num.insert(0, width - num.size(), '0');
        Sample s{"s" + num, std::move(drawn[i].first)};
        labels.emplace(s.id, drawn[i].second);
        samples.push_back(std::move(s));
    }

    std::vector<std::string> names;
    for (const auto& c : spec.classes) names.push_back(c.name);
    LabelSpace space(std::move(names));
    Dataset ds(spec.modality, std::move(samples));
    GroundTruth gt(ds, space, std::move(labels));
    return SyntheticData{std::move(space), std::move(ds), std::move(gt)};
}

}  // namespace memlabel
