#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"

namespace memlabel {

enum class SeriesShape { flat, step, ramp, sine };

/// One generated class. Vector modalities use `center` and `dispersion`;
/// time series use the shape fields with `dispersion` as noise sigma.
struct SyntheticClass {
    std::string name;
    std::size_t count = 0;
    std::vector<double> center;
    double dispersion = 1.0;
    SeriesShape shape = SeriesShape::flat;
    double level = 0.0;
    double amplitude = 1.0;
    std::size_t length = 32;
    std::size_t length_jitter = 0;
};

struct SyntheticSpec {
    Modality modality = Modality::feature_vector;
    std::vector<SyntheticClass> classes;
    std::int64_t seed = 0;
};

struct SyntheticData {
    LabelSpace label_space;
    Dataset dataset;
    GroundTruth ground_truth;
};

/// Parses the `[synthetic]` / `[class.N]` key=value config.
SyntheticSpec load_synthetic_spec(const std::string& path);
SyntheticSpec parse_synthetic_spec(const std::string& contents);

/// Deterministic for a fixed (spec, seed). Sample ids are `s<index>` in
/// shuffled order, so classes are interleaved in the output.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::int64_t seed);

}  // namespace memlabel
