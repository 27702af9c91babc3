#include "memlabel/run_config.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
    if (!tree.get_optional<std::string>(key)) return fallback;
    if (const auto v = tree.get_optional<T>(key)) return *v;
    throw ConfigError("bad value for '" + key + "'");
}

std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
    std::vector<double> out;
    if (text::trim(s).empty()) return out;
    for (const auto f : text::split(s, ',')) {
        const auto v = text::parse_double(f);
        if (!v) throw ConfigError("bad number in '" + key + "'");
        out.push_back(*v);
    }
    return out;
}

}  // namespace

std::vector<std::int64_t> parse_seed_list(const std::string& list) {
    std::vector<std::int64_t> out;
    if (text::trim(list).empty()) return out;
    for (const auto f : text::split(list, ',')) {
        const auto v = text::parse_int(f);
        if (!v) throw ConfigError("bad seed '" + std::string(text::trim(f)) + "'");
        out.push_back(*v);
    }
    return out;
}

void RunConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("[dataset] path is required");
    if (label_space_path.empty()) throw ConfigError("[dataset] label_space is required");
    if (modality_for(distance.kind) != modality)
        throw ConfigError("distance '" + std::string(to_string(distance.kind)) + "' does not apply to " +
                          std::string(to_string(modality)) + " data");
    if (!(distance.eps > 0.0)) throw ConfigError("[distance] eps must be positive");
    if (!(threshold > 0.0)) throw ConfigError("[memories] threshold must be positive");
    if (seeds.empty()) throw ConfigError("[memories] seeds is empty");
    if (std::set<std::int64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("[memories] seeds must be distinct");
    if (max_global_steps < 1) throw ConfigError("[memories] max_global_steps must be >= 1");
    if (max_local_steps < 0) throw ConfigError("[memories] max_local_steps must be >= 0");
    if (max_labels == 0) throw ConfigError("[budget] max_labels must be positive");
    if (provider == ProviderMode::oracle && oracle_path.empty()) throw ConfigError("oracle provider needs a ground-truth path");
    if (noise < 0.0 || noise > 1.0) throw ConfigError("[labels] noise must be in [0, 1]");
    if (aggregators.empty()) throw ConfigError("[aggregate] aggregators is empty");
    for (double t : ablate_thresholds)
        if (!(t > 0.0)) throw ConfigError("[ablate] thresholds must be positive");
}

RunConfig parse_run_config(const std::string& contents, const std::string& base_dir) {
    pt::ptree tree;
    std::istringstream in(contents);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunConfig c;
    c.dataset_path = resolve(base_dir, get<std::string>(tree, "dataset.path", ""));
    c.modality = parse_modality(get<std::string>(tree, "dataset.modality", "feature-vector"));
    c.label_space_path = resolve(base_dir, get<std::string>(tree, "dataset.label_space", ""));
    c.ground_truth_path = resolve(base_dir, get<std::string>(tree, "dataset.ground_truth", ""));
    c.preview_dir = resolve(base_dir, get<std::string>(tree, "dataset.preview_dir", ""));

    c.distance.kind = parse_distance_kind(get<std::string>(tree, "distance.kind", "euclidean"));
    c.distance.eps = get<double>(tree, "distance.eps", 1e-9);
    c.distance_cache = resolve(base_dir, get<std::string>(tree, "distance.cache", ""));

    c.threshold = get<double>(tree, "memories.threshold", 1.0);
    c.seeds = parse_seed_list(get<std::string>(tree, "memories.seeds", "0"));
    c.max_global_steps = get<int>(tree, "memories.max_global_steps", 5);
    c.max_local_steps = get<int>(tree, "memories.max_local_steps", 30);

    const auto max_labels = get<long long>(tree, "budget.max_labels", 0);
    if (max_labels < 0) throw ConfigError("[budget] max_labels must be positive");
    c.max_labels = static_cast<std::size_t>(max_labels);

    const auto provider = std::string(text::trim(get<std::string>(tree, "labels.provider", "oracle")));
    if (provider == "interactive") {
        c.provider = ProviderMode::interactive;
    } else if (provider.rfind("serve", 0) == 0) {
        c.provider = ProviderMode::serve;
        if (provider.size() > 5) {
            if (provider[5] != ':') throw ConfigError("provider must be serve:<host>:<port>");
            const auto addr = provider.substr(6);
            const auto colon = addr.rfind(':');
            if (colon == std::string::npos) throw ConfigError("provider must be serve:<host>:<port>");
            c.serve_host = addr.substr(0, colon);
            const auto port = text::parse_int(addr.substr(colon + 1));
            if (!port || *port < 0 || *port > 65535) throw ConfigError("bad port in provider");
            c.serve_port = static_cast<int>(*port);
        }
    } else if (provider.rfind("oracle", 0) == 0) {
        c.provider = ProviderMode::oracle;
        c.oracle_path = provider.size() > 7 && provider[6] == ':' ? resolve(base_dir, provider.substr(7)) : c.ground_truth_path;
    } else {
        throw ConfigError("unknown provider '" + provider + "'");
    }
    c.noise = get<double>(tree, "labels.noise", 0.0);
    c.noise_seed = get<std::int64_t>(tree, "labels.noise_seed", 0);
    c.session_id = get<std::string>(tree, "labels.session_id", "session");
    c.static_dir = resolve(base_dir, get<std::string>(tree, "labels.static_dir", ""));

    const auto aggs = std::string(text::trim(get<std::string>(tree, "aggregate.aggregators", "both")));
    if (aggs == "both") {
        c.aggregators = {Aggregator::majority, Aggregator::label_model};
    } else {
        c.aggregators.clear();
        for (const auto a : text::split(aggs, ',')) c.aggregators.push_back(parse_aggregator(a));
    }
    if (const auto pc = tree.get_optional<std::string>("aggregate.positive_class"); pc && !text::trim(*pc).empty()) {
        const auto v = text::parse_int(*pc);
        if (!v) throw ConfigError("bad [aggregate] positive_class");
        c.positive_class = static_cast<ClassIndex>(*v);
    }
    if (const auto fp = tree.get_optional<std::string>("aggregate.fixed_prior"); fp && !text::trim(*fp).empty())
        c.em.fixed_prior = parse_doubles(*fp, "aggregate.fixed_prior");
    c.em.tol = get<double>(tree, "aggregate.em_tol", 1e-6);
    c.em.max_iters = get<int>(tree, "aggregate.em_max_iters", 500);
    c.one_vs_all = get<bool>(tree, "aggregate.one_vs_all", false);

    c.ablate_thresholds = parse_doubles(get<std::string>(tree, "ablate.thresholds", ""), "ablate.thresholds");

    c.output_dir = resolve(base_dir, get<std::string>(tree, "output.dir", "out"));
    c.session_dir = resolve(base_dir, get<std::string>(tree, "labels.session_dir", ""));
    return c;
}

RunConfig load_run_config(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("cannot open config '" + path + "'");
    std::string contents;
    for (const auto& l : text::read_lines(path)) contents += l + "\n";
    return parse_run_config(contents, fs::path(path).parent_path().string());
}

std::string RunConfig::describe() const {
    std::ostringstream os;
    auto join_seeds = [&] {
        std::string s;
        for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
        return s;
    };
    std::string aggs;
    for (std::size_t i = 0; i < aggregators.size(); ++i) aggs += (i ? "," : "") + std::string(to_string(aggregators[i]));
    const char* modes[] = {"oracle", "interactive", "serve"};

    os << "aggregate.aggregators=" << aggs << "\n";
    os << "aggregate.em_max_iters=" << em.max_iters << "\n";
    os << "aggregate.em_tol=" << text::format_double(em.tol) << "\n";
    os << "aggregate.fixed_prior=" << (em.fixed_prior ? text::join_doubles(*em.fixed_prior) : "") << "\n";
    os << "aggregate.one_vs_all=" << (one_vs_all ? "true" : "false") << "\n";
    os << "aggregate.positive_class=" << (positive_class ? std::to_string(*positive_class) : "") << "\n";
    os << "ablate.thresholds=" << text::join_doubles(ablate_thresholds) << "\n";
    os << "budget.max_labels=" << max_labels << "\n";
    os << "dataset.ground_truth=" << ground_truth_path << "\n";
    os << "dataset.label_space=" << label_space_path << "\n";
    os << "dataset.modality=" << to_string(modality) << "\n";
    os << "dataset.path=" << dataset_path << "\n";
    os << "distance.eps=" << text::format_double(distance.eps) << "\n";
    os << "distance.kind=" << to_string(distance.kind) << "\n";
    os << "labels.noise=" << text::format_double(noise) << "\n";
    os << "labels.noise_seed=" << noise_seed << "\n";
    os << "labels.oracle=" << oracle_path << "\n";
    os << "labels.provider=" << modes[static_cast<int>(provider)] << "\n";
    os << "memories.max_global_steps=" << max_global_steps << "\n";
    os << "memories.max_local_steps=" << max_local_steps << "\n";
    os << "memories.seeds=" << join_seeds() << "\n";
    os << "memories.threshold=" << text::format_double(threshold) << "\n";
    return os.str();
}

}  // namespace memlabel
