#include "memlabel/memory_gen.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <thread>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

void MemoryGenConfig::validate() const {
    if (max_global_steps < 1) throw ConfigError("max global steps must be >= 1");
    if (max_local_steps < 0) throw ConfigError("max local steps must be >= 0");
    if (!(distance_threshold > 0.0)) throw ConfigError("distance threshold must be > 0");
}

std::size_t nearest_memory(const DistanceMatrix& m, std::span<const std::size_t> memories, std::size_t i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < memories.size(); ++q) {
        if (memories[q] == i) return q;
        const double d = m(memories[q], i);
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

double compute_cost(const DistanceMatrix& m, std::span<const std::size_t> memories) {
    if (memories.empty()) throw ValidationError("compute_cost: empty memory list");
    for (auto q : memories)
        if (q >= m.size()) throw ValidationError("compute_cost: memory index out of range");
    double cost = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto q : memories) best = std::min(best, m(q, i));
        cost += best;
    }
    return cost;
}

std::vector<std::size_t> generate_initial_memories(const DistanceMatrix& m, double t, std::mt19937_64& rng) {
    if (!(t > 0.0)) throw ConfigError("distance threshold must be > 0");
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> memories;
    for (auto i : order) {
        const bool covered = std::any_of(memories.begin(), memories.end(), [&](auto q) { return m(q, i) <= t; });
        if (!covered) memories.push_back(i);
    }
    std::sort(memories.begin(), memories.end());
    return memories;
}

std::mt19937_64 restart_stream(std::int64_t seed, int restart) {
    const auto s = static_cast<std::uint64_t>(seed);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(restart)};
    return std::mt19937_64(seq);
}

namespace {

RestartTrace run_restart(const DistanceMatrix& m, const MemoryGenConfig& config, int restart) {
    auto rng = restart_stream(config.random_seed, restart);
    RestartTrace tr;
    std::vector<std::size_t> current = generate_initial_memories(m, config.distance_threshold, rng);
    tr.initial_memories = current;
    tr.initial_cost = compute_cost(m, current);
    double current_cost = tr.initial_cost;

    const std::size_t n = m.size();
    std::vector<std::size_t> assignment(n);
    bool stale = true;
    for (int step = 0; step < config.max_local_steps; ++step) {
        if (stale) {
            for (std::size_t i = 0; i < n; ++i) assignment[i] = nearest_memory(m, current, i);
            stale = false;
        }
        // group members per memory, excluding the memory itself
        std::vector<std::vector<std::size_t>> groups(current.size());
        for (std::size_t i = 0; i < n; ++i)
            if (current[assignment[i]] != i) groups[assignment[i]].push_back(i);
        std::vector<std::size_t> eligible;
        for (std::size_t q = 0; q < groups.size(); ++q)
            if (!groups[q].empty()) eligible.push_back(q);
        if (eligible.empty()) break;  // every sample is a memory; no move exists

        // a uniform pick among memories with candidates is what resampling until
        // one has a candidate would produce
        std::uniform_int_distribution<std::size_t> pick_memory(0, eligible.size() - 1);
        const std::size_t q = eligible[pick_memory(rng)];
        std::uniform_int_distribution<std::size_t> pick_member(0, groups[q].size() - 1);
        const std::size_t replacement = groups[q][pick_member(rng)];

        auto proposal = current;
        proposal[q] = replacement;
        std::sort(proposal.begin(), proposal.end());
        const double new_cost = compute_cost(m, proposal);
        if (new_cost < current_cost) {
            current = std::move(proposal);
            current_cost = new_cost;
            tr.accepted_costs.push_back(current_cost);
            stale = true;
        }
    }
    tr.final_memories = std::move(current);
    tr.final_cost = current_cost;
    return tr;
}

}  // namespace

MemorySet generate_memories(const DistanceMatrix& m, const MemoryGenConfig& config, MemoryGenTrace* trace,
                            unsigned threads) {
    config.validate();
    if (m.size() == 0) throw ValidationError("generate_memories: empty dataset");

    const auto z_g = static_cast<std::size_t>(config.max_global_steps);
    std::vector<RestartTrace> results(z_g);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, z_g));
    if (threads <= 1) {
        for (std::size_t g = 0; g < z_g; ++g) results[g] = run_restart(m, config, static_cast<int>(g + 1));
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t g = w; g < z_g; g += threads)
                    results[g] = run_restart(m, config, static_cast<int>(g + 1));
            });
    }

    // best-of-restarts with a strict comparison, so the earliest restart wins ties
    MemorySet best;
    best.seed = config.random_seed;
    best.threshold = config.distance_threshold;
    best.cost = std::numeric_limits<double>::infinity();
    for (const auto& r : results) {
        if (r.final_cost < best.cost) {
            best.cost = r.final_cost;
            best.memory_indices = r.final_memories;
        }
    }
    if (trace) trace->restarts = std::move(results);
    return best;
}

std::string format_memory_set(const MemorySet& set, const Dataset& ds) {
    std::string out = "seed=" + std::to_string(set.seed) + " t=" + text::format_double(set.threshold) +
                      " cost=" + text::format_double(set.cost) + "\n";
    for (auto i : set.memory_indices) out += std::to_string(i) + "," + ds.id(i) + "\n";
    return out;
}

void write_memory_set(const MemorySet& set, const Dataset& ds, const std::string& path) {
    text::write_file_atomic(path, format_memory_set(set, ds));
}

MemorySet load_memory_set(const std::string& path, const Dataset& ds) {
    const auto lines = text::read_lines(path);
    if (lines.empty()) throw ParseError(path, 1, "missing header");
    MemorySet set;
    bool have_seed = false, have_t = false, have_cost = false;
    for (const auto field : text::split(text::trim(lines[0]), ' ')) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "seed") {
            const auto v = text::parse_int(value);
            if (!v) throw ParseError(path, 1, "bad seed");
            set.seed = *v;
            have_seed = true;
        } else if (key == "t" || key == "cost") {
            const auto v = text::parse_double(value);
            if (!v) throw ParseError(path, 1, "bad " + std::string(key));
            (key == "t" ? set.threshold : set.cost) = *v;
            (key == "t" ? have_t : have_cost) = true;
        }
    }
    if (!have_seed || !have_t || !have_cost) throw ParseError(path, 1, "header must carry seed=, t= and cost=");

    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 2) throw ParseError(path, ln + 1, "expected index,sample_id");
        const auto idx = text::parse_int(fields[0]);
        if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= ds.size())
            throw ParseError(path, ln + 1, "memory index out of range");
        const auto i = static_cast<std::size_t>(*idx);
        if (ds.id(i) != text::trim(fields[1]))
            throw ParseError(path, ln + 1, "sample id does not match dataset index " + std::to_string(i));
        set.memory_indices.push_back(i);
    }
    if (set.memory_indices.empty()) throw ValidationError(path + ": memory set is empty");
    std::sort(set.memory_indices.begin(), set.memory_indices.end());
    if (std::adjacent_find(set.memory_indices.begin(), set.memory_indices.end()) != set.memory_indices.end())
        throw ValidationError(path + ": duplicate memory index");
    return set;
}

}  // namespace memlabel
