#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"
#include "memlabel/distance.hpp"

namespace memlabel {

struct MemoryGenConfig {
    int max_global_steps = 5;
    int max_local_steps = 30;
    double distance_threshold = 1.0;
    std::int64_t random_seed = 0;

    /// Throws ConfigError unless global steps >= 1, local steps >= 0 and threshold > 0.
    void validate() const;
};

/// Prototypes selected for one seed. Indices are distinct and kept sorted
/// ascending, so "lowest memory index" and "lowest dataset index" coincide.
struct MemorySet {
    std::vector<std::size_t> memory_indices;
    double cost = 0.0;
    std::int64_t seed = 0;
    double threshold = 0.0;

    std::size_t size() const noexcept { return memory_indices.size(); }
};

/// Partitioning cost: sum over samples of the distance to the nearest memory.
double compute_cost(const DistanceMatrix& m, std::span<const std::size_t> memories);

/// Position within `memories` of the memory nearest to sample `i`; memories
/// map to themselves and ties go to the lowest position.
std::size_t nearest_memory(const DistanceMatrix& m, std::span<const std::size_t> memories, std::size_t i);

/// Greedy randomized cover: samples are visited in a shuffled order and a
/// sample becomes a memory iff it lies farther than `t` from every memory so
/// far. Returns sorted indices; every sample ends up within `t` of one.
std::vector<std::size_t> generate_initial_memories(const DistanceMatrix& m, double t, std::mt19937_64& rng);

/// Random stream for restart `restart` (1-based) of seed `seed`.
std::mt19937_64 restart_stream(std::int64_t seed, int restart);

struct RestartTrace {
    std::vector<std::size_t> initial_memories;
    double initial_cost = 0.0;
    /// CurrentCost after every accepted local step, in order.
    std::vector<double> accepted_costs;
    std::vector<std::size_t> final_memories;
    double final_cost = 0.0;
};

struct MemoryGenTrace {
    std::vector<RestartTrace> restarts;
};

/// Randomized restarts with greedy single-swap local search. Each local step
/// moves one memory to a random non-memory sample of its own group and keeps
/// the move only if the cost strictly drops. Returns the cheapest restart
/// (earliest on ties). Deterministic for a fixed config; `threads` runs
/// restarts concurrently without changing the result.
MemorySet generate_memories(const DistanceMatrix& m, const MemoryGenConfig& config,
                            MemoryGenTrace* trace = nullptr, unsigned threads = 1);

/// Header `seed=<s> t=<t> cost=<c>`, then one `index,sample_id` line per memory.
std::string format_memory_set(const MemorySet& set, const Dataset& ds);
void write_memory_set(const MemorySet& set, const Dataset& ds, const std::string& path);
/// Re-validates indices and ids against `ds`; the cost is taken from the file.
MemorySet load_memory_set(const std::string& path, const Dataset& ds);

}  // namespace memlabel
