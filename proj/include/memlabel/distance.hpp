#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memlabel/dataset.hpp"

namespace memlabel {

/// Classic DTW with local cost |a_i - b_j|, no window, unnormalized path cost.
double dtw_distance(std::span<const double> a, std::span<const double> b);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Average of KL(p'||q') and KL(q'||p') in nats, where p' and q' are the
/// inputs after adding `eps` to every entry and renormalizing.
double symmetric_kl_distance(std::span<const double> p, std::span<const double> q, double eps = 1e-9);

enum class DistanceKind { dtw, euclidean, symmetric_kl };

DistanceKind parse_distance_kind(std::string_view tag);
std::string_view to_string(DistanceKind k);

/// The modality each distance is defined over.
Modality modality_for(DistanceKind k);

struct DistanceFunction {
    DistanceKind kind = DistanceKind::euclidean;
    double eps = 1e-9;

    double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// Symmetric matrix with zero diagonal, storing only the strict upper triangle.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), upper_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

    std::size_t size() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const {
        if (i == j) return 0.0;
        return i < j ? upper_[slot(i, j)] : upper_[slot(j, i)];
    }

    /// Sets entry (i, j) for i != j; rejects negative or non-finite values.
    void set(std::size_t i, std::size_t j, double value);

    const std::vector<double>& upper() const noexcept { return upper_; }

private:
    std::size_t slot(std::size_t i, std::size_t j) const noexcept { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }

    std::size_t n_ = 0;
    std::vector<double> upper_;
};

/// Entry (i, j) = f(x_i, x_j). Rows are spread over `threads` workers
/// (0 = hardware concurrency); the result does not depend on the count.
DistanceMatrix build_distance_matrix(const Dataset& ds, const DistanceFunction& f, unsigned threads = 1);

/// Builds from an arbitrary pairwise callback; used for tests and small ad-hoc data.
template <class F>
DistanceMatrix make_distance_matrix(std::size_t n, F&& dist) {
    DistanceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, dist(i, j));
    return m;
}

/// Cache file: `n=<N>` header, then one `i,j,value` line per pair i<j.
void write_distance_matrix(const DistanceMatrix& m, const std::string& path);
DistanceMatrix load_distance_matrix(const std::string& path);

}  // namespace memlabel
