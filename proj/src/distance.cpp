#include "memlabel/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ValidationError("dtw: empty series");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // rolling rows over b; prev[j] is the cost of aligning a[..i-1] with b[..j]
    std::vector<double> prev(b.size(), inf), cur(b.size(), inf);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double cost = std::abs(a[i] - b[j]);
            double best;
            if (i == 0 && j == 0)
                best = 0.0;
            else {
                best = inf;
                if (i > 0) best = std::min(best, prev[j]);
                if (j > 0) best = std::min(best, cur[j - 1]);
                if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
            }
            cur[j] = cost + best;
        }
        std::swap(prev, cur);
    }
    return prev.back();
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError("euclidean: length mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double symmetric_kl_distance(std::span<const double> p, std::span<const double> q, double eps) {
    if (p.size() != q.size())
        throw ValidationError("symmetric-kl: length mismatch (" + std::to_string(p.size()) + " vs " +
                              std::to_string(q.size()) + ")");
    if (!(eps > 0.0)) throw ValidationError("symmetric-kl: eps must be positive");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw ValidationError("symmetric-kl: negative entry");
        sp += p[i] + eps;
        sq += q[i] + eps;
    }
    // 1/2 KL(p||q) + 1/2 KL(q||p) = 1/2 sum (p_i - q_i)(ln p_i - ln q_i);
    // each term is invariant under swapping p and q, so the result is exactly symmetric.
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = (p[i] + eps) / sp;
        const double qi = (q[i] + eps) / sq;
        sum += (pi - qi) * (std::log(pi) - std::log(qi));
    }
    return std::max(0.0, 0.5 * sum);
}

DistanceKind parse_distance_kind(std::string_view tag) {
    tag = text::trim(tag);
    if (tag == "dtw") return DistanceKind::dtw;
    if (tag == "euclidean") return DistanceKind::euclidean;
    if (tag == "symmetric-kl") return DistanceKind::symmetric_kl;
    throw ConfigError("unknown distance kind '" + std::string(tag) + "'");
}

std::string_view to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::dtw: return "dtw";
        case DistanceKind::euclidean: return "euclidean";
        case DistanceKind::symmetric_kl: return "symmetric-kl";
    }
    return "?";
}

Modality modality_for(DistanceKind k) {
    switch (k) {
        case DistanceKind::dtw: return Modality::time_series;
        case DistanceKind::euclidean: return Modality::feature_vector;
        case DistanceKind::symmetric_kl: return Modality::probability_vector;
    }
    return Modality::feature_vector;
}

double DistanceFunction::operator()(std::span<const double> a, std::span<const double> b) const {
    switch (kind) {
        case DistanceKind::dtw: return dtw_distance(a, b);
        case DistanceKind::euclidean: return euclidean_distance(a, b);
        case DistanceKind::symmetric_kl: return symmetric_kl_distance(a, b, eps);
    }
    return 0.0;
}

void DistanceMatrix::set(std::size_t i, std::size_t j, double value) {
    if (i == j || i >= n_ || j >= n_) throw ValidationError("distance matrix: bad index pair");
    if (!std::isfinite(value) || value < 0.0)
        throw ValidationError("distance matrix: entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is not a finite non-negative number");
    if (i > j) std::swap(i, j);
    upper_[slot(i, j)] = value;
}

DistanceMatrix build_distance_matrix(const Dataset& ds, const DistanceFunction& f, unsigned threads) {
    if (modality_for(f.kind) != ds.modality())
        throw ConfigError("distance '" + std::string(to_string(f.kind)) + "' is not defined for " +
                          std::string(to_string(ds.modality())) + " data");
    const std::size_t n = ds.size();
    DistanceMatrix m(n);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));

    // every entry is written by exactly one worker; rows are dealt round-robin
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < n; i += threads)
            for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, f(ds.values(i), ds.values(j)));
    };
    if (threads <= 1) {
        work(0);
        return m;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                work(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return m;
}

void write_distance_matrix(const DistanceMatrix& m, const std::string& path) {
    std::string out = "n=" + std::to_string(m.size()) + "\n";
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j)
            out += std::to_string(i) + "," + std::to_string(j) + "," + text::format_double(m(i, j)) + "\n";
    text::write_file_atomic(path, out);
}

DistanceMatrix load_distance_matrix(const std::string& path) {
    const auto lines = text::read_lines(path);
    if (lines.empty() || text::trim(lines[0]).substr(0, 2) != "n=") throw ParseError(path, 1, "expected n=<N> header");
    const auto n = text::parse_int(text::trim(lines[0]).substr(2));
    if (!n || *n < 0) throw ParseError(path, 1, "bad matrix size");
    const auto size = static_cast<std::size_t>(*n);

    DistanceMatrix m(size);
    std::vector<bool> seen(m.upper().size(), false);
    std::size_t filled = 0;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 3) throw ParseError(path, ln + 1, "expected i,j,value");
        const auto i = text::parse_int(fields[0]);
        const auto j = text::parse_int(fields[1]);
        const auto v = text::parse_double(fields[2]);
        if (!i || !j || !v || *i < 0 || *j < 0 || *i >= *j || static_cast<std::size_t>(*j) >= size)
            throw ParseError(path, ln + 1, "bad entry");
        const auto ui = static_cast<std::size_t>(*i), uj = static_cast<std::size_t>(*j);
        const auto slot = ui * size - ui * (ui + 1) / 2 + (uj - ui - 1);
        if (seen[slot]) throw ParseError(path, ln + 1, "duplicate entry");
        seen[slot] = true;
        ++filled;
        try {
            m.set(ui, uj, *v);
        } catch (const ValidationError& e) {
            throw ParseError(path, ln + 1, e.what());
        }
    }
    if (filled != seen.size())
        throw ValidationError(path + ": incomplete distance matrix (" + std::to_string(filled) + " of " +
                              std::to_string(seen.size()) + " entries)");
    return m;
}

}  // namespace memlabel
