#include "memlabel/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

ClassIndex ProbabilisticLabels::hard_label(std::size_t i) const {
    const auto& d = distribution[i];
    return static_cast<ClassIndex>(std::max_element(d.begin(), d.end()) - d.begin());
}

double ProbabilisticLabels::confidence(std::size_t i) const {
    const auto& d = distribution[i];
    return *std::max_element(d.begin(), d.end());
}

ProbabilisticLabels majority_vote(const WeakLabelMatrix& m, std::size_t n_classes) {
    if (m.n_functions() == 0 || m.n_samples() == 0) throw ValidationError("majority vote: empty weak-label matrix");
    m.validate(n_classes);
    ProbabilisticLabels out;
    out.sample_ids = m.sample_ids();
    out.n_classes = n_classes;
    out.distribution.reserve(m.n_samples());
    for (std::size_t i = 0; i < m.n_samples(); ++i) {
        std::vector<double> counts(n_classes, 0.0);
        std::size_t voters = 0;
        for (std::size_t k = 0; k < m.n_functions(); ++k) {
            const auto v = m.at(i, k);
            if (v == kAbstain) continue;
            counts[static_cast<std::size_t>(v)] += 1.0;
            ++voters;
        }
        for (auto& c : counts) c = voters ? c / static_cast<double>(voters) : 1.0 / static_cast<double>(n_classes);
        out.distribution.push_back(std::move(counts));
    }
    return out;
}

namespace {

using Pattern = std::vector<ClassIndex>;

/// Distinct vote rows with multiplicities, in lexicographic order.
std::vector<std::pair<Pattern, double>> compress(const WeakLabelMatrix& m) {
    std::map<Pattern, std::size_t> counts;
    for (std::size_t i = 0; i < m.n_samples(); ++i) ++counts[m.row(i)];
    std::vector<std::pair<Pattern, double>> out;
    out.reserve(counts.size());
    for (auto& [p, c] : counts) out.emplace_back(p, static_cast<double>(c));
    return out;
}

std::size_t vote_slot(ClassIndex v, std::size_t n_classes) {
    return v == kAbstain ? n_classes : static_cast<std::size_t>(v);
}

/// log prior(y) + sum_k log confusion_k(v_k | y), for every y.
std::vector<double> joint_log(const LabelModelParams& p, const Pattern& votes) {
    const auto n = p.n_classes();
    std::vector<double> lj(n);
    for (std::size_t y = 0; y < n; ++y) {
        double s = std::log(p.class_prior[y]);
        for (std::size_t k = 0; k < votes.size(); ++k) s += std::log(p.confusion[k][y][vote_slot(votes[k], n)]);
        lj[y] = s;
    }
    return lj;
}

double log_sum_exp(const std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (mx == -std::numeric_limits<double>::infinity()) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

std::vector<double> posterior(const LabelModelParams& p, const Pattern& votes) {
    auto lj = joint_log(p, votes);
    const double z = log_sum_exp(lj);
    for (auto& x : lj) x = std::exp(x - z);
    return lj;
}

LabelModelParams m_step(const std::vector<std::pair<Pattern, double>>& patterns,
                        const std::vector<std::vector<double>>& post, std::size_t n_classes, std::size_t n_functions,
                        const EmOptions& opts) {
    LabelModelParams p;
    std::vector<double> class_mass(n_classes, 0.0);
    std::vector<std::vector<std::vector<double>>> counts(
        n_functions, std::vector<std::vector<double>>(n_classes, std::vector<double>(n_classes + 1, 0.0)));
    double total = 0.0;
    for (std::size_t r = 0; r < patterns.size(); ++r) {
        const auto& [votes, count] = patterns[r];
        total += count;
        for (std::size_t y = 0; y < n_classes; ++y) {
            const double w = count * post[r][y];
            class_mass[y] += w;
            for (std::size_t k = 0; k < n_functions; ++k) counts[k][y][vote_slot(votes[k], n_classes)] += w;
        }
    }

    if (opts.fixed_prior) {
        p.class_prior = *opts.fixed_prior;
    } else {
        p.class_prior.resize(n_classes);
        for (std::size_t y = 0; y < n_classes; ++y) p.class_prior[y] = class_mass[y] / total;
    }
    const double alpha = opts.smoothing;
    p.confusion = std::move(counts);
    for (auto& fn : p.confusion)
        for (std::size_t y = 0; y < n_classes; ++y) {
            const double denom = class_mass[y] + alpha * static_cast<double>(n_classes + 1);
            for (auto& cell : fn[y]) {
                cell = denom > 0.0 ? (cell + alpha) / denom : 1.0 / static_cast<double>(n_classes + 1);
            }
        }
    return p;
}

double max_change(const LabelModelParams& a, const LabelModelParams& b) {
    double d = 0.0;
    for (std::size_t y = 0; y < a.class_prior.size(); ++y) d = std::max(d, std::abs(a.class_prior[y] - b.class_prior[y]));
    for (std::size_t k = 0; k < a.confusion.size(); ++k)
        for (std::size_t y = 0; y < a.confusion[k].size(); ++y)
            for (std::size_t v = 0; v < a.confusion[k][y].size(); ++v)
                d = std::max(d, std::abs(a.confusion[k][y][v] - b.confusion[k][y][v]));
    return d;
}

double pattern_log_likelihood(const LabelModelParams& p, const std::vector<std::pair<Pattern, double>>& patterns) {
    double ll = 0.0;
    for (const auto& [votes, count] : patterns) ll += count * log_sum_exp(joint_log(p, votes));
    return ll;
}

double smoothing_term(const LabelModelParams& p, double alpha) {
    if (alpha == 0.0) return 0.0;
    double s = 0.0;
    for (const auto& fn : p.confusion)
        for (const auto& row : fn)
            for (double c : row) s += std::log(c);
    return alpha * s;
}

void check_dims(const LabelModelParams& p, const WeakLabelMatrix& m) {
    if (p.n_functions() != m.n_functions())
        throw ValidationError("label model has " + std::to_string(p.n_functions()) + " functions, matrix has " +
                              std::to_string(m.n_functions()));
    for (const auto& fn : p.confusion) {
        if (fn.size() != p.n_classes()) throw ValidationError("label model confusion has wrong class count");
        for (const auto& row : fn)
            if (row.size() != p.n_classes() + 1) throw ValidationError("label model confusion row has wrong width");
    }
    m.validate(p.n_classes());
}

}  // namespace

LabelModelParams fit_label_model(const WeakLabelMatrix& m, std::size_t n_classes, const EmOptions& opts,
                                 FitReport* report) {
    if (n_classes < 2) throw ValidationError("label model needs at least 2 classes");
    if (m.n_functions() < 2) throw ValidationError("label model needs at least 2 labeling functions");
    if (m.n_samples() == 0) throw ValidationError("label model: empty weak-label matrix");
    m.validate(n_classes);
    bool any_vote = false;
    for (std::size_t i = 0; i < m.n_samples() && !any_vote; ++i)
        for (std::size_t k = 0; k < m.n_functions() && !any_vote; ++k) any_vote = m.at(i, k) != kAbstain;
    if (!any_vote) throw ValidationError("label model: every entry abstains");
    if (opts.fixed_prior) {
        if (opts.fixed_prior->size() != n_classes) throw ConfigError("fixed prior has the wrong length");
        double s = 0.0;
        for (double v : *opts.fixed_prior) {
            if (!(v > 0.0)) throw ConfigError("fixed prior entries must be positive");
            s += v;
        }
        if (std::abs(s - 1.0) > kProbabilityTolerance) throw ConfigError("fixed prior must sum to 1");
    }
    if (opts.smoothing < 0.0) throw ConfigError("smoothing must be non-negative");

    const auto patterns = compress(m);
    const auto n_fn = m.n_functions();

    // majority-vote soft labels seed the first M-step
    std::vector<std::vector<double>> post;
    post.reserve(patterns.size());
    for (const auto& [votes, count] : patterns) {
        std::vector<double> c(n_classes, 0.0);
        double voters = 0.0;
        for (auto v : votes)
            if (v != kAbstain) {
                c[static_cast<std::size_t>(v)] += 1.0;
                voters += 1.0;
            }
        for (auto& x : c) x = voters > 0.0 ? x / voters : 1.0 / static_cast<double>(n_classes);
        post.push_back(std::move(c));
    }

    FitReport local;
    auto params = m_step(patterns, post, n_classes, n_fn, opts);
    auto record = [&](const LabelModelParams& p) {
        const double ll = pattern_log_likelihood(p, patterns);
        local.log_likelihood.push_back(ll);
        local.objective.push_back(ll + smoothing_term(p, opts.smoothing));
    };
    record(params);

    for (int it = 0; it < opts.max_iters; ++it) {
        for (std::size_t r = 0; r < patterns.size(); ++r) post[r] = posterior(params, patterns[r].first);
        auto next = m_step(patterns, post, n_classes, n_fn, opts);
        const double change = max_change(params, next);
        params = std::move(next);
        record(params);
        local.iterations = it + 1;
        if (change < opts.tol) {
            local.converged = true;
            break;
        }
    }
    if (report) *report = std::move(local);
    return params;
}

ProbabilisticLabels predict(const LabelModelParams& params, const WeakLabelMatrix& m) {
    check_dims(params, m);
    ProbabilisticLabels out;
    out.sample_ids = m.sample_ids();
    out.n_classes = params.n_classes();
    out.distribution.reserve(m.n_samples());
    for (std::size_t i = 0; i < m.n_samples(); ++i) out.distribution.push_back(posterior(params, m.row(i)));
    return out;
}

double log_likelihood(const LabelModelParams& params, const WeakLabelMatrix& m) {
    check_dims(params, m);
    return pattern_log_likelihood(params, compress(m));
}

std::string format_probabilistic_labels(const ProbabilisticLabels& labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += labels.sample_ids[i] + "," + text::join_doubles(labels.distribution[i]) + "," +
               std::to_string(labels.hard_label(i)) + "," + text::format_double(labels.confidence(i)) + "\n";
    }
    return out;
}

void write_probabilistic_labels(const ProbabilisticLabels& labels, const std::string& path) {
    text::write_file_atomic(path, format_probabilistic_labels(labels));
}

ProbabilisticLabels load_probabilistic_labels(const std::string& path) {
    ProbabilisticLabels out;
    const auto lines = text::read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = text::trim(lines[ln]);
        if (line.empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() < 5) throw ParseError(path, ln + 1, "expected id,p_0,...,hard_label,confidence");
        const auto n = fields.size() - 3;
        if (out.n_classes == 0) out.n_classes = n;
        if (n != out.n_classes) throw ParseError(path, ln + 1, "inconsistent class count");
        std::vector<double> dist;
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const auto v = text::parse_double(fields[1 + c]);
            if (!v || *v < 0.0) throw ParseError(path, ln + 1, "bad probability");
            dist.push_back(*v);
            sum += *v;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance) throw ParseError(path, ln + 1, "distribution not normalized");
        const auto hard = text::parse_int(fields[1 + n]);
        if (!hard || *hard < 0 || static_cast<std::size_t>(*hard) >= n) throw ParseError(path, ln + 1, "bad hard label");
        out.sample_ids.emplace_back(text::trim(fields[0]));
        out.distribution.push_back(std::move(dist));
        if (out.hard_label(out.size() - 1) != *hard)
            throw ParseError(path, ln + 1, "hard label disagrees with the distribution's argmax");
    }
    return out;
}

Aggregator parse_aggregator(std::string_view tag) {
    tag = text::trim(tag);
    if (tag == "majority") return Aggregator::majority;
    if (tag == "label-model") return Aggregator::label_model;
    throw ConfigError("unknown aggregator '" + std::string(tag) + "'");
}

std::string_view to_string(Aggregator a) { return a == Aggregator::majority ? "majority" : "label-model"; }

ProbabilisticLabels aggregate(const WeakLabelMatrix& m, std::size_t n_classes, Aggregator a, const EmOptions& opts) {
    if (a == Aggregator::majority) return majority_vote(m, n_classes);
    return predict(fit_label_model(m, n_classes, opts), m);
}

std::string format_label_model_params(const LabelModelParams& params, const WeakLabelMatrix& m,
                                      const LabelSpace& space) {
    std::ostringstream os;
    os << "classes=" << params.n_classes() << " functions=" << params.n_functions() << "\n";
    os << "prior";
    for (std::size_t y = 0; y < params.n_classes(); ++y)
        os << " " << space.name(static_cast<ClassIndex>(y)) << "=" << text::format_double(params.class_prior[y]);
    os << "\n";
    for (std::size_t k = 0; k < params.n_functions(); ++k) {
        os << "function " << m.columns()[k].name << "\n";
        os << "  true\\vote";
        for (const auto& c : space.classes()) os << " " << c;
        os << " ABSTAIN\n";
        for (std::size_t y = 0; y < params.n_classes(); ++y) {
            os << "  " << space.name(static_cast<ClassIndex>(y));
            for (double c : params.confusion[k][y]) os << " " << text::format_double(c);
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace memlabel
