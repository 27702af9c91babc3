#include "memlabel/eval.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "memlabel/error.hpp"
#include "memlabel/labeling_service.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

EvalReport score_labels(const std::vector<ClassIndex>& predicted, const std::vector<ClassIndex>& truth,
                        std::size_t n_classes, std::optional<ClassIndex> positive_class) {
    if (predicted.size() != truth.size()) throw ValidationError("score: prediction and truth sizes differ");
    if (positive_class && (*positive_class < 0 || static_cast<std::size_t>(*positive_class) >= n_classes))
        throw ConfigError("positive class out of range");
    EvalReport r;
    r.total = truth.size();
    r.positive_class = positive_class;
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = truth[i], p = predicted[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
            throw ValidationError("score: class index out of range");
        ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }

    std::size_t correct = 0;
    double weighted = 0.0;
    r.per_class.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& m = r.per_class[c];
        correct += r.confusion[c][c];
        for (std::size_t k = 0; k < n_classes; ++k) {
            m.support += r.confusion[c][k];
            m.predicted += r.confusion[k][c];
        }
        const auto tp = static_cast<double>(r.confusion[c][c]);
        m.precision = ratio(tp, static_cast<double>(m.predicted));
        m.recall = ratio(tp, static_cast<double>(m.support));
        m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
        weighted += static_cast<double>(m.support) * m.f1;
    }
    r.accuracy = ratio(static_cast<double>(correct), static_cast<double>(r.total));
    r.weighted_f1 = ratio(weighted, static_cast<double>(r.total));
    if (positive_class) r.binary_f1 = r.per_class[static_cast<std::size_t>(*positive_class)].f1;
    return r;
}

EvalReport score(const ProbabilisticLabels& pred, const GroundTruth& gt, std::optional<ClassIndex> positive_class) {
    std::vector<ClassIndex> p, t;
    p.reserve(pred.size());
    t.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!gt.contains(pred.sample_ids[i]))
            throw ValidationError("score: no ground truth for predicted sample '" + pred.sample_ids[i] + "'");
        p.push_back(pred.hard_label(i));
        t.push_back(gt.at(pred.sample_ids[i]));
    }
    return score_labels(p, t, pred.n_classes, positive_class);
}

std::string format_report_text(const EvalReport& r, const LabelSpace& space) {
    std::ostringstream os;
    if (!r.meta.aggregator.empty())
        os << "aggregator=" << r.meta.aggregator << " t=" << text::format_double(r.meta.threshold)
           << " N_L=" << r.meta.max_labels << " N_s=" << r.meta.consumed << " N_w=" << r.meta.functions << "\n";
    os << "samples    " << r.total << "\n";
    os << "accuracy   " << fixed(r.accuracy) << "\n";
    if (r.positive_class) os << "binary F1  " << fixed(r.binary_f1) << "  (positive: " << space.name(*r.positive_class) << ")\n";
    os << "weighted F1 " << fixed(r.weighted_f1) << "\n\n";

    std::size_t width = 5;
    for (const auto& c : space.classes()) width = std::max(width, c.size());
    os << std::left << std::setw(static_cast<int>(width)) << "class" << "  precision  recall     f1         support\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        os << std::left << std::setw(static_cast<int>(width)) << space.name(static_cast<ClassIndex>(c)) << "  "
           << std::setw(9) << fixed(m.precision) << "  " << std::setw(9) << fixed(m.recall) << "  " << std::setw(9)
           << fixed(m.f1) << "  " << m.support << "\n";
    }
    os << "\nconfusion (rows: true, cols: predicted)\n";
    for (const auto& row : r.confusion) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? " " : "  ") << std::right << std::setw(7) << row[k];
        os << "\n";
    }
    return os.str();
}

std::string format_report_csv(const EvalReport& r, const LabelSpace& space) {
    std::string out = "metric,class,value\n";
    out += "accuracy,," + text::format_double(r.accuracy) + "\n";
    out += "weighted_f1,," + text::format_double(r.weighted_f1) + "\n";
    if (r.positive_class)
        out += "binary_f1," + space.name(*r.positive_class) + "," + text::format_double(r.binary_f1) + "\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& name = space.name(static_cast<ClassIndex>(c));
        const auto& m = r.per_class[c];
        out += "precision," + name + "," + text::format_double(m.precision) + "\n";
        out += "recall," + name + "," + text::format_double(m.recall) + "\n";
        out += "f1," + name + "," + text::format_double(m.f1) + "\n";
        out += "support," + name + "," + std::to_string(m.support) + "\n";
    }
    return out;
}

OneVsAllResult one_vs_all_suite(const Dataset& ds, const DistanceMatrix& m, const GroundTruth& gt,
                                const LabelSpace& space, const std::vector<ClassIndex>& classes,
                                const ExperimentOptions& opts, Aggregator aggregator) {
    if (classes.empty()) throw ConfigError("one-vs-all: no classes selected");
    OneVsAllResult out;
    // memory sets depend only on the data, so they are shared across the binary problems
    const auto memories = generate_seed_memories(m, opts.pipeline);
    for (auto c : classes) {
        if (!space.contains(c)) throw ConfigError("one-vs-all: class out of range");
        LabelSpace binary({"not_" + space.name(c), space.name(c)});
        std::unordered_map<std::string, ClassIndex> relabeled;
        for (const auto& [id, y] : gt.labels()) relabeled.emplace(id, y == c ? 1 : 0);
        GroundTruth bgt(ds, binary, std::move(relabeled));

        OracleProvider oracle(bgt);
        auto run = label_and_induce(ds, m, binary, memories, opts.pipeline.max_labels, oracle);
        auto report = score(aggregate(run.matrix, binary.size(), aggregator, opts.em), bgt, 1);
        report.meta = {opts.pipeline.base.distance_threshold, opts.pipeline.max_labels, run.budget.consumed,
                       run.matrix.n_functions(), std::string(to_string(aggregator))};
        out.classes.push_back(c);
        out.reports.push_back(std::move(report));
    }

    const auto n = static_cast<double>(out.reports.size());
    for (const auto& r : out.reports) {
        out.mean_accuracy += r.accuracy / n;
        out.mean_f1 += r.binary_f1 / n;
    }
    for (const auto& r : out.reports) {
        out.std_accuracy += (r.accuracy - out.mean_accuracy) * (r.accuracy - out.mean_accuracy) / n;
        out.std_f1 += (r.binary_f1 - out.mean_f1) * (r.binary_f1 - out.mean_f1) / n;
    }
    out.std_accuracy = std::sqrt(out.std_accuracy);
    out.std_f1 = std::sqrt(out.std_f1);
    return out;
}

std::string format_one_vs_all_text(const OneVsAllResult& r, const LabelSpace& space) {
    std::ostringstream os;
    std::size_t width = 7;
    for (auto c : r.classes) width = std::max(width, space.name(c).size());
    os << std::left << std::setw(static_cast<int>(width)) << "class" << "  accuracy  f1      N_s  N_w\n";
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
        const auto& rep = r.reports[i];
        os << std::left << std::setw(static_cast<int>(width)) << space.name(r.classes[i]) << "  " << fixed(rep.accuracy, 3)
           << "     " << fixed(rep.binary_f1, 3) << "  " << std::setw(4) << rep.meta.consumed << " "
           << rep.meta.functions << "\n";
    }
    os << std::left << std::setw(static_cast<int>(width)) << "average" << "  " << fixed(r.mean_accuracy, 3) << " ("
       << fixed(r.std_accuracy, 3) << ")  " << fixed(r.mean_f1, 3) << " (" << fixed(r.std_f1, 3) << ")\n";
    return os.str();
}

std::vector<AblationRow> ablation_sweep(const Dataset& ds, const DistanceMatrix& m, const GroundTruth& gt,
                                        const LabelSpace& space, const std::vector<double>& thresholds,
                                        const ExperimentOptions& opts, std::optional<ClassIndex> positive_class,
                                        const GroundTruth* noisy_oracle) {
    std::vector<AblationRow> rows;
    for (double t : thresholds) {
        if (!(t > 0.0)) throw ConfigError("ablation thresholds must be positive");
        auto popts = opts.pipeline;
        popts.base.distance_threshold = t;
        const auto memories = generate_seed_memories(m, popts);
        std::vector<std::size_t> sizes;
        for (const auto& s : memories) sizes.push_back(s.size());

        std::optional<PipelineResult> run;
        std::string note;
        try {
            OracleProvider oracle(noisy_oracle ? *noisy_oracle : gt);
            run = label_and_induce(ds, m, space, memories, popts.max_labels, oracle);
        } catch (const BudgetInfeasible& e) {
            note = std::string("infeasible: ") + e.what();
        }

        for (auto agg : opts.aggregators) {
            AblationRow row;
            row.threshold = t;
            row.max_labels = popts.max_labels;
            row.aggregator = agg;
            row.seed_sizes = sizes;
            row.note = note;
            if (run) {
                row.consumed = run->budget.consumed;
                row.functions = run->matrix.n_functions();
                if (agg == Aggregator::label_model && row.functions < 2) {
                    row.note = "label model needs at least 2 weak-label columns";
                } else {
                    const auto r = score(aggregate(run->matrix, space.size(), agg, opts.em), gt, positive_class);
                    row.accuracy = r.accuracy;
                    row.f1 = r.f1();
                }
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "t,N_L,N_s,N_w,aggregator,accuracy,f1\n";
    for (const auto& r : rows) {
        out += text::format_double(r.threshold) + "," + std::to_string(r.max_labels) + "," + std::to_string(r.consumed) +
               "," + std::to_string(r.functions) + "," + std::string(to_string(r.aggregator)) + "," +
               (r.accuracy ? text::format_double(*r.accuracy) : "") + "," + (r.f1 ? text::format_double(*r.f1) : "") +
               "\n";
    }
    return out;
}

std::string format_ablation_text(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "t" << std::setw(6) << "N_L" << std::setw(6) << "N_s" << std::setw(5) << "N_w"
       << std::setw(13) << "aggregator" << std::setw(10) << "accuracy" << std::setw(8) << "f1" << "note\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(10) << text::format_double(r.threshold) << std::setw(6) << r.max_labels
           << std::setw(6) << r.consumed << std::setw(5) << r.functions << std::setw(13) << to_string(r.aggregator)
           << std::setw(10) << (r.accuracy ? fixed(*r.accuracy, 3) : "-") << std::setw(8)
           << (r.f1 ? fixed(*r.f1, 3) : "-") << r.note << "\n";
    }
    return os.str();
}

}  // namespace memlabel
