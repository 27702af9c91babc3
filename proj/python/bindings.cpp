#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "memlabel/distance.hpp"
#include "memlabel/error.hpp"
#include "memlabel/eval.hpp"
#include "memlabel/label_model.hpp"
#include "memlabel/memory_gen.hpp"
#include "memlabel/stages.hpp"
#include "memlabel/weak_label.hpp"

namespace py = pybind11;
using namespace memlabel;

namespace {

using Rows = std::vector<std::vector<double>>;
using Votes = std::vector<std::vector<ClassIndex>>;

DistanceMatrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ValidationError("distance matrix must be square");
    const auto n = static_cast<std::size_t>(a.shape(0));
    auto r = a.unchecked<2>();
    DistanceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (r(i, j) != r(j, i)) throw ValidationError("distance matrix must be symmetric");
            m.set(i, j, r(i, j));
        }
    return m;
}

py::array_t<double> to_array(const DistanceMatrix& m) {
    const auto n = static_cast<py::ssize_t>(m.size());
    py::array_t<double> out({n, n});
    auto w = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < n; ++i)
        for (py::ssize_t j = 0; j < n; ++j) w(i, j) = m(i, j);
    return out;
}

// rows are samples, columns are labeling functions; -1 abstains
WeakLabelMatrix to_votes(const Votes& rows) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(std::to_string(i));
    WeakLabelMatrix m(ids);
    const std::size_t k = rows.empty() ? 0 : rows[0].size();
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<ClassIndex> col;
        for (const auto& r : rows) {
            if (r.size() != k) throw ValidationError("vote rows must all have the same length");
            col.push_back(r[f]);
        }
        m.add_column({"lf" + std::to_string(f), std::nullopt, std::move(col)});
    }
    return m;
}

py::array_t<double> to_array(const ProbabilisticLabels& p) {
    py::array_t<double> out({static_cast<py::ssize_t>(p.size()), static_cast<py::ssize_t>(p.n_classes)});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t c = 0; c < p.n_classes; ++c) w(i, c) = p.distribution[i][c];
    return out;
}

ProbabilisticLabels from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValidationError("probabilities must be a 2-d array");
    ProbabilisticLabels p;
    p.n_classes = static_cast<std::size_t>(a.shape(1));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) {
        p.sample_ids.push_back(std::to_string(i));
        p.distribution.emplace_back(r.data(i, 0), r.data(i, 0) + a.shape(1));
    }
    return p;
}

Dataset to_dataset(const Rows& rows, Modality modality) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < rows.size(); ++i) samples.push_back({std::to_string(i), rows[i]});
    return Dataset(modality, std::move(samples));
}

}  // namespace

PYBIND11_MODULE(_memlabel, m) {
    m.doc() = "memory-based weak labeling: distances, memory search, aggregation and scoring";
    m.attr("__version__") = stages::kVersion;

    auto base = py::register_exception<Error>(m, "MemlabelError");
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<BudgetInfeasible>(m, "BudgetInfeasible", base.ptr());
    py::register_exception<ProviderRefusal>(m, "ProviderRefusal", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    m.def("dtw_distance", [](const std::vector<double>& a, const std::vector<double>& b) { return dtw_distance(a, b); },
          py::arg("a"), py::arg("b"));
    m.def("euclidean_distance",
          [](const std::vector<double>& a, const std::vector<double>& b) { return euclidean_distance(a, b); },
          py::arg("a"), py::arg("b"));
    m.def("symmetric_kl_distance",
          [](const std::vector<double>& p, const std::vector<double>& q, double eps) {
              return symmetric_kl_distance(p, q, eps);
          },
          py::arg("p"), py::arg("q"), py::arg("eps") = 1e-9);

    m.def("distance_matrix",
          [](const Rows& samples, const std::string& kind, double eps, unsigned threads) {
              const auto k = parse_distance_kind(kind);
              const auto ds = to_dataset(samples, modality_for(k));
              DistanceMatrix dm;
              {
                  py::gil_scoped_release release;
                  dm = build_distance_matrix(ds, {k, eps}, threads);
              }
              return to_array(dm);
          },
          py::arg("samples"), py::arg("kind"), py::arg("eps") = 1e-9, py::arg("threads") = 1);

    m.def("generate_memories",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& dist, double threshold,
             std::int64_t seed, int max_global_steps, int max_local_steps, unsigned threads) {
              const auto dm = to_matrix(dist);
              MemoryGenConfig cfg{max_global_steps, max_local_steps, threshold, seed};
              MemorySet set;
              {
                  py::gil_scoped_release release;
                  set = generate_memories(dm, cfg, nullptr, threads);
              }
              const auto part = partition(dm, set);
              py::dict out;
              out["memories"] = set.memory_indices;
              out["cost"] = set.cost;
              out["assignment"] = part.assignment;
              return out;
          },
          py::arg("distances"), py::arg("threshold"), py::arg("seed") = 0, py::arg("max_global_steps") = 5,
          py::arg("max_local_steps") = 30, py::arg("threads") = 1);

    m.def("compute_cost",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& dist,
             const std::vector<std::size_t>& memories) { return compute_cost(to_matrix(dist), memories); },
          py::arg("distances"), py::arg("memories"));

    m.def("plan_seeds",
          [](std::size_t max_labels, std::size_t n_classes, const std::vector<std::size_t>& sizes) {
              const auto p = plan_seeds(max_labels, n_classes, sizes);
              return py::make_tuple(p.accepted, p.labels);
          },
          py::arg("max_labels"), py::arg("n_classes"), py::arg("memory_set_sizes"),
          "Returns (accepted seeds N_w, labels used N_s).");

    m.def("majority_vote",
          [](const Votes& votes, std::size_t n_classes) { return to_array(majority_vote(to_votes(votes), n_classes)); },
          py::arg("votes"), py::arg("n_classes"));

    py::class_<LabelModelParams>(m, "LabelModel")
        .def_readonly("class_prior", &LabelModelParams::class_prior)
        .def_readonly("confusion", &LabelModelParams::confusion)
        .def("accuracy", &LabelModelParams::accuracy, py::arg("function"), py::arg("y"))
        .def("predict", [](const LabelModelParams& p, const Votes& votes) { return to_array(predict(p, to_votes(votes))); },
             py::arg("votes"))
        .def("log_likelihood",
             [](const LabelModelParams& p, const Votes& votes) { return log_likelihood(p, to_votes(votes)); },
             py::arg("votes"));

    m.def("fit_label_model",
          [](const Votes& votes, std::size_t n_classes, double tol, int max_iters, double smoothing,
             std::optional<std::vector<double>> fixed_prior) {
              EmOptions opts{tol, max_iters, smoothing, std::move(fixed_prior)};
              FitReport report;
              const auto wl = to_votes(votes);
              auto params = fit_label_model(wl, n_classes, opts, &report);
              py::dict info;
              info["iterations"] = report.iterations;
              info["converged"] = report.converged;
              info["log_likelihood"] = report.log_likelihood;
              info["objective"] = report.objective;
              return py::make_tuple(params, info);
          },
          py::arg("votes"), py::arg("n_classes"), py::arg("tol") = 1e-6, py::arg("max_iters") = 500,
          py::arg("smoothing") = 1.0, py::arg("fixed_prior") = py::none(),
          "Returns (LabelModel, fit report dict).");

    m.def("score",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& probs,
             const std::vector<ClassIndex>& truth, std::optional<ClassIndex> positive_class) {
              const auto p = from_array(probs);
              std::vector<ClassIndex> pred;
              for (std::size_t i = 0; i < p.size(); ++i) pred.push_back(p.hard_label(i));
              const auto r = score_labels(pred, truth, p.n_classes, positive_class);
              py::dict out;
              out["accuracy"] = r.accuracy;
              out["f1"] = r.f1();
              out["weighted_f1"] = r.weighted_f1;
              out["confusion"] = r.confusion;
              py::list per_class;
              for (const auto& c : r.per_class)
                  per_class.append(py::dict(py::arg("precision") = c.precision, py::arg("recall") = c.recall,
                                            py::arg("f1") = c.f1, py::arg("support") = c.support));
              out["per_class"] = per_class;
              return out;
          },
          py::arg("probabilities"), py::arg("truth"), py::arg("positive_class") = py::none());

    m.def("run",
          [](const std::string& config_path, const std::string& out_dir, unsigned threads) {
              stages::Context ctx;
              ctx.config = load_run_config(config_path);
              if (!out_dir.empty()) ctx.config.output_dir = out_dir;
              ctx.config.validate();
              ctx.threads = threads;
              std::ostringstream log;
              ctx.log = &log;
              {
                  py::gil_scoped_release release;
                  stages::run(ctx);
              }
              return log.str();
          },
          py::arg("config"), py::arg("out_dir") = "", py::arg("threads") = 1,
          "Runs the whole pipeline from a config file with the oracle provider; returns the progress log.");
}
