// Python bindings: datasets, generation, training, scoring and explanations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spnx/datagen.hpp"
#include "spnx/dataset.hpp"
#include "spnx/error.hpp"
#include "spnx/explain.hpp"
#include "spnx/harness.hpp"
#include "spnx/learn.hpp"
#include "spnx/model_io.hpp"
#include "spnx/spn.hpp"

namespace py = pybind11;
using namespace spnx;

namespace {

std::vector<double> as_row(const py::array_t<double, py::array::c_style | py::array::forcecast> &x)
{
    if (x.ndim() != 1)
        throw QueryError("expected a 1-D array");
    return {x.data(), x.data() + x.size()};
}

Dataset dataset_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast> &values,
                           std::optional<std::vector<std::string>> names)
{
    if (values.ndim() != 2)
        throw DataError("expected a 2-D array");
    const auto cols = static_cast<std::size_t>(values.shape(1));
    Schema schema;
    for (std::size_t c = 0; c < cols; ++c)
        schema.push_back({names ? names->at(c) : "f" + std::to_string(c), FeatureKind::Real, {}});
    if (names && names->size() != cols)
        throw DataError("got " + std::to_string(names->size()) + " names for " + std::to_string(cols) + " columns");
    return Dataset(std::move(schema), std::vector<double>(values.data(), values.data() + values.size()));
}

py::array_t<double> dataset_to_numpy(const Dataset &d)
{
    py::array_t<double> out({d.rows(), d.cols()});
    std::copy(d.values().begin(), d.values().end(), out.mutable_data());
    return out;
}

py::dict trace_to_dict(const ExplanationTrace &t)
{
    py::list per_size;
    for (const auto &s : t.per_size)
        per_size.append(py::make_tuple(s.size, s.subspace.features(), s.log_density));
    py::dict d;
    d["selected"] = t.selected.features();
    d["size"] = t.selected_size;
    d["per_size"] = per_size;
    d["evals"] = t.eval_count;
    return d;
}

std::map<std::size_t, std::vector<std::size_t>> truth_to_lists(const std::map<std::size_t, Subspace> &truth)
{
    std::map<std::size_t, std::vector<std::size_t>> out;
    for (const auto &[row, s] : truth)
        out[row] = s.features();
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Sum-product network outlier scoring and subspace explanations";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ModelError>(m, "ModelError", base.ptr());
    py::register_exception<QueryError>(m, "QueryError", base.ptr());

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_numpy), py::arg("values"), py::arg("names") = py::none())
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("cols", &Dataset::cols)
        .def_property_readonly("names",
                               [](const Dataset &d) {
                                   std::vector<std::string> names;
                                   for (const auto &c : d.schema())
                                       names.push_back(c.name);
                                   return names;
                               })
        .def("to_numpy", &dataset_to_numpy)
        .def("to_csv", [](const Dataset &d) { return to_csv(d); });

    m.def(
        "load_csv",
        [](const std::filesystem::path &path, std::optional<std::filesystem::path> schema) {
            return load_csv(path, schema ? std::optional<Schema>(read_schema_json(*schema)) : std::nullopt);
        },
        py::arg("path"), py::arg("schema") = py::none());
    m.def("parse_csv", [](const std::string &text) { return parse_csv(text); }, py::arg("text"));

    py::class_<GenConfig>(m, "GenConfig")
        .def(py::init<>())
        .def_readwrite("n_features", &GenConfig::n_features)
        .def_readwrite("n_samples", &GenConfig::n_samples)
        .def_readwrite("n_outliers", &GenConfig::n_outliers)
        .def_readwrite("subspace_min", &GenConfig::subspace_min)
        .def_readwrite("subspace_max", &GenConfig::subspace_max)
        .def_readwrite("clusters_per_subspace", &GenConfig::clusters_per_subspace)
        .def_readwrite("noise_sigma", &GenConfig::noise_sigma)
        .def_readwrite("seed", &GenConfig::seed);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def_readonly("dataset", &LabeledDataset::dataset)
        .def_property_readonly("truth", [](const LabeledDataset &l) { return truth_to_lists(l.truth); })
        .def_property_readonly("planted",
                               [](const LabeledDataset &l) {
                                   std::vector<std::vector<std::size_t>> out;
                                   for (const auto &s : l.planted)
                                       out.push_back(s.features());
                                   return out;
                               })
        .def("outlier_rows", &LabeledDataset::outlier_rows);

    m.def("generate", &generate, py::arg("config"));
    m.def("read_labeled", &read_labeled, py::arg("csv"), py::arg("labels"));
    m.def("write_labeled", &write_labeled, py::arg("labeled"), py::arg("csv"), py::arg("labels"));

    py::class_<LearnConfig>(m, "LearnConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &LearnConfig::alpha)
        .def_readwrite("min_slice_rows", &LearnConfig::min_slice_rows)
        .def_readwrite("rdc_features", &LearnConfig::rdc_features)
        .def_readwrite("rdc_scale", &LearnConfig::rdc_scale)
        .def_readwrite("gmm_components", &LearnConfig::gmm_components)
        .def_readwrite("gmm_max_iters", &LearnConfig::gmm_max_iters)
        .def_readwrite("gmm_tol", &LearnConfig::gmm_tol)
        .def_readwrite("seed", &LearnConfig::seed);

    py::class_<ExplainConfig>(m, "ExplainConfig")
        .def(py::init<>())
        .def_readwrite("beam_width", &ExplainConfig::beam_width)
        .def_readwrite("max_depth", &ExplainConfig::max_depth)
        .def_readwrite("kappa", &ExplainConfig::kappa)
        .def_property(
            "strategy", [](const ExplainConfig &c) { return std::string(to_string(c.strategy)); },
            [](ExplainConfig &c, const std::string &s) { c.strategy = search_strategy_from_string(s); })
        .def_property(
            "selection", [](const ExplainConfig &c) { return std::string(to_string(c.selection)); },
            [](ExplainConfig &c, const std::string &s) { c.selection = selection_from_string(s); });

    py::class_<SpnModel>(m, "Model")
        .def_static("learn", &learn_spn, py::arg("data"), py::arg("config") = LearnConfig{})
        .def_static("load", &load_model, py::arg("path"))
        .def_static("from_json", [](const std::string &text) { return model_from_json(text); }, py::arg("text"))
        .def("save", [](const SpnModel &model, const std::filesystem::path &p) { save_model(model, p); })
        .def("to_json", &model_to_json)
        .def_property_readonly("node_count", &SpnModel::node_count)
        .def_property_readonly("num_features", &SpnModel::num_features)
        .def(
            "log_marginal",
            [](const SpnModel &model, const py::array_t<double, py::array::c_style | py::array::forcecast> &x,
               std::optional<std::vector<std::size_t>> features) {
                const auto row = as_row(x);
                const Subspace s = features ? Subspace(*features) : Subspace::all(model.num_features());
                return log_marginal_subspace(model, row, s);
            },
            py::arg("x"), py::arg("features") = py::none())
        .def(
            "explain",
            [](const SpnModel &model, const py::array_t<double, py::array::c_style | py::array::forcecast> &x,
               const ExplainConfig &config, const Dataset *training) {
                return trace_to_dict(explain(model, as_row(x), config, training));
            },
            py::arg("x"), py::arg("config") = ExplainConfig{}, py::arg("training") = nullptr)
        .def(
            "detect",
            [](const SpnModel &model, const Dataset &data, double contamination) {
                const Detection d = detect(model, data, contamination);
                return py::make_tuple(d.rows, d.scores, d.threshold);
            },
            py::arg("data"), py::arg("contamination"));

    m.def(
        "f1_dims",
        [](const std::vector<std::size_t> &predicted, const std::vector<std::size_t> &truth) {
            const Prf p = f1_dims(Subspace(predicted), Subspace(truth));
            return py::make_tuple(p.precision, p.recall, p.f1);
        },
        py::arg("predicted"), py::arg("truth"));

    m.def(
        "run_benchmark",
        [](const LabeledDataset &labeled, const LearnConfig &learn, const std::vector<ExplainConfig> &configs) {
            const BenchmarkResult res = run_benchmark(labeled, learn, configs);
            py::list reports;
            for (const auto &r : res.reports) {
                py::dict d;
                d["n_features"] = r.n_features;
                d["strategy"] = std::string(to_string(r.config.strategy));
                d["selection"] = std::string(to_string(r.config.selection));
                d["mean_f1"] = r.mean_f1;
                d["mean_evals"] = r.mean_evals;
                d["train_s"] = r.train_s;
                d["explain_s"] = r.explain_s;
                std::map<std::size_t, std::vector<std::size_t>> selected;
                for (const auto &o : r.outliers)
                    selected[o.row] = o.trace.selected.features();
                d["selected"] = selected;
                reports.append(d);
            }
            return reports;
        },
        py::arg("labeled"), py::arg("learn"), py::arg("configs"));
}
