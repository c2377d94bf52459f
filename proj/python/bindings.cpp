#include "scbcov/band.hpp"
#include "scbcov/covmodels.hpp"
#include "scbcov/errors.hpp"
#include "scbcov/io.hpp"
#include "scbcov/pipeline.hpp"
#include "scbcov/simharness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

namespace py = pybind11;
using nlohmann::json;

namespace {

scbcov::FunctionalDataset dataset(const Eigen::MatrixXd& y, std::optional<std::pair<double, double>> domain) {
    if (!domain) {
        return scbcov::FunctionalDataset(y);
    }
    return scbcov::FunctionalDataset(y, scbcov::Domain{domain->first, domain->second});
}

scbcov::PipelineOptions options_from(const std::string& text) {
    return text.empty() ? scbcov::PipelineOptions{} : scbcov::pipeline_options_from_json(json::parse(text));
}

std::string fit_json(const Eigen::MatrixXd& y, const std::string& options,
                     std::optional<std::pair<double, double>> domain) {
    const auto data = dataset(y, domain);
    scbcov::PipelineResult res;
    {
        py::gil_scoped_release release;
        res = scbcov::run_pipeline(data, options_from(options));
    }
    const double scale = data.lag_scale();
    json out;
    out["n"] = data.subjects();
    out["N"] = data.grid_size();
    out["interior_knots"] = res.interior_knots;
    out["kappa"] = res.fpca.kappa;
    out["lambda"] = std::vector<double>(res.fpca.lambda.data(), res.fpca.lambda.data() + res.fpca.lambda.size());
    out["degenerate"] = res.degenerate;
    out["c_hat"] = scbcov::curve_to_json(res.c_hat);
    out["xi"] = scbcov::curve_to_json(res.xi);
    out["bands"] = json::array();
    for (std::size_t l = 0; l < res.simultaneous.size(); ++l) {
        out["bands"].push_back(scbcov::band_to_json(res.simultaneous[l], res.xi, scale));
        out["bands"].push_back(scbcov::band_to_json(res.pointwise[l], res.xi, scale));
    }
    return out.dump();
}

std::string gof_json(const Eigen::MatrixXd& y, const std::string& model, const std::string& options,
                     std::optional<std::pair<double, double>> domain) {
    const auto spec = scbcov::parse_model_spec(model);
    const auto data = dataset(y, domain);
    scbcov::PipelineResult res;
    {
        py::gil_scoped_release release;
        res = scbcov::run_pipeline(data, options_from(options));
    }
    return scbcov::gof_to_json(
               scbcov::gof_test(res.c_hat, res.xi, data.subjects(), spec, res.sups, data.lag_scale()))
        .dump();
}

std::string simulate_json(const std::string& config_text, std::uint64_t seed, std::optional<int> reps, int workers) {
    auto config = scbcov::parse_sim_config(config_text);
    config.seed = seed;
    if (reps) {
        config.reps = *reps;
    }
    config.workers = workers;
    config.validate();
    py::gil_scoped_release release;
    return scbcov::to_json(scbcov::run_replications(config)).dump();
}

py::tuple generate(const std::string& config_text, std::uint64_t seed, std::uint64_t replicate) {
    auto config = scbcov::parse_sim_config(config_text);
    config.seed = seed;
    const auto sample = scbcov::generate(config, replicate);
    const auto& c = sample.truth.covariance;
    return py::make_tuple(sample.data.observations(), c.h_grid, c.values, sample.data.lag_scale());
}

Eigen::VectorXd eval_model(const std::string& model, const Eigen::VectorXd& h) {
    const auto spec = scbcov::parse_model_spec(model);
    Eigen::VectorXd out(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        out[i] = scbcov::eval_model(spec, h[i]);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stationary covariance estimation and simultaneous confidence bands for dense functional data";

    auto base = py::register_exception<scbcov::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<scbcov::DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<scbcov::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)base;

    m.def("fit_json", &fit_json, py::arg("y"), py::arg("options") = "", py::arg("domain") = py::none());
    m.def("gof_json", &gof_json, py::arg("y"), py::arg("model"), py::arg("options") = "",
          py::arg("domain") = py::none());
    m.def("simulate_json", &simulate_json, py::arg("config"), py::arg("seed"), py::arg("reps") = py::none(),
          py::arg("workers") = 1);
    m.def("generate", &generate, py::arg("config"), py::arg("seed"), py::arg("replicate") = 0);
    m.def("eval_model", &eval_model, py::arg("model"), py::arg("h"));
    m.def("effective_range",
          [](const std::string& model, double rho0) { return scbcov::effective_range(scbcov::parse_model_spec(model), rho0); },
          py::arg("model"), py::arg("rho0") = 0.05);
    m.def("knot_formula", &scbcov::knot_formula, py::arg("N"), py::arg("c") = 0.8, py::arg("gamma") = 0.375);
    m.attr("__version__") = SCBCOV_VERSION;
}
