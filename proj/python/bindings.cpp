#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "metafl/aggregator.hpp"
#include "metafl/cli.hpp"
#include "metafl/config.hpp"
#include "metafl/error.hpp"
#include "metafl/federation.hpp"

namespace py = pybind11;
using namespace metafl;

namespace {

Solver solver_from(const std::string& name) {
  if (name == "mirror") return Solver::mirror;
  if (name == "projected") return Solver::projected;
  throw InvalidArgument("unknown solver: " + name);
}

AggregationMode agg_mode_from(const std::string& name) {
  if (name == "closed_form") return AggregationMode::closed_form;
  if (name == "mirror") return AggregationMode::iterative_mirror;
  if (name == "projected") return AggregationMode::iterative_projected;
  throw InvalidArgument("unknown aggregation mode: " + name);
}

MetaParams meta_params(double alpha, double lambda, std::optional<double> tau, double eta,
                       std::size_t max_iters, double tol) {
  MetaParams mp;
  mp.alpha = alpha;
  mp.lambda = lambda;
  mp.tau = tau;
  mp.eta = eta;
  mp.max_iters = max_iters;
  mp.tol = tol;
  return mp;
}

py::dict round_dict(const RoundRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["alpha_used"] = r.alpha_used;
  d["global_val_loss"] = r.global_val_loss;
  d["global_val_accuracy"] = r.global_val_accuracy;
  d["phi_value"] = r.phi_value;
  d["weights"] = r.weights.values();
  d["per_client_val_loss"] = r.per_client_val_loss;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "metafl core bindings";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def(
      "softmax_neg",
      [](const std::vector<double>& v, double alpha) { return softmax_neg(v, alpha).values(); },
      py::arg("values"), py::arg("alpha"));
  m.def(
      "project_simplex",
      [](const std::vector<double>& p) { return project_simplex(p).values(); }, py::arg("point"));
  m.def(
      "weights_closed_form",
      [](const std::vector<double>& e, double alpha) {
        return weights_closed_form(e, alpha).values();
      },
      py::arg("errors"), py::arg("alpha"));
  m.def(
      "weights_iterative",
      [](const std::vector<double>& e, double alpha, std::optional<double> tau, double eta,
         std::size_t max_iters, double tol, const std::string& solver) {
        const auto r = weights_iterative(e, meta_params(alpha, 0.0, tau, eta, max_iters, tol),
                                         solver_from(solver));
        return py::make_tuple(r.weights.values(), r.iters, r.residual);
      },
      py::arg("errors"), py::arg("alpha") = 1.0, py::arg("tau") = py::none(),
      py::arg("eta") = 0.1, py::arg("max_iters") = 5000, py::arg("tol") = 1e-10,
      py::arg("solver") = "mirror",
      "Returns (weights, iterations, final residual).");
  m.def(
      "phi_objective",
      [](const std::vector<double>& w, const std::vector<double>& e, double tau) {
        return phi_objective(WeightVector(w), e, tau);
      },
      py::arg("weights"), py::arg("errors"), py::arg("tau"));
  m.def(
      "phi_gradient",
      [](const std::vector<double>& w, const std::vector<double>& e, double tau) {
        return phi_gradient(w, e, tau);
      },
      py::arg("weights"), py::arg("errors"), py::arg("tau"));
  m.def(
      "fedavg_weights",
      [](const std::vector<std::size_t>& n) { return fedavg_weights(n).values(); },
      py::arg("sizes"));
  m.def(
      "meta_agg",
      [](const std::vector<std::vector<double>>& thetas, const std::vector<double>& errors,
         double alpha, double lambda, const std::string& mode) {
        std::vector<ClientReport> reports;
        for (std::size_t k = 0; k < thetas.size(); ++k) {
          reports.push_back({k, ParamVector(thetas[k]), {}, {}, 1});
        }
        const auto out = meta_agg(reports, errors,
                                  meta_params(alpha, lambda, std::nullopt, 0.1, 5000, 1e-10),
                                  agg_mode_from(mode));
        return py::make_tuple(out.theta_g.values(), out.weights.values());
      },
      py::arg("thetas"), py::arg("errors"), py::arg("alpha") = 1.0, py::arg("lambda_") = 0.0,
      py::arg("mode") = "closed_form", "Returns (aggregate, weights).");
  m.def(
      "contraction_estimate",
      [](const std::vector<double>& e, double tau, double eta, std::size_t samples,
         std::uint64_t seed, const std::string& solver) {
        Rng rng(seed);
        return contraction_estimate(e, meta_params(1.0, 0.0, tau, eta, 5000, 1e-10), samples,
                                    rng, solver_from(solver));
      },
      py::arg("errors"), py::arg("tau") = 1.0, py::arg("eta") = 0.1, py::arg("samples") = 1000,
      py::arg("seed") = 0, py::arg("solver") = "mirror");
  m.def(
      "kl_divergence_diagnostic",
      [](const std::vector<std::vector<int>>& labels, std::size_t num_classes) {
        std::vector<ClientDataset> clients;
        for (const auto& l : labels) {
          clients.emplace_back(1, num_classes, std::vector<double>(l.size(), 0.0), l);
        }
        return kl_divergence_diagnostic(clients, num_classes);
      },
      py::arg("labels"), py::arg("num_classes"));

  m.def("preset_names", &preset_names);
  m.def(
      "preset",
      [](const std::string& name) {
        auto text = preset_text(name);
        if (!text) throw ConfigError("unknown preset: " + name);
        return *text;
      },
      py::arg("name"), "Config text of a built-in preset.");
  m.def(
      "parse_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
      py::arg("text"), "Validates config text and returns its canonical form.");
  m.def(
      "serialize_config",
      [](const std::string& name_or_path) { return serialize_config(resolve_config(name_or_path)); },
      py::arg("name_or_path"));
  m.def(
      "run",
      [](const std::string& config_text) {
        const auto cfg = parse_config(config_text);
        ExperimentResult result = [&] {
          py::gil_scoped_release release;
          return run_experiment(cfg);
        }();
        py::list history;
        for (const auto& r : result.history) history.append(round_dict(r));
        py::dict d;
        d["final_theta"] = result.final_theta.values();
        d["final_errors"] = result.final_errors;
        d["history"] = history;
        return d;
      },
      py::arg("config_text"), "Runs an experiment from config text.");
  m.def(
      "diagnose",
      [](const std::string& config_text) {
        const auto d = cli::diagnose(parse_config(config_text));
        py::dict out;
        out["contraction_estimate"] = d.contraction_estimate;
        out["jensen_gap"] = d.jensen_gap;
        out["kl_diagnostic"] = d.kl_diagnostic;
        out["generalization_bound"] = d.generalization_bound;
        out["total_samples"] = d.total_samples;
        return out;
      },
      py::arg("config_text"));
}
