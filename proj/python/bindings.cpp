#include <pybind11/pybind11.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include <sstream>

#include "msmkit/config.hpp"
#include "msmkit/errors.hpp"
#include "msmkit/harness.hpp"

namespace py = pybind11;
using namespace msmkit;

namespace {

Mechanism mechanism_from(const std::string& name) {
  const auto m = parse_mechanism(name);
  if (!m) throw py::value_error("unknown mechanism '" + name + "'");
  return *m;
}

Method method_from(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw py::value_error("unknown method '" + name + "'");
  return *m;
}

MethodOptions options_from(int mi_imputations, int mi_cycles, bool ipmw_stabilized) {
  MethodOptions opts;
  opts.mi_imputations = mi_imputations;
  opts.mi_cycles = mi_cycles;
  opts.ipmw_stabilized = ipmw_stabilized;
  return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Marginal structural models with partially observed time-varying "
            "confounders: weights, missing-data methods and the simulation lab";

  py::register_exception<Error>(m, "MsmError");

  py::class_<PanelDataset>(m, "PanelDataset")
      .def(py::init<>())
      .def_property_readonly("n", &PanelDataset::size)
      .def_readwrite("v", &PanelDataset::v)
      .def_readwrite("y", &PanelDataset::y)
      .def_readwrite("l1", &PanelDataset::l1)
      .def_readwrite("l2", &PanelDataset::l2)
      .def_readwrite("a", &PanelDataset::a)
      .def_readwrite("l1_obs", &PanelDataset::l1_obs)
      .def_readwrite("l2_obs", &PanelDataset::l2_obs)
      .def_readwrite("a_obs", &PanelDataset::a_obs)
      .def_readwrite("y_obs", &PanelDataset::y_obs)
      .def("complete_case_mask", [](const PanelDataset& d) { return complete_case_mask(d); })
      .def("to_csv",
           [](const PanelDataset& d) {
             std::ostringstream out;
             write_panel_csv(d, out);
             return out.str();
           })
      .def("__repr__", [](const PanelDataset& d) {
        return "<PanelDataset n=" + std::to_string(d.size()) + ">";
      });

  m.def(
      "load_csv",
      [](const std::string& path, bool strict) {
        return load_panel_csv_file(path, strict ? Validation::Strict : Validation::Permissive);
      },
      py::arg("path"), py::arg("strict") = false);
  m.def(
      "loads_csv",
      [](const std::string& text, bool strict) {
        std::istringstream in(text);
        return load_panel_csv(in, strict ? Validation::Strict : Validation::Permissive);
      },
      py::arg("text"), py::arg("strict") = false);
  m.def("save_csv", [](const PanelDataset& d, const std::string& path) {
    write_panel_csv_file(d, path);
  });

  py::class_<EffectEstimates>(m, "EffectEstimates")
      .def_readonly("theta", &EffectEstimates::theta)
      .def_readonly("se", &EffectEstimates::se)
      .def_readonly("ci_low", &EffectEstimates::ci_low)
      .def_readonly("ci_high", &EffectEstimates::ci_high)
      .def_readonly("n_used", &EffectEstimates::n_used)
      .def("__repr__", [](const EffectEstimates& e) {
        std::ostringstream out;
        out << "<EffectEstimates theta=(" << e.theta[0] << ", " << e.theta[1] << ", "
            << e.theta[2] << ")>";
        return out.str();
      });

  py::class_<WeightDiagnostics>(m, "WeightDiagnostics")
      .def_readonly("mean", &WeightDiagnostics::mean)
      .def_readonly("max", &WeightDiagnostics::max)
      .def_readonly("n_clipped", &WeightDiagnostics::n_clipped)
      .def_readonly("n_extreme", &WeightDiagnostics::n_extreme);

  py::class_<WeightVector>(m, "WeightVector")
      .def_readonly("cumulative", &WeightVector::cumulative)
      .def_readonly("final_weight", &WeightVector::final_weight)
      .def_readonly("diagnostics", &WeightVector::diagnostics);

  m.def("treatment_weights",
        [](const PanelDataset& d) { return treatment_weights(d); });

  m.def(
      "fit_msm",
      [](const PanelDataset& d, const WeightVector* w, const std::string& comparator) {
        Comparator c = Comparator::None;
        if (comparator == "unadjusted") c = Comparator::Unadjusted;
        else if (comparator == "covariate-adjusted") c = Comparator::CovariateAdjusted;
        else if (comparator != "none") throw py::value_error("unknown comparator");
        return fit_msm(d, w ? *w : WeightVector{}, c);
      },
      py::arg("data"), py::arg("weights") = nullptr, py::arg("comparator") = "none");

  m.def("balance_diagnostics", [](const PanelDataset& d, const WeightVector& w) {
    std::vector<std::tuple<double, double, int>> rows;
    for (const auto& r : balance_diagnostics(d, w)) {
      rows.emplace_back(r.smd_l1, r.smd_l2, r.risk_set_size);
    }
    return rows;
  });

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_property_readonly("mechanism",
                             [](const ScenarioConfig& c) {
                               return std::string(mechanism_name(c.mechanism));
                             })
      .def_readwrite("n", &ScenarioConfig::n)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("target_missing_rate", &ScenarioConfig::target_missing_rate);

  m.def(
      "make_scenario",
      [](const std::string& mechanism, int n, std::uint64_t seed) {
        return make_scenario(mechanism_from(mechanism), n, seed);
      },
      py::arg("mechanism"), py::arg("n") = 2000, py::arg("seed") = 1);

  m.def("generate_full", [](const ScenarioConfig& c) { return generate_full(c); });
  m.def("apply_missingness",
        [](const PanelDataset& latent, const ScenarioConfig& c) {
          return apply_missingness(latent, c);
        });
  m.def(
      "true_effects",
      [](const ScenarioConfig& c, std::size_t n_oracle) {
        const TrueEffects te = true_effects(c, n_oracle);
        return py::make_tuple(te.theta, te.mcse);
      },
      py::arg("config"), py::arg("n_oracle") = 1000000);
  m.def("calibrate_scenario",
        [](ScenarioConfig& c, std::size_t n_sim) { calibrate_scenario(c, n_sim); },
        py::arg("config"), py::arg("n_sim") = 100000);

  m.def(
      "analyze",
      [](const PanelDataset& d, const std::string& method, std::uint64_t seed,
         int mi_imputations, int mi_cycles, bool ipmw_stabilized) {
        return analyze(d, method_from(method), options_from(mi_imputations, mi_cycles,
                                                            ipmw_stabilized),
                       make_stream(seed, 0, StreamRole::Imputation));
      },
      py::arg("data"), py::arg("method"), py::arg("seed") = 1,
      py::arg("mi_imputations") = 10, py::arg("mi_cycles") = 10,
      py::arg("ipmw_stabilized") = false);

  m.def("locf_impute", [](const PanelDataset& d) { return locf_impute(d); });

  m.def(
      "rubin_pool",
      [](const std::vector<Eigen::VectorXd>& estimates,
         const std::vector<Eigen::MatrixXd>& covariances) {
        const PooledEstimate pooled = rubin_pool(estimates, covariances);
        py::dict out;
        out["theta"] = pooled.theta;
        out["total_covariance"] = pooled.total_covariance;
        out["within"] = pooled.within;
        out["between"] = pooled.between;
        out["df"] = pooled.df;
        out["imputations"] = pooled.imputations;
        return out;
      },
      py::arg("estimates"), py::arg("covariances"));

  py::class_<Measures>(m, "Measures")
      .def_readonly("bias", &Measures::bias)
      .def_readonly("emp_se", &Measures::emp_se)
      .def_readonly("coverage", &Measures::coverage)
      .def_readonly("mse", &Measures::mse)
      .def_readonly("mcse_bias", &Measures::mcse_bias)
      .def_readonly("mcse_coverage", &Measures::mcse_coverage)
      .def_readonly("mcse_emp_se", &Measures::mcse_emp_se)
      .def_readonly("s_success", &Measures::s_success)
      .def_readonly("s_fail", &Measures::s_fail);

  m.def("performance_measures", &performance_measures, py::arg("estimates"), py::arg("ses"),
        py::arg("theta_true"));

  py::class_<PerformanceReport>(m, "PerformanceReport")
      .def_readonly("scenario", &PerformanceReport::scenario)
      .def_readonly("replications", &PerformanceReport::replications)
      .def_readonly("theta_true", &PerformanceReport::theta_true)
      .def_readonly("flagged", &PerformanceReport::flagged)
      .def("measures",
           [](const PerformanceReport& r, const std::string& method, int k) {
             for (const auto& mr : r.methods) {
               if (method_name(mr.method) == method) return mr.by_k.at(k);
             }
             throw py::value_error("method '" + method + "' not in report");
           })
      .def("summary_csv", [](const PerformanceReport& r) {
        std::ostringstream out;
        write_summary({r}, out, ReportFormat::Csv);
        return out.str();
      });

  m.def(
      "run_scenario",
      [](const ScenarioConfig& scenario, const std::vector<std::string>& methods, int S,
         std::uint64_t master_seed, int threads, std::size_t oracle_n, int mi_imputations,
         int mi_cycles) {
        std::vector<Method> ms;
        for (const auto& name : methods) ms.push_back(method_from(name));
        RunOptions opts;
        opts.threads = threads;
        opts.oracle_n = oracle_n;
        opts.method = options_from(mi_imputations, mi_cycles, false);
        return run_scenario(scenario, ms, S, master_seed, opts);
      },
      py::arg("scenario"), py::arg("methods"), py::arg("replications"),
      py::arg("master_seed") = 1, py::arg("threads") = 0, py::arg("oracle_n") = 1000000,
      py::arg("mi_imputations") = 10, py::arg("mi_cycles") = 10);

  m.def(
      "bootstrap_ci",
      [](const PanelDataset& d, const std::string& method, int B, std::uint64_t seed) {
        const BootstrapCi ci =
            bootstrap_ci(d, method_from(method), B, make_stream(seed, 0, StreamRole::Bootstrap));
        return py::make_tuple(ci.lo, ci.hi, ci.failed);
      },
      py::arg("data"), py::arg("method"), py::arg("resamples") = 500, py::arg("seed") = 1);

  m.attr("__version__") = "0.1.0";
}
