#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "relaynet/harness.hpp"
#include "relaynet/twoway.hpp"

namespace py = pybind11;
using namespace relaynet;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiuser MIMO relay transceiver design";

  static py::exception<Error> error(m, "RelaynetError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<Mode>(m, "Mode").value("ONE_WAY", Mode::OneWay).value("TWO_WAY", Mode::TwoWay);

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_static("uniform", &SystemConfig::uniform, py::arg("mode"), py::arg("K"), py::arg("n_s"), py::arg("n_r"),
                  py::arg("n_d"), py::arg("n_b"), py::arg("p_s_db"), py::arg("p_r_db"), py::arg("sigma2_r") = 1.0,
                  py::arg("sigma2_d") = 1.0)
      .def_readwrite("K", &SystemConfig::K)
      .def_readwrite("n_s", &SystemConfig::n_s)
      .def_readwrite("n_r", &SystemConfig::n_r)
      .def_readwrite("n_d", &SystemConfig::n_d)
      .def_readwrite("n_b", &SystemConfig::n_b)
      .def_readwrite("p_s", &SystemConfig::p_s)
      .def_readwrite("p_r", &SystemConfig::p_r)
      .def_readwrite("sigma2_r", &SystemConfig::sigma2_r)
      .def_readwrite("sigma2_d", &SystemConfig::sigma2_d)
      .def_readwrite("mode", &SystemConfig::mode)
      .def("transmitters", &SystemConfig::transmitters)
      .def("receivers", &SystemConfig::receivers)
      .def("validate", &SystemConfig::validate);
  m.def("load_config", [](const std::string& text) {
    std::istringstream in(text);
    return load_config(in);
  });
  m.def("load_config_file", &load_config_file);

  py::class_<ChannelRealization>(m, "ChannelRealization")
      .def(py::init<>())
      .def_readwrite("h", &ChannelRealization::h)
      .def_readwrite("g", &ChannelRealization::g);
  m.def("generate_channels", &generate_channels, py::arg("config"), py::arg("seed"));

  py::class_<TransceiverDesign>(m, "TransceiverDesign")
      .def(py::init<>())
      .def_readwrite("b", &TransceiverDesign::b)
      .def_readwrite("f", &TransceiverDesign::f)
      .def_readwrite("w", &TransceiverDesign::w);

  m.def("all_mse", &all_mse);
  m.def("worst_mse", &worst_mse);
  m.def("relay_power", &relay_power);
  m.def("received_covariance", &received_covariance);
  m.def("check_feasible", &check_feasible, py::arg("config"), py::arg("channels"), py::arg("design"),
        py::arg("tol") = 1e-6);
  m.def(
      "naf_design",
      [](const SystemConfig& cfg, const ChannelRealization& ch, bool stream_selection) {
        NafOptions o;
        o.stream_selection = stream_selection;
        return naf_design(cfg, ch, o);
      },
      py::arg("config"), py::arg("channels"), py::arg("stream_selection") = false);
  m.def("initial_design", [](const SystemConfig& cfg, const ChannelRealization& ch) { return initial_design(cfg, ch); });
  m.def("mmse_receivers", [](const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                             const CMatrix& f) {
    return cfg.mode == Mode::TwoWay ? twoway_mmse_receivers(cfg, ch, b, f) : mmse_receivers(cfg, ch, b, f);
  });

  py::class_<IterationTrace>(m, "IterationTrace")
      .def_readonly("initial_objective", &IterationTrace::initial_objective)
      .def_readonly("objective_per_iter", &IterationTrace::objective_per_iter)
      .def_readonly("converged", &IterationTrace::converged)
      .def_readonly("iters", &IterationTrace::iters)
      .def_readonly("failure", &IterationTrace::failure);
  py::class_<IterateResult>(m, "IterateResult")
      .def_readonly("design", &IterateResult::design)
      .def_readonly("trace", &IterateResult::trace);
  m.def(
      "iterate",
      [](const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& init, double tol,
         int max_iters) {
        IterateOptions o;
        o.tol = tol;
        o.max_iters = max_iters;
        return cfg.mode == Mode::TwoWay ? twoway_iterate(cfg, ch, init, o) : iterate_minmax(cfg, ch, init, o);
      },
      py::arg("config"), py::arg("channels"), py::arg("init"), py::arg("tol") = 1e-3, py::arg("max_iters") = 30);

  py::class_<SimplifiedDesignOutput>(m, "SimplifiedDesign")
      .def_readonly("design", &SimplifiedDesignOutput::design)
      .def_readonly("q", &SimplifiedDesignOutput::q)
      .def_readonly("first_hop_mse", &SimplifiedDesignOutput::first_hop_mse)
      .def_readonly("second_hop_mse", &SimplifiedDesignOutput::second_hop_mse)
      .def_readonly("inner_iterations", &SimplifiedDesignOutput::inner_iterations)
      .def_readonly("first_hop_snr_db", &SimplifiedDesignOutput::first_hop_snr_db)
      .def_property_readonly("recovery_used",
                             [](const SimplifiedDesignOutput& s) { return std::string(to_string(s.recovery_used)); });
  m.def("simplified_design", [](const SystemConfig& cfg, const ChannelRealization& ch) {
    return cfg.mode == Mode::TwoWay ? twoway_simplified(cfg, ch) : simplified_design(cfg, ch);
  });

  py::class_<sim::Metric>(m, "Metric")
      .def_readonly("name", &sim::Metric::name)
      .def_readonly("value", &sim::Metric::value);
  py::class_<sim::CurvePoint>(m, "CurvePoint")
      .def_readonly("p_s_db", &sim::CurvePoint::p_s_db)
      .def_property_readonly("algorithm", [](const sim::CurvePoint& p) { return std::string(sim::to_string(p.algorithm)); })
      .def_readonly("trials", &sim::CurvePoint::trials)
      .def_readonly("failures", &sim::CurvePoint::failures)
      .def_readonly("metrics", &sim::CurvePoint::metrics)
      .def("metric", &sim::CurvePoint::metric);
  py::class_<sim::SweepResult>(m, "SweepResult")
      .def_readonly("axis", &sim::SweepResult::axis)
      .def_readonly("points", &sim::SweepResult::points)
      .def("total_failures", &sim::SweepResult::total_failures)
      .def("warning", &sim::SweepResult::warning)
      .def("csv", [](const sim::SweepResult& r) {
        std::ostringstream os;
        sim::write_csv(r, os);
        return os.str();
      });
  m.def(
      "simulate",
      [](const SystemConfig& cfg, const std::string& experiment, const std::string& algorithms,
         const std::vector<double>& p_s_db, int trials, std::uint64_t seed, int workers, long bits) {
        sim::HarnessOptions o;
        o.workers = workers;
        o.bits_per_trial = bits;
        py::gil_scoped_release release;
        return sim::run_experiment(sim::parse_experiment(experiment), cfg, sim::parse_algorithms(algorithms, cfg.mode),
                                   p_s_db, trials, seed, o);
      },
      py::arg("config"), py::arg("experiment") = "mse", py::arg("algorithms") = "naf,simplified,iterative",
      py::arg("p_s_db") = std::vector<double>{0, 5, 10, 15, 20}, py::arg("trials") = 50, py::arg("seed") = 1,
      py::arg("workers") = 1, py::arg("bits") = 0);
}
