#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "jjres/core.hpp"
#include "jjres/fieldmodel.hpp"
#include "jjres/kerrfit.hpp"
#include "jjres/linfit.hpp"

namespace py = pybind11;
using namespace jjres;

namespace {

// argv[0] is supplied here; callers pass only the arguments.
py::tuple run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"jjres"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = app::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

LinearResonatorParams resonator(double f_r, double q_c, double q_i, double phi0) {
  return LinearResonatorParams::from_quality(f_r, q_c, q_i, phi0);
}

}  // namespace

PYBIND11_MODULE(_jjres, m) {
  m.doc() = "Notch-resonator fits and Josephson-array design (C++ core)";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.def("run", &run, py::arg("args"),
        "Run the command-line tool in-process. Returns (exit_code, stdout, stderr).");

  m.def(
      "s21_linear",
      [](const std::vector<double>& f, double f_r, double q_c, double q_i, double phi0, double amplitude,
         double alpha, double tau) {
        return model_s21_linear(resonator(f_r, q_c, q_i, phi0), EnvironmentParams{amplitude, alpha, tau}, f);
      },
      py::arg("frequencies"), py::arg("f_r"), py::arg("q_c"), py::arg("q_i"), py::arg("phi0") = 0.0,
      py::arg("amplitude") = 1.0, py::arg("alpha") = 0.0, py::arg("tau") = 0.0);

  m.def(
      "photon_number",
      [](double f_r, double q_c, double q_i, double p_dbm) {
        return photon_number(resonator(f_r, q_c, q_i, 0.0), p_dbm);
      },
      py::arg("f_r"), py::arg("q_c"), py::arg("q_i"), py::arg("p_dbm"));

  m.def(
      "single_photon_power",
      [](double f_r, double q_c, double q_i) { return single_photon_power(resonator(f_r, q_c, q_i, 0.0)); },
      py::arg("f_r"), py::arg("q_c"), py::arg("q_i"));

  m.def("solve_photon_cubic", &solve_photon_cubic, py::arg("delta"), py::arg("xi"),
        "Real roots of the steady-state photon-number cubic, ascending.");

  m.def(
      "fr_vs_field",
      [](double f0, double b_crit, double b_phi0, double b) {
        return fr_vs_field(FieldModelParams{f0, b_crit, b_phi0}, b);
      },
      py::arg("f0"), py::arg("b_crit"), py::arg("b_phi0"), py::arg("b"));

  m.def(
      "fit_linear",
      [](const std::vector<double>& f, const std::vector<Complex>& s21, double power_dbm) {
        const auto trace = FrequencyTrace::from_arrays(f, s21, power_dbm);
        LinearFitResult r;
        {
          py::gil_scoped_release release;
          r = fit_linear(trace);
        }
        py::dict d;
        d["f_r"] = r.resonator.f_r;
        d["q_c"] = r.q_c();
        d["q_i"] = r.q_i();
        d["q_l"] = r.q_l();
        d["phi0"] = r.resonator.phi0;
        d["sigma_f_r"] = r.sigma_f_r();
        d["sigma_q_c"] = r.sigma_q_c();
        d["sigma_q_i"] = r.sigma_q_i();
        d["amplitude"] = r.environment.amplitude;
        d["alpha"] = r.environment.alpha;
        d["tau"] = r.environment.tau;
        d["n_photons"] = r.n_photons;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("frequencies"), py::arg("s21"), py::arg("power_dbm") = -140.0);
}
