#include "report.hpp"

#include <cmath>
#include <cstdio>

#include "jjres/constants.hpp"
#include "jjres/errors.hpp"

namespace jjres::report {

using constants::kTwoPi;

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json measured(double value, double sigma, const char* unit) {
  return {{"value", number(value)}, {"uncertainty", number(sigma)}, {"unit", unit}};
}

Json quantity(double value, const char* unit) {
  return {{"value", number(value)}, {"unit", unit}};
}

Json matrix(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    out.push_back(row);
  }
  return out;
}

Json linear_fit(const LinearFitResult& r) {
  const auto& res = r.resonator;
  const auto& env = r.environment;
  // Rates reported as kappa / 2 pi in Hz; the covariance follows.
  Eigen::Matrix<double, 7, 7> t = Eigen::Matrix<double, 7, 7>::Identity();
  t(1, 1) = t(2, 2) = 1.0 / kTwoPi;
  const Eigen::MatrixXd cov = t * r.covariance * t;
  const double kl_sigma =
      std::sqrt(std::max(r.covariance(1, 1) + r.covariance(2, 2) + 2.0 * r.covariance(1, 2), 0.0)) /
      kTwoPi;
  Json j;
  j["resonator"] = {
      {"f_r", measured(res.f_r, r.uncertainties[0], "Hz")},
      {"kappa_c_over_2pi", measured(res.kappa_c / kTwoPi, r.uncertainties[1] / kTwoPi, "Hz")},
      {"kappa_int_over_2pi", measured(res.kappa_int / kTwoPi, r.uncertainties[2] / kTwoPi, "Hz")},
      {"kappa_l_over_2pi", measured(res.kappa_l() / kTwoPi, kl_sigma, "Hz")},
      {"phi0", measured(res.phi0, r.uncertainties[3], "rad")},
      {"q_c", measured(r.q_c(), r.sigma_q_c(), "")},
      {"q_i", measured(r.q_i(), r.sigma_q_i(), "")},
      {"q_l", measured(r.q_l(), r.sigma_q_l(), "")},
  };
  j["environment"] = {
      {"amplitude", measured(env.amplitude, r.uncertainties[4], "")},
      {"alpha", measured(env.alpha, r.uncertainties[5], "rad")},
      {"tau", measured(env.tau, r.uncertainties[6], "s")},
  };
  j["covariance"] = {
      {"parameters", {"f_r", "kappa_c_over_2pi", "kappa_int_over_2pi", "phi0", "amplitude", "alpha", "tau"}},
      {"units", {"Hz", "Hz", "Hz", "rad", "", "rad", "s"}},
      {"matrix", matrix(cov)},
  };
  j["drive_power_dbm"] = number(r.drive_power);
  j["n_photons"] = number(r.n_photons);
  j["single_photon_power_dbm"] = number(single_photon_power(res));
  j["fit"] = {
      {"residual_rms", number(r.residual_rms)},
      {"iterations", r.iterations},
      {"solver_status", r.solver_status},
      {"grid", {{"min_hz", number(r.grid_min)}, {"max_hz", number(r.grid_max)}, {"points", r.grid_size}}},
  };
  j["warnings"] = r.warnings;
  return j;
}

Json kerr_fit(const KerrFitResult& r, BranchRule branch) {
  Json j;
  j["kerr"] = measured(r.params.kerr, r.k_uncertainty, "Hz");
  j["kerr_uncertainty_fit_only"] = quantity(r.k_uncertainty_fit, "Hz");
  j["phi"] = measured(r.params.phi, r.phi_uncertainty, "rad");
  j["covariance"] = {
      {"parameters", {"kerr", "phi"}},
      {"units", {"Hz", "rad"}},
      {"matrix", matrix(r.covariance)},
      {"matrix_fit_only", matrix(r.covariance_fit)},
  };
  j["branch"] = to_string(branch);
  j["fit"] = {
      {"residual_rms", number(r.residual_rms)},
      {"points_used", r.points_used},
      {"points_masked", r.points_masked},
      {"iterations", r.iterations},
      {"solver_status", r.solver_status},
  };
  return j;
}

Json field_fit(const FieldFitResult& r) {
  Json j;
  j["f0"] = measured(r.params.f0, r.uncertainties[0], "Hz");
  j["b_crit"] = measured(r.params.b_crit, r.uncertainties[1], "T");
  j["b_phi0"] = measured(r.params.b_phi0, r.uncertainties[2], "T");
  j["covariance"] = {{"parameters", {"f0", "b_crit", "b_phi0"}},
                     {"units", {"Hz", "T", "T"}},
                     {"matrix", matrix(r.covariance)}};
  j["correlation"] = {{"parameters", {"f0", "b_crit", "b_phi0"}}, {"matrix", matrix(r.correlation)}};
  j["fit"] = {
      {"chi2", number(r.chi2)},
      {"reduced_chi2", number(r.reduced_chi2)},
      {"points_used", r.points_used},
      {"points_excluded", r.points_excluded},
      {"iterations", r.iterations},
      {"solver_status", r.solver_status},
  };
  j["warnings"] = r.warnings;
  return j;
}

Json design(const ArrayDesignReport& r) {
  Json j;
  j["junction"] = {
      {"i_c", quantity(r.i_c, "A")},
      {"l_j", quantity(r.l_j, "H")},
      {"e_j", quantity(r.e_j, "Hz")},
      {"c_j", quantity(r.c_j, "F")},
      {"e_c", quantity(r.e_c, "Hz")},
      {"ej_over_ec", number(r.ej_over_ec)},
      {"plasma_frequency", quantity(r.plasma_frequency, "Hz")},
  };
  j["array"] = {
      {"l_total", quantity(r.l_total, "H")},
      {"l_eq", quantity(r.l_eq, "H")},
      {"l_eq_standard", quantity(r.l_eq_standard, "H")},
      {"l_eq_overridden", r.l_eq_overridden},
      {"c_total", quantity(r.c_total, "F")},
      {"c_eq", quantity(r.c_eq, "F")},
      {"f_bare", quantity(r.f_bare, "Hz")},
      {"z_eq", quantity(r.z_eq, "Ohm")},
      {"kerr_estimate", quantity(r.kerr_estimate, "Hz")},
  };
  if (r.f_loaded) {
    j["loaded"] = {
        {"f_loaded", quantity(*r.f_loaded, "Hz")},
        {"c_eq", quantity(*r.c_eq_loaded, "F")},
        {"z_eq", quantity(*r.z_eq_loaded, "Ohm")},
    };
  } else {
    j["loaded"] = nullptr;
  }
  j["notes"] = r.notes;
  return j;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return static_cast<int>(err->kind());
  return 1;
}

Json error_object(const std::exception& e, int exit_code) {
  Json j;
  const auto* err = dynamic_cast<const Error*>(&e);
  j["type"] = err ? err->type_name() : "internal_error";
  j["message"] = e.what();
  j["exit_code"] = exit_code;
  if (const auto* conv = dynamic_cast<const ConvergenceError*>(&e)) {
    j["iterations"] = conv->iterations();
    j["last_iterate"] = numbers(conv->last_iterate());
  }
  return j;
}

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json series(const std::string& label, const std::vector<double>& x, const std::vector<double>& y) {
  return {{"label", label}, {"x", numbers(x)}, {"y", numbers(y)}};
}

Json figure(const std::string& id, const std::string& x_label, const std::string& x_unit,
            const std::string& y_label, const std::string& y_unit, Json series_list) {
  return {{"id", id},
          {"kind", "lines"},
          {"x_label", x_label},
          {"x_unit", x_unit},
          {"y_label", y_label},
          {"y_unit", y_unit},
          {"series", std::move(series_list)}};
}

Json map_figure(const std::string& id, const std::string& x_label, const std::string& x_unit,
                const std::vector<double>& x, const std::string& y_label, const std::string& y_unit,
                const std::vector<double>& y, const std::string& z_label, const std::string& z_unit,
                const std::vector<std::vector<double>>& z) {
  Json rows = Json::array();
  for (const auto& row : z) rows.push_back(numbers(row));
  return {{"id", id},       {"kind", "map"},       {"x_label", x_label}, {"x_unit", x_unit},
          {"x", numbers(x)}, {"y_label", y_label}, {"y_unit", y_unit},   {"y", numbers(y)},
          {"z_label", z_label}, {"z_unit", z_unit}, {"z", std::move(rows)}};
}

}  // namespace jjres::report
