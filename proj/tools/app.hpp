#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "jjres/designer.hpp"

namespace jjres::app {

// Everything a run depends on. Filled from flags and an optional config file.
struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string out;   // report path; empty means stdout
  std::string data;  // synth: CSV output path
  bool timestamp = false;
  bool quiet = false;

  // linear fits
  double wing_fraction = 0.1;
  bool refine_delay = true;
  bool ignore_sigma = false;
  int max_iterations = 200;
  double ftol = 1e-12;
  double xtol = 1e-10;
  std::optional<std::size_t> power_index;
  bool segment = false;
  double dip_threshold_db = 3.0;
  double dip_window_linewidths = 20.0;
  std::size_t dip_min_separation = 8;

  // fit-power-sweep
  bool global_photon_calibration = false;
  unsigned jobs = 0;  // 0: hardware concurrency

  // fit-kerr
  std::string branch = "lowest";
  bool mask_bistable = false;
  bool free_all = false;
  std::optional<double> initial_kerr;
  double linear_margin_db = 10.0;

  // fit-field
  std::optional<double> f0_guess;
  std::optional<double> b_crit_guess;
  std::optional<double> b_phi0_guess;
  bool scale_by_reduced_chi2 = false;

  // design
  JunctionSpec junction;
  int n_junctions = 46;
  double total_length = 207e-6;
  double c_per_length = 0.057e-15 / 1e-6;
  std::optional<double> l_total = 78.9e-9;
  std::optional<double> extra_inductance;
  std::optional<double> l_eq_override = 67e-9;
  std::optional<double> f_loaded = 7.02e9;
  bool standard_l_eq = false;
  bool no_f_loaded = false;

  // predict-field
  double london_depth = 16e-9;
  double pippard_length = 1600e-9;
  double bulk_critical_field = 10e-3;
  double bottom_nominal = 35e-9;
  double top_nominal = 130e-9;
  double evaporation_angle_deg = 45.0;

  // synth
  std::string kind = "linear";
  std::string format = "reim";
  std::uint64_t seed = 0;
  std::optional<double> snr_db;
  double f_r = 6.117e9;
  double q_c = 1500.0;
  double q_i = 15800.0;
  double phi0 = 0.1;
  double amplitude = 1.0;
  double alpha = 0.3;
  double tau = 30e-9;
  double span_linewidths = 10.0;
  std::size_t points = 1001;
  double power_dbm = -140.0;
  double kerr = 99.5e3;
  double phi = 0.1;
  double power_start = -150.0;
  double power_stop = -110.0;
  double power_step = 2.0;
  double f0 = 7e9;
  double b_crit = 66e-3;
  double b_phi0 = 102e-3;
  double field_start = 0.0;
  double field_stop = 60e-3;
  std::size_t field_count = 13;
  double sigma_f = 5e6;
};

/// Runs one configured subcommand; writes the JSON report to `report` and log
/// lines to `log`. Returns the process exit code (0, 2, 3 or 4).
int run_subcommand(const RunConfig& config, std::ostream& report, std::ostream& log);

/// Parses argv (flags win over --config) and dispatches. Reports go to --out or `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jjres::app
