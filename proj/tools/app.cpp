#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>
#include <variant>

#include "CLI11.hpp"

#include "jjres/constants.hpp"
#include "jjres/fieldmodel.hpp"
#include "jjres/io.hpp"
#include "jjres/kerrfit.hpp"
#include "jjres/linfit.hpp"
#include "jjres/synth.hpp"
#include "report.hpp"

namespace jjres::app {

namespace {

using report::Json;
using constants::kTwoPi;

class Logger {
 public:
  Logger(std::ostream& out, bool quiet) : out_(out), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) out_ << "jjres: " << msg << '\n';
  }
  void warn(const std::string& msg) const { out_ << "jjres: warning: " << msg << '\n'; }

 private:
  std::ostream& out_;
  bool quiet_;
};

// What a subcommand hands back for the report.
struct Outcome {
  Json results = Json::object();
  Json figures = Json::array();
  std::vector<std::string> warnings;
  Json input_file = nullptr;
  int exit_code = 0;
  Json error = nullptr;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double db(const Complex& z) { return 20.0 * std::log10(std::abs(z)); }

std::vector<double> magnitudes_db(std::span<const Complex> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = db(z[i]);
  return out;
}

std::vector<double> phases(std::span<const Complex> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::arg(z[i]);
  return out;
}

lsq::Options solver_options(const RunConfig& c) {
  lsq::Options o;
  o.max_iterations = c.max_iterations;
  o.ftol = c.ftol;
  o.xtol = c.xtol;
  return o;
}

LinearFitOptions linear_options(const RunConfig& c) {
  LinearFitOptions o;
  o.wing_fraction = c.wing_fraction;
  o.refine_delay = c.refine_delay;
  o.use_sigma = !c.ignore_sigma;
  o.solver = solver_options(c);
  return o;
}

Json solver_inputs(const RunConfig& c) {
  return {{"max_iterations", c.max_iterations}, {"ftol", c.ftol}, {"xtol", c.xtol}};
}

Json linear_inputs(const RunConfig& c) {
  return {{"wing_fraction", c.wing_fraction},
          {"refine_delay", c.refine_delay},
          {"ignore_sigma", c.ignore_sigma},
          {"solver", solver_inputs(c)}};
}

Json inputs_for(const RunConfig& c) {
  Json j;
  const auto& s = c.subcommand;
  if (s == "fit-linear") {
    j["input"] = c.input;
    j["linear"] = linear_inputs(c);
    j["power_index"] = c.power_index ? Json(*c.power_index) : Json(nullptr);
    j["segment"] = c.segment;
    j["dip_detection"] = {{"threshold_db", c.dip_threshold_db},
                          {"window_linewidths", c.dip_window_linewidths},
                          {"min_separation", c.dip_min_separation}};
  } else if (s == "fit-power-sweep") {
    j["input"] = c.input;
    j["linear"] = linear_inputs(c);
    j["photon_calibration"] = c.global_photon_calibration ? "global" : "per_slice";
  } else if (s == "fit-kerr") {
    j["input"] = c.input;
    j["linear"] = linear_inputs(c);
    j["branch"] = c.branch;
    j["mask_bistable"] = c.mask_bistable;
    j["free_all"] = c.free_all;
    j["initial_kerr"] = c.initial_kerr ? Json(*c.initial_kerr) : Json(nullptr);
    j["linear_margin_db"] = c.linear_margin_db;
  } else if (s == "fit-field") {
    j["input"] = c.input;
    j["f0_guess"] = c.f0_guess ? Json(*c.f0_guess) : Json(nullptr);
    j["b_crit_guess"] = c.b_crit_guess ? Json(*c.b_crit_guess) : Json(nullptr);
    j["b_phi0_guess"] = c.b_phi0_guess ? Json(*c.b_phi0_guess) : Json(nullptr);
    j["scale_by_reduced_chi2"] = c.scale_by_reduced_chi2;
    j["solver"] = solver_inputs(c);
  } else if (s == "design" || s == "predict-field") {
    j["junction"] = {{"r_normal", c.junction.r_normal}, {"width", c.junction.width},
                     {"length", c.junction.length},     {"t_ox", c.junction.t_ox},
                     {"epsilon_r", c.junction.epsilon_r}, {"delta0_ev", c.junction.delta0_ev}};
    if (s == "design") {
      j["n_junctions"] = c.n_junctions;
      j["total_length"] = c.total_length;
      j["c_per_length"] = c.c_per_length;
      j["l_total"] = c.l_total ? Json(*c.l_total) : Json(nullptr);
      j["extra_inductance"] = c.extra_inductance ? Json(*c.extra_inductance) : Json(nullptr);
      j["l_eq_override"] = (c.l_eq_override && !c.standard_l_eq) ? Json(*c.l_eq_override) : Json(nullptr);
      j["f_loaded"] = (c.f_loaded && !c.no_f_loaded) ? Json(*c.f_loaded) : Json(nullptr);
    } else {
      j["film"] = {{"london_depth", c.london_depth},
                   {"pippard_length", c.pippard_length},
                   {"bulk_critical_field", c.bulk_critical_field},
                   {"bottom_nominal", c.bottom_nominal},
                   {"top_nominal", c.top_nominal},
                   {"evaporation_angle_deg", c.evaporation_angle_deg}};
    }
  } else if (s == "synth") {
    j["kind"] = c.kind;
    j["data"] = c.data;
    j["format"] = c.format;
    j["seed"] = c.seed;
    j["snr_db"] = c.snr_db ? Json(*c.snr_db) : Json(nullptr);
    if (c.kind == "field") {
      j["model"] = {{"f0", c.f0}, {"b_crit", c.b_crit}, {"b_phi0", c.b_phi0}};
      j["fields"] = {{"start", c.field_start}, {"stop", c.field_stop}, {"count", c.field_count}};
      j["sigma_f"] = c.sigma_f;
    } else {
      j["resonator"] = {{"f_r", c.f_r}, {"q_c", c.q_c}, {"q_i", c.q_i}, {"phi0", c.phi0}};
      j["environment"] = {{"amplitude", c.amplitude}, {"alpha", c.alpha}, {"tau", c.tau}};
      j["grid"] = {{"span_linewidths", c.span_linewidths}, {"points", c.points}};
      if (c.kind == "kerr") {
        j["kerr"] = c.kerr;
        j["phi"] = c.phi;
        j["branch"] = c.branch;
        j["powers"] = {{"start", c.power_start}, {"stop", c.power_stop}, {"step", c.power_step}};
      } else {
        j["power_dbm"] = c.power_dbm;
      }
    }
  }
  return j;
}

Json file_info(const std::string& path, const std::string& bytes) {
  return {{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", report::fnv1a64(bytes)}};
}

FrequencyTrace select_trace(const io::TraceData& data, const RunConfig& c) {
  if (const auto* t = std::get_if<FrequencyTrace>(&data)) {
    if (c.power_index && *c.power_index != 0)
      throw UsageError("--power-index given but the input holds a single trace");
    return *t;
  }
  const auto& sweep = std::get<PowerSweep>(data);
  if (!c.power_index)
    throw UsageError("input has a power_dbm column; pass --power-index or use fit-power-sweep");
  if (*c.power_index >= sweep.size())
    throw UsageError("--power-index " + std::to_string(*c.power_index) + " out of range (" +
                     std::to_string(sweep.size()) + " traces)");
  return sweep[*c.power_index];
}

const PowerSweep& require_sweep(const io::TraceData& data) {
  if (const auto* s = std::get_if<PowerSweep>(&data)) return *s;
  throw SchemaError("missing required column 'power_dbm' for a power sweep");
}

Json linear_figures(const FrequencyTrace& trace, const LinearFitResult& fit, const std::string& tag) {
  const auto f = trace.frequencies();
  const auto z = trace.values();
  const auto m = model_s21_linear(fit.resonator, fit.environment, f);
  std::vector<double> re_d, im_d, re_m, im_m;
  for (const auto& v : z) {
    re_d.push_back(v.real());
    im_d.push_back(v.imag());
  }
  for (const auto& v : m) {
    re_m.push_back(v.real());
    im_m.push_back(v.imag());
  }
  Json figs = Json::array();
  figs.push_back(report::figure(
      "s21_magnitude" + tag, "frequency", "Hz", "|S21|", "dB",
      {report::series("data", f, magnitudes_db(z)), report::series("model", f, magnitudes_db(m))}));
  figs.push_back(report::figure(
      "s21_phase" + tag, "frequency", "Hz", "arg S21", "rad",
      {report::series("data", f, phases(z)), report::series("model", f, phases(m))}));
  figs.push_back(report::figure("s21_complex_plane" + tag, "Re S21", "", "Im S21", "",
                                {report::series("data", re_d, im_d),
                                 report::series("model", re_m, im_m)}));
  return figs;
}

Outcome run_fit_linear(const RunConfig& c, const Logger& log) {
  Outcome o;
  const std::string bytes = io::read_file(c.input);
  o.input_file = file_info(c.input, bytes);
  const FrequencyTrace trace = select_trace(io::parse_trace_csv_text(bytes), c);
  const auto opts = linear_options(c);
  log.info("fit-linear: " + std::to_string(trace.size()) + " samples");

  if (!c.segment) {
    const auto fit = fit_linear(trace, opts);
    o.results = report::linear_fit(fit);
    o.warnings = fit.warnings;
    o.figures = linear_figures(trace, fit, "");
    return o;
  }

  DipDetectionOptions d;
  d.threshold_db = c.dip_threshold_db;
  d.window_linewidths = c.dip_window_linewidths;
  d.min_separation = c.dip_min_separation;
  const auto dips = find_dips(trace, d);
  if (dips.empty()) throw DataError("no dip deeper than the detection threshold");
  log.info("fit-linear: " + std::to_string(dips.size()) + " dips detected");
  Json list = Json::array();
  const auto f = trace.frequencies();
  o.figures.push_back(report::figure("s21_magnitude_full", "frequency", "Hz", "|S21|", "dB",
                                     {report::series("data", f, magnitudes_db(trace.values()))}));
  for (std::size_t k = 0; k < dips.size(); ++k) {
    const auto& w = dips[k];
    Json entry;
    entry["index"] = k;
    entry["window"] = {{"first", w.first},
                       {"last", w.last},
                       {"f_min_hz", f[w.first]},
                       {"f_max_hz", f[w.last - 1]},
                       {"f_dip_hz", f[w.minimum]}};
    entry["depth_db"] = report::number(w.depth_db);
    try {
      const auto part = trace.slice(w.first, w.last);
      const auto fit = fit_linear(part, opts);
      entry["status"] = "ok";
      entry["fit"] = report::linear_fit(fit);
      for (const auto& msg : fit.warnings) o.warnings.push_back("dip " + std::to_string(k) + ": " + msg);
      for (auto& fig : linear_figures(part, fit, "_dip" + std::to_string(k))) o.figures.push_back(fig);
    } catch (const Error& e) {
      const int code = report::exit_code_for(e);
      entry["status"] = "error";
      entry["error"] = report::error_object(e, code);
      o.exit_code = std::max(o.exit_code, code);
      if (o.error.is_null()) o.error = report::error_object(e, code);
      log.warn("dip " + std::to_string(k) + ": " + e.what());
    }
    list.push_back(entry);
  }
  o.results["dips"] = list;
  return o;
}

Outcome run_fit_power_sweep(const RunConfig& c, const Logger& log) {
  Outcome o;
  const std::string bytes = io::read_file(c.input);
  o.input_file = file_info(c.input, bytes);
  const auto data = io::parse_trace_csv_text(bytes);
  const PowerSweep& sweep = require_sweep(data);
  const auto opts = linear_options(c);
  const std::size_t n = sweep.size();

  using SliceResult = std::variant<LinearFitResult, Json>;
  std::vector<SliceResult> slices(n);
  const unsigned jobs = c.jobs ? c.jobs : std::max(1u, std::thread::hardware_concurrency());
  log.info("fit-power-sweep: " + std::to_string(n) + " slices, " + std::to_string(jobs) + " jobs");
  for (std::size_t start = 0; start < n; start += jobs) {
    std::vector<std::future<SliceResult>> running;
    const std::size_t stop = std::min<std::size_t>(n, start + jobs);
    for (std::size_t t = start; t < stop; ++t)
      running.push_back(std::async(std::launch::async, [&sweep, &opts, t]() -> SliceResult {
        try {
          return fit_linear(sweep[t], opts);
        } catch (const std::exception& e) {
          return report::error_object(e, report::exit_code_for(e));
        }
      }));
    for (std::size_t t = start; t < stop; ++t) slices[t] = running[t - start].get();
  }

  // Global calibration takes the resonator parameters of the lowest-power slice that fitted.
  const LinearFitResult* reference = nullptr;
  if (c.global_photon_calibration) {
    for (const auto& s : slices)
      if (const auto* fit = std::get_if<LinearFitResult>(&s)) {
        reference = fit;
        break;
      }
  }

  Json table = Json::array();
  std::vector<double> xs, ys, yerr, pw, fr, fr_err;
  std::size_t failed = 0;
  for (std::size_t t = 0; t < n; ++t) {
    Json row;
    const double power = sweep[t].drive_power();
    row["power_dbm"] = power;
    if (const auto* fit = std::get_if<LinearFitResult>(&slices[t])) {
      const double n_ph = reference ? photon_number(reference->resonator, power) : fit->n_photons;
      row["status"] = "ok";
      row["n_photons"] = report::number(n_ph);
      row["n_photons_own_fit"] = report::number(fit->n_photons);
      row["f_r"] = report::measured(fit->resonator.f_r, fit->sigma_f_r(), "Hz");
      row["kappa_int_over_2pi"] =
          report::measured(fit->resonator.kappa_int / kTwoPi, fit->sigma_kappa_int() / kTwoPi, "Hz");
      row["kappa_c_over_2pi"] =
          report::measured(fit->resonator.kappa_c / kTwoPi, fit->sigma_kappa_c() / kTwoPi, "Hz");
      row["q_c"] = report::measured(fit->q_c(), fit->sigma_q_c(), "");
      row["q_i"] = report::measured(fit->q_i(), fit->sigma_q_i(), "");
      row["q_l"] = report::measured(fit->q_l(), fit->sigma_q_l(), "");
      row["phi0"] = report::measured(fit->resonator.phi0, fit->uncertainties[3], "rad");
      row["residual_rms"] = report::number(fit->residual_rms);
      row["iterations"] = fit->iterations;
      row["solver_status"] = fit->solver_status;
      row["warnings"] = fit->warnings;
      xs.push_back(n_ph);
      ys.push_back(fit->q_i());
      yerr.push_back(fit->sigma_q_i());
      pw.push_back(power);
      fr.push_back(fit->resonator.f_r);
      fr_err.push_back(fit->sigma_f_r());
    } else {
      const Json& err = std::get<Json>(slices[t]);
      row["status"] = "error";
      row["error"] = err;
      ++failed;
      o.exit_code = std::max(o.exit_code, err["exit_code"].get<int>());
      if (o.error.is_null()) {
        o.error = err;
        o.error["message"] = std::to_string(failed) + " power slice(s) failed; first at " +
                             io::format_double(power) + " dBm: " + err["message"].get<std::string>();
      }
      log.warn("slice at " + io::format_double(power) + " dBm: " + err["message"].get<std::string>());
    }
    table.push_back(row);
  }
  if (failed > 1) {
    o.error["message"] = std::to_string(failed) + o.error["message"].get<std::string>().substr(1);
  }

  o.results["photon_calibration"] = reference ? "global" : "per_slice";
  o.results["reference_power_dbm"] = reference ? Json(reference->drive_power) : Json(nullptr);
  o.results["slices"] = table;

  const auto f = sweep.frequencies();
  std::vector<std::vector<double>> zmap;
  for (const auto& trace : sweep.traces()) zmap.push_back(magnitudes_db(trace.values()));
  o.figures.push_back(report::map_figure("s21_power_map", "frequency", "Hz", f, "drive power", "dBm",
                                         sweep.powers(), "|S21|", "dB", zmap));
  Json qi = report::series("q_i", xs, ys);
  qi["y_err"] = report::numbers(yerr);
  o.figures.push_back(report::figure("qi_vs_photon_number", "<N_ph>", "", "Q_i", "", {qi}));
  Json frs = report::series("f_r", pw, fr);
  frs["y_err"] = report::numbers(fr_err);
  o.figures.push_back(report::figure("fr_vs_power", "drive power", "dBm", "f_r", "Hz", {frs}));
  return o;
}

// Frequency of the deepest point of each trace.
std::vector<double> dip_trajectory(std::span<const double> f,
                                   const std::vector<std::vector<Complex>>& traces) {
  std::vector<double> out;
  for (const auto& z : traces) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < z.size(); ++i)
      if (std::abs(z[i]) < std::abs(z[best])) best = i;
    out.push_back(f[best]);
  }
  return out;
}

Outcome run_fit_kerr(const RunConfig& c, const Logger& log) {
  Outcome o;
  const std::string bytes = io::read_file(c.input);
  o.input_file = file_info(c.input, bytes);
  const auto data = io::parse_trace_csv_text(bytes);
  const PowerSweep& sweep = require_sweep(data);

  KerrFitOptions ko;
  ko.branch = parse_branch_rule(c.branch);
  ko.initial_kerr = c.initial_kerr;
  ko.mask_bistable = c.mask_bistable;
  ko.free_all = c.free_all;
  ko.linear_margin_db = c.linear_margin_db;
  ko.solver = solver_options(c);
  log.info("fit-kerr: " + std::to_string(sweep.size()) + " traces x " +
           std::to_string(sweep[0].size()) + " points");
  const auto pipe = fit_power_sweep_kerr(sweep, linear_options(c), ko);

  o.results["linear_stage"] = {{"trace_index", pipe.linear_trace},
                               {"drive_power_dbm", sweep[pipe.linear_trace].drive_power()},
                               {"fit", report::linear_fit(pipe.linear)}};
  o.results["single_photon_power_dbm"] = report::number(pipe.single_photon_power);
  Json k = report::kerr_fit(pipe.kerr, ko.branch);
  const auto& p = pipe.kerr.params;
  k["resonator"] = {{"f_r", report::quantity(p.linear.f_r, "Hz")},
                    {"kappa_c_over_2pi", report::quantity(p.linear.kappa_c / kTwoPi, "Hz")},
                    {"kappa_int_over_2pi", report::quantity(p.linear.kappa_int / kTwoPi, "Hz")}};
  k["environment"] = {{"amplitude", report::quantity(p.environment.amplitude, "")},
                      {"alpha", report::quantity(p.environment.alpha, "rad")},
                      {"tau", report::quantity(p.environment.tau, "s")}};
  o.results["kerr_stage"] = k;
  o.warnings = pipe.linear.warnings;

  const auto f = sweep.frequencies();
  std::vector<std::vector<Complex>> measured, model;
  std::vector<std::vector<double>> zd, zm;
  for (const auto& trace : sweep.traces()) {
    measured.push_back(trace.values());
    model.push_back(model_s21_kerr(p, f, trace.drive_power(), ko.branch));
    zd.push_back(magnitudes_db(measured.back()));
    zm.push_back(magnitudes_db(model.back()));
  }
  const auto powers = sweep.powers();
  o.figures.push_back(report::map_figure("s21_power_map_data", "frequency", "Hz", f, "drive power",
                                         "dBm", powers, "|S21|", "dB", zd));
  o.figures.push_back(report::map_figure("s21_power_map_model", "frequency", "Hz", f, "drive power",
                                         "dBm", powers, "|S21|", "dB", zm));
  o.figures.push_back(report::figure("dip_trajectory", "drive power", "dBm", "dip frequency", "Hz",
                                     {report::series("data", powers, dip_trajectory(f, measured)),
                                      report::series("model", powers, dip_trajectory(f, model))}));
  return o;
}

Outcome run_fit_field(const RunConfig& c, const Logger& log) {
  Outcome o;
  const std::string bytes = io::read_file(c.input);
  o.input_file = file_info(c.input, bytes);
  const auto fd = io::parse_field_csv_text(bytes);
  const auto& pts = fd.points;
  double b_max = 0.0;
  const FieldSweepPoint* lowest = &pts.front();
  for (const auto& p : pts) {
    b_max = std::max(b_max, p.field);
    if (p.field < lowest->field) lowest = &p;
  }
  if (!(b_max > 0.0)) throw DataError("field sweep needs at least one non-zero field");
  const FieldModelParams initial{c.f0_guess.value_or(lowest->resonance),
                                 c.b_crit_guess.value_or(1.5 * b_max),
                                 c.b_phi0_guess.value_or(1.5 * b_max)};
  FieldFitOptions opts;
  opts.solver = solver_options(c);
  opts.scale_by_reduced_chi2 = c.scale_by_reduced_chi2;
  if (!fd.has_sigma) {
    opts.scale_by_reduced_chi2 = true;
    o.warnings.push_back("no sigma_hz column; uncertainties scaled by the reduced chi-square");
  }
  log.info("fit-field: " + std::to_string(pts.size()) + " points");
  const auto fit = fit_field_sweep(pts, initial, opts);
  o.results = report::field_fit(fit);
  o.results["initial_guess"] = {{"f0", initial.f0}, {"b_crit", initial.b_crit}, {"b_phi0", initial.b_phi0}};
  for (const auto& w : fit.warnings) o.warnings.push_back(w);

  std::vector<double> b, fr, err;
  for (const auto& p : pts) {
    b.push_back(p.field);
    fr.push_back(p.resonance);
    err.push_back(p.sigma);
  }
  const double limit = std::min(fit.params.b_crit, fit.params.b_phi0);
  const auto grid = synth::linspace(0.0, std::min(1.1 * b_max, 0.999 * limit), 201);
  std::vector<double> curve;
  for (double x : grid) curve.push_back(fr_vs_field(fit.params, x));
  Json ds = report::series("data", b, fr);
  ds["y_err"] = report::numbers(err);
  o.figures.push_back(report::figure("fr_vs_field", "in-plane field", "T", "f_r", "Hz",
                                     {ds, report::series("model", grid, curve)}));
  return o;
}

Outcome run_design(const RunConfig& c, const Logger& log) {
  Outcome o;
  ArraySpec a;
  a.junction = c.junction;
  a.n_junctions = c.n_junctions;
  a.total_length = c.total_length;
  a.c_per_length = c.c_per_length;
  if (c.extra_inductance)
    a.extra_inductance = *c.extra_inductance;
  else if (c.l_total)
    a.extra_inductance = extra_inductance_for_total(a, *c.l_total);
  const std::optional<double> l_eq = c.standard_l_eq ? std::nullopt : c.l_eq_override;
  const std::optional<double> f_loaded = c.no_f_loaded ? std::nullopt : c.f_loaded;
  log.info("design: N = " + std::to_string(a.n_junctions));
  const auto r = quarter_wave(a, l_eq, f_loaded);
  o.results = report::design(r);
  o.results["array"]["extra_inductance"] = report::quantity(a.extra_inductance, "H");
  o.warnings = r.notes;

  std::vector<double> ns, ks;
  for (int n = std::max(1, a.n_junctions - 8); n <= a.n_junctions + 8; ++n) {
    ns.push_back(n);
    ks.push_back(kerr_from_array(r.e_c, n));
  }
  o.figures.push_back(report::figure("kerr_vs_junction_count", "N", "", "K", "Hz",
                                     {report::series("E_C / N^2", ns, ks)}));
  return o;
}

Outcome run_predict_field(const RunConfig& c, const Logger& log) {
  Outcome o;
  const double angle = c.evaporation_angle_deg * constants::kPi / 180.0;
  auto film = [&](double nominal) {
    FilmSpec f;
    f.thickness = angled_thickness(nominal, angle);
    f.london_depth = c.london_depth;
    f.pippard_length = c.pippard_length;
    f.bulk_critical_field = c.bulk_critical_field;
    return f;
  };
  const FilmSpec bottom = film(c.bottom_nominal);
  const FilmSpec top = film(c.top_nominal);
  auto film_json = [](const FilmSpec& f) {
    return Json{{"thickness", report::quantity(f.thickness, "m")},
                {"lambda_eff", report::quantity(effective_penetration_depth(f), "m")},
                {"b_crit_parallel", report::quantity(parallel_critical_field(f), "T")}};
  };
  log.info("predict-field");
  o.results["bottom_film"] = film_json(bottom);
  o.results["top_film"] = film_json(top);
  const double b_crit = std::min(parallel_critical_field(bottom), parallel_critical_field(top));
  const double b_phi0 = flux_quantum_field(c.junction.width, c.junction.t_ox, bottom, top);
  o.results["b_crit_parallel"] = report::quantity(b_crit, "T");
  o.results["b_phi0"] = report::quantity(b_phi0, "T");

  const FieldModelParams unit{1.0, b_crit, b_phi0};
  const auto grid = synth::linspace(0.0, 0.999 * std::min(b_crit, b_phi0), 201);
  std::vector<double> curve;
  for (double b : grid) curve.push_back(fr_vs_field(unit, b));
  o.figures.push_back(report::figure("predicted_fr_vs_field", "in-plane field", "T", "f_r / f0", "",
                                     {report::series("prediction", grid, curve)}));
  return o;
}

Outcome run_synth(const RunConfig& c, const Logger& log) {
  Outcome o;
  if (c.data.empty()) throw UsageError("synth needs --data for the generated CSV");
  const auto fmt = c.format == "reim"       ? io::ValueFormat::kReIm
                   : c.format == "magphase" ? io::ValueFormat::kMagPhase
                                            : throw UsageError("--format must be reim or magphase");
  const synth::NoiseSpec noise{c.snr_db, c.seed};
  std::ostringstream csv;
  std::size_t rows = 0;
  if (c.kind == "linear" || c.kind == "kerr") {
    const auto res = LinearResonatorParams::from_quality(c.f_r, c.q_c, c.q_i, c.phi0);
    const EnvironmentParams env{c.amplitude, c.alpha, c.tau};
    if (c.points < kMinFitSamples) throw UsageError("--points must be at least 16");
    const auto grid = synth::resonance_grid(res, c.span_linewidths, c.points);
    if (c.kind == "linear") {
      const auto trace = synth::generate_linear_trace(res, env, grid, c.power_dbm, noise);
      io::write_trace_csv(csv, trace, fmt);
      rows = trace.size();
      o.figures.push_back(report::figure(
          "s21_magnitude", "frequency", "Hz", "|S21|", "dB",
          {report::series("synthetic", grid, magnitudes_db(trace.values()))}));
    } else {
      if (!(c.power_step > 0.0) || c.power_stop < c.power_start)
        throw UsageError("power range needs start <= stop and a positive step");
      std::vector<double> powers;
      const auto count = static_cast<std::size_t>(std::floor((c.power_stop - c.power_start) / c.power_step + 1e-9)) + 1;
      for (std::size_t k = 0; k < count; ++k) powers.push_back(c.power_start + c.power_step * static_cast<double>(k));
      const KerrParams kp{res, env, c.kerr, c.phi};
      const auto sweep = synth::generate_kerr_sweep(kp, grid, powers, parse_branch_rule(c.branch), noise);
      io::write_sweep_csv(csv, sweep, fmt);
      rows = sweep.size() * grid.size();
      std::vector<std::vector<double>> z;
      for (const auto& t : sweep.traces()) z.push_back(magnitudes_db(t.values()));
      o.figures.push_back(report::map_figure("s21_power_map", "frequency", "Hz", grid, "drive power",
                                             "dBm", powers, "|S21|", "dB", z));
    }
    o.results["single_photon_power_dbm"] = report::number(single_photon_power(res));
  } else if (c.kind == "field") {
    const FieldModelParams fp{c.f0, c.b_crit, c.b_phi0};
    if (c.field_count < 1) throw UsageError("--field-count must be positive");
    const auto fields = synth::linspace(c.field_start, c.field_stop, c.field_count);
    const auto pts = synth::generate_field_sweep(fp, fields, c.sigma_f, c.seed);
    io::write_field_csv(csv, pts);
    rows = pts.size();
    std::vector<double> fr;
    for (const auto& p : pts) fr.push_back(p.resonance);
    o.figures.push_back(report::figure("fr_vs_field", "in-plane field", "T", "f_r", "Hz",
                                       {report::series("synthetic", fields, fr)}));
  } else {
    throw UsageError("--kind must be linear, kerr or field");
  }
  const std::string text = csv.str();
  std::ofstream out(c.data, std::ios::binary);
  if (!out) throw DataError("cannot write '" + c.data + "'");
  out << text;
  out.close();
  if (!out) throw DataError("failed writing '" + c.data + "'");
  log.info("synth: wrote " + std::to_string(rows) + " rows to " + c.data);
  o.results["data_file"] = {{"path", c.data}, {"rows", rows}, {"bytes", text.size()},
                            {"fnv1a64", report::fnv1a64(text)}};
  return o;
}

}  // namespace

int run_subcommand(const RunConfig& config, std::ostream& report_out, std::ostream& log_out) {
  const Logger log(log_out, config.quiet);
  Json doc;
  doc["schema_version"] = report::kSchemaVersion;
  doc["tool"] = {{"name", "jjres"}, {"version", JJRES_VERSION}};
  doc["subcommand"] = config.subcommand;
  doc["status"] = "ok";
  doc["inputs"] = inputs_for(config);
  Outcome o;
  try {
    if (config.subcommand == "fit-linear") o = run_fit_linear(config, log);
    else if (config.subcommand == "fit-power-sweep") o = run_fit_power_sweep(config, log);
    else if (config.subcommand == "fit-kerr") o = run_fit_kerr(config, log);
    else if (config.subcommand == "fit-field") o = run_fit_field(config, log);
    else if (config.subcommand == "design") o = run_design(config, log);
    else if (config.subcommand == "predict-field") o = run_predict_field(config, log);
    else if (config.subcommand == "synth") o = run_synth(config, log);
    else throw UsageError("unknown subcommand '" + config.subcommand + "'");
  } catch (const std::exception& e) {
    o.exit_code = report::exit_code_for(e);
    o.error = report::error_object(e, o.exit_code);
    o.results = nullptr;
    log.warn(e.what());
  }
  doc["inputs"]["input_file"] = o.input_file;
  if (o.exit_code != 0) doc["status"] = o.results.is_null() ? "error" : "partial";
  doc["results"] = o.results;
  doc["warnings"] = o.warnings;
  doc["plot_data"] = {{"figures", o.figures}};
  doc["error"] = o.error;
  if (config.timestamp) doc["generated_at"] = utc_now();
  report_out << doc.dump(2) << '\n';
  return o.exit_code;
}

namespace {

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("-o,--out", c.out, "Report path (default: stdout)");
  sub->add_flag("--timestamp", c.timestamp, "Add a generated_at field to the report");
  sub->add_flag("-q,--quiet", c.quiet, "Only warnings on stderr");
}

void add_solver(CLI::App* sub, RunConfig& c) {
  sub->add_option("--max-iterations", c.max_iterations, "Levenberg-Marquardt iteration cap")
      ->check(CLI::PositiveNumber);
  sub->add_option("--ftol", c.ftol, "Relative cost-decrease tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--xtol", c.xtol, "Relative step tolerance")->check(CLI::PositiveNumber);
}

void add_linear(CLI::App* sub, RunConfig& c) {
  sub->add_option("--wing-fraction", c.wing_fraction, "Fraction of samples per edge for the delay estimate");
  sub->add_flag("!--no-refine-delay", c.refine_delay, "Skip the circle-residual delay refinement");
  sub->add_flag("--ignore-sigma", c.ignore_sigma, "Fit unweighted even when a sigma column exists");
  add_solver(sub, c);
}

void add_junction(CLI::App* sub, RunConfig& c) {
  sub->add_option("--r-normal", c.junction.r_normal, "Junction normal-state resistance [Ohm]");
  sub->add_option("--width", c.junction.width, "Junction width [m]");
  sub->add_option("--length", c.junction.length, "Junction length [m]");
  sub->add_option("--t-ox", c.junction.t_ox, "Barrier thickness [m]");
  sub->add_option("--epsilon-r", c.junction.epsilon_r, "Barrier relative permittivity");
  sub->add_option("--delta0-ev", c.junction.delta0_ev, "Superconducting gap [eV]");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string save_config;
  CLI::App app{"Notch-resonator spectroscopy fits and Josephson-array design"};
  app.set_version_flag("--version", std::string(JJRES_VERSION));
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.add_option("--save-config", save_config, "Write the given options to this path as a config file")
      ->configurable(false);
  app.require_subcommand(1, 1);

  auto* fl = app.add_subcommand("fit-linear", "Fit one trace to the linear notch model");
  add_common(fl, c);
  fl->add_option("-i,--input", c.input, "Trace CSV")->required();
  add_linear(fl, c);
  fl->add_option("--power-index", c.power_index, "Trace index when the input is a power sweep");
  fl->add_flag("--segment", c.segment, "Detect dips and fit each window separately");
  fl->add_option("--dip-threshold-db", c.dip_threshold_db, "Dip prominence below the median background");
  fl->add_option("--dip-window", c.dip_window_linewidths, "Window width in estimated linewidths");
  fl->add_option("--dip-min-separation", c.dip_min_separation, "Minimum samples between dips");

  auto* ps = app.add_subcommand("fit-power-sweep", "Linear fit of every power slice; Q_i vs photon number");
  add_common(ps, c);
  ps->add_option("-i,--input", c.input, "Power-sweep CSV")->required();
  add_linear(ps, c);
  ps->add_flag("--global-photon-calibration", c.global_photon_calibration,
               "Photon numbers from the lowest-power fit instead of each slice's own fit");
  ps->add_option("-j,--jobs", c.jobs, "Concurrent slice fits (0: all cores)");

  auto* kf = app.add_subcommand("fit-kerr", "Two-stage Kerr fit of a power sweep");
  add_common(kf, c);
  kf->add_option("-i,--input", c.input, "Power-sweep CSV")->required();
  add_linear(kf, c);
  kf->add_option("--branch", c.branch, "lowest | highest | sweep-continuation")
      ->check(CLI::IsMember({"lowest", "highest", "sweep-continuation"}));
  kf->add_flag("--mask-bistable", c.mask_bistable, "Drop points with three steady states");
  kf->add_flag("--free-all", c.free_all, "Diagnostic: refine all parameters jointly");
  kf->add_option("--initial-kerr", c.initial_kerr, "Starting K [Hz]; default is a coarse scan");
  kf->add_option("--linear-margin-db", c.linear_margin_db,
                 "Stage-one slice lies at least this far below the single-photon power");

  auto* ff = app.add_subcommand("fit-field", "Fit f_r(B) to a field sweep");
  add_common(ff, c);
  ff->add_option("-i,--input", c.input, "Field CSV (field_t, fr_hz[, sigma_hz])")->required();
  ff->add_option("--f0-guess", c.f0_guess, "Starting f0 [Hz]");
  ff->add_option("--b-crit-guess", c.b_crit_guess, "Starting B_crit [T]");
  ff->add_option("--b-phi0-guess", c.b_phi0_guess, "Starting B_Phi0 [T]");
  ff->add_flag("--scale-by-reduced-chi2", c.scale_by_reduced_chi2,
               "Scale uncertainties by the reduced chi-square");
  add_solver(ff, c);

  auto* de = app.add_subcommand("design", "Junction-array resonator design numbers");
  add_common(de, c);
  add_junction(de, c);
  de->add_option("-n,--n-junctions", c.n_junctions, "Junctions in the array")->check(CLI::PositiveNumber);
  de->add_option("--total-length", c.total_length, "Array length [m]");
  de->add_option("--c-per-length", c.c_per_length, "Capacitance to ground per length [F/m]");
  de->add_option("--l-total", c.l_total, "Total array inductance [H]; sets the extra inductance");
  de->add_option("--extra-inductance", c.extra_inductance, "Extra series inductance [H]; wins over --l-total");
  de->add_option("--l-eq-override", c.l_eq_override, "Lumped inductance [H] replacing 8 L_tot / pi^2");
  de->add_flag("--standard-l-eq", c.standard_l_eq, "Use 8 L_tot / pi^2 and ignore the override");
  de->add_option("--f-loaded", c.f_loaded, "Loaded resonance [Hz] used for the loaded C_eq and Z_eq");
  de->add_flag("--no-f-loaded", c.no_f_loaded, "Skip the loaded-resonance quantities");

  auto* pf = app.add_subcommand("predict-field", "Thin-film critical field and B_Phi0 prediction");
  add_common(pf, c);
  add_junction(pf, c);
  pf->add_option("--london-depth", c.london_depth, "London penetration depth [m]");
  pf->add_option("--pippard-length", c.pippard_length, "Pippard coherence length [m]");
  pf->add_option("--bulk-critical-field", c.bulk_critical_field, "Bulk critical field [T]");
  pf->add_option("--bottom-nominal", c.bottom_nominal, "Nominal bottom-lead thickness [m]");
  pf->add_option("--top-nominal", c.top_nominal, "Nominal top-lead thickness [m]");
  pf->add_option("--evaporation-angle", c.evaporation_angle_deg, "Evaporation angle from normal [deg]");

  auto* sy = app.add_subcommand("synth", "Generate synthetic data (CSV) from the forward models");
  add_common(sy, c);
  sy->add_option("--kind", c.kind, "linear | kerr | field")->check(CLI::IsMember({"linear", "kerr", "field"}));
  sy->add_option("--data", c.data, "Output CSV path")->required();
  sy->add_option("--format", c.format, "reim | magphase")->check(CLI::IsMember({"reim", "magphase"}));
  sy->add_option("--seed", c.seed, "Noise seed");
  sy->add_option("--snr-db", c.snr_db, "Background SNR [dB]; omit for noiseless")->check(CLI::PositiveNumber);
  sy->add_option("--f-r", c.f_r, "Resonance frequency [Hz]");
  sy->add_option("--q-c", c.q_c, "Coupling quality factor");
  sy->add_option("--q-i", c.q_i, "Internal quality factor");
  sy->add_option("--phi0", c.phi0, "Mismatch phase [rad]");
  sy->add_option("--amplitude", c.amplitude, "Background amplitude");
  sy->add_option("--alpha", c.alpha, "Background phase [rad]");
  sy->add_option("--tau", c.tau, "Cable delay [s]");
  sy->add_option("--span-linewidths", c.span_linewidths, "Grid span in loaded linewidths");
  sy->add_option("--points", c.points, "Grid points");
  sy->add_option("--power-dbm", c.power_dbm, "Drive power of a linear trace [dBm]");
  sy->add_option("--kerr", c.kerr, "Self-Kerr coefficient [Hz]");
  sy->add_option("--phi", c.phi, "Kerr-model mismatch phase [rad]");
  sy->add_option("--branch", c.branch, "Branch rule for kerr sweeps")
      ->check(CLI::IsMember({"lowest", "highest", "sweep-continuation"}));
  sy->add_option("--power-start", c.power_start, "First sweep power [dBm]");
  sy->add_option("--power-stop", c.power_stop, "Last sweep power [dBm]");
  sy->add_option("--power-step", c.power_step, "Sweep power step [dB]");
  sy->add_option("--f0", c.f0, "Zero-field resonance [Hz]");
  sy->add_option("--b-crit", c.b_crit, "Critical field [T]");
  sy->add_option("--b-phi0", c.b_phi0, "Flux-quantum field [T]");
  sy->add_option("--field-start", c.field_start, "First field [T]");
  sy->add_option("--field-stop", c.field_stop, "Last field [T]");
  sy->add_option("--field-count", c.field_count, "Number of fields");
  sy->add_option("--sigma-f", c.sigma_f, "Gaussian noise on f_r [Hz]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const UsageError usage(e.what());
    Json doc;
    doc["schema_version"] = report::kSchemaVersion;
    doc["tool"] = {{"name", "jjres"}, {"version", JJRES_VERSION}};
    doc["subcommand"] = nullptr;
    doc["status"] = "error";
    doc["error"] = report::error_object(usage, 2);
    err << "jjres: " << e.what() << '\n';
    out << doc.dump(2) << '\n';
    return 2;
  }
  for (const auto* sub : app.get_subcommands()) c.subcommand = sub->get_name();

  if (!save_config.empty()) {
    std::ofstream cfg(save_config);
    cfg << app.config_to_str(false, true);
    if (!cfg) {
      err << "jjres: cannot write config '" << save_config << "'\n";
      return 2;
    }
  }

  if (c.out.empty()) return run_subcommand(c, out, err);
  std::ostringstream buffer;
  const int code = run_subcommand(c, buffer, err);
  std::ofstream file(c.out, std::ios::binary);
  if (!file) {
    err << "jjres: cannot write report '" << c.out << "'\n";
    out << buffer.str();
    return code != 0 ? code : 2;
  }
  file << buffer.str();
  return code;
}

}  // namespace jjres::app
