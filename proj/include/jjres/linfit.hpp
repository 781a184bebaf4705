#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jjres/core.hpp"
#include "jjres/lsq.hpp"

namespace jjres {

/// Linear notch model
///   S21 = a e^{i alpha} e^{-i 2 pi f tau} (2i D + kL - kc e^{i phi0}/cos phi0) / (2i D + kL)
/// with D = 2 pi (f_r - f) and kL = kc + kint.
Complex model_s21_linear(const LinearResonatorParams& res, const EnvironmentParams& env,
                         double frequency);

std::vector<Complex> model_s21_linear(const LinearResonatorParams& res,
                                      const EnvironmentParams& env,
                                      std::span<const double> frequencies);

/// Cable delay from the phase slope of the outer `wing_fraction` of samples on
/// both edges of the trace. The two wings share one slope and get separate
/// offsets, so a resonance between them (including a 2 pi winding) does not
/// bias the regression.
double estimate_delay(const FrequencyTrace& trace, double wing_fraction = 0.1);

struct Circle {
  Complex center;
  double radius = 0.0;
};

/// Algebraic circle fit with Taubin normalization.
/// Throws DegenerateGeometryError for fewer than three or collinear points.
Circle circle_fit(std::span<const Complex> points);

/// RMS geometric distance of the points from the circle.
double circle_rms(std::span<const Complex> points, const Circle& circle);

struct LinearFitOptions {
  double wing_fraction = 0.1;
  bool refine_delay = true;         // 1-D circle-residual refinement of the wing estimate
  bool use_sigma = true;            // weight by the trace's sigma column when present
  double min_span_linewidths = 5.0;  // below this, a warning is attached
  lsq::Options solver{};
};

/// Order of the free parameters in LinearFitResult::covariance.
inline constexpr std::array<const char*, 7> kLinearParamNames = {
    "f_r", "kappa_c", "kappa_int", "phi0", "amplitude", "alpha", "tau"};

struct LinearFitResult {
  LinearResonatorParams resonator;
  EnvironmentParams environment;
  std::array<double, 7> uncertainties{};  // 1-sigma, order of kLinearParamNames
  Eigen::Matrix<double, 7, 7> covariance = Eigen::Matrix<double, 7, 7>::Zero();
  double residual_rms = 0.0;
  double n_photons = 0.0;
  double drive_power = 0.0;  // dBm
  int iterations = 0;
  std::string solver_status;
  std::vector<std::string> warnings;
  double grid_min = 0.0;  // Hz, first sample of the fitted trace
  double grid_max = 0.0;  // Hz, last sample of the fitted trace
  std::size_t grid_size = 0;

  double sigma_f_r() const { return uncertainties[0]; }
  double sigma_kappa_c() const { return uncertainties[1]; }
  double sigma_kappa_int() const { return uncertainties[2]; }
  double q_c() const { return resonator.q_c(); }
  double q_i() const { return resonator.q_i(); }
  double q_l() const { return resonator.q_l(); }
  /// First-order 1-sigma on the quality factors from the covariance.
  double sigma_q_c() const;
  double sigma_q_i() const;
  double sigma_q_l() const;
};

/// Initial guess produced by the derivative-free pipeline (delay, circle, phase).
struct LinearInitialGuess {
  LinearResonatorParams resonator;
  EnvironmentParams environment;
  Circle circle;
  double q_l = 0.0;
};

LinearInitialGuess initial_guess_linear(const FrequencyTrace& trace,
                                        const LinearFitOptions& options = {});

/// Fits one dip to the linear notch model. See LinearFitOptions for knobs.
/// Throws ConvergenceError (last iterate in kLinearParamNames order) when the
/// refinement stalls.
LinearFitResult fit_linear(const FrequencyTrace& trace, const LinearFitOptions& options = {});

/// On-resonance steady-state photon number 2 kc / kL^2 * P / (hbar w0).
double photon_number(const LinearResonatorParams& res, double p_feedline_dbm);

/// Window of samples around one detected dip, [first, last).
struct DipWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t minimum = 0;    // index of the deepest sample
  double depth_db = 0.0;      // below the median background
  double linewidth = 0.0;     // Hz, FWHM estimate of |S21|^2 dip
};

struct DipDetectionOptions {
  double threshold_db = 3.0;       // prominence below the median background
  double window_linewidths = 20.0;
  std::size_t min_separation = 8;  // samples between distinct dips
};

/// Segments a multi-resonator scan into one window per dip.
std::vector<DipWindow> find_dips(const FrequencyTrace& trace,
                                 const DipDetectionOptions& options = {});

}  // namespace jjres
