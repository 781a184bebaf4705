#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "jjres/core.hpp"
#include "jjres/linfit.hpp"
#include "jjres/lsq.hpp"

namespace jjres {

/// Which steady state to report where the photon-number cubic has three roots.
enum class BranchRule {
  kLowest,
  kHighest,
  kSweepContinuation,  // nearest root to the previous point of an upward sweep
};

/// Parses "lowest" / "highest" / "sweep-continuation". Throws UsageError.
BranchRule parse_branch_rule(std::string_view name);
const char* to_string(BranchRule rule);

/// Kerr-nonlinear notch resonator. K [Hz] > 0 shifts the resonance down with power.
struct KerrParams {
  LinearResonatorParams linear;
  EnvironmentParams environment;
  double kerr = 0.0;
  double phi = 0.0;
};

void validate(const KerrParams& params);

/// Real non-negative roots, ascending, of
///   1/2 = (delta^2 + 1/4) n - 2 delta xi n^2 + xi^2 n^3.
/// Returns one root, or three (a double root at a bifurcation appears twice).
/// Negative xi is folded onto (-delta, -xi), which leaves the cubic unchanged.
std::vector<double> solve_photon_cubic(double delta, double xi);

/// Residual of the cubic relative to max(1/2, largest term).
double photon_cubic_residual(double delta, double xi, double n);

/// Reduced quantities of one drive point.
struct KerrOperatingPoint {
  double delta = 0.0;  // (w0 - wd) / kL
  double xi = 0.0;     // |alpha_in|^2 kc K / kL^3, K angular
  double n = 0.0;      // renormalized photon number on the selected branch
  std::size_t root_count = 1;
  double photons = 0.0;  // <N_ph> = n |alpha_in|^2 kc / kL^2
};

KerrOperatingPoint kerr_operating_point(const KerrParams& params, double frequency,
                                        double p_feedline_dbm, BranchRule branch = BranchRule::kLowest,
                                        std::optional<double> previous_n = std::nullopt);

/// Nonlinear S21 at one point. Sweep continuation needs `previous_n`; without
/// it the lowest root is used.
Complex model_s21_kerr(const KerrParams& params, double frequency, double p_feedline_dbm,
                       BranchRule branch = BranchRule::kLowest,
                       std::optional<double> previous_n = std::nullopt);

/// Nonlinear S21 along an ascending frequency grid at one power.
std::vector<Complex> model_s21_kerr(const KerrParams& params, std::span<const double> frequencies,
                                    double p_feedline_dbm, BranchRule branch = BranchRule::kLowest);

struct KerrFitOptions {
  BranchRule branch = BranchRule::kLowest;
  std::optional<double> initial_kerr;  // Hz; a coarse log scan is used when absent
  bool mask_bistable = false;          // drop points with three roots at the starting guess
  bool free_all = false;               // diagnostic: refine every parameter jointly
  // Adds the linear fit's covariance of the held parameters to the (K, phi) covariance.
  bool propagate_linear_covariance = true;
  // Pipeline only: stage one uses the highest-power slice at least this far below
  // the single-photon power, so the linear fit stays free of Kerr pulling.
  double linear_margin_db = 10.0;
  lsq::Options solver{};
};

struct KerrFitResult {
  KerrParams params;
  double k_uncertainty = 0.0;    // Hz, total
  double phi_uncertainty = 0.0;  // rad, total
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (K, phi), total
  // Stage-two statistical part only, with the held parameters treated as exact.
  double k_uncertainty_fit = 0.0;
  Eigen::Matrix2d covariance_fit = Eigen::Matrix2d::Zero();
  double residual_rms = 0.0;
  std::size_t points_used = 0;
  std::size_t points_masked = 0;
  int iterations = 0;
  std::string solver_status;
};

/// Second fit stage: keeps f_r, kappa_c, kappa_int and the environment from
/// the linear fit and optimizes (K, phi) over every (f, P) point of the sweep.
KerrFitResult fit_kerr(const PowerSweep& sweep, const LinearFitResult& linear,
                       const KerrFitOptions& options = {});

struct KerrPipelineResult {
  LinearFitResult linear;
  std::size_t linear_trace = 0;  // index of the sweep slice used for stage one
  double single_photon_power = 0.0;
  KerrFitResult kerr;
};

/// Both stages: a linear fit of a slice well below the single-photon power
/// (falling back to the lowest power), then fit_kerr on the whole sweep.
KerrPipelineResult fit_power_sweep_kerr(const PowerSweep& sweep,
                                        const LinearFitOptions& linear_options = {},
                                        const KerrFitOptions& kerr_options = {});

/// Feedline power [dBm] at which the on-resonance photon number equals one.
double single_photon_power(const LinearResonatorParams& res);

/// Array Kerr estimate E_C / N^2 [Hz].
double kerr_from_array(double e_c, int n_junctions);

}  // namespace jjres
