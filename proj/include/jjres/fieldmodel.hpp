#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jjres/core.hpp"
#include "jjres/lsq.hpp"

namespace jjres {

/// Superconducting lead film. The effective-depth formula assumes a dirty thin
/// film with the mean free path limited by the thickness.
struct FilmSpec {
  double thickness = 0.0;            // m
  double london_depth = 16e-9;       // m
  double pippard_length = 1600e-9;   // m
  double bulk_critical_field = 10e-3;  // T

  bool thin_film() const noexcept { return thickness < pippard_length; }

  /// Aluminium film with the given thickness.
  static FilmSpec aluminum(double thickness);
};

/// Film thickness deposited by an evaporation tilted by `angle_rad` from the normal.
/// Defaults to 45 degrees (nominal / sqrt 2).
double angled_thickness(double nominal, double angle_rad = constants::kPi / 4);

double effective_penetration_depth(const FilmSpec& film);
double parallel_critical_field(const FilmSpec& film);

/// Gap suppression Delta0 sqrt(1 - (b/b_crit)^2). Throws DomainError once the gap closes.
double gap_suppression(double delta0, double b, double b_crit);

/// In-plane field threading one flux quantum through w (lambda1 + t_ox + lambda2),
/// with lambda_i = min(lambda_eff_i, d_i).
double flux_quantum_field(double width, double t_ox, const FilmSpec& bottom, const FilmSpec& top);

struct FieldModelParams {
  double f0 = 0.0;      // Hz
  double b_crit = 0.0;  // T
  double b_phi0 = 0.0;  // T
};

void validate(const FieldModelParams& params);

/// sin(y) / y with sinc(0) = 1.
double sinc(double y);

/// f0 (1 - (b/b_crit)^2)^(1/4) sqrt(sinc(pi b / b_phi0)) on 0 <= b < min(b_crit, b_phi0).
double fr_vs_field(const FieldModelParams& params, double b);

bool in_field_domain(const FieldModelParams& params, double b);

struct FieldFitOptions {
  bool scale_by_reduced_chi2 = false;  // default treats the point sigmas as absolute
  lsq::Options solver{};
};

/// Parameter order in covariance / correlation: f0, b_crit, b_phi0.
struct FieldFitResult {
  FieldModelParams params;
  std::array<double, 3> uncertainties{};
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d correlation = Eigen::Matrix3d::Identity();
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  std::size_t points_used = 0;
  std::size_t points_excluded = 0;  // outside the starting guess's domain
  int iterations = 0;
  std::string solver_status;
  std::vector<std::string> warnings;
};

/// Weighted (1/sigma^2) least squares of fr_vs_field over (f0, b_crit, b_phi0).
FieldFitResult fit_field_sweep(std::span<const FieldSweepPoint> points,
                               const FieldModelParams& initial,
                               const FieldFitOptions& options = {});

}  // namespace jjres
