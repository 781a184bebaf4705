#include "jjres/fieldmodel.hpp"

#include <algorithm>
#include <cmath>

namespace jjres {

using constants::kPi;

FilmSpec FilmSpec::aluminum(double thickness) {
  FilmSpec film;
  film.thickness = thickness;
  return film;
}

double angled_thickness(double nominal, double angle_rad) { return nominal * std::cos(angle_rad); }

namespace {

void require_film(const FilmSpec& film) {
  if (!(film.thickness > 0.0) || !(film.london_depth > 0.0) || !(film.pippard_length > 0.0) ||
      !(film.bulk_critical_field > 0.0))
    throw DomainError("film parameters must be strictly positive");
  if (!film.thin_film())
    throw DomainError("thin-film approximation requires thickness below the Pippard length");
}

}  // namespace

double effective_penetration_depth(const FilmSpec& film) {
  require_film(film);
  return film.london_depth * std::sqrt(film.pippard_length / film.thickness);
}

double parallel_critical_field(const FilmSpec& film) {
  const double lambda_eff = effective_penetration_depth(film);
  return film.bulk_critical_field * (lambda_eff / film.thickness) * std::sqrt(24.0);
}

double gap_suppression(double delta0, double b, double b_crit) {
  if (!(b_crit > 0.0)) throw DomainError("critical field must be positive");
  if (!(b >= 0.0) || !(b < b_crit)) throw DomainError("field outside [0, b_crit): gap is closed");
  const double x = b / b_crit;
  return delta0 * std::sqrt(1.0 - x * x);
}

double flux_quantum_field(double width, double t_ox, const FilmSpec& bottom, const FilmSpec& top) {
  if (!(width > 0.0) || !(t_ox > 0.0)) throw DomainError("junction width and barrier must be positive");
  const double l1 = std::min(effective_penetration_depth(bottom), bottom.thickness);
  const double l2 = std::min(effective_penetration_depth(top), top.thickness);
  return constants::kFluxQuantum / (width * (l1 + t_ox + l2));
}

void validate(const FieldModelParams& p) {
  if (!(p.f0 > 0.0) || !(p.b_crit > 0.0) || !(p.b_phi0 > 0.0))
    throw DomainError("field model parameters must be strictly positive");
}

double sinc(double y) {
  if (std::abs(y) < 1e-4) {
    const double y2 = y * y;
    return 1.0 - y2 / 6.0 + y2 * y2 / 120.0;
  }
  return std::sin(y) / y;
}

bool in_field_domain(const FieldModelParams& p, double b) {
  return b >= 0.0 && b < p.b_crit && b < p.b_phi0;
}

double fr_vs_field(const FieldModelParams& p, double b) {
  validate(p);
  if (!in_field_domain(p, b))
    throw DomainError("field outside the model domain [0, min(b_crit, b_phi0))");
  const double x = b / p.b_crit;
  return p.f0 * std::pow(1.0 - x * x, 0.25) * std::sqrt(sinc(kPi * b / p.b_phi0));
}

FieldFitResult fit_field_sweep(std::span<const FieldSweepPoint> points,
                               const FieldModelParams& initial, const FieldFitOptions& options) {
  validate(initial);
  for (const auto& p : points) validate(p);

  FieldFitResult out;
  std::vector<FieldSweepPoint> used;
  for (const auto& p : points) {
    if (in_field_domain(initial, p.field)) {
      used.push_back(p);
    } else {
      ++out.points_excluded;
    }
  }
  if (out.points_excluded > 0)
    out.warnings.push_back(std::to_string(out.points_excluded) +
                           " point(s) beyond the initial guess's domain were excluded");
  if (used.size() < 4) throw DataError("field fit needs at least 4 points inside the model domain");

  double b_max = 0.0;
  for (const auto& p : used) b_max = std::max(b_max, p.field);

  auto unpack = [&](const lsq::Vector& x) {
    return FieldModelParams{x[0] * initial.f0, x[1] * initial.b_crit, x[2] * initial.b_phi0};
  };
  auto admissible = [&](const FieldModelParams& p) {
    return p.f0 > 0.0 && p.b_crit > b_max && p.b_phi0 > b_max;
  };

  const auto m = static_cast<Eigen::Index>(used.size());
  lsq::Problem problem;
  problem.n_params = 3;
  problem.n_residuals = m;
  problem.residuals = [&](const lsq::Vector& x, lsq::Vector& r) {
    const FieldModelParams p = unpack(x);
    if (!admissible(p)) return false;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& pt = used[static_cast<std::size_t>(i)];
      r[i] = (pt.resonance - fr_vs_field(p, pt.field)) / pt.sigma;
    }
    return true;
  };
  problem.jacobian = [&](const lsq::Vector& x, lsq::Matrix& jac) {
    const FieldModelParams p = unpack(x);
    if (!admissible(p)) return false;
    jac.resize(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& pt = used[static_cast<std::size_t>(i)];
      const double b = pt.field;
      const double f = fr_vs_field(p, b);
      const double g = 1.0 - (b / p.b_crit) * (b / p.b_crit);
      const double y = kPi * b / p.b_phi0;
      const double s = sinc(y);
      // d sinc / dy, series near 0.
      const double ds = std::abs(y) < 1e-4 ? -y / 3.0 : (y * std::cos(y) - std::sin(y)) / (y * y);
      const double df_df0 = f / p.f0;
      const double df_dbc = f * b * b / (2.0 * p.b_crit * p.b_crit * p.b_crit * g);
      const double df_dbp = f * 0.5 * (ds / s) * (-y / p.b_phi0);
      jac(i, 0) = -df_df0 * initial.f0 / pt.sigma;
      jac(i, 1) = -df_dbc * initial.b_crit / pt.sigma;
      jac(i, 2) = -df_dbp * initial.b_phi0 / pt.sigma;
    }
    return true;
  };

  const auto sol = lsq::levenberg_marquardt(problem, lsq::Vector::Ones(3), options.solver);
  const FieldModelParams fitted = unpack(sol.x);
  if (!sol.converged())
    throw ConvergenceError(std::string("field fit did not converge (") + lsq::to_string(sol.status) +
                               ")",
                           {fitted.f0, fitted.b_crit, fitted.b_phi0}, sol.iterations);

  out.params = fitted;
  out.points_used = used.size();
  out.iterations = sol.iterations;
  out.solver_status = lsq::to_string(sol.status);
  out.chi2 = 2.0 * sol.cost;
  const double dof = static_cast<double>(m - 3);
  out.reduced_chi2 = dof > 0 ? out.chi2 / dof : 0.0;

  lsq::Matrix cov = lsq::normal_inverse(sol.jacobian);
  if (options.scale_by_reduced_chi2 && dof > 0) cov *= out.reduced_chi2;
  const Eigen::Vector3d scale(initial.f0, initial.b_crit, initial.b_phi0);
  out.covariance = scale.asDiagonal() * cov * scale.asDiagonal();
  out.correlation = lsq::correlation(out.covariance);
  for (int j = 0; j < 3; ++j)
    out.uncertainties[static_cast<std::size_t>(j)] = std::sqrt(std::max(out.covariance(j, j), 0.0));
  return out;
}

}  // namespace jjres
