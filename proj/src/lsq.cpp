#include "jjres/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jjres::lsq {

const char* to_string(Status status) {
  switch (status) {
    case Status::kCostConverged: return "cost_converged";
    case Status::kStepConverged: return "step_converged";
    case Status::kGradientConverged: return "gradient_converged";
    case Status::kExactFit: return "exact_fit";
    case Status::kMaxIterations: return "max_iterations";
    case Status::kStuck: return "stuck";
  }
  return "unknown";
}

bool numeric_jacobian(const Problem& problem, const Vector& x, const Vector& r0, Matrix& jac,
                      const Options& options) {
  jac.resize(problem.n_residuals, problem.n_params);
  Vector xp = x;
  Vector rp(problem.n_residuals);
  Vector rm(problem.n_residuals);
  for (Eigen::Index j = 0; j < problem.n_params; ++j) {
    const double h = options.fd_step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const bool ok_plus = problem.residuals(xp, rp);
    if (options.central_differences) {
      xp[j] = x[j] - h;
      const bool ok_minus = problem.residuals(xp, rm);
      if (ok_plus && ok_minus) {
        jac.col(j) = (rp - rm) / (2.0 * h);
      } else if (ok_plus) {
        jac.col(j) = (rp - r0) / h;
      } else if (ok_minus) {
        jac.col(j) = (r0 - rm) / h;
      } else {
        return false;
      }
    } else {
      if (ok_plus) {
        jac.col(j) = (rp - r0) / h;
      } else {
        // One-sided step away from the domain boundary.
        xp[j] = x[j] - h;
        if (!problem.residuals(xp, rm)) return false;
        jac.col(j) = (r0 - rm) / h;
      }
    }
    xp[j] = x[j];
  }
  return true;
}

Result levenberg_marquardt(const Problem& problem, Vector x0, const Options& options) {
  const Eigen::Index n = problem.n_params;
  const Eigen::Index m = problem.n_residuals;
  if (x0.size() != n) throw std::invalid_argument("starting point has the wrong dimension");
  if (m < n) throw std::invalid_argument("fewer residuals than parameters");

  Result res;
  res.x = std::move(x0);
  res.residuals.resize(m);
  if (!problem.residuals(res.x, res.residuals))
    throw std::invalid_argument("starting point is outside the model domain");
  res.evaluations = 1;
  res.cost = 0.5 * res.residuals.squaredNorm();

  auto eval_jacobian = [&](const Vector& x, const Vector& r, Matrix& jac) {
    if (problem.jacobian) return problem.jacobian(x, jac);
    return numeric_jacobian(problem, x, r, jac, options);
  };
  if (!eval_jacobian(res.x, res.residuals, res.jacobian))
    throw std::invalid_argument("jacobian undefined at the starting point");

  Vector diag = res.jacobian.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n; ++j)
    if (diag[j] == 0.0) diag[j] = 1.0;

  double mu = 1e-3;
  double nu = 2.0;
  Matrix augmented(m + n, n);
  Vector rhs(m + n);
  Vector trial_r(m);

  if (res.cost == 0.0) {
    res.status = Status::kExactFit;
    return res;
  }

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    const Vector grad = res.jacobian.transpose() * res.residuals;
    double gscaled = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      gscaled = std::max(gscaled, std::abs(grad[j]) / (diag[j] * std::max(res.residuals.norm(), 1e-300)));
    if (gscaled <= options.gtol) {
      res.status = Status::kGradientConverged;
      return res;
    }

    augmented.topRows(m) = res.jacobian;
    augmented.bottomRows(n) = (std::sqrt(mu) * diag).asDiagonal();
    rhs.head(m) = -res.residuals;
    rhs.tail(n).setZero();
    const Vector step = augmented.colPivHouseholderQr().solve(rhs);
    const bool small_step = step.norm() <= options.xtol * (res.x.norm() + options.xtol);

    const Vector trial_x = res.x + step;
    const bool in_domain = problem.residuals(trial_x, trial_r);
    ++res.evaluations;
    const double trial_cost = in_domain ? 0.5 * trial_r.squaredNorm() : HUGE_VAL;
    const double predicted =
        res.cost - 0.5 * (res.residuals + res.jacobian * step).squaredNorm();
    const double actual = res.cost - trial_cost;
    const double rho = predicted > 0.0 ? actual / predicted : -1.0;

    if (in_domain && std::isfinite(trial_cost) && actual > 0.0 && rho > 0.0) {
      Matrix trial_jac;
      if (!eval_jacobian(trial_x, trial_r, trial_jac)) {
        mu *= nu;
        nu *= 2.0;
        continue;
      }
      const double relative_decrease = actual / res.cost;
      res.x = trial_x;
      res.residuals = trial_r;
      res.jacobian = std::move(trial_jac);
      res.cost = trial_cost;
      const Vector col_norms = res.jacobian.colwise().norm().transpose();
      diag = diag.cwiseMax(col_norms);
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (res.cost == 0.0) {
        res.status = Status::kExactFit;
        ++res.iterations;
        return res;
      }
      if (relative_decrease < options.ftol) {
        res.status = Status::kCostConverged;
        ++res.iterations;
        return res;
      }
      if (small_step) {
        res.status = Status::kStepConverged;
        ++res.iterations;
        return res;
      }
    } else {
      if (small_step) {
        res.status = Status::kStepConverged;
        return res;
      }
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e30) {
        res.status = Status::kStuck;
        return res;
      }
    }
  }
  res.status = Status::kMaxIterations;
  return res;
}

Matrix normal_inverse(const Matrix& jac, double rcond) {
  Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rcond * (s.size() > 0 ? s[0] : 0.0);
  Vector inv_sq = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff && s[i] > 0.0) inv_sq[i] = 1.0 / (s[i] * s[i]);
  const Matrix& v = svd.matrixV();
  return v * inv_sq.asDiagonal() * v.transpose();
}

Matrix correlation(const Matrix& covariance) {
  Matrix corr = covariance;
  for (Eigen::Index i = 0; i < covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < covariance.cols(); ++j) {
      const double d = std::sqrt(covariance(i, i) * covariance(j, j));
      corr(i, j) = d > 0.0 ? covariance(i, j) / d : (i == j ? 1.0 : 0.0);
    }
  return corr;
}

}  // namespace jjres::lsq
