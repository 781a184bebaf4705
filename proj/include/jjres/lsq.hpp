#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace jjres::lsq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Real-valued nonlinear least-squares problem min 1/2 |r(x)|^2.
///
/// `residuals` returns false when x lies outside the model domain; the solver
/// then treats the trial step as rejected and shrinks the trust region.
/// Without a `jacobian` callback the solver uses finite differences.
struct Problem {
  Eigen::Index n_params = 0;
  Eigen::Index n_residuals = 0;
  std::function<bool(const Vector& x, Vector& r)> residuals;
  std::function<bool(const Vector& x, Matrix& jac)> jacobian;
};

struct Options {
  int max_iterations = 200;
  double ftol = 1e-12;  // relative cost decrease of an accepted step
  double xtol = 1e-10;  // relative step norm
  double gtol = 1e-15;  // scaled gradient infinity norm
  double fd_step = 1e-7;
  bool central_differences = false;
};

enum class Status {
  kCostConverged,
  kStepConverged,
  kGradientConverged,
  kExactFit,
  kMaxIterations,
  kStuck,
};

const char* to_string(Status status);

struct Result {
  Vector x;
  Vector residuals;
  Matrix jacobian;
  double cost = 0.0;  // 1/2 |r|^2
  int iterations = 0;
  int evaluations = 0;
  Status status = Status::kMaxIterations;

  bool converged() const noexcept {
    return status != Status::kMaxIterations && status != Status::kStuck;
  }
};

/// Trust-region Levenberg-Marquardt with Marquardt diagonal scaling and
/// Nielsen damping updates. Each step is the least-squares solution of the
/// augmented system [J; sqrt(mu) D] h = -[r; 0], computed by pivoted QR.
///
/// Throws std::invalid_argument when the starting point is outside the domain.
Result levenberg_marquardt(const Problem& problem, Vector x0, const Options& options = {});

/// Finite-difference Jacobian of the problem's residuals at x.
bool numeric_jacobian(const Problem& problem, const Vector& x, const Vector& r0, Matrix& jac,
                      const Options& options);

/// (J^T J)^+ via SVD, dropping singular values below rcond * s_max.
Matrix normal_inverse(const Matrix& jac, double rcond = 1e-12);

/// Converts a covariance matrix into a correlation matrix.
Matrix correlation(const Matrix& covariance);

}  // namespace jjres::lsq
