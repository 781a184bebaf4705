#include "jjres/kerrfit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace jjres {

using constants::kPi;
using constants::kTwoPi;

namespace {

constexpr Complex kI{0.0, 1.0};

// p(n) = xi^2 n^3 - 2 delta xi n^2 + (delta^2 + 1/4) n - 1/2
struct PhotonCubic {
  double c3;
  double c2;
  double c1;

  double value(double n) const { return ((c3 * n + c2) * n + c1) * n - 0.5; }
  double slope(double n) const { return (3.0 * c3 * n + 2.0 * c2) * n + c1; }
};

// Safeguarded Newton on a bracket where sign * p changes from <= 0 to >= 0.
double bracketed_root(const PhotonCubic& p, double lo, double hi, double sign) {
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 300; ++iter) {
    const double fx = sign * p.value(x);
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = sign * p.slope(x);
    double next = d > 0.0 ? x - fx / d : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 2.0 * std::numeric_limits<double>::epsilon() * std::abs(next) ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(hi))
      return next;
    x = next;
  }
  return x;
}

double upper_bracket(const PhotonCubic& p, double start) {
  double hi = std::max(start, 1e-300);
  while (p.value(hi) <= 0.0) hi *= 2.0;
  return hi;
}

std::vector<double> cubic_roots(double delta, double xi) {
  if (xi < 0.0) {
    delta = -delta;
    xi = -xi;
  }
  const double c1 = delta * delta + 0.25;
  if (xi == 0.0) return {0.5 / c1};
  const PhotonCubic p{xi * xi, -2.0 * delta * xi, c1};
  const double n_linear = 0.5 / c1;

  const double disc = 4.0 * delta * delta - 3.0;
  if (delta <= 0.0 || disc <= 0.0) {
    // Monotone on n >= 0.
    return {bracketed_root(p, 0.0, upper_bracket(p, n_linear), 1.0)};
  }
  const double sq = std::sqrt(disc);
  const double n_max = (4.0 * delta - sq) / (6.0 * xi);  // local maximum
  const double n_min = (4.0 * delta + sq) / (6.0 * xi);  // local minimum
  const double p_max = p.value(n_max);
  const double p_min = p.value(n_min);
  if (p_max < 0.0) return {bracketed_root(p, n_min, upper_bracket(p, 2.0 * n_min), 1.0)};
  if (p_min > 0.0) return {bracketed_root(p, 0.0, n_max, 1.0)};

  const double low = p_max == 0.0 ? n_max : bracketed_root(p, 0.0, n_max, 1.0);
  double mid;
  if (p_max == 0.0) {
    mid = n_max;
  } else if (p_min == 0.0) {
    mid = n_min;
  } else {
    mid = bracketed_root(p, n_max, n_min, -1.0);
  }
  const double high = p_min == 0.0 ? n_min : bracketed_root(p, n_min, upper_bracket(p, 2.0 * n_min), 1.0);
  return {low, mid, high};
}

double select_root(const std::vector<double>& roots, BranchRule branch,
                   std::optional<double> previous_n) {
  switch (branch) {
    case BranchRule::kLowest: return roots.front();
    case BranchRule::kHighest: return roots.back();
    case BranchRule::kSweepContinuation: {
      if (!previous_n) return roots.front();
      double best = roots.front();
      for (double r : roots)
        if (std::abs(r - *previous_n) < std::abs(best - *previous_n)) best = r;
      return best;
    }
  }
  throw UsageError("unknown branch rule");
}

// Precomputed drive quantities of one (f, P) point for fixed resonator and environment.
struct DrivePoint {
  double delta;
  double xi_per_hz;  // d xi / d K[Hz]
  double flux;
  Complex environment;
};

DrivePoint drive_point(const KerrParams& params, double frequency, double p_dbm) {
  const auto& lin = params.linear;
  const double omega_d = kTwoPi * frequency;
  const double kl = lin.kappa_l();
  const double flux = dbm_to_watts(p_dbm) / (constants::kHbar * omega_d);
  const auto& env = params.environment;
  return {(lin.omega0() - omega_d) / kl, flux * lin.kappa_c * kTwoPi / (kl * kl * kl), flux,
          env.amplitude * std::polar(1.0, env.alpha - omega_d * env.tau)};
}

Complex kerr_s21(const DrivePoint& dp, double ratio, double phi, double xi, double n) {
  return dp.environment *
         (1.0 - ratio * Complex{1.0, std::tan(phi)} / (1.0 + 2.0 * kI * (dp.delta - xi * n)));
}

}  // namespace

BranchRule parse_branch_rule(std::string_view name) {
  if (name == "lowest") return BranchRule::kLowest;
  if (name == "highest") return BranchRule::kHighest;
  if (name == "sweep-continuation") return BranchRule::kSweepContinuation;
  throw UsageError("unknown branch rule '" + std::string(name) +
                   "' (expected lowest, highest or sweep-continuation)");
}

const char* to_string(BranchRule rule) {
  switch (rule) {
    case BranchRule::kLowest: return "lowest";
    case BranchRule::kHighest: return "highest";
    case BranchRule::kSweepContinuation: return "sweep-continuation";
  }
  return "unknown";
}

void validate(const KerrParams& params) {
  validate(params.linear);
  validate(params.environment);
  if (!std::isfinite(params.kerr)) throw DomainError("Kerr coefficient must be finite");
  if (!(std::abs(params.phi) < kPi / 2)) throw DomainError("|phi| must be below pi/2");
}

std::vector<double> solve_photon_cubic(double delta, double xi) { return cubic_roots(delta, xi); }

double photon_cubic_residual(double delta, double xi, double n) {
  const double t3 = xi * xi * n * n * n;
  const double t2 = 2.0 * delta * xi * n * n;
  const double t1 = (delta * delta + 0.25) * n;
  const double scale = std::max({0.5, std::abs(t3), std::abs(t2), std::abs(t1)});
  return (t1 - t2 + t3 - 0.5) / scale;
}

KerrOperatingPoint kerr_operating_point(const KerrParams& params, double frequency,
                                        double p_feedline_dbm, BranchRule branch,
                                        std::optional<double> previous_n) {
  const DrivePoint dp = drive_point(params, frequency, p_feedline_dbm);
  KerrOperatingPoint op;
  op.delta = dp.delta;
  op.xi = dp.xi_per_hz * params.kerr;
  const auto roots = cubic_roots(op.delta, op.xi);
  op.root_count = roots.size();
  op.n = select_root(roots, branch, previous_n);
  const double kl = params.linear.kappa_l();
  op.photons = op.n * dp.flux * params.linear.kappa_c / (kl * kl);
  return op;
}

Complex model_s21_kerr(const KerrParams& params, double frequency, double p_feedline_dbm,
                       BranchRule branch, std::optional<double> previous_n) {
  const DrivePoint dp = drive_point(params, frequency, p_feedline_dbm);
  const double xi = dp.xi_per_hz * params.kerr;
  const double n = select_root(cubic_roots(dp.delta, xi), branch, previous_n);
  return kerr_s21(dp, params.linear.kappa_c / params.linear.kappa_l(), params.phi, xi, n);
}

std::vector<Complex> model_s21_kerr(const KerrParams& params, std::span<const double> frequencies,
                                    double p_feedline_dbm, BranchRule branch) {
  std::vector<Complex> out;
  out.reserve(frequencies.size());
  std::optional<double> previous;
  const double ratio = params.linear.kappa_c / params.linear.kappa_l();
  for (double f : frequencies) {
    const DrivePoint dp = drive_point(params, f, p_feedline_dbm);
    const double xi = dp.xi_per_hz * params.kerr;
    const double n = select_root(cubic_roots(dp.delta, xi), branch, previous);
    previous = n;
    out.push_back(kerr_s21(dp, ratio, params.phi, xi, n));
  }
  return out;
}

double single_photon_power(const LinearResonatorParams& res) {
  const double kl = res.kappa_l();
  return watts_to_dbm(constants::kHbar * res.omega0() * kl * kl / (2.0 * res.kappa_c));
}

double kerr_from_array(double e_c, int n_junctions) {
  if (n_junctions < 1) throw DomainError("junction count must be at least 1");
  if (!(e_c > 0.0)) throw DomainError("charging energy must be positive");
  const double n = static_cast<double>(n_junctions);
  return e_c / (n * n);
}

namespace {

struct SweepData {
  std::vector<double> frequencies;
  std::vector<double> powers;
  std::vector<Complex> values;  // trace-major
  std::vector<char> mask;       // 1 = used
  std::size_t used = 0;
};

SweepData flatten(const PowerSweep& sweep) {
  SweepData d;
  d.frequencies = sweep.frequencies();
  d.powers = sweep.powers();
  for (const auto& tr : sweep.traces())
    for (const auto& s : tr.samples()) d.values.push_back(s.value);
  d.mask.assign(d.values.size(), 1);
  d.used = d.values.size();
  return d;
}

// Evaluates residuals z - S (and optionally d/dK, d/dphi of the residual) over the sweep.
void kerr_residuals(const SweepData& data, const KerrParams& params, BranchRule branch,
                    lsq::Vector& r, lsq::Matrix* jac, double k_scale,
                    std::vector<std::size_t>* root_counts = nullptr) {
  const std::size_t nf = data.frequencies.size();
  const double ratio = params.linear.kappa_c / params.linear.kappa_l();
  const Complex g{1.0, std::tan(params.phi)};
  const double sec2 = 1.0 / (std::cos(params.phi) * std::cos(params.phi));
  const Eigen::Index m = static_cast<Eigen::Index>(data.used);
  Eigen::Index row = 0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < data.powers.size(); ++t) {
    std::optional<double> previous;
    for (std::size_t i = 0; i < nf; ++i, ++k) {
      const DrivePoint dp = drive_point(params, data.frequencies[i], data.powers[t]);
      const double xi = dp.xi_per_hz * params.kerr;
      const auto roots = cubic_roots(dp.delta, xi);
      const double n = select_root(roots, branch, previous);
      previous = n;
      if (root_counts) root_counts->push_back(roots.size());
      if (!data.mask[k]) continue;
      const Complex denom = 1.0 + 2.0 * kI * (dp.delta - xi * n);
      const Complex s = dp.environment * (1.0 - ratio * g / denom);
      const Complex res = data.values[k] - s;
      r[row] = res.real();
      r[m + row] = res.imag();
      if (jac) {
        double f_n = 3.0 * xi * xi * n * n - 4.0 * dp.delta * xi * n + dp.delta * dp.delta + 0.25;
        if (std::abs(f_n) < 1e-12) f_n = std::copysign(1e-12, f_n);
        const double f_xi = 2.0 * xi * n * n * n - 2.0 * dp.delta * n * n;
        const double dn_dxi = -f_xi / f_n;
        const double du_dk = -dp.xi_per_hz * (n + xi * dn_dxi) * k_scale;
        const Complex ds_du = dp.environment * ratio * g * 2.0 * kI / (denom * denom);
        const Complex ds_dphi = -dp.environment * ratio * kI * sec2 / denom;
        (*jac)(row, 0) = -(ds_du * du_dk).real();
        (*jac)(m + row, 0) = -(ds_du * du_dk).imag();
        (*jac)(row, 1) = -ds_dphi.real();
        (*jac)(m + row, 1) = -ds_dphi.imag();
      }
      ++row;
    }
  }
}

double sweep_cost(const SweepData& data, const KerrParams& params, BranchRule branch) {
  lsq::Vector r(2 * static_cast<Eigen::Index>(data.used));
  kerr_residuals(data, params, branch, r, nullptr, 1.0);
  return 0.5 * r.squaredNorm();
}

double initial_kerr_scan(const SweepData& data, KerrParams params, BranchRule branch) {
  double best_k = 0.0;
  params.kerr = 0.0;
  double best_cost = sweep_cost(data, params, branch);
  for (int sign : {1, -1}) {
    for (int e = 0; e <= 24; ++e) {
      params.kerr = sign * std::pow(10.0, 2.0 + 0.25 * e);
      const double c = sweep_cost(data, params, branch);
      if (c < best_cost) {
        best_cost = c;
        best_k = params.kerr;
      }
    }
  }
  return best_k;
}

KerrFitResult fit_kerr_free_all(const SweepData& data, KerrParams start,
                                const KerrFitOptions& options) {
  const double f_r0 = start.linear.f_r;
  const double kl0 = start.linear.kappa_l();
  const double w0 = kl0 / kTwoPi;
  const double a0 = start.environment.amplitude;
  const double tau0 = start.environment.tau;
  const double k_scale = std::max(std::abs(start.kerr), 100.0);
  const double span = data.frequencies.back() - data.frequencies.front();
  const double tau_scale = 1.0 / (kTwoPi * span);
  const double f_c = 0.5 * (data.frequencies.front() + data.frequencies.back());

  auto unpack = [&](const lsq::Vector& x) {
    KerrParams p = start;
    p.linear.f_r = f_r0 + x[0] * w0;
    p.linear.kappa_c = x[1] * kl0;
    p.linear.kappa_int = x[2] * kl0;
    p.environment.amplitude = x[3] * a0;
    p.environment.alpha = start.environment.alpha + x[4] + kTwoPi * f_c * x[5] * tau_scale;
    p.environment.tau = tau0 + x[5] * tau_scale;
    p.kerr = x[6] * k_scale;
    p.phi = x[7];
    return p;
  };
  lsq::Problem problem;
  problem.n_params = 8;
  problem.n_residuals = 2 * static_cast<Eigen::Index>(data.used);
  problem.residuals = [&](const lsq::Vector& x, lsq::Vector& r) {
    const KerrParams p = unpack(x);
    if (!(p.linear.kappa_c > 0.0) || !(p.linear.kappa_l() > 0.0) ||
        !(std::abs(p.phi) < kPi / 2) || !(p.environment.amplitude > 0.0))
      return false;
    kerr_residuals(data, p, options.branch, r, nullptr, 1.0);
    return true;
  };
  lsq::Vector x0(8);
  x0 << 0.0, start.linear.kappa_c / kl0, start.linear.kappa_int / kl0, 1.0, 0.0, 0.0,
      start.kerr / k_scale, start.phi;
  lsq::Options opt = options.solver;
  opt.central_differences = true;
  const auto sol = lsq::levenberg_marquardt(problem, x0, opt);
  const KerrParams p = unpack(sol.x);
  if (!sol.converged())
    throw ConvergenceError(std::string("free-all Kerr fit did not converge (") +
                               lsq::to_string(sol.status) + ")",
                           {p.kerr, p.phi}, sol.iterations);
  const double dof = static_cast<double>(problem.n_residuals - problem.n_params);
  const lsq::Matrix cov = (2.0 * sol.cost / dof) * lsq::normal_inverse(sol.jacobian);
  KerrFitResult out;
  out.params = p;
  out.covariance(0, 0) = cov(6, 6) * k_scale * k_scale;
  out.covariance(0, 1) = out.covariance(1, 0) = cov(6, 7) * k_scale;
  out.covariance(1, 1) = cov(7, 7);
  out.covariance_fit = out.covariance;
  out.k_uncertainty_fit = std::sqrt(std::max(out.covariance(0, 0), 0.0));
  out.k_uncertainty = std::sqrt(std::max(out.covariance(0, 0), 0.0));
  out.phi_uncertainty = std::sqrt(std::max(out.covariance(1, 1), 0.0));
  out.residual_rms = std::sqrt(2.0 * sol.cost / static_cast<double>(data.used));
  out.iterations = sol.iterations;
  out.solver_status = lsq::to_string(sol.status);
  return out;
}

// Sensitivity of the stage-two optimum to the held linear parameters,
//   S = -(Jx^T Jx)^-1 Jx^T Jtheta,
// maps the linear fit's covariance into the (K/k_scale, phi) coordinates.
lsq::Matrix propagated_covariance(const SweepData& data, const KerrParams& optimum,
                                  BranchRule branch, const lsq::Matrix& jac_x,
                                  const LinearFitResult& linear) {
  // Held parameters, as indices into the linear covariance.
  constexpr std::array<int, 6> kHeld = {0, 1, 2, 4, 5, 6};
  auto shifted = [&](int index, double h) {
    KerrParams p = optimum;
    switch (index) {
      case 0: p.linear.f_r += h; break;
      case 1: p.linear.kappa_c += h; break;
      case 2: p.linear.kappa_int += h; break;
      case 4: p.environment.amplitude += h; break;
      case 5: p.environment.alpha += h; break;
      case 6: p.environment.tau += h; break;
      default: break;
    }
    return p;
  };
  const Eigen::Index m = jac_x.rows();
  lsq::Matrix jac_theta = lsq::Matrix::Zero(m, 6);
  lsq::Vector rp(m);
  lsq::Vector rm(m);
  Eigen::Matrix<double, 6, 6> cov_theta;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) cov_theta(a, b) = linear.covariance(kHeld[a], kHeld[b]);
  for (int j = 0; j < 6; ++j) {
    const double sigma = std::sqrt(std::max(cov_theta(j, j), 0.0));
    if (!(sigma > 0.0)) continue;
    const double h = 1e-3 * sigma;
    const KerrParams plus = shifted(kHeld[j], h);
    const KerrParams minus = shifted(kHeld[j], -h);
    if (!(plus.linear.kappa_l() > 0.0) || !(minus.linear.kappa_l() > 0.0) ||
        !(minus.linear.kappa_c > 0.0) || !(minus.environment.amplitude > 0.0))
      continue;
    kerr_residuals(data, plus, branch, rp, nullptr, 1.0);
    kerr_residuals(data, minus, branch, rm, nullptr, 1.0);
    jac_theta.col(j) = (rp - rm) / (2.0 * h);
  }
  const lsq::Matrix sens = -lsq::normal_inverse(jac_x) * jac_x.transpose() * jac_theta;
  return sens * cov_theta * sens.transpose();
}

}  // namespace

KerrFitResult fit_kerr(const PowerSweep& sweep, const LinearFitResult& linear,
                       const KerrFitOptions& options) {
  SweepData data = flatten(sweep);
  const auto& f = data.frequencies;
  if (f.size() < kMinFitSamples) throw DataError("power sweep traces are too short to fit");
  const double tol = 1e-9 * f.back();
  if (f.size() != linear.grid_size || std::abs(f.front() - linear.grid_min) > tol ||
      std::abs(f.back() - linear.grid_max) > tol)
    throw DataError("power sweep frequency grid does not match the linear fit's grid");

  KerrParams params{linear.resonator, linear.environment, 0.0, linear.resonator.phi0};
  if (!(params.linear.kappa_int > 0.0)) params.linear.kappa_int = 1e-9 * params.linear.kappa_c;
  params.kerr = options.initial_kerr ? *options.initial_kerr
                                     : initial_kerr_scan(data, params, options.branch);

  std::size_t masked = 0;
  if (options.mask_bistable) {
    std::vector<std::size_t> counts;
    lsq::Vector scratch(2 * static_cast<Eigen::Index>(data.used));
    kerr_residuals(data, params, options.branch, scratch, nullptr, 1.0, &counts);
    for (std::size_t k = 0; k < counts.size(); ++k)
      if (counts[k] == 3) {
        data.mask[k] = 0;
        ++masked;
      }
    data.used -= masked;
    if (data.used < 2) throw DataError("every point of the sweep was masked as bistable");
  }

  KerrFitResult out;
  if (options.free_all) {
    out = fit_kerr_free_all(data, params, options);
  } else {
    const double k_scale = std::max(std::abs(params.kerr), 100.0);
    const KerrParams base = params;
    auto unpack = [&](const lsq::Vector& x) {
      KerrParams p = base;
      p.kerr = x[0] * k_scale;
      p.phi = x[1];
      return p;
    };
    lsq::Problem problem;
    problem.n_params = 2;
    problem.n_residuals = 2 * static_cast<Eigen::Index>(data.used);
    problem.residuals = [&](const lsq::Vector& x, lsq::Vector& r) {
      if (!(std::abs(x[1]) < kPi / 2)) return false;
      kerr_residuals(data, unpack(x), options.branch, r, nullptr, k_scale);
      return true;
    };
    problem.jacobian = [&](const lsq::Vector& x, lsq::Matrix& jac) {
      if (!(std::abs(x[1]) < kPi / 2)) return false;
      lsq::Vector r(problem.n_residuals);
      jac.resize(problem.n_residuals, 2);
      kerr_residuals(data, unpack(x), options.branch, r, &jac, k_scale);
      return true;
    };
    lsq::Vector x0(2);
    x0 << params.kerr / k_scale, params.phi;
    const auto sol = lsq::levenberg_marquardt(problem, x0, options.solver);
    const KerrParams p = unpack(sol.x);
    if (!sol.converged())
      throw ConvergenceError(std::string("Kerr fit did not converge (") +
                                 lsq::to_string(sol.status) + ")",
                             {p.kerr, p.phi}, sol.iterations);
    const double dof = static_cast<double>(problem.n_residuals - 2);
    const lsq::Matrix cov_fit = (2.0 * sol.cost / dof) * lsq::normal_inverse(sol.jacobian);
    lsq::Matrix cov = cov_fit;
    if (options.propagate_linear_covariance)
      cov += propagated_covariance(data, p, options.branch, sol.jacobian, linear);
    const Eigen::Vector2d scale(k_scale, 1.0);
    out.params = p;
    out.covariance_fit = scale.asDiagonal() * cov_fit * scale.asDiagonal();
    out.covariance = scale.asDiagonal() * cov * scale.asDiagonal();
    out.k_uncertainty_fit = std::sqrt(std::max(out.covariance_fit(0, 0), 0.0));
    out.k_uncertainty = std::sqrt(std::max(out.covariance(0, 0), 0.0));
    out.phi_uncertainty = std::sqrt(std::max(out.covariance(1, 1), 0.0));
    out.residual_rms = std::sqrt(2.0 * sol.cost / static_cast<double>(data.used));
    out.iterations = sol.iterations;
    out.solver_status = lsq::to_string(sol.status);
  }
  out.points_used = data.used;
  out.points_masked = masked;
  return out;
}

KerrPipelineResult fit_power_sweep_kerr(const PowerSweep& sweep,
                                        const LinearFitOptions& linear_options,
                                        const KerrFitOptions& kerr_options) {
  KerrPipelineResult out;
  out.linear = fit_linear(sweep[0], linear_options);
  out.single_photon_power = single_photon_power(out.linear.resonator);
  std::size_t chosen = 0;
  for (std::size_t t = 0; t < sweep.size(); ++t)
    if (sweep[t].drive_power() <= out.single_photon_power - kerr_options.linear_margin_db)
      chosen = t;
  if (chosen != 0) {
    out.linear = fit_linear(sweep[chosen], linear_options);
    out.single_photon_power = single_photon_power(out.linear.resonator);
  }
  out.linear_trace = chosen;
  out.kerr = fit_kerr(sweep, out.linear, kerr_options);
  return out;
}

}  // namespace jjres
