#include "jjres/linfit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace jjres {

using constants::kPi;
using constants::kTwoPi;

namespace {

constexpr Complex kI{0.0, 1.0};

std::vector<double> unwrapped_phase(std::span<const Complex> z) {
  std::vector<double> out(z.size());
  double offset = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double raw = std::arg(z[i]);
    if (i > 0) {
      const double prev = out[i - 1] - offset;
      const double jump = raw - prev;
      offset -= kTwoPi * std::round(jump / kTwoPi);
    }
    out[i] = raw + offset;
  }
  return out;
}

std::vector<Complex> remove_delay(std::span<const double> f, std::span<const Complex> z,
                                  double tau) {
  std::vector<Complex> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * std::polar(1.0, kTwoPi * f[i] * tau);
  return out;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

// Resonant factor 1 - kc (1 + i tan phi) / (kL + 2 i D), D = 2 pi (f_r - f).
Complex resonant_factor(double f_r, double kappa_c, double kappa_int, double phi0, double f) {
  const Complex denom{kappa_c + kappa_int, 2.0 * kTwoPi * (f_r - f)};
  return 1.0 - kappa_c * Complex{1.0, std::tan(phi0)} / denom;
}

struct PhaseFit {
  double theta0 = 0.0;
  double f_r = 0.0;
  double q_l = 0.0;
};

// theta(f) = theta0 + 2 atan(2 Q_L (f / f_r - 1)) around the circle center.
PhaseFit fit_phase(std::span<const double> f, std::span<const double> theta, double span) {
  const std::size_t n = f.size();
  const double mid = 0.5 * (theta.front() + theta.back());
  std::size_t i_mid = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(theta[i] - mid) < std::abs(theta[i_mid] - mid)) i_mid = i;
  const double f_r0 = f[i_mid];

  // Half-width crossings at theta_mid -/+ pi/2.
  double f_lo = f.front();
  double f_hi = f.back();
  for (std::size_t i = i_mid; i-- > 0;)
    if (theta[i] <= mid - kPi / 2) {
      f_lo = f[i];
      break;
    }
  for (std::size_t i = i_mid; i < n; ++i)
    if (theta[i] >= mid + kPi / 2) {
      f_hi = f[i];
      break;
    }
  double width = f_hi - f_lo;
  if (!(width > 0.0) || width >= span) width = span / 10.0;
  const double q_l0 = f_r0 / width;

  lsq::Problem problem;
  problem.n_params = 3;
  problem.n_residuals = static_cast<Eigen::Index>(n);
  problem.residuals = [&](const lsq::Vector& x, lsq::Vector& r) {
    const double fr = f_r0 + x[1] * width;
    const double ql = q_l0 * std::exp(x[2]);
    if (!(fr > 0.0) || !std::isfinite(ql)) return false;
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] =
          theta[i] - (x[0] + 2.0 * std::atan(2.0 * ql * (f[i] / fr - 1.0)));
    return true;
  };
  lsq::Vector x0(3);
  x0 << mid, 0.0, 0.0;
  lsq::Options opt;
  opt.max_iterations = 100;
  opt.ftol = 1e-10;
  const auto result = lsq::levenberg_marquardt(problem, x0, opt);
  return {result.x[0], f_r0 + result.x[1] * width, q_l0 * std::exp(result.x[2])};
}

}  // namespace

Complex model_s21_linear(const LinearResonatorParams& res, const EnvironmentParams& env,
                         double frequency) {
  const Complex environment =
      env.amplitude * std::polar(1.0, env.alpha - kTwoPi * frequency * env.tau);
  return environment * resonant_factor(res.f_r, res.kappa_c, res.kappa_int, res.phi0, frequency);
}

std::vector<Complex> model_s21_linear(const LinearResonatorParams& res,
                                      const EnvironmentParams& env,
                                      std::span<const double> frequencies) {
  std::vector<Complex> out;
  out.reserve(frequencies.size());
  for (double f : frequencies) out.push_back(model_s21_linear(res, env, f));
  return out;
}

double estimate_delay(const FrequencyTrace& trace, double wing_fraction) {
  if (!(wing_fraction > 0.0 && wing_fraction <= 0.25))
    throw UsageError("wing_fraction must lie in (0, 0.25]");
  const std::size_t n = trace.size();
  const auto wing = static_cast<std::size_t>(std::floor(wing_fraction * static_cast<double>(n)));
  if (wing < 4) throw DataError("delay estimate needs at least 4 samples per wing");

  const auto f = trace.frequencies();
  const auto z = trace.values();
  double sxy = 0.0;
  double sxx = 0.0;
  for (const std::size_t start : {std::size_t{0}, n - wing}) {
    const std::span<const Complex> zw(z.data() + start, wing);
    const std::span<const double> fw(f.data() + start, wing);
    const auto ph = unwrapped_phase(zw);
    const double fm = std::accumulate(fw.begin(), fw.end(), 0.0) / static_cast<double>(wing);
    const double pm = std::accumulate(ph.begin(), ph.end(), 0.0) / static_cast<double>(wing);
    for (std::size_t i = 0; i < wing; ++i) {
      sxy += (fw[i] - fm) * (ph[i] - pm);
      sxx += (fw[i] - fm) * (fw[i] - fm);
    }
  }
  return -(sxy / sxx) / kTwoPi;
}

Circle circle_fit(std::span<const Complex> points) {
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateGeometryError("circle fit needs at least 3 points");

  Complex mean{0.0, 0.0};
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : points) scale += std::norm(p - mean);
  scale = std::sqrt(scale / static_cast<double>(n));
  if (!(scale > 0.0)) throw DegenerateGeometryError("circle fit points coincide");

  // Moments of the centered, unit-RMS point cloud.
  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (const auto& p : points) {
    const double x = (p.real() - mean.real()) / scale;
    const double y = (p.imag() - mean.imag()) / scale;
    const double zz = x * x + y * y;
    mxx += x * x;
    myy += y * y;
    mxy += x * y;
    mxz += x * zz;
    myz += y * zz;
    mzz += zz * zz;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mxx *= inv_n;
  myy *= inv_n;
  mxy *= inv_n;
  mxz *= inv_n;
  myz *= inv_n;
  mzz *= inv_n;

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  // Taubin characteristic polynomial, smallest root by Newton from 0.
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2;
  const double a33 = a3 + a3 + a3;

  double x = 0.0;
  double y = a0;
  for (int iter = 0; iter < 100; ++iter) {
    const double dy = a1 + x * (a22 + a33 * x);
    const double xnew = x - y / dy;
    if (xnew == x || !std::isfinite(xnew)) break;
    const double ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3));
    if (std::abs(ynew) >= std::abs(y)) break;
    x = xnew;
    y = ynew;
  }

  const double det = x * x - x * mz + cov_xy;
  if (std::abs(det) < 1e-12) throw DegenerateGeometryError("circle fit points are collinear");
  const double xc = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double yc = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
  const double radius = std::sqrt(xc * xc + yc * yc + mz);
  if (!std::isfinite(radius)) throw DegenerateGeometryError("circle fit is ill-conditioned");
  return {mean + scale * Complex{xc, yc}, scale * radius};
}

double circle_rms(std::span<const Complex> points, const Circle& circle) {
  double acc = 0.0;
  for (const auto& p : points) {
    const double d = std::abs(p - circle.center) - circle.radius;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

double photon_number(const LinearResonatorParams& res, double p_feedline_dbm) {
  const double kl = res.kappa_l();
  const double flux = dbm_to_watts(p_feedline_dbm) / (constants::kHbar * res.omega0());
  return 2.0 * res.kappa_c / (kl * kl) * flux;
}

namespace {

// 1-sigma of Q = 2 pi f_r / kappa, kappa = sum of the selected rate parameters,
// from the full covariance.
double sigma_quality(const LinearFitResult& r, double kappa, bool with_c, bool with_int) {
  if (!(kappa > 0.0)) return HUGE_VAL;
  const double q = kTwoPi * r.resonator.f_r / kappa;
  Eigen::Vector3d grad(q / r.resonator.f_r, with_c ? -q / kappa : 0.0, with_int ? -q / kappa : 0.0);
  const Eigen::Matrix3d cov = r.covariance.topLeftCorner<3, 3>();
  return std::sqrt(std::max(grad.dot(cov * grad), 0.0));
}

}  // namespace

double LinearFitResult::sigma_q_c() const {
  return sigma_quality(*this, resonator.kappa_c, true, false);
}

double LinearFitResult::sigma_q_i() const {
  return sigma_quality(*this, resonator.kappa_int, false, true);
}

double LinearFitResult::sigma_q_l() const {
  return sigma_quality(*this, resonator.kappa_l(), true, true);
}

LinearInitialGuess initial_guess_linear(const FrequencyTrace& trace,
                                        const LinearFitOptions& options) {
  trace.require_fittable();
  const auto f = trace.frequencies();
  const auto z = trace.values();
  const double span = f.back() - f.front();

  double tau = estimate_delay(trace, options.wing_fraction);
  if (options.refine_delay) {
    auto objective = [&](double t) {
      const auto zc = remove_delay(f, z, t);
      try {
        return circle_rms(zc, circle_fit(zc));
      } catch (const DegenerateGeometryError&) {
        return HUGE_VAL;
      }
    };
    const double half = 0.3 / span;
    const auto [t_best, rms_best] =
        boost::math::tools::brent_find_minima(objective, tau - half, tau + half, 40);
    if (rms_best <= objective(tau)) tau = t_best;
  }

  const auto zc = remove_delay(f, z, tau);
  const Circle circle = circle_fit(zc);

  std::vector<Complex> rel(zc.size());
  for (std::size_t i = 0; i < zc.size(); ++i) rel[i] = zc[i] - circle.center;
  const auto theta = unwrapped_phase(rel);
  const PhaseFit phase = fit_phase(f, theta, span);

  // Off-resonant point lies opposite the resonance point on the circle.
  const Complex off_res = circle.center - circle.radius * std::polar(1.0, phase.theta0);
  const double amplitude = std::abs(off_res);
  const double alpha = std::arg(off_res);
  const Complex center_n = circle.center / off_res;
  double phi0 = std::arg(1.0 - center_n);
  phi0 = std::clamp(phi0, -1.4, 1.4);
  const double ratio = 2.0 * (circle.radius / amplitude) * std::cos(phi0);  // Q_L / Q_c

  const double q_l = std::max(phase.q_l, 1.0);
  const double kappa_l = kTwoPi * phase.f_r / q_l;
  const double kappa_c = std::clamp(ratio, 1e-6, 0.999) * kappa_l;
  const double kappa_int = std::max(kappa_l - kappa_c, 1e-3 * kappa_l);

  LinearInitialGuess guess;
  guess.resonator = {phase.f_r, kappa_c, kappa_int, phi0};
  guess.environment = {amplitude, alpha, tau};
  guess.circle = circle;
  guess.q_l = q_l;
  return guess;
}

namespace {

// Start from the smoothed dip profile relative to the wing background. Used
// alongside the circle start; it survives dips shallower than the noise where
// the algebraic circle is meaningless.
LinearInitialGuess dip_profile_guess(const FrequencyTrace& trace, double tau,
                                     const LinearFitOptions& options) {
  const auto f = trace.frequencies();
  const auto zc = remove_delay(f, trace.values(), tau);
  const std::size_t n = zc.size();
  const std::size_t k = std::max<std::size_t>(
      4, static_cast<std::size_t>(options.wing_fraction * static_cast<double>(n)));
  Complex background{0.0, 0.0};
  for (std::size_t i = 0; i < k; ++i) background += zc[i] + zc[n - 1 - i];
  background /= static_cast<double>(2 * k);

  std::vector<Complex> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = 1.0 - zc[i] / background;
  const std::size_t half_window = std::max<std::size_t>(2, n / 200);
  std::vector<Complex> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half_window ? i - half_window : 0;
    const std::size_t hi = std::min(n - 1, i + half_window);
    Complex acc{0.0, 0.0};
    for (std::size_t j = lo; j <= hi; ++j) acc += u[j];
    smooth[i] = acc / static_cast<double>(hi - lo + 1);
  }
  std::size_t peak = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(smooth[i]) > std::abs(smooth[peak])) peak = i;
  const double level = std::abs(smooth[peak]) / std::sqrt(2.0);
  std::size_t left = peak;
  while (left > 0 && std::abs(smooth[left]) > level) --left;
  std::size_t right = peak;
  while (right + 1 < n && std::abs(smooth[right]) > level) ++right;
  const double fwhm = std::max(f[right] - f[left], 2.0 * (f[1] - f[0]));

  const double f_r = f[peak];
  const double q_l = std::max(f_r / fwhm, 1.0);
  const double phi0 = std::clamp(std::arg(smooth[peak]), -1.4, 1.4);
  const double kappa_l = kTwoPi * f_r / q_l;
  const double kappa_c =
      std::clamp(std::abs(smooth[peak]) * std::cos(phi0), 1e-6, 0.999) * kappa_l;

  LinearInitialGuess guess;
  guess.resonator = {f_r, kappa_c, std::max(kappa_l - kappa_c, 1e-3 * kappa_l), phi0};
  guess.environment = {std::abs(background), std::arg(background), tau};
  guess.q_l = q_l;
  return guess;
}

LinearFitResult refine_linear(const FrequencyTrace& trace, const LinearInitialGuess& guess,
                              const LinearFitOptions& options, double& final_cost) {
  const auto f = trace.frequencies();
  const auto z = trace.values();
  const std::size_t n = f.size();
  const double span = f.back() - f.front();
  const double f_c = 0.5 * (f.front() + f.back());

  // Internal scaled parameters, all O(1):
  //   0: (f_r - f_r0) / w0      1: kc / kL0     2: kint / kL0     3: phi0
  //   4: a / a0                 5: alpha at f_c 6: tau * 2 pi span
  const double f_r0 = guess.resonator.f_r;
  const double kl0 = guess.resonator.kappa_l();
  const double w0 = kl0 / kTwoPi;
  const double a0 = guess.environment.amplitude;
  const double tau_scale = 1.0 / (kTwoPi * span);

  std::vector<double> weight(n, 1.0);
  if (options.use_sigma && trace.weighted())
    for (std::size_t i = 0; i < n; ++i) weight[i] = 1.0 / trace.sigma()[i];

  auto unpack = [&](const lsq::Vector& x, double& fr, double& kc, double& ki, double& phi,
                    double& a, double& alpha_c, double& tau) {
    fr = f_r0 + x[0] * w0;
    kc = x[1] * kl0;
    ki = x[2] * kl0;
    phi = x[3];
    a = x[4] * a0;
    alpha_c = x[5];
    tau = x[6] * tau_scale;
  };
  auto in_domain = [](double fr, double kc, double ki, double phi, double a) {
    return fr > 0.0 && kc > 0.0 && kc + ki > 0.0 && std::abs(phi) < kPi / 2 && a > 0.0;
  };

  const Eigen::Index m = static_cast<Eigen::Index>(2 * n);
  lsq::Problem problem;
  problem.n_params = 7;
  problem.n_residuals = m;
  problem.residuals = [&](const lsq::Vector& x, lsq::Vector& r) {
    double fr, kc, ki, phi, a, alpha_c, tau;
    unpack(x, fr, kc, ki, phi, a, alpha_c, tau);
    if (!in_domain(fr, kc, ki, phi, a)) return false;
    for (std::size_t i = 0; i < n; ++i) {
      const Complex env = a * std::polar(1.0, alpha_c - kTwoPi * (f[i] - f_c) * tau);
      const Complex d = (z[i] - env * resonant_factor(fr, kc, ki, phi, f[i])) * weight[i];
      r[static_cast<Eigen::Index>(i)] = d.real();
      r[static_cast<Eigen::Index>(n + i)] = d.imag();
    }
    return true;
  };
  problem.jacobian = [&](const lsq::Vector& x, lsq::Matrix& jac) {
    double fr, kc, ki, phi, a, alpha_c, tau;
    unpack(x, fr, kc, ki, phi, a, alpha_c, tau);
    if (!in_domain(fr, kc, ki, phi, a)) return false;
    jac.resize(m, 7);
    const Complex g_unit{1.0, std::tan(phi)};
    const double sec2 = 1.0 / (std::cos(phi) * std::cos(phi));
    for (std::size_t i = 0; i < n; ++i) {
      const Complex env = a * std::polar(1.0, alpha_c - kTwoPi * (f[i] - f_c) * tau);
      const Complex denom{kc + ki, 2.0 * kTwoPi * (fr - f[i])};
      const Complex g = kc * g_unit;
      const Complex rf = 1.0 - g / denom;
      const Complex s = env * rf;
      const Complex g_d2 = g / (denom * denom);
      // Derivatives of the model; residual derivative is the negative.
      std::array<Complex, 7> d{};
      d[0] = env * g_d2 * (2.0 * kTwoPi * kI) * w0;
      d[1] = env * (-g_unit / denom + g_d2) * kl0;
      d[2] = env * g_d2 * kl0;
      d[3] = env * (-kc * kI * sec2 / denom);
      d[4] = s / a * a0;
      d[5] = kI * s;
      d[6] = -kI * kTwoPi * (f[i] - f_c) * s * tau_scale;
      for (int j = 0; j < 7; ++j) {
        const Complex v = -d[static_cast<std::size_t>(j)] * weight[i];
        jac(static_cast<Eigen::Index>(i), j) = v.real();
        jac(static_cast<Eigen::Index>(n + i), j) = v.imag();
      }
    }
    return true;
  };

  lsq::Vector x0(7);
  x0 << 0.0, guess.resonator.kappa_c / kl0, guess.resonator.kappa_int / kl0, guess.resonator.phi0,
      1.0, wrap_phase(guess.environment.alpha - kTwoPi * f_c * guess.environment.tau),
      guess.environment.tau / tau_scale;

  const lsq::Result sol = lsq::levenberg_marquardt(problem, x0, options.solver);

  double fr, kc, ki, phi, a, alpha_c, tau;
  unpack(sol.x, fr, kc, ki, phi, a, alpha_c, tau);
  if (!sol.converged()) {
    throw ConvergenceError(
        std::string("linear fit did not converge (") + lsq::to_string(sol.status) + ")",
        {fr, kc, ki, phi, a, wrap_phase(alpha_c + kTwoPi * f_c * tau), tau}, sol.iterations);
  }

  final_cost = sol.cost;
  LinearFitResult out;
  out.resonator = {fr, kc, ki, phi};
  out.environment = {a, wrap_phase(alpha_c + kTwoPi * f_c * tau), tau};
  out.iterations = sol.iterations;
  out.solver_status = lsq::to_string(sol.status);
  out.drive_power = trace.drive_power();
  out.grid_min = f.front();
  out.grid_max = f.back();
  out.grid_size = n;

  // Covariance in internal units, scaled by the residual variance.
  const double dof = static_cast<double>(m - 7);
  const double s2 = 2.0 * sol.cost / dof;
  const lsq::Matrix cov_int = s2 * lsq::normal_inverse(sol.jacobian);
  Eigen::Matrix<double, 7, 7> t = Eigen::Matrix<double, 7, 7>::Zero();
  t(0, 0) = w0;
  t(1, 1) = kl0;
  t(2, 2) = kl0;
  t(3, 3) = 1.0;
  t(4, 4) = a0;
  t(5, 5) = 1.0;
  t(5, 6) = kTwoPi * f_c * tau_scale;
  t(6, 6) = tau_scale;
  out.covariance = t * cov_int * t.transpose();
  for (int j = 0; j < 7; ++j)
    out.uncertainties[static_cast<std::size_t>(j)] = std::sqrt(std::max(out.covariance(j, j), 0.0));

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::norm(z[i] - model_s21_linear(out.resonator, out.environment, f[i]));
  out.residual_rms = std::sqrt(acc / static_cast<double>(n));

  if (out.resonator.kappa_int < 0.0) {
    out.warnings.push_back("kappa_int converged to " + std::to_string(out.resonator.kappa_int) +
                           " rad/s and was pinned to 0");
    out.resonator.kappa_int = 0.0;
  }
  const double linewidth = out.resonator.kappa_l() / kTwoPi;
  if (span < options.min_span_linewidths * linewidth)
    out.warnings.push_back("frequency span covers only " + std::to_string(span / linewidth) +
                           " linewidths");
  out.n_photons = photon_number(out.resonator, trace.drive_power());
  return out;
}

}  // namespace

LinearFitResult fit_linear(const FrequencyTrace& trace, const LinearFitOptions& options) {
  const LinearInitialGuess circle_start = initial_guess_linear(trace, options);
  const LinearInitialGuess dip_start =
      dip_profile_guess(trace, circle_start.environment.tau, options);

  // Refine from both starts and keep the lower cost; the circle start wins ties.
  std::optional<LinearFitResult> best;
  std::optional<ConvergenceError> first_error;
  double best_cost = HUGE_VAL;
  for (const auto* start : {&circle_start, &dip_start}) {
    try {
      double cost = HUGE_VAL;
      LinearFitResult r = refine_linear(trace, *start, options, cost);
      if (!best || cost < best_cost) {
        best = std::move(r);
        best_cost = cost;
      }
    } catch (const ConvergenceError& e) {
      if (!first_error) first_error = e;
    } catch (const std::invalid_argument&) {
      // start outside the model domain
    }
  }
  if (best) return *best;
  if (first_error) throw *first_error;
  throw ConvergenceError("linear fit could not start from any initial guess", {}, 0);
}

std::vector<DipWindow> find_dips(const FrequencyTrace& trace, const DipDetectionOptions& options) {
  const auto f = trace.frequencies();
  const auto z = trace.values();
  const std::size_t n = z.size();
  std::vector<double> mag_db(n);
  for (std::size_t i = 0; i < n; ++i) mag_db[i] = 20.0 * std::log10(std::max(std::abs(z[i]), 1e-300));
  const double background = median(mag_db);

  std::vector<DipWindow> dips;
  std::size_t i = 0;
  while (i < n) {
    if (background - mag_db[i] < options.threshold_db) {
      ++i;
      continue;
    }
    // Contiguous run below threshold; the deepest sample marks the dip.
    std::size_t j = i;
    std::size_t lowest = i;
    while (j < n && background - mag_db[j] >= options.threshold_db) {
      if (mag_db[j] < mag_db[lowest]) lowest = j;
      ++j;
    }
    if (!dips.empty() && lowest < dips.back().minimum + options.min_separation) {
      if (mag_db[lowest] < mag_db[dips.back().minimum]) dips.back().minimum = lowest;
      i = j;
      continue;
    }
    DipWindow dip;
    dip.minimum = lowest;
    dips.push_back(dip);
    i = j;
  }

  const double bg_power = std::pow(10.0, background / 10.0);
  for (auto& dip : dips) {
    const double min_power = std::pow(10.0, mag_db[dip.minimum] / 10.0);
    const double half = 0.5 * (bg_power + min_power);
    std::size_t lo = dip.minimum;
    while (lo > 0 && std::norm(z[lo]) < half) --lo;
    std::size_t hi = dip.minimum;
    while (hi + 1 < n && std::norm(z[hi]) < half) ++hi;
    dip.linewidth = std::max(f[hi] - f[lo], f[std::min(dip.minimum + 1, n - 1)] - f[dip.minimum]);
    dip.depth_db = background - mag_db[dip.minimum];
    const double half_window = 0.5 * options.window_linewidths * dip.linewidth;
    const double f0 = f[dip.minimum];
    dip.first = static_cast<std::size_t>(
        std::lower_bound(f.begin(), f.end(), f0 - half_window) - f.begin());
    dip.last = static_cast<std::size_t>(
        std::upper_bound(f.begin(), f.end(), f0 + half_window) - f.begin());
  }
  return dips;
}

}  // namespace jjres
