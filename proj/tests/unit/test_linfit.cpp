#include "doctest.h"

#include <cmath>

#include "jjres/linfit.hpp"
#include "jjres/synth.hpp"
#include "oracles.hpp"

using namespace jjres;
using namespace std::complex_literals;

namespace {

const auto kRefRes = LinearResonatorParams::from_quality(6.117e9, 1500, 15800, 0.2);

double linewidth(const LinearResonatorParams& r) { return r.kappa_l() / constants::kTwoPi; }

FrequencyTrace noisy(const LinearResonatorParams& res, const EnvironmentParams& env, double span,
                     std::size_t n, double snr, std::uint64_t seed) {
  const auto grid = synth::resonance_grid(res, span, n);
  return synth::generate_linear_trace(res, env, grid, -140, synth::NoiseSpec::with_snr(snr, seed));
}

// Parameter vector in kLinearParamNames order.
std::array<double, 7> truth(const LinearResonatorParams& r, const EnvironmentParams& e) {
  return {r.f_r, r.kappa_c, r.kappa_int, r.phi0, e.amplitude, e.alpha, e.tau};
}

std::array<double, 7> fitted(const LinearFitResult& f) {
  return truth(f.resonator, f.environment);
}

}  // namespace

TEST_SUITE("linfit") {

TEST_CASE("model agrees with the quality-factor form") {
  oracle::Draws d(11);
  for (int k = 0; k < 50; ++k) {
    const double fr = d.uniform(4e9, 8e9), qc = d.log_uniform(500, 2e5), qi = d.log_uniform(1e3, 1e6);
    const double phi0 = d.uniform(-0.4, 0.4);
    const EnvironmentParams env{d.uniform(0.5, 1.5), d.uniform(-3, 3), d.uniform(-50e-9, 50e-9)};
    const auto res = LinearResonatorParams::from_quality(fr, qc, qi, phi0);
    for (double x : {-3.0, -0.5, 0.0, 0.1, 2.0}) {
      const double f = fr + x * linewidth(res);
      const auto want = oracle::s21_notch(fr, qc, qi, phi0, env.amplitude, env.alpha, env.tau, f);
      // rounding of the ~2000 rad delay phase and of f/f_r - 1 amplified by Q_L
      const double q_l = 1.0 / (1.0 / qc + 1.0 / qi);
      const double tol = 4e-16 * env.amplitude * (8.0 + std::abs(constants::kTwoPi * f * env.tau) + 4.0 * q_l);
      CHECK(std::abs(model_s21_linear(res, env, f) - want) < tol);
    }
  }
}

TEST_CASE("background recovery far from resonance") {
  const EnvironmentParams env{0.8, 0.4, 12e-9};
  for (double q_c : {500.0, 1500.0, 1e5}) {
    const auto res = LinearResonatorParams::from_quality(6e9, q_c, 2e4, 0.3);
    for (double x : {-1e3, -101.0, 101.0, 500.0}) {
      const double f = res.f_r + x * linewidth(res);
      if (f <= 0) continue;
      CHECK(std::abs(std::abs(model_s21_linear(res, env, f)) - env.amplitude) < 0.01 * env.amplitude);
    }
  }
}

TEST_CASE("on resonance with phi0 = 0 the response is kappa_int / kappa_L") {
  const auto res = LinearResonatorParams::from_quality(5.2e9, 2000, 9000, 0.0);
  const EnvironmentParams env{1.3, 0.7, 25e-9};
  const Complex norm = env.amplitude * std::exp(1i * env.alpha) *
                       std::exp(-1i * constants::kTwoPi * res.f_r * env.tau);
  const Complex s = model_s21_linear(res, env, res.f_r) / norm;
  CHECK(s.real() == doctest::Approx(res.kappa_int / res.kappa_l()).epsilon(1e-12));
  CHECK(std::abs(s.imag()) < 1e-12);
}

TEST_CASE("dip depth of the reference resonator equals 1 - Q_L/Q_c") {
  const auto res = LinearResonatorParams::from_quality(6.117e9, 1500, 15800, 0.0);
  const auto grid = synth::resonance_grid(res, 10, 4001);
  double lowest = 1.0;
  for (double f : grid) lowest = std::min(lowest, std::abs(model_s21_linear(res, {}, f)));
  CHECK(1.0 - lowest == doctest::Approx(res.q_l() / res.q_c()).epsilon(1e-6));
  CHECK(lowest == doctest::Approx(1.0 - res.q_l() / res.q_c()).epsilon(1e-6));
}

TEST_CASE("estimate_delay") {
  const auto res = LinearResonatorParams::from_quality(6e9, 3000, 20000, 0.1);
  const auto grid = synth::resonance_grid(res, 40, 2001);
  SUBCASE("50 ns with wide wings") {
    const auto tr = synth::generate_linear_trace(res, {1.0, 0.2, 50e-9}, grid, -140,
                                                 synth::NoiseSpec::with_snr(40, 5));
    CHECK(estimate_delay(tr) == doctest::Approx(50e-9).epsilon(0.02));
  }
  SUBCASE("zero delay") {
    const auto tr = synth::generate_linear_trace(res, {1.0, 0.2, 0.0}, grid, -140,
                                                 synth::NoiseSpec::with_snr(40, 6));
    // phase noise 0.01 rad spread over the span; 1/span sets the scale
    const double span = grid.back() - grid.front();
    CHECK(std::abs(estimate_delay(tr)) < 0.01 / span);
  }
  SUBCASE("pure delay is exact") {
    std::vector<Complex> v;
    for (double f : grid) v.push_back(std::exp(-2i * constants::kPi * f * 37e-9));
    const auto tr = FrequencyTrace::from_arrays(grid, v, 0);
    CHECK(estimate_delay(tr) == doctest::Approx(37e-9).epsilon(1e-9));
  }
  SUBCASE("wings too short") {
    std::vector<double> f(30);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1e9 + 1e3 * static_cast<double>(i);
    const auto tr = FrequencyTrace::from_arrays(f, std::vector<Complex>(30, 1.0), 0);
    CHECK_THROWS_AS(estimate_delay(tr, 0.1), DataError);
    CHECK_THROWS_AS(estimate_delay(tr, 0.3), UsageError);
  }
}

TEST_CASE("circle_fit") {
  const Complex c{0.5, 0.0};
  const double r = 0.25;
  SUBCASE("exact points") {
    std::vector<Complex> p;
    for (int k = 0; k < 8; ++k) p.push_back(c + r * std::exp(1i * (0.3 + k * constants::kPi / 4)));
    const auto fit = circle_fit(p);
    CHECK(std::abs(fit.center - c) < 1e-12);
    CHECK(std::abs(fit.radius - r) < 1e-12);
    CHECK(circle_rms(p, fit) < 1e-12);
  }
  SUBCASE("three points give the circumcircle") {
    const std::vector<Complex> p = {c + r * std::exp(0.1i), c + r * std::exp(2.0i), c + r * std::exp(-2.5i)};
    const auto fit = circle_fit(p);
    CHECK(std::abs(fit.center - c) < 1e-12);
    CHECK(std::abs(fit.radius - r) < 1e-12);
  }
  SUBCASE("noisy points") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 0.01);
    std::vector<Complex> p;
    for (int k = 0; k < 256; ++k)
      p.push_back(c + r * std::exp(1i * (k * constants::kTwoPi / 256)) + Complex{g(rng), g(rng)});
    const auto fit = circle_fit(p);
    CHECK(std::abs(fit.center - c) < 5e-3);
    CHECK(std::abs(fit.radius - r) < 5e-3);
  }
  SUBCASE("degenerate input") {
    CHECK_THROWS_AS(circle_fit(std::vector<Complex>{{0, 0}, {1, 1}}), DegenerateGeometryError);
    CHECK_THROWS_AS(circle_fit(std::vector<Complex>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                    DegenerateGeometryError);
  }
}

TEST_CASE("noiseless self-fit is exact") {
  const EnvironmentParams env{0.9, -1.1, 40e-9};
  const auto grid = synth::resonance_grid(kRefRes, 10, 1001);
  const auto tr = synth::generate_linear_trace(kRefRes, env, grid, -140, synth::NoiseSpec::noiseless());
  const auto fit = fit_linear(tr);
  CHECK(fit.residual_rms < 1e-10);
  const auto want = truth(kRefRes, env);
  const auto got = fitted(fit);
  for (std::size_t j = 0; j < 7; ++j) {
    INFO(kLinearParamNames[j]);
    if (j == 5)
      CHECK(std::abs(wrap_phase(got[j] - want[j])) < 1e-8);
    else
      CHECK(oracle::rel_err(got[j], want[j]) < 1e-8);
  }
  // kappa_int / 2 pi of the reference resonator reads 0.39 MHz at two decimals
  CHECK(std::round(fit.resonator.kappa_int / constants::kTwoPi / 1e4) / 100 == doctest::Approx(0.39));
}

TEST_CASE("reference trace at 40 dB SNR: every parameter within 3 sigma") {
  const EnvironmentParams env{1.0, 0.5, 40e-9};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto fit = fit_linear(noisy(kRefRes, env, 10, 1001, 40, seed));
    const auto want = truth(kRefRes, env);
    const auto got = fitted(fit);
    for (std::size_t j = 0; j < 7; ++j) {
      INFO(kLinearParamNames[j] << " seed " << seed);
      const double diff = j == 5 ? wrap_phase(got[j] - want[j]) : got[j] - want[j];
      CHECK(std::abs(diff) <= 3 * fit.uncertainties[j]);
    }
    CHECK(fit.residual_rms == doctest::Approx(0.01).epsilon(0.1));
  }
}

TEST_CASE("quality factors derived from a result match the rates") {
  const auto fit = fit_linear(noisy(kRefRes, {1, 0, 10e-9}, 12, 801, 38, 7));
  const auto& r = fit.resonator;
  CHECK(oracle::rel_err(fit.q_c(), constants::kTwoPi * r.f_r / r.kappa_c) < 1e-12);
  CHECK(oracle::rel_err(fit.q_i(), constants::kTwoPi * r.f_r / r.kappa_int) < 1e-12);
  CHECK(fit.sigma_q_c() > 0);
  CHECK(fit.sigma_q_i() > 0);
  CHECK(fit.sigma_q_l() > 0);
  for (double u : fit.uncertainties) CHECK(u >= 0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 7, 7>> eig(fit.covariance);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * eig.eigenvalues().maxCoeff());
}

TEST_CASE("extra delay shifts tau and nothing else") {
  const auto tr = noisy(kRefRes, {1.0, 0.3, 30e-9}, 12, 1001, 40, 21);
  const double extra = 15e-9;
  std::vector<ComplexSample> s = tr.samples();
  for (auto& x : s) x.value *= std::exp(-2i * constants::kPi * x.frequency * extra);
  const FrequencyTrace shifted(s, tr.drive_power());
  const auto a = fit_linear(tr);
  const auto b = fit_linear(shifted);
  CHECK(b.environment.tau - a.environment.tau == doctest::Approx(extra).epsilon(0.02));
  CHECK(std::abs(b.resonator.f_r - a.resonator.f_r) <= a.sigma_f_r());
  CHECK(std::abs(b.resonator.kappa_c - a.resonator.kappa_c) <= a.sigma_kappa_c());
  CHECK(std::abs(b.resonator.kappa_int - a.resonator.kappa_int) <= a.sigma_kappa_int());
}

TEST_CASE("round trip over a well-conditioned parameter range") {
  oracle::Draws d(2024);
  int ok = 0;
  for (int k = 0; k < 30; ++k) {
    const auto res = LinearResonatorParams::from_quality(d.uniform(4e9, 8e9), d.log_uniform(1e3, 2e4),
                                                         d.log_uniform(5e3, 1e5), d.uniform(-0.4, 0.4));
    const EnvironmentParams env{d.uniform(0.5, 1.5), d.uniform(-3, 3), d.uniform(-50e-9, 50e-9)};
    const auto fit = fit_linear(noisy(res, env, d.uniform(10, 20), 1001, d.uniform(35, 45), d.seed()));
    ok += oracle::rel_err(fit.q_i(), res.q_i()) < 0.1 &&
          std::abs(fit.resonator.f_r - res.f_r) < linewidth(res) / 20;
  }
  CHECK(ok == 30);
}

TEST_CASE("weighted fit with a uniform sigma column matches the unweighted fit") {
  const auto tr = noisy(kRefRes, {1.0, 0.3, 30e-9}, 10, 801, 40, 31);
  const FrequencyTrace weighted(tr.samples(), tr.drive_power(), {}, std::vector<double>(tr.size(), 0.01 / std::sqrt(2.0)));
  const auto a = fit_linear(tr);
  const auto b = fit_linear(weighted);
  CHECK(b.resonator.f_r == doctest::Approx(a.resonator.f_r).epsilon(1e-9));
  CHECK(b.resonator.kappa_int == doctest::Approx(a.resonator.kappa_int).epsilon(1e-6));
}

TEST_CASE("fit failures and warnings") {
  SUBCASE("iteration cap raises a convergence error with the last iterate") {
    LinearFitOptions o;
    o.solver.max_iterations = 1;
    try {
      fit_linear(noisy(kRefRes, {1.0, 0.3, 30e-9}, 10, 801, 40, 3), o);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.last_iterate().size() == 7);
      CHECK(e.iterations() >= 1);
    }
  }
  SUBCASE("narrow span is flagged") {
    const auto fit = fit_linear(noisy(kRefRes, {1.0, 0.0, 0.0}, 3, 801, 45, 4));
    bool flagged = false;
    for (const auto& w : fit.warnings) flagged |= w.find("span") != std::string::npos;
    CHECK(flagged);
  }
  SUBCASE("vanishing internal loss never comes back negative") {
    const auto res = LinearResonatorParams::from_quality(6e9, 800, 1e9, 0.0);
    int pinned = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const auto fit = fit_linear(noisy(res, {1.0, 0.0, 0.0}, 12, 601, 35, seed));
      CHECK(fit.resonator.kappa_int >= 0.0);
      pinned += !fit.warnings.empty();
    }
    CHECK(pinned > 0);
  }
  SUBCASE("too few samples") {
    std::vector<double> f(10);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1e9 + static_cast<double>(i);
    CHECK_THROWS_AS(fit_linear(FrequencyTrace::from_arrays(f, std::vector<Complex>(10, 1.0), 0)), DataError);
  }
}

TEST_CASE("photon_number") {
  const auto res = LinearResonatorParams::from_quality(6.1e9, 1500, 15000);
  CHECK(photon_number(res, -400) < 1e-25);
  const double n = photon_number(res, -133);
  CHECK(n == doctest::Approx(oracle::photons(6.1e9, 1500, 15000, -133)).epsilon(1e-10));
  CHECK(n > 0.8);
  CHECK(n < 1.2);
  // kappa_c << kappa_int: doubling kappa_c barely changes kappa_L
  auto weak = LinearResonatorParams::from_quality(6.1e9, 1e7, 1e4);
  auto twice = weak;
  twice.kappa_c *= 2;
  CHECK(photon_number(twice, -120) / photon_number(weak, -120) == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("find_dips segments a two-resonator feedline") {
  const auto r1 = LinearResonatorParams::from_quality(6.00e9, 2000, 20000);
  const auto r2 = LinearResonatorParams::from_quality(6.05e9, 3000, 30000);
  const auto grid = synth::linspace(5.97e9, 6.08e9, 8001);
  std::vector<Complex> v;
  for (double f : grid) v.push_back(model_s21_linear(r1, {}, f) * model_s21_linear(r2, {}, f));
  const auto tr = FrequencyTrace::from_arrays(grid, v, -130);
  const auto dips = find_dips(tr);
  REQUIRE(dips.size() == 2);
  CHECK(std::abs(grid[dips[0].minimum] - r1.f_r) < linewidth(r1) / 10);
  CHECK(std::abs(grid[dips[1].minimum] - r2.f_r) < linewidth(r2) / 10);
  CHECK(dips[0].linewidth == doctest::Approx(linewidth(r1)).epsilon(0.15));
  for (const auto& dip : dips) {
    const auto fit = fit_linear(tr.slice(dip.first, dip.last));
    const auto& want = &dip == &dips[0] ? r1 : r2;
    // the neighbour's tail inside the window pulls slightly
    CHECK(std::abs(fit.resonator.f_r - want.f_r) < linewidth(want) / 50);
  }
}

}
