#include "jjres/synth.hpp"

#include <cmath>
#include <random>

#include "jjres/linfit.hpp"

namespace jjres::synth {

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void add_noise(std::vector<ComplexSample>& samples, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return;
  std::mt19937_64 rng(mix(seed));
  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& s : samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s.value += Complex{re, im};
  }
}

}  // namespace

double NoiseSpec::quadrature_sigma(double amplitude) const {
  if (!snr_db) return 0.0;
  if (!(*snr_db > 0.0)) throw UsageError("snr_db must be positive");
  return amplitude / std::pow(10.0, *snr_db / 20.0) / std::sqrt(2.0);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 0x632be59bd9b4e019ULL));
}

std::vector<double> linspace(double first, double last, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = first;
    return out;
  }
  const double step = (last - first) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = first + step * static_cast<double>(i);
  out.back() = last;
  return out;
}

std::vector<double> resonance_grid(const LinearResonatorParams& res, double span_linewidths,
                                   std::size_t n) {
  const double half = 0.5 * span_linewidths * res.kappa_l() / constants::kTwoPi;
  return linspace(res.f_r - half, res.f_r + half, n);
}

FrequencyTrace generate_linear_trace(const LinearResonatorParams& res,
                                     const EnvironmentParams& env, std::span<const double> grid,
                                     double power_dbm, const NoiseSpec& noise) {
  validate(res);
  validate(env);
  std::vector<ComplexSample> samples;
  samples.reserve(grid.size());
  for (double f : grid) samples.push_back({f, model_s21_linear(res, env, f)});
  add_noise(samples, noise.quadrature_sigma(env.amplitude), noise.seed);
  return FrequencyTrace(std::move(samples), power_dbm);
}

PowerSweep generate_kerr_sweep(const KerrParams& params, std::span<const double> grid,
                               std::span<const double> powers_dbm, BranchRule branch,
                               const NoiseSpec& noise) {
  validate(params);
  const double sigma = noise.quadrature_sigma(params.environment.amplitude);
  std::vector<FrequencyTrace> traces;
  traces.reserve(powers_dbm.size());
  for (std::size_t t = 0; t < powers_dbm.size(); ++t) {
    const auto values = model_s21_kerr(params, grid, powers_dbm[t], branch);
    std::vector<ComplexSample> samples(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) samples[i] = {grid[i], values[i]};
    add_noise(samples, sigma, derive_seed(noise.seed, t));
    traces.emplace_back(std::move(samples), powers_dbm[t]);
  }
  return PowerSweep(std::move(traces));
}

std::vector<FieldSweepPoint> generate_field_sweep(const FieldModelParams& params,
                                                  std::span<const double> fields, double sigma_f,
                                                  std::uint64_t seed) {
  if (!(sigma_f >= 0.0)) throw UsageError("sigma_f must be non-negative");
  std::mt19937_64 rng(mix(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<FieldSweepPoint> out;
  out.reserve(fields.size());
  for (double b : fields) {
    const double f = fr_vs_field(params, b);
    const double noise = gauss(rng) * sigma_f;
    // A zero sigma_f still records a strictly positive per-point sigma for fitting.
    out.push_back({b, f + noise, sigma_f > 0.0 ? sigma_f : 1.0});
  }
  return out;
}

}  // namespace jjres::synth
