#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "jjres/core.hpp"
#include "jjres/fieldmodel.hpp"
#include "jjres/kerrfit.hpp"

namespace jjres::synth {

/// Additive complex Gaussian noise referenced to the background amplitude.
/// An empty snr_db means noiseless.
struct NoiseSpec {
  std::optional<double> snr_db;
  std::uint64_t seed = 0;

  static NoiseSpec noiseless() { return {}; }
  static NoiseSpec with_snr(double snr_db, std::uint64_t seed) { return {snr_db, seed}; }

  /// Per-quadrature sigma for background amplitude a.
  double quadrature_sigma(double amplitude) const;
};

/// Order-independent child seed for the index-th item of a batch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// n evenly spaced points in [first, last].
std::vector<double> linspace(double first, double last, std::size_t n);

/// Grid centred on f_r covering `span_linewidths` loaded linewidths.
std::vector<double> resonance_grid(const LinearResonatorParams& res, double span_linewidths,
                                   std::size_t n);

FrequencyTrace generate_linear_trace(const LinearResonatorParams& res,
                                     const EnvironmentParams& env, std::span<const double> grid,
                                     double power_dbm, const NoiseSpec& noise);

/// One trace per power; trace t uses derive_seed(noise.seed, t).
PowerSweep generate_kerr_sweep(const KerrParams& params, std::span<const double> grid,
                               std::span<const double> powers_dbm, BranchRule branch,
                               const NoiseSpec& noise);

/// Throws DomainError when a field lies outside the model domain.
std::vector<FieldSweepPoint> generate_field_sweep(const FieldModelParams& params,
                                                  std::span<const double> fields, double sigma_f,
                                                  std::uint64_t seed);

}  // namespace jjres::synth
