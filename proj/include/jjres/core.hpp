#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jjres/constants.hpp"
#include "jjres/errors.hpp"

namespace jjres {

using Complex = std::complex<double>;

// Minimum number of samples a trace needs before any fit will touch it.
inline constexpr std::size_t kMinFitSamples = 16;

/// One VNA point: drive frequency [Hz] and complex S21.
struct ComplexSample {
  double frequency = 0.0;
  Complex value;
};

/// One complex S21 sweep at fixed drive power.
///
/// Construction validates the sample list: frequencies positive and strictly
/// increasing, values finite. An optional per-point sigma column (same length,
/// all positive) switches fits to weighted residuals.
class FrequencyTrace {
 public:
  using Metadata = std::map<std::string, std::string>;

  FrequencyTrace() = default;
  FrequencyTrace(std::vector<ComplexSample> samples, double drive_power_dbm,
                 Metadata metadata = {}, std::vector<double> sigma = {});

  /// Builds a trace from parallel frequency / value arrays.
  static FrequencyTrace from_arrays(std::span<const double> frequencies,
                                    std::span<const Complex> values, double drive_power_dbm,
                                    Metadata metadata = {});

  const std::vector<ComplexSample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double drive_power() const noexcept { return drive_power_; }
  const Metadata& metadata() const noexcept { return metadata_; }
  const std::vector<double>& sigma() const noexcept { return sigma_; }
  bool weighted() const noexcept { return !sigma_.empty(); }

  std::vector<double> frequencies() const;
  std::vector<Complex> values() const;

  double min_frequency() const { return samples_.front().frequency; }
  double max_frequency() const { return samples_.back().frequency; }

  /// Samples [first, last) as a new trace with the same power and metadata.
  FrequencyTrace slice(std::size_t first, std::size_t last) const;

  /// Throws DataError when the trace is shorter than kMinFitSamples.
  void require_fittable() const;

 private:
  std::vector<ComplexSample> samples_;
  double drive_power_ = 0.0;
  Metadata metadata_;
  std::vector<double> sigma_;
};

/// Traces sharing one frequency grid, strictly increasing in drive power.
class PowerSweep {
 public:
  PowerSweep() = default;
  explicit PowerSweep(std::vector<FrequencyTrace> traces);

  const std::vector<FrequencyTrace>& traces() const noexcept { return traces_; }
  std::size_t size() const noexcept { return traces_.size(); }
  const FrequencyTrace& operator[](std::size_t i) const { return traces_[i]; }
  std::vector<double> powers() const;
  std::vector<double> frequencies() const;

 private:
  std::vector<FrequencyTrace> traces_;
};

/// Fitted resonance at one in-plane field value.
struct FieldSweepPoint {
  double field = 0.0;      // T
  double resonance = 0.0;  // Hz
  double sigma = 0.0;      // Hz
};

void validate(const FieldSweepPoint& point);

/// Resonator parameters of the notch model. Rates are angular [rad/s].
struct LinearResonatorParams {
  double f_r = 0.0;
  double kappa_c = 0.0;
  double kappa_int = 0.0;
  double phi0 = 0.0;

  double omega0() const noexcept { return constants::kTwoPi * f_r; }
  double kappa_l() const noexcept { return kappa_c + kappa_int; }
  double q_c() const noexcept { return omega0() / kappa_c; }
  double q_i() const noexcept { return omega0() / kappa_int; }
  double q_l() const noexcept { return omega0() / kappa_l(); }

  /// Constructs from quality factors; kappa = 2 pi f_r / Q.
  static LinearResonatorParams from_quality(double f_r, double q_c, double q_i, double phi0 = 0.0);
};

void validate(const LinearResonatorParams& params);

/// Environment distortion of the measured transmission: scale, global phase, cable delay.
struct EnvironmentParams {
  double amplitude = 1.0;
  double alpha = 0.0;
  double tau = 0.0;
};

void validate(const EnvironmentParams& env);

// Power and photon-flux conversions.

double dbm_to_watts(double p_dbm);
double watts_to_dbm(double p_watts);

/// Photon flux P/(h f) [photons/s]. Throws DomainError for f <= 0.
double photon_flux(double p_watts, double frequency);

/// Wraps an angle into (-pi, pi].
double wrap_phase(double angle);

}  // namespace jjres
