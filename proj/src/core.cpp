#include "jjres/core.hpp"

#include <cmath>
#include <string>

namespace jjres {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

FrequencyTrace::FrequencyTrace(std::vector<ComplexSample> samples, double drive_power_dbm,
                               Metadata metadata, std::vector<double> sigma)
    : samples_(std::move(samples)),
      drive_power_(drive_power_dbm),
      metadata_(std::move(metadata)),
      sigma_(std::move(sigma)) {
  if (samples_.empty()) throw DataError("trace has no samples");
  if (!std::isfinite(drive_power_)) throw DataError("drive power is not finite");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!(s.frequency > 0.0) || !std::isfinite(s.frequency))
      throw DataError("non-positive frequency at sample " + std::to_string(i));
    if (!finite(s.value)) throw DataError("non-finite S21 value at sample " + std::to_string(i));
    if (i > 0 && !(s.frequency > samples_[i - 1].frequency))
      throw DataError("frequency not strictly increasing at sample " + std::to_string(i));
  }
  if (!sigma_.empty()) {
    if (sigma_.size() != samples_.size())
      throw DataError("sigma column length does not match the sample count");
    for (std::size_t i = 0; i < sigma_.size(); ++i)
      if (!(sigma_[i] > 0.0) || !std::isfinite(sigma_[i]))
        throw DataError("non-positive sigma at sample " + std::to_string(i));
  }
}

FrequencyTrace FrequencyTrace::from_arrays(std::span<const double> frequencies,
                                           std::span<const Complex> values,
                                           double drive_power_dbm, Metadata metadata) {
  if (frequencies.size() != values.size())
    throw DataError("frequency and value arrays differ in length");
  std::vector<ComplexSample> samples(frequencies.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = {frequencies[i], values[i]};
  return FrequencyTrace(std::move(samples), drive_power_dbm, std::move(metadata));
}

std::vector<double> FrequencyTrace::frequencies() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.frequency);
  return out;
}

std::vector<Complex> FrequencyTrace::values() const {
  std::vector<Complex> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.value);
  return out;
}

FrequencyTrace FrequencyTrace::slice(std::size_t first, std::size_t last) const {
  if (first >= last || last > samples_.size()) throw DataError("invalid trace slice");
  std::vector<ComplexSample> part(samples_.begin() + static_cast<std::ptrdiff_t>(first),
                                  samples_.begin() + static_cast<std::ptrdiff_t>(last));
  std::vector<double> sig;
  if (!sigma_.empty())
    sig.assign(sigma_.begin() + static_cast<std::ptrdiff_t>(first),
               sigma_.begin() + static_cast<std::ptrdiff_t>(last));
  return FrequencyTrace(std::move(part), drive_power_, metadata_, std::move(sig));
}

void FrequencyTrace::require_fittable() const {
  if (samples_.size() < kMinFitSamples)
    throw DataError("trace has " + std::to_string(samples_.size()) + " samples, at least " +
                    std::to_string(kMinFitSamples) + " are required for fitting");
}

PowerSweep::PowerSweep(std::vector<FrequencyTrace> traces) : traces_(std::move(traces)) {
  if (traces_.empty()) throw DataError("power sweep has no traces");
  const auto& ref = traces_.front();
  for (std::size_t t = 1; t < traces_.size(); ++t) {
    const auto& tr = traces_[t];
    if (!(tr.drive_power() > traces_[t - 1].drive_power()))
      throw DataError("drive power not strictly increasing at trace " + std::to_string(t));
    if (tr.size() != ref.size())
      throw DataError("trace " + std::to_string(t) + " has a different frequency grid");
    for (std::size_t i = 0; i < tr.size(); ++i)
      if (tr.samples()[i].frequency != ref.samples()[i].frequency)
        throw DataError("trace " + std::to_string(t) + " has a different frequency grid at sample " +
                        std::to_string(i));
  }
}

std::vector<double> PowerSweep::powers() const {
  std::vector<double> out;
  for (const auto& t : traces_) out.push_back(t.drive_power());
  return out;
}

std::vector<double> PowerSweep::frequencies() const { return traces_.front().frequencies(); }

void validate(const FieldSweepPoint& point) {
  if (!(point.field >= 0.0) || !std::isfinite(point.field))
    throw DataError("field sweep point has negative or non-finite field");
  if (!(point.sigma > 0.0) || !std::isfinite(point.sigma))
    throw DataError("field sweep point has non-positive sigma");
  if (!(point.resonance > 0.0) || !std::isfinite(point.resonance))
    throw DataError("field sweep point has non-positive resonance");
}

LinearResonatorParams LinearResonatorParams::from_quality(double f_r, double q_c, double q_i,
                                                          double phi0) {
  const double omega = constants::kTwoPi * f_r;
  return {f_r, omega / q_c, omega / q_i, phi0};
}

void validate(const LinearResonatorParams& p) {
  if (!(p.f_r > 0.0) || !std::isfinite(p.f_r)) throw DomainError("f_r must be positive");
  if (!(p.kappa_c > 0.0) || !std::isfinite(p.kappa_c))
    throw DomainError("kappa_c must be positive");
  if (!(p.kappa_int >= 0.0) || !std::isfinite(p.kappa_int))
    throw DomainError("kappa_int must be non-negative");
  if (!(std::abs(p.phi0) < constants::kPi / 2)) throw DomainError("|phi0| must be below pi/2");
}

void validate(const EnvironmentParams& env) {
  if (!(env.amplitude > 0.0) || !std::isfinite(env.amplitude))
    throw DomainError("background amplitude must be positive");
  if (!std::isfinite(env.alpha) || !std::isfinite(env.tau))
    throw DomainError("environment phase and delay must be finite");
}

double dbm_to_watts(double p_dbm) { return std::pow(10.0, (p_dbm - 30.0) / 10.0); }

double watts_to_dbm(double p_watts) { return 10.0 * std::log10(p_watts) + 30.0; }

double photon_flux(double p_watts, double frequency) {
  if (!(frequency > 0.0)) throw DomainError("photon_flux requires a positive frequency");
  return p_watts / (constants::kPlanck * frequency);
}

double wrap_phase(double angle) {
  double w = std::remainder(angle, constants::kTwoPi);
  if (w <= -constants::kPi) w += constants::kTwoPi;
  return w;
}

}  // namespace jjres
