#include "jjres/designer.hpp"

#include <cmath>
#include <sstream>

#include "jjres/constants.hpp"
#include "jjres/errors.hpp"
#include "jjres/kerrfit.hpp"

namespace jjres {

using namespace constants;

void validate(const JunctionSpec& s) {
  if (!(s.r_normal > 0.0) || !(s.width > 0.0) || !(s.length > 0.0) || !(s.t_ox > 0.0) ||
      !(s.epsilon_r > 0.0) || !(s.delta0_ev > 0.0))
    throw DomainError("junction parameters must be strictly positive");
}

void validate(const ArraySpec& a) {
  validate(a.junction);
  if (a.n_junctions < 1) throw DomainError("array needs at least one junction");
  if (!(a.total_length > 0.0) || !(a.c_per_length > 0.0))
    throw DomainError("array length and capacitance per length must be positive");
  if (!(a.extra_inductance >= 0.0)) throw DomainError("extra inductance must be non-negative");
}

JunctionElectrical junction_electrical(const JunctionSpec& spec) {
  validate(spec);
  // Delta0 [eV] / e is the gap voltage.
  const double i_c = kPi * spec.delta0_ev / (2.0 * spec.r_normal);
  const double l_j = kFluxQuantum / (kTwoPi * i_c);
  const double e_j = kFluxQuantum * i_c / (kTwoPi * kPlanck);
  return {i_c, l_j, e_j};
}

JunctionCapacitive junction_capacitive(const JunctionSpec& spec) {
  validate(spec);
  const double c_j = kVacuumPermittivity * spec.epsilon_r * spec.width * spec.length / spec.t_ox;
  const double e_c = kElementaryCharge * kElementaryCharge / (2.0 * c_j * kPlanck);
  const double l_j = junction_electrical(spec).l_j;
  const double plasma = 1.0 / (kTwoPi * std::sqrt(l_j * c_j));
  return {c_j, e_c, plasma};
}

double extra_inductance_for_total(const ArraySpec& array, double l_total) {
  const double junctions = array.n_junctions * junction_electrical(array.junction).l_j;
  if (l_total < junctions)
    throw DomainError("requested total inductance is below the junction contribution");
  return l_total - junctions;
}

double loaded_capacitance_from_frequency(double f_loaded, double l_eq) {
  if (!(f_loaded > 0.0) || !(l_eq > 0.0))
    throw DomainError("loaded frequency and inductance must be positive");
  const double w = kTwoPi * f_loaded;
  return 1.0 / (w * w * l_eq);
}

ArrayDesignReport quarter_wave(const ArraySpec& array, std::optional<double> l_eq_override,
                               std::optional<double> f_loaded) {
  validate(array);
  const auto el = junction_electrical(array.junction);
  const auto cap = junction_capacitive(array.junction);

  ArrayDesignReport r;
  r.i_c = el.i_c;
  r.l_j = el.l_j;
  r.e_j = el.e_j;
  r.c_j = cap.c_j;
  r.e_c = cap.e_c;
  r.ej_over_ec = el.e_j / cap.e_c;
  r.plasma_frequency = cap.plasma;
  r.l_total = array.n_junctions * el.l_j + array.extra_inductance;
  r.l_eq_standard = 8.0 / (kPi * kPi) * r.l_total;
  r.l_eq = r.l_eq_standard;
  if (l_eq_override) {
    if (!(*l_eq_override > 0.0)) throw DomainError("l_eq override must be positive");
    r.l_eq = *l_eq_override;
    r.l_eq_overridden = true;
    std::ostringstream note;
    note << "l_eq overridden to " << r.l_eq << " H; standard quarter-wave mapping gives "
         << r.l_eq_standard << " H (" << 100.0 * (r.l_eq / r.l_eq_standard - 1.0) << " %)";
    r.notes.push_back(note.str());
  }
  r.c_total = array.c_per_length * array.total_length;
  r.c_eq = 0.5 * r.c_total;
  r.f_bare = 1.0 / (kTwoPi * std::sqrt(r.l_eq * r.c_eq));
  r.z_eq = std::sqrt(r.l_eq / r.c_eq);
  r.kerr_estimate = kerr_from_array(cap.e_c, array.n_junctions);
  if (f_loaded) {
    r.f_loaded = *f_loaded;
    r.c_eq_loaded = loaded_capacitance_from_frequency(*f_loaded, r.l_eq);
    r.z_eq_loaded = std::sqrt(r.l_eq / *r.c_eq_loaded);
  }
  return r;
}

}  // namespace jjres
