#pragma once

#include <optional>
#include <string>
#include <vector>

namespace jjres {

/// One Josephson junction as fabricated. Defaults are Al / AlOx values.
struct JunctionSpec {
  double r_normal = 1.25e3;   // Ohm, room-temperature normal-state resistance
  double width = 520e-9;      // m
  double length = 760e-9;     // m
  double t_ox = 1e-9;         // m
  double epsilon_r = 9.0;
  double delta0_ev = 180e-6;  // eV
};

void validate(const JunctionSpec& spec);

struct JunctionElectrical {
  double i_c = 0.0;  // A
  double l_j = 0.0;  // H
  double e_j = 0.0;  // Hz
};

struct JunctionCapacitive {
  double c_j = 0.0;     // F
  double e_c = 0.0;     // Hz
  double plasma = 0.0;  // Hz
};

/// Ambegaokar-Baratoff critical current and the resulting inductance and E_J.
JunctionElectrical junction_electrical(const JunctionSpec& spec);

/// Parallel-plate barrier capacitance, E_C = e^2 / (2 C h) and the plasma frequency.
JunctionCapacitive junction_capacitive(const JunctionSpec& spec);

struct ArraySpec {
  int n_junctions = 46;
  JunctionSpec junction;
  double extra_inductance = 0.0;  // H, spurious Dolan-bridge junctions etc.
  double total_length = 207e-6;   // m
  double c_per_length = 0.057e-15 / 1e-6;  // F/m
};

void validate(const ArraySpec& array);

/// Extra series inductance that brings the array to `l_total`.
/// Throws DomainError when the junctions alone already exceed it.
double extra_inductance_for_total(const ArraySpec& array, double l_total);

struct ArrayDesignReport {
  double i_c = 0.0;
  double l_j = 0.0;
  double e_j = 0.0;
  double c_j = 0.0;
  double e_c = 0.0;
  double ej_over_ec = 0.0;
  double plasma_frequency = 0.0;
  double l_total = 0.0;
  double l_eq = 0.0;
  double l_eq_standard = 0.0;  // 8 l_total / pi^2
  bool l_eq_overridden = false;
  double c_total = 0.0;
  double c_eq = 0.0;
  double f_bare = 0.0;
  double z_eq = 0.0;
  double kerr_estimate = 0.0;  // Hz
  // Present when a loaded (simulated or measured) resonance frequency is supplied.
  std::optional<double> f_loaded;
  std::optional<double> c_eq_loaded;
  std::optional<double> z_eq_loaded;
  std::vector<std::string> notes;
};

/// Lumped equivalent of the quarter-wave fundamental mode of the array:
/// l_eq = 8 l_total / pi^2 (or the override), c_eq = c_total / 2.
ArrayDesignReport quarter_wave(const ArraySpec& array,
                               std::optional<double> l_eq_override = std::nullopt,
                               std::optional<double> f_loaded = std::nullopt);

/// Capacitance that puts an inductance l_eq at resonance f_loaded.
double loaded_capacitance_from_frequency(double f_loaded, double l_eq);

}  // namespace jjres
