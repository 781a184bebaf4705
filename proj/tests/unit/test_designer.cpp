#include "doctest.h"

#include <cmath>

#include "jjres/designer.hpp"
#include "jjres/kerrfit.hpp"
#include "oracles.hpp"

using namespace jjres;

namespace {

constexpr double kPhi0 = oracle::kH / (2 * oracle::kE);

ArraySpec reference_array() {
  ArraySpec a;
  a.extra_inductance = extra_inductance_for_total(a, 78.9e-9);
  return a;
}

}  // namespace

TEST_SUITE("designer") {

TEST_CASE("junction electrical parameters") {
  const auto e = junction_electrical(JunctionSpec{});
  CHECK(e.i_c == doctest::Approx(220e-9).epsilon(0.03));
  CHECK(e.l_j == doctest::Approx(1.48e-9).epsilon(0.03));
  CHECK(e.e_j == doctest::Approx(111e9).epsilon(0.03));
  CHECK(e.i_c == doctest::Approx(oracle::kPi * 180e-6 / (2 * 1.25e3)).epsilon(1e-12));
  CHECK(e.l_j * e.i_c == doctest::Approx(kPhi0 / (2 * oracle::kPi)).epsilon(1e-12));
  JunctionSpec twice;
  twice.r_normal *= 2;
  const auto e2 = junction_electrical(twice);
  CHECK(e2.i_c == doctest::Approx(e.i_c / 2).epsilon(1e-15));
  CHECK(e2.l_j == doctest::Approx(e.l_j * 2).epsilon(1e-15));
}

TEST_CASE("junction capacitive parameters") {
  const auto c = junction_capacitive(JunctionSpec{});
  CHECK(c.c_j == doctest::Approx(31.5e-15).epsilon(0.05));
  CHECK(c.e_c == doctest::Approx(0.6e9).epsilon(0.05));
  CHECK(c.plasma == doctest::Approx(23e9).epsilon(0.05));
  const auto e = junction_electrical(JunctionSpec{});
  CHECK(e.e_j / c.e_c == doctest::Approx(180).epsilon(0.10));
  const double wp = 2 * oracle::kPi * c.plasma;
  CHECK(wp * wp * e.l_j * c.c_j == doctest::Approx(1.0).epsilon(1e-12));
  JunctionSpec half;
  half.width /= 2;
  const auto c2 = junction_capacitive(half);
  CHECK(c2.c_j == doctest::Approx(c.c_j / 2).epsilon(1e-15));
  CHECK(c2.e_c == doctest::Approx(c.e_c * 2).epsilon(1e-15));
}

TEST_CASE("quarter-wave report with the 67 nH override") {
  const auto r = quarter_wave(reference_array(), 67e-9, 7.02e9);
  CHECK(r.l_total == doctest::Approx(78.9e-9).epsilon(1e-12));
  CHECK(r.l_eq_standard == doctest::Approx(63.9e-9).epsilon(0.002));
  CHECK(r.l_eq_overridden);
  CHECK_FALSE(r.notes.empty());
  CHECK(r.f_bare == doctest::Approx(8.09e9).epsilon(0.02));
  CHECK(r.c_eq == doctest::Approx(5.78e-15).epsilon(0.05));
  REQUIRE(r.z_eq_loaded);
  CHECK(*r.z_eq_loaded == doctest::Approx(3e3).epsilon(0.05));
  CHECK(*r.c_eq_loaded == doctest::Approx(7.7e-15).epsilon(0.01));
  CHECK(r.kerr_estimate == doctest::Approx(280e3).epsilon(0.10));
  CHECK(r.ej_over_ec == doctest::Approx(r.e_j / r.e_c).epsilon(1e-12));
  CHECK(r.z_eq == doctest::Approx(std::sqrt(r.l_eq / r.c_eq)).epsilon(1e-12));
  CHECK(r.z_eq * r.z_eq == doctest::Approx(r.l_eq / r.c_eq).epsilon(1e-12));
}

TEST_CASE("standard lumped mapping and scaling laws") {
  ArraySpec a;
  const auto r = quarter_wave(a);
  CHECK_FALSE(r.l_eq_overridden);
  CHECK(r.l_eq == doctest::Approx(8 / (oracle::kPi * oracle::kPi) * r.l_total).epsilon(1e-15));
  CHECK(r.c_eq == doctest::Approx(a.c_per_length * a.total_length / 2).epsilon(1e-15));
  CHECK_FALSE(r.f_loaded);
  a.n_junctions *= 4;
  CHECK(quarter_wave(a).f_bare == doctest::Approx(r.f_bare / 2).epsilon(1e-14));
  double prev = HUGE_VAL;
  for (int n = 10; n <= 100; n += 10) {
    a.n_junctions = n;
    const double f = quarter_wave(a).f_bare;
    CHECK(f < prev);
    prev = f;
  }
  double z = 0;
  for (double l : {30e-9, 50e-9, 70e-9}) {
    const double zl = quarter_wave(ArraySpec{}, l).z_eq;
    CHECK(zl > z);
    z = zl;
  }
}

TEST_CASE("loaded capacitance") {
  const double c = loaded_capacitance_from_frequency(7.02e9, 67e-9);
  CHECK(c == doctest::Approx(7.7e-15).epsilon(0.01));
  CHECK(std::sqrt(67e-9 / c) == doctest::Approx(2.95e3).epsilon(0.01));
  const double w = 2 * oracle::kPi * 5.5e9;
  CHECK(w * w * 40e-9 * loaded_capacitance_from_frequency(5.5e9, 40e-9) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(loaded_capacitance_from_frequency(7e9, 4 * 67e-9) ==
        doctest::Approx(loaded_capacitance_from_frequency(7e9, 67e-9) / 4).epsilon(1e-15));
  CHECK_THROWS_AS(loaded_capacitance_from_frequency(0.0, 67e-9), DomainError);
}

TEST_CASE("spurious inductance bookkeeping") {
  ArraySpec a;
  const double extra = extra_inductance_for_total(a, 78.9e-9);
  const auto e = junction_electrical(a.junction);
  CHECK(extra == doctest::Approx(78.9e-9 - 46 * e.l_j).epsilon(1e-12));
  CHECK(extra > 0);
  CHECK_THROWS_AS(extra_inductance_for_total(a, 10e-9), DomainError);
}

TEST_CASE("invalid specs") {
  JunctionSpec j;
  j.t_ox = 0;
  CHECK_THROWS_AS(junction_capacitive(j), DomainError);
  ArraySpec a;
  a.n_junctions = 0;
  CHECK_THROWS_AS(quarter_wave(a), DomainError);
  CHECK_THROWS_AS(quarter_wave(ArraySpec{}, -1e-9), DomainError);
}

}
