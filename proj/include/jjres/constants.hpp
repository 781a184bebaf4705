#pragma once

#include <numbers>

// CODATA 2018 values. h, e are exact in the revised SI.
namespace jjres::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kPlanck = 6.62607015e-34;           // J s
inline constexpr double kHbar = kPlanck / kTwoPi;           // J s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kFluxQuantum = kPlanck / (2.0 * kElementaryCharge);  // Wb
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

}  // namespace jjres::constants
