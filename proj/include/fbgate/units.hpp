#pragma once

#include <cmath>
#include <numbers>

namespace fbgate::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kHbar = 1.054571817e-34;        // J s
inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kPotassium40Mass = 39.963998166 * kAtomicMassUnit;

/// Harmonic oscillator length sqrt(hbar / (m omega)) in metres.
inline double oscillator_length(double mass, double omega) {
  return std::sqrt(kHbar / (mass * omega));
}

/// Energy h * frequency_hz expressed in units of hbar * omega.
inline double frequency_to_hbar_omega(double frequency_hz, double omega) {
  return 2.0 * kPi * frequency_hz / omega;
}

}  // namespace fbgate::units
