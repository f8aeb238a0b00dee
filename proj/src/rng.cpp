#include "cascade/rng.hpp"

#include <cmath>
#include <numbers>

namespace cascade {

double normal(Rng& rng) {
  // Box-Muller, one draw per call (the partner value is discarded so the
  // stream stays stateless apart from the engine).
  const double u1 = uniform_open0(rng);
  const double u2 = uniform_open0(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cascade
