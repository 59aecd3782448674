#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "movin/features.hpp"

namespace movin {

/// Overrides for generateSequence; zero means "draw from the seed".
struct GenerateOptions {
  double speed = 0.0;  // m/s, locomotion categories only
  double scale = 0.0;  // skeleton offset scale (subject size)
};

/// Supported motion categories and their family tag ("static" or
/// "locomotion"). Unknown categories throw ValidationError.
const std::vector<std::string>& motionCategories();
std::string categoryFamily(const std::string& category);

/// Procedural animation on the stock skeleton (offsets scaled +-10% for
/// subject variety): idle sway, squat cycles, or walking/jogging along a
/// circular arc in front of the sensor with analytically planted feet.
/// Deterministic given (category, duration, seed, options). The root stays
/// 2-4 m from the sensor origin inside the horizontal field of view.
/// Duration must be >= 1 s; frames = round(duration * 20 Hz).
MotionClip generateSequence(const std::string& category, double durationS, std::uint64_t seed,
                            const GenerateOptions& opts = {});

}  // namespace movin
