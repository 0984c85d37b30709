#pragma once

#include "analogy/rpm.hpp"

namespace analogy::rpm {

inline constexpr int kDefaultRasterSide = 20;

// Deterministic rasterization: each entity is a regular polygon (or circle)
// centred in its slot cell, radius scaled by size level, outline at 1.0 and
// interior filled with an intensity that encodes the color level. Values are
// quantized to multiples of 1/255 so byte serialization is lossless.
// Throws std::invalid_argument below 8×8.
Raster render_raster(const Panel& panel, Config config, int height = kDefaultRasterSide,
                     int width = kDefaultRasterSide);

// Fill intensity for a color level.
double fill_intensity(int color, int color_levels = kColorLevels);

}  // namespace analogy::rpm
