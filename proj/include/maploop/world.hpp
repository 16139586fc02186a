#pragma once

#include <cstdint>

#include "maploop/annotations.hpp"

namespace maploop {

/// Synthetic rural scene: villages of small huts, each village inside one
/// tile, every other tile empty.
struct WorldParams {
    int tiles_x = 20;
    int tiles_y = 20;
    int tile_size = 256;
    int villages = 12;
    int buildings_min = 22;
    int buildings_max = 30;
    double village_radius = 70.0;
    int center_jitter = 10;
    int size_min = 6;  // building extent in pixels
    int size_max = 10;
    int spacing = 3;    // minimum gap between building boxes
    std::uint64_t seed = 1;

    int width() const { return tiles_x * tile_size; }
    int height() const { return tiles_y * tile_size; }
};

FootprintSet generate_world(const WorldParams& params);

/// Octagon with integer vertices approximating a circle of radius r.
Polygon make_octagon(int cx, int cy, int r);

/// Translates every footprint by a smoothly varying field of magnitude
/// `magnitude` px (direction rotates slowly across the raster), rounded to
/// integers. Used to simulate co-registration error.
FootprintSet smooth_shift(const FootprintSet& set, double magnitude, double wavelength, std::uint64_t seed);

} // namespace maploop
