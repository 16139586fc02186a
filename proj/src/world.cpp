#include "maploop/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "maploop/errors.hpp"
#include "maploop/rng.hpp"

namespace maploop {

Polygon make_octagon(int cx, int cy, int r) {
    const int a = static_cast<int>(std::lround(r * (std::numbers::sqrt2 - 1.0)));
    return Polygon({{double(cx - a), double(cy - r)},
                    {double(cx + a), double(cy - r)},
                    {double(cx + r), double(cy - a)},
                    {double(cx + r), double(cy + a)},
                    {double(cx + a), double(cy + r)},
                    {double(cx - a), double(cy + r)},
                    {double(cx - r), double(cy + a)},
                    {double(cx - r), double(cy - a)}});
}

FootprintSet generate_world(const WorldParams& p) {
    require(p.tiles_x > 0 && p.tiles_y > 0 && p.tile_size > 0, "world needs a positive tile layout");
    require(p.villages >= 0 && p.villages <= p.tiles_x * p.tiles_y, "more villages than tiles");
    require(p.buildings_min >= 0 && p.buildings_max >= p.buildings_min, "bad building count range");
    require(p.size_min >= 3 && p.size_max >= p.size_min, "bad building size range");

    Rng rng(p.seed);
    // Distinct tiles for the villages (partial Fisher-Yates).
    std::vector<int> tiles(static_cast<std::size_t>(p.tiles_x * p.tiles_y));
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        tiles[i] = static_cast<int>(i);
    }
    for (int i = 0; i < p.villages; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, static_cast<std::int64_t>(tiles.size()) - 1));
        std::swap(tiles[static_cast<std::size_t>(i)], tiles[j]);
    }

    FootprintSet set;
    FootprintId next = 1;
    std::vector<BoundingBox> placed;
    for (int v = 0; v < p.villages; ++v) {
        const int tile = tiles[static_cast<std::size_t>(v)];
        const int tx = (tile % p.tiles_x) * p.tile_size;
        const int ty = (tile / p.tiles_x) * p.tile_size;
        const int cx = tx + p.tile_size / 2 + static_cast<int>(rng.uniform_int(-p.center_jitter, p.center_jitter));
        const int cy = ty + p.tile_size / 2 + static_cast<int>(rng.uniform_int(-p.center_jitter, p.center_jitter));
        const auto count = rng.uniform_int(p.buildings_min, p.buildings_max);
        for (std::int64_t b = 0; b < count; ++b) {
            for (int attempt = 0; attempt < 200; ++attempt) {
                const double ang = rng.uniform() * 2.0 * std::numbers::pi;
                const double rad = std::sqrt(rng.uniform()) * p.village_radius;
                const int bx = cx + static_cast<int>(std::lround(rad * std::cos(ang)));
                const int by = cy + static_cast<int>(std::lround(rad * std::sin(ang)));
                Polygon poly;
                if (rng.uniform() < 0.5) {
                    const auto w = rng.uniform_int(p.size_min, p.size_max);
                    const auto h = rng.uniform_int(p.size_min, p.size_max);
                    const double x0 = bx - static_cast<double>(w / 2);
                    const double y0 = by - static_cast<double>(h / 2);
                    poly = make_rectangle(x0, y0, x0 + static_cast<double>(w), y0 + static_cast<double>(h));
                } else {
                    const auto r = rng.uniform_int(p.size_min / 2, p.size_max / 2);
                    poly = make_octagon(bx, by, static_cast<int>(r));
                }
                BoundingBox box = poly.bounds();
                BoundingBox padded{box.min_x - p.spacing, box.min_y - p.spacing, box.max_x + p.spacing,
                                   box.max_y + p.spacing};
                const bool clash = std::any_of(placed.begin(), placed.end(),
                                               [&](const BoundingBox& o) { return padded.intersects(o); });
                if (clash || box.min_x < 0 || box.min_y < 0 || box.max_x > p.width() || box.max_y > p.height()) {
                    continue;
                }
                placed.push_back(box);
                set.insert({next++, std::move(poly), Provenance::original});
                break;
            }
        }
    }
    return set;
}

FootprintSet smooth_shift(const FootprintSet& set, double magnitude, double wavelength, std::uint64_t seed) {
    require(magnitude >= 0.0 && wavelength > 0.0, "bad smooth shift parameters");
    Rng rng(seed);
    const double phase = rng.uniform() * 2.0 * std::numbers::pi;
    const double kx = (rng.uniform() - 0.5) * 2.0 * std::numbers::pi / wavelength;
    const double ky = (rng.uniform() - 0.5) * 2.0 * std::numbers::pi / wavelength;
    FootprintSet out = set;
    for (const auto& [id, f] : set) {
        const Point c = f.polygon.centroid();
        const double theta = phase + kx * c.x + ky * c.y;
        const ShiftVector d{static_cast<int>(std::lround(magnitude * std::cos(theta))),
                            static_cast<int>(std::lround(magnitude * std::sin(theta)))};
        Footprint moved = f;
        moved.polygon = f.polygon.translated(d);
        out.replace(std::move(moved));
    }
    return out;
}

} // namespace maploop
