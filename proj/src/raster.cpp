#include "maploop/raster.hpp"

#include <algorithm>
#include <cmath>

#include "maploop/kernels.hpp"

namespace maploop {

// ---- geometry --------------------------------------------------------------

double Polygon::signed_area() const {
    const std::size_t n = vertices_.size();
    if (n < 3) {
        return 0.0;
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = vertices_[i];
        const Point& b = vertices_[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

Point Polygon::centroid() const {
    const std::size_t n = vertices_.size();
    if (n == 0) {
        return {};
    }
    const double a = signed_area();
    if (a == 0.0) {
        Point mean;
        for (const Point& p : vertices_) {
            mean.x += p.x;
            mean.y += p.y;
        }
        return {mean.x / static_cast<double>(n), mean.y / static_cast<double>(n)};
    }
    // Shift to the first vertex to keep the cross products small.
    const Point o = vertices_.front();
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = vertices_[i].x - o.x;
        const double ay = vertices_[i].y - o.y;
        const double bx = vertices_[(i + 1) % n].x - o.x;
        const double by = vertices_[(i + 1) % n].y - o.y;
        const double cross = ax * by - bx * ay;
        cx += (ax + bx) * cross;
        cy += (ay + by) * cross;
    }
    return {o.x + cx / (6.0 * a), o.y + cy / (6.0 * a)};
}

BoundingBox Polygon::bounds() const {
    if (vertices_.empty()) {
        return {};
    }
    BoundingBox b{vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
    for (const Point& p : vertices_) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

Polygon Polygon::translated(ShiftVector d) const {
    std::vector<Point> out = vertices_;
    for (Point& p : out) {
        p.x += d.dx;
        p.y += d.dy;
    }
    return Polygon(std::move(out));
}

bool Polygon::is_valid() const {
    if (vertices_.size() < 3) {
        return false;
    }
    for (const Point& p : vertices_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            return false;
        }
    }
    return signed_area() != 0.0;
}

void Polygon::validate() const {
    if (vertices_.size() < 3) {
        throw InvalidGeometry("polygon needs at least 3 vertices");
    }
    if (!is_valid()) {
        throw InvalidGeometry("polygon has non-finite vertices or zero area");
    }
}

Polygon make_rectangle(double x0, double y0, double x1, double y1) {
    return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

// ---- rasters -----------------------------------------------------------------

ProbMap::ProbMap(int width, int height, float fill) : RasterBase<float>(width, height, fill) {
    require(fill >= 0.0f && fill <= 1.0f, "probability fill must lie in [0,1]");
}

ProbMap::ProbMap(int width, int height, std::vector<float> values)
    : RasterBase<float>(width, height, std::move(values)) {
    for (float v : values_) {
        require(v >= 0.0f && v <= 1.0f, "probability values must lie in [0,1]");
    }
}

BinaryMask::BinaryMask(int width, int height) : RasterBase<std::uint8_t>(width, height, 0) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : RasterBase<std::uint8_t>(width, height, std::move(bits)) {
    for (std::uint8_t b : values_) {
        require(b <= 1, "binary mask values must be 0 or 1");
    }
}

std::size_t BinaryMask::popcount() const { return kernels::count_nonzero(values_); }

bool BinaryMask::any() const {
    return std::any_of(values_.begin(), values_.end(), [](std::uint8_t b) { return b != 0; });
}

MaskPatch to_patch(const BinaryMask& mask) {
    PixelRect box{mask.width(), mask.height(), 0, 0};
    for (int y = 0; y < mask.height(); ++y) {
        const auto row = mask.row(y);
        for (int x = 0; x < mask.width(); ++x) {
            if (row[x]) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x + 1);
                box.y1 = std::max(box.y1, y + 1);
            }
        }
    }
    if (box.empty()) {
        return {PixelRect{}, BinaryMask(0, 0)};
    }
    BinaryMask bits(box.width(), box.height());
    for (int y = box.y0; y < box.y1; ++y) {
        const auto src = mask.row(y);
        auto dst = bits.mutable_row(y - box.y0);
        std::copy(src.begin() + box.x0, src.begin() + box.x1, dst.begin());
    }
    return {box, std::move(bits)};
}

BinaryMask to_mask(const MaskPatch& patch, int width, int height) {
    BinaryMask out(width, height);
    const PixelRect clip = patch.rect.intersect({0, 0, width, height});
    for (int y = clip.y0; y < clip.y1; ++y) {
        const auto src = patch.bits.row(y - patch.rect.y0);
        auto dst = out.mutable_row(y);
        for (int x = clip.x0; x < clip.x1; ++x) {
            dst[x] = src[x - patch.rect.x0];
        }
    }
    return out;
}

// ---- tiles -------------------------------------------------------------------

TileGrid::TileGrid(int raster_width, int raster_height, int tile_size, int origin_x, int origin_y)
    : tile_size_(tile_size), origin_x_(origin_x), origin_y_(origin_y), raster_width_(raster_width),
      raster_height_(raster_height) {
    require(tile_size > 0, "tile_size must be positive");
    require(raster_width >= 0 && raster_height >= 0, "raster dimensions must be non-negative");
    require(origin_x >= 0 && origin_y >= 0 && origin_x <= raster_width && origin_y <= raster_height,
            "tile origin must lie inside the raster");
    cols_ = (raster_width - origin_x + tile_size - 1) / tile_size;
    rows_ = (raster_height - origin_y + tile_size - 1) / tile_size;
}

std::size_t TileGrid::linear(TileIndex t) const {
    if (!valid(t)) {
        throw RangeError("tile index (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                         ") outside grid");
    }
    return static_cast<std::size_t>(t.row) * cols_ + t.col;
}

TileIndex TileGrid::tile_at(std::size_t linear) const {
    if (linear >= tile_count()) {
        throw RangeError("linear tile index outside grid");
    }
    return {static_cast<int>(linear / cols_), static_cast<int>(linear % cols_)};
}

PixelRect TileGrid::window(TileIndex t) const {
    linear(t);
    const int x0 = origin_x_ + t.col * tile_size_;
    const int y0 = origin_y_ + t.row * tile_size_;
    return {x0, y0, x0 + tile_size_, y0 + tile_size_};
}

// ---- rasterization ----------------------------------------------------------

namespace detail {

void polygon_crossings(const Polygon& polygon, double yc, std::vector<double>& xs) {
    xs.clear();
    const auto& v = polygon.vertices();
    const std::size_t n = v.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = v[i];
        const Point& b = v[j];
        if ((a.y > yc) != (b.y > yc)) {
            xs.push_back((b.x - a.x) * (yc - a.y) / (b.y - a.y) + a.x);
        }
    }
    std::sort(xs.begin(), xs.end());
}

} // namespace detail

BinaryMask rasterize(std::span<const Polygon> polygons, int width, int height) {
    BinaryMask mask(width, height);
    const PixelRect frame{0, 0, width, height};
    for (const Polygon& p : polygons) {
        for_each_run(p, frame, [&](int y, int x0, int x1) {
            auto row = mask.mutable_row(y);
            std::fill(row.begin() + x0, row.begin() + x1, std::uint8_t{1});
        });
    }
    return mask;
}

MaskPatch rasterize_patch(std::span<const Polygon> polygons, int width, int height) {
    const PixelRect frame{0, 0, width, height};
    PixelRect box{0, 0, 0, 0};
    bool first = true;
    for (const Polygon& p : polygons) {
        if (p.size() < 3) {
            throw InvalidGeometry("polygon needs at least 3 vertices");
        }
        const PixelRect r = p.bounds().pixel_cover().intersect(frame);
        if (r.empty()) {
            continue;
        }
        if (first) {
            box = r;
            first = false;
        } else {
            box = {std::min(box.x0, r.x0), std::min(box.y0, r.y0), std::max(box.x1, r.x1),
                   std::max(box.y1, r.y1)};
        }
    }
    if (first) {
        return {PixelRect{}, BinaryMask(0, 0)};
    }
    BinaryMask bits(box.width(), box.height());
    for (const Polygon& p : polygons) {
        for_each_run(p, box, [&](int y, int x0, int x1) {
            auto row = bits.mutable_row(y - box.y0);
            std::fill(row.begin() + (x0 - box.x0), row.begin() + (x1 - box.x0), std::uint8_t{1});
        });
    }
    return {box, std::move(bits)};
}

// ---- crop / shift --------------------------------------------------------------

namespace {

template <typename Out, typename In>
Out crop_impl(const In& src, TileIndex tile, const TileGrid& grid) {
    const PixelRect win = grid.window(tile);
    Out out(grid.tile_size(), grid.tile_size());
    const PixelRect clip = win.intersect(src.frame());
    for (int y = clip.y0; y < clip.y1; ++y) {
        const auto s = src.row(y);
        auto d = out.mutable_row(y - win.y0);
        std::copy(s.begin() + clip.x0, s.begin() + clip.x1, d.begin() + (clip.x0 - win.x0));
    }
    return out;
}

} // namespace

ProbMap crop(const ProbMap& map, TileIndex tile, const TileGrid& grid) {
    return crop_impl<ProbMap>(map, tile, grid);
}

BinaryMask crop(const BinaryMask& mask, TileIndex tile, const TileGrid& grid) {
    return crop_impl<BinaryMask>(mask, tile, grid);
}

BinaryMask shift_mask(const BinaryMask& mask, ShiftVector d) {
    BinaryMask out(mask.width(), mask.height());
    const PixelRect dst = mask.frame().translate(d).intersect(mask.frame());
    for (int y = dst.y0; y < dst.y1; ++y) {
        const auto s = mask.row(y - d.dy);
        auto o = out.mutable_row(y);
        std::copy(s.begin() + (dst.x0 - d.dx), s.begin() + (dst.x1 - d.dx), o.begin() + dst.x0);
    }
    return out;
}

} // namespace maploop

namespace maploop {

BinaryMask rasterize_window(std::span<const Polygon> polygons, const PixelRect& window, int raster_width,
                            int raster_height) {
    BinaryMask out(window.width(), window.height());
    const PixelRect clip = window.intersect({0, 0, raster_width, raster_height});
    if (clip.empty()) {
        return out;
    }
    for (const Polygon& p : polygons) {
        for_each_run(p, clip, [&](int y, int x0, int x1) {
            auto row = out.mutable_row(y - window.y0);
            std::fill(row.begin() + (x0 - window.x0), row.begin() + (x1 - window.x0), std::uint8_t{1});
        });
    }
    return out;
}

} // namespace maploop
