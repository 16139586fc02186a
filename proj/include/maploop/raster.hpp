#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maploop/errors.hpp"
#include "maploop/geometry.hpp"

namespace maploop {

/// Affine metadata carried through I/O. Never used in pixel math.
struct RasterMeta {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double scale_x = 1.0;
    double scale_y = 1.0;

    friend bool operator==(const RasterMeta&, const RasterMeta&) = default;
};

template <typename T>
class RasterBase {
public:
    using value_type = T;

    RasterBase() = default;
    RasterBase(int width, int height, T fill = T{})
        : width_(width), height_(height),
          values_(static_cast<std::size_t>(checked_dim(width)) * checked_dim(height), fill) {}
    RasterBase(int width, int height, std::vector<T> values)
        : width_(width), height_(height), values_(std::move(values)) {
        require(width >= 0 && height >= 0, "raster dimensions must be non-negative");
        require(values_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                "raster value count must equal width * height");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    PixelRect frame() const { return {0, 0, width_, height_}; }

    T at(int x, int y) const { return values_[index(x, y)]; }
    std::span<const T> row(int y) const {
        return {values_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }
    std::span<const T> values() const { return values_; }

    friend bool operator==(const RasterBase&, const RasterBase&) = default;

protected:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }
    static int checked_dim(int d) {
        require(d >= 0, "raster dimensions must be non-negative");
        return d;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

/// Per-pixel building probability in [0,1], row-major.
class ProbMap : public RasterBase<float> {
public:
    ProbMap() = default;
    ProbMap(int width, int height, float fill = 0.0f);
    /// Throws ContractError if any value is outside [0,1] or not finite.
    ProbMap(int width, int height, std::vector<float> values);

    /// Mutable access for producers; callers keep values in [0,1].
    std::span<float> mutable_values() { return values_; }
    std::span<float> mutable_row(int y) {
        return {values_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }
    void set(int x, int y, float v) { values_[index(x, y)] = v; }
};

/// Row-major {0,1} raster.
class BinaryMask : public RasterBase<std::uint8_t> {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height);
    /// Throws ContractError on values other than 0 or 1.
    BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

    void set(int x, int y, bool on) { values_[index(x, y)] = on ? 1 : 0; }
    std::span<std::uint8_t> mutable_row(int y) {
        return {values_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }
    std::size_t popcount() const;
    bool any() const;
};

/// A binary mask positioned inside a larger raster frame. `bits` covers
/// `rect` exactly; everything outside `rect` is zero.
struct MaskPatch {
    PixelRect rect;
    BinaryMask bits;

    bool at(int x, int y) const {
        return rect.contains(x, y) && bits.at(x - rect.x0, y - rect.y0) != 0;
    }
    std::size_t popcount() const { return bits.popcount(); }
};

/// Tight patch around the ones of a full-frame mask (empty rect if none).
MaskPatch to_patch(const BinaryMask& mask);
/// Expands a patch back to a full width x height mask.
BinaryMask to_mask(const MaskPatch& patch, int width, int height);

/// Fixed-size tiling of a raster. Edge tiles are zero padded to tile_size.
class TileGrid {
public:
    TileGrid() = default;
    TileGrid(int raster_width, int raster_height, int tile_size = 256, int origin_x = 0, int origin_y = 0);

    int tile_size() const { return tile_size_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int origin_x() const { return origin_x_; }
    int origin_y() const { return origin_y_; }
    int raster_width() const { return raster_width_; }
    int raster_height() const { return raster_height_; }
    std::size_t tile_count() const { return static_cast<std::size_t>(rows_) * cols_; }

    bool valid(TileIndex t) const { return t.row >= 0 && t.row < rows_ && t.col >= 0 && t.col < cols_; }
    /// Throws RangeError on an invalid index.
    std::size_t linear(TileIndex t) const;
    TileIndex tile_at(std::size_t linear) const;
    /// Full tile window in raster pixels (may extend past the raster edge).
    PixelRect window(TileIndex t) const;

    friend bool operator==(const TileGrid&, const TileGrid&) = default;

private:
    int tile_size_ = 256;
    int rows_ = 0;
    int cols_ = 0;
    int origin_x_ = 0;
    int origin_y_ = 0;
    int raster_width_ = 0;
    int raster_height_ = 0;
};

/// Pixel (x,y) is set iff its center (x+0.5, y+0.5) lies inside any polygon
/// under the even-odd rule. Throws InvalidGeometry for polygons with < 3
/// vertices.
BinaryMask rasterize(std::span<const Polygon> polygons, int width, int height);

/// Same rule, but only materializes the clipped bounding window of the
/// polygons. Used where a full-frame mask per object would be wasteful.
MaskPatch rasterize_patch(std::span<const Polygon> polygons, int width, int height);

/// Calls fill(y, x_begin, x_end) for every horizontal run of set pixels of
/// one polygon, clipped to `clip`.
template <typename Fn>
void for_each_run(const Polygon& polygon, const PixelRect& clip, Fn&& fill);

ProbMap crop(const ProbMap& map, TileIndex tile, const TileGrid& grid);
BinaryMask crop(const BinaryMask& mask, TileIndex tile, const TileGrid& grid);

/// Translates by d, zero-filling exposed pixels.
BinaryMask shift_mask(const BinaryMask& mask, ShiftVector d);

namespace detail {
void polygon_crossings(const Polygon& polygon, double yc, std::vector<double>& xs);

// Smallest integer x with x + 0.5 >= v, exact for any finite v.
inline int first_center_at_or_after(double v) {
    v = std::clamp(v, -1.0e9, 1.0e9);
    int x = static_cast<int>(std::ceil(v - 0.5));
    while (x - 1 + 0.5 >= v) {
        --x;
    }
    while (x + 0.5 < v) {
        ++x;
    }
    return x;
}
} // namespace detail

template <typename Fn>
void for_each_run(const Polygon& polygon, const PixelRect& clip, Fn&& fill) {
    if (polygon.size() < 3) {
        throw InvalidGeometry("polygon needs at least 3 vertices");
    }
    const PixelRect box = polygon.bounds().pixel_cover().intersect(clip);
    if (box.empty()) {
        return;
    }
    std::vector<double> xs;
    for (int y = box.y0; y < box.y1; ++y) {
        detail::polygon_crossings(polygon, y + 0.5, xs);
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // Center x+0.5 inside iff xs[k] <= x+0.5 < xs[k+1].
            int begin = detail::first_center_at_or_after(xs[k]);
            int end = detail::first_center_at_or_after(xs[k + 1]);
            begin = std::max(begin, box.x0);
            end = std::min(end, box.x1);
            if (begin < end) {
                fill(y, begin, end);
            }
        }
    }
}

} // namespace maploop

namespace maploop {

/// Rasterizes into a window-sized mask whose pixel (0,0) is window (x0,y0).
/// Pixels outside the raster frame stay 0.
BinaryMask rasterize_window(std::span<const Polygon> polygons, const PixelRect& window, int raster_width,
                            int raster_height);

} // namespace maploop
