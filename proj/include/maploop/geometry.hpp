#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

namespace maploop {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Integer pixel translation. Alignment candidates, edit payloads and
/// degradation offsets all use this type.
struct ShiftVector {
    int dx = 0;
    int dy = 0;

    friend bool operator==(const ShiftVector&, const ShiftVector&) = default;
    friend auto operator<=>(const ShiftVector&, const ShiftVector&) = default;

    ShiftVector operator-() const { return {-dx, -dy}; }
};

inline double norm(ShiftVector d) {
    return std::hypot(static_cast<double>(d.dx), static_cast<double>(d.dy));
}

inline double distance(ShiftVector a, ShiftVector b) {
    return norm({a.dx - b.dx, a.dy - b.dy});
}

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return std::max(0, x1 - x0); }
    int height() const { return std::max(0, y1 - y0); }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }

    PixelRect intersect(const PixelRect& o) const {
        return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
    }
    PixelRect dilate(int r) const { return {x0 - r, y0 - r, x1 + r, y1 + r}; }
    PixelRect translate(ShiftVector d) const { return {x0 + d.dx, y0 + d.dy, x1 + d.dx, y1 + d.dy}; }
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Real-valued axis-aligned box, closed.
struct BoundingBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    bool intersects(const BoundingBox& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
    // Pixels whose centers can fall inside the box.
    PixelRect pixel_cover() const {
        return {static_cast<int>(std::floor(min_x)), static_cast<int>(std::floor(min_y)),
                static_cast<int>(std::ceil(max_x)) + 1, static_cast<int>(std::ceil(max_y)) + 1};
    }
};

/// Simple polygon, implicitly closed (last vertex connects to the first).
class Polygon {
public:
    Polygon() = default;
    explicit Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {}

    const std::vector<Point>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }

    /// Signed shoelace area; positive for counter-clockwise in a y-up frame.
    double signed_area() const;
    double area() const { return std::abs(signed_area()); }
    /// Area centroid; falls back to the vertex mean for zero-area input.
    Point centroid() const;
    BoundingBox bounds() const;
    Polygon translated(ShiftVector d) const;

    /// >= 3 vertices, all finite, non-zero area.
    bool is_valid() const;
    /// Throws InvalidGeometry when !is_valid().
    void validate() const;

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point> vertices_;
};

/// Axis-aligned rectangle polygon with corners (x0,y0)-(x1,y1).
Polygon make_rectangle(double x0, double y0, double x1, double y1);

/// Row/column address of a tile in a TileGrid.
struct TileIndex {
    int row = 0;
    int col = 0;

    friend bool operator==(const TileIndex&, const TileIndex&) = default;
    friend auto operator<=>(const TileIndex&, const TileIndex&) = default;
};

} // namespace maploop
