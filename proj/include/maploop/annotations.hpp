#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "maploop/geometry.hpp"
#include "maploop/raster.hpp"

namespace maploop {

using FootprintId = std::uint64_t;

enum class Provenance { original, user_added, aligned };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct Footprint {
    FootprintId id = 0;
    Polygon polygon;
    Provenance provenance = Provenance::original;

    friend bool operator==(const Footprint&, const Footprint&) = default;
};

/// Id-keyed footprint collection. Treated as an immutable value: every
/// modifying operation returns a new set.
class FootprintSet {
public:
    using Map = std::map<FootprintId, Footprint>;

    FootprintSet() = default;
    explicit FootprintSet(RasterMeta meta) : meta_(meta) {}

    /// Throws ContractError on a duplicate id, InvalidGeometry on a bad polygon.
    void insert(Footprint f);
    void erase(FootprintId id);
    void replace(Footprint f);

    bool contains(FootprintId id) const { return items_.count(id) != 0; }
    /// Throws MissingTarget if absent.
    const Footprint& get(FootprintId id) const;
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    Map::const_iterator begin() const { return items_.begin(); }
    Map::const_iterator end() const { return items_.end(); }

    /// Id the next `add` edit receives: one past the largest id ever held.
    FootprintId next_id() const { return next_id_; }
    void set_next_id(FootprintId id) { next_id_ = std::max(next_id_, id); }

    const RasterMeta& meta() const { return meta_; }
    void set_meta(RasterMeta meta) { meta_ = meta; }

    std::vector<Polygon> polygons() const;

    friend bool operator==(const FootprintSet&, const FootprintSet&) = default;

private:
    Map items_;
    RasterMeta meta_;
    FootprintId next_id_ = 1;
};

enum class EditKind { align, add, remove };

std::string_view to_string(EditKind k);
EditKind parse_edit_kind(std::string_view s);

struct Edit {
    EditKind kind = EditKind::align;
    std::optional<FootprintId> target_id;
    std::optional<Polygon> polygon;  // add
    ShiftVector shift;               // align
    TileIndex tile;
    std::uint64_t seq = 0;

    static Edit align(FootprintId id, ShiftVector shift, TileIndex tile = {});
    static Edit add(Polygon polygon, TileIndex tile = {});
    static Edit remove(FootprintId id, TileIndex tile = {});

    friend bool operator==(const Edit&, const Edit&) = default;
};

/// Applies one edit to a copy of `set`. `add` assigns set.next_id() with
/// provenance user_added; `align` translates the target polygon.
/// Throws MissingTarget for unknown ids and InvalidGeometry for bad polygons.
FootprintSet apply_edit(const FootprintSet& set, const Edit& e);

/// Replays an edit log in order.
FootprintSet replay(const FootprintSet& original, const std::vector<Edit>& log);

struct FootprintGroup {
    std::vector<FootprintId> member_ids;
    Point centroid;

    friend bool operator==(const FootprintGroup&, const FootprintGroup&) = default;
};

constexpr double kDefaultGroupDistance = 100.0;

/// Single-linkage components over footprints whose centroids are within
/// dist_threshold. Members ascending; groups ordered by smallest member id.
std::vector<FootprintGroup> group_by_proximity(const FootprintSet& set,
                                               double dist_threshold = kDefaultGroupDistance);

/// True when the polygon's bounding box overlaps the window interior.
bool bbox_overlaps(const BoundingBox& box, const PixelRect& window);

/// Ids whose polygon bounding box intersects the tile window.
std::vector<FootprintId> footprints_in_tile(const FootprintSet& set, TileIndex tile, const TileGrid& grid);

} // namespace maploop
