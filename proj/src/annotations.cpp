#include "maploop/annotations.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "maploop/errors.hpp"

namespace maploop {

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::original:
        return "original";
    case Provenance::user_added:
        return "user_added";
    case Provenance::aligned:
        return "aligned";
    }
    return "original";
}

Provenance parse_provenance(std::string_view s) {
    if (s == "original") {
        return Provenance::original;
    }
    if (s == "user_added") {
        return Provenance::user_added;
    }
    if (s == "aligned") {
        return Provenance::aligned;
    }
    throw ContractError("unknown provenance '" + std::string(s) + "'");
}

std::string_view to_string(EditKind k) {
    switch (k) {
    case EditKind::align:
        return "align";
    case EditKind::add:
        return "add";
    case EditKind::remove:
        return "remove";
    }
    return "align";
}

EditKind parse_edit_kind(std::string_view s) {
    if (s == "align") {
        return EditKind::align;
    }
    if (s == "add") {
        return EditKind::add;
    }
    if (s == "remove") {
        return EditKind::remove;
    }
    throw ContractError("unknown edit kind '" + std::string(s) + "'");
}

void FootprintSet::insert(Footprint f) {
    f.polygon.validate();
    if (items_.count(f.id) != 0) {
        throw ContractError("duplicate footprint id " + std::to_string(f.id));
    }
    next_id_ = std::max(next_id_, f.id + 1);
    items_.emplace(f.id, std::move(f));
}

void FootprintSet::erase(FootprintId id) {
    if (items_.erase(id) == 0) {
        throw MissingTarget("unknown footprint id " + std::to_string(id));
    }
}

void FootprintSet::replace(Footprint f) {
    auto it = items_.find(f.id);
    if (it == items_.end()) {
        throw MissingTarget("unknown footprint id " + std::to_string(f.id));
    }
    it->second = std::move(f);
}

const Footprint& FootprintSet::get(FootprintId id) const {
    auto it = items_.find(id);
    if (it == items_.end()) {
        throw MissingTarget("unknown footprint id " + std::to_string(id));
    }
    return it->second;
}

std::vector<Polygon> FootprintSet::polygons() const {
    std::vector<Polygon> out;
    out.reserve(items_.size());
    for (const auto& [id, f] : items_) {
        out.push_back(f.polygon);
    }
    return out;
}

Edit Edit::align(FootprintId id, ShiftVector shift, TileIndex tile) {
    Edit e;
    e.kind = EditKind::align;
    e.target_id = id;
    e.shift = shift;
    e.tile = tile;
    return e;
}

Edit Edit::add(Polygon polygon, TileIndex tile) {
    Edit e;
    e.kind = EditKind::add;
    e.polygon = std::move(polygon);
    e.tile = tile;
    return e;
}

Edit Edit::remove(FootprintId id, TileIndex tile) {
    Edit e;
    e.kind = EditKind::remove;
    e.target_id = id;
    e.tile = tile;
    return e;
}

FootprintSet apply_edit(const FootprintSet& set, const Edit& e) {
    FootprintSet out = set;
    switch (e.kind) {
    case EditKind::add: {
        if (!e.polygon) {
            throw InvalidGeometry("add edit without polygon");
        }
        e.polygon->validate();
        out.insert({set.next_id(), *e.polygon, Provenance::user_added});
        break;
    }
    case EditKind::remove:
        if (!e.target_id) {
            throw MissingTarget("remove edit without target id");
        }
        out.erase(*e.target_id);
        break;
    case EditKind::align: {
        if (!e.target_id) {
            throw MissingTarget("align edit without target id");
        }
        Footprint f = set.get(*e.target_id);
        f.polygon = f.polygon.translated(e.shift);
        out.replace(std::move(f));
        break;
    }
    }
    return out;
}

FootprintSet replay(const FootprintSet& original, const std::vector<Edit>& log) {
    FootprintSet current = original;
    for (const Edit& e : log) {
        current = apply_edit(current, e);
    }
    return current;
}

std::vector<FootprintGroup> group_by_proximity(const FootprintSet& set, double dist_threshold) {
    require(dist_threshold > 0.0, "dist_threshold must be positive");
    std::vector<FootprintId> ids;
    std::vector<Point> centroids;
    for (const auto& [id, f] : set) {
        ids.push_back(id);
        centroids.push_back(f.polygon.centroid());
    }
    const std::size_t n = ids.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    // Sort by x so the inner loop can stop once dx exceeds the threshold.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centroids[a].x < centroids[b].x; });
    const double t2 = dist_threshold * dist_threshold;
    for (std::size_t a = 0; a < n; ++a) {
        const Point& pa = centroids[order[a]];
        for (std::size_t b = a + 1; b < n; ++b) {
            const Point& pb = centroids[order[b]];
            const double dx = pb.x - pa.x;
            if (dx > dist_threshold) {
                break;
            }
            const double dy = pb.y - pa.y;
            if (dx * dx + dy * dy <= t2) {
                const std::size_t ra = find(order[a]);
                const std::size_t rb = find(order[b]);
                if (ra != rb) {
                    parent[std::max(ra, rb)] = std::min(ra, rb);
                }
            }
        }
    }
    // ids are ascending (map order), so the first index seen per root is the
    // smallest member and groups come out ordered by it.
    std::vector<FootprintGroup> groups;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] == n) {
            slot[r] = groups.size();
            groups.emplace_back();
        }
        FootprintGroup& g = groups[slot[r]];
        g.member_ids.push_back(ids[i]);
        g.centroid.x += centroids[i].x;
        g.centroid.y += centroids[i].y;
    }
    for (FootprintGroup& g : groups) {
        const auto m = static_cast<double>(g.member_ids.size());
        g.centroid.x /= m;
        g.centroid.y /= m;
    }
    return groups;
}

bool bbox_overlaps(const BoundingBox& box, const PixelRect& window) {
    return box.min_x < window.x1 && box.max_x > window.x0 && box.min_y < window.y1 && box.max_y > window.y0;
}

std::vector<FootprintId> footprints_in_tile(const FootprintSet& set, TileIndex tile, const TileGrid& grid) {
    const PixelRect win = grid.window(tile);
    std::vector<FootprintId> out;
    for (const auto& [id, f] : set) {
        if (bbox_overlaps(f.polygon.bounds(), win)) {
            out.push_back(id);
        }
    }
    return out;
}

} // namespace maploop
