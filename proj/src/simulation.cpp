#include "maploop/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>

#include "maploop/errors.hpp"
#include "maploop/rng.hpp"

namespace maploop {

FootprintSet degrade(const FootprintSet& truth, const DegradeParams& p) {
    require(p.add_pct >= 0.0 && p.add_pct <= 100.0, "add_pct must lie in [0,100]");
    require(p.remove_pct >= 0.0 && p.remove_pct <= 100.0, "remove_pct must lie in [0,100]");
    require(p.max_shift >= 0, "max_shift must be non-negative");

    Rng rng(p.seed);
    std::vector<FootprintId> ids;
    ids.reserve(truth.size());
    for (const auto& [id, f] : truth) {
        ids.push_back(id);
    }
    const std::size_t n = ids.size();
    const auto remove_count = static_cast<std::size_t>(std::floor(p.remove_pct * static_cast<double>(n) / 100.0 + 1e-9));
    const auto add_count = static_cast<std::size_t>(std::floor(p.add_pct * static_cast<double>(n) / 100.0 + 1e-9));
    require(add_count == 0 || (p.raster_width > 0 && p.raster_height > 0), "adding footprints needs the raster size");

    std::vector<FootprintId> order = ids;
    for (std::size_t i = 0; i < remove_count; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
        std::swap(order[i], order[j]);
    }
    FootprintSet out = truth;
    for (std::size_t i = 0; i < remove_count; ++i) {
        out.erase(order[i]);
    }

    std::vector<BoundingBox> occupied;
    for (const auto& [id, f] : truth) {
        occupied.push_back(f.polygon.bounds());
    }
    for (std::size_t a = 0; a < add_count; ++a) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            const Polygon& shape = truth.get(ids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]).polygon;
            Point target;
            if (p.add_radius > 0) {
                const Point anchor = truth.get(ids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]).polygon.centroid();
                target = {anchor.x + static_cast<double>(rng.uniform_int(-p.add_radius, p.add_radius)),
                          anchor.y + static_cast<double>(rng.uniform_int(-p.add_radius, p.add_radius))};
            } else {
                target = {rng.uniform() * p.raster_width, rng.uniform() * p.raster_height};
            }
            const Point c = shape.centroid();
            const ShiftVector d{static_cast<int>(std::lround(target.x - c.x)), static_cast<int>(std::lround(target.y - c.y))};
            Polygon poly = shape.translated(d);
            const BoundingBox box = poly.bounds();
            if (box.min_x < 0 || box.min_y < 0 || box.max_x > p.raster_width || box.max_y > p.raster_height) {
                continue;
            }
            if (std::any_of(occupied.begin(), occupied.end(), [&](const BoundingBox& o) { return o.intersects(box); })) {
                continue;
            }
            occupied.push_back(box);
            out.insert({out.next_id(), std::move(poly), Provenance::original});
            break;
        }
    }

    if (p.max_shift > 0) {
        FootprintSet shifted = out;
        for (const auto& [id, f] : out) {
            const ShiftVector d{static_cast<int>(rng.uniform_int(-p.max_shift, p.max_shift)),
                                static_cast<int>(rng.uniform_int(-p.max_shift, p.max_shift))};
            Footprint moved = f;
            moved.polygon = f.polygon.translated(d);
            shifted.replace(std::move(moved));
        }
        out = std::move(shifted);
    }
    return out;
}

double polygon_iou(const Polygon& a, const Polygon& b) {
    const PixelRect ca = a.bounds().pixel_cover();
    const PixelRect cb = b.bounds().pixel_cover();
    const PixelRect win{std::min(ca.x0, cb.x0), std::min(ca.y0, cb.y0), std::max(ca.x1, cb.x1), std::max(ca.y1, cb.y1)};
    const int w = win.width();
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(win.area()), 0);
    auto paint = [&](const Polygon& poly, std::uint8_t flag) {
        for_each_run(poly, win, [&](int y, int x0, int x1) {
            auto* row = bits.data() + static_cast<std::size_t>(y - win.y0) * static_cast<std::size_t>(w);
            for (int x = x0; x < x1; ++x) {
                row[x - win.x0] |= flag;
            }
        });
    };
    paint(a, 1);
    paint(b, 2);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (const auto v : bits) {
        inter += v == 3;
        uni += v != 0;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Match> greedy_match(const FootprintSet& current, const FootprintSet& truth, double min_iou) {
    std::vector<Match> pairs;
    for (const auto& [cid, c] : current) {
        const BoundingBox cb = c.polygon.bounds();
        for (const auto& [tid, t] : truth) {
            if (!cb.intersects(t.polygon.bounds())) {
                continue;
            }
            const double iou = polygon_iou(c.polygon, t.polygon);
            if (iou > 0.0 && iou >= min_iou) {
                pairs.push_back({cid, tid, iou});
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Match& a, const Match& b) {
        if (a.iou != b.iou) {
            return a.iou > b.iou;
        }
        return a.current != b.current ? a.current < b.current : a.truth < b.truth;
    });
    std::set<FootprintId> used_c;
    std::set<FootprintId> used_t;
    std::vector<Match> out;
    for (const auto& m : pairs) {
        if (used_c.count(m.current) == 0 && used_t.count(m.truth) == 0) {
            used_c.insert(m.current);
            used_t.insert(m.truth);
            out.push_back(m);
        }
    }
    return out;
}

std::optional<ShiftVector> translation_between(const Polygon& from, const Polygon& to) {
    if (from.size() != to.size() || from.size() == 0) {
        return std::nullopt;
    }
    const double dx = to.vertices()[0].x - from.vertices()[0].x;
    const double dy = to.vertices()[0].y - from.vertices()[0].y;
    if (dx != std::round(dx) || dy != std::round(dy) || std::abs(dx) > 1e6 || std::abs(dy) > 1e6) {
        return std::nullopt;
    }
    const ShiftVector d{static_cast<int>(dx), static_cast<int>(dy)};
    if (from.translated(d) != to) {
        return std::nullopt;
    }
    return d;
}

namespace {

FootprintSet near_window(const FootprintSet& set, const PixelRect& region) {
    FootprintSet out;
    for (const auto& [id, f] : set) {
        if (bbox_overlaps(f.polygon.bounds(), region)) {
            out.insert(f);
        }
    }
    return out;
}

} // namespace

std::vector<Edit> plan_edits(const FootprintSet& current, const FootprintSet& truth, const PixelRect& window,
                             const UserModel& model) {
    require(model.iou_match > 0.0 && model.iou_match <= 1.0, "iou_match must lie in (0,1]");
    require(model.shift_tolerance >= 0 && model.context_margin >= 0, "user model values must be non-negative");
    const PixelRect region = window.dilate(model.context_margin);
    const FootprintSet cur = near_window(current, region);
    const FootprintSet tru = near_window(truth, region);
    const auto matches = greedy_match(cur, tru, model.iou_match);

    auto touches = [&](const Footprint& f) { return bbox_overlaps(f.polygon.bounds(), window); };
    std::set<FootprintId> matched_c;
    std::set<FootprintId> matched_t;
    std::vector<Edit> removes;
    std::vector<Edit> aligns;
    std::vector<std::pair<FootprintId, Polygon>> adds;
    for (const auto& m : matches) {
        matched_c.insert(m.current);
        matched_t.insert(m.truth);
        const Footprint& c = cur.get(m.current);
        const Footprint& t = tru.get(m.truth);
        if (!touches(c) && !touches(t)) {
            continue;
        }
        if (const auto d = translation_between(c.polygon, t.polygon)) {
            if (std::max(std::abs(d->dx), std::abs(d->dy)) > model.shift_tolerance) {
                aligns.push_back(Edit::align(c.id, *d));
            }
        } else {
            removes.push_back(Edit::remove(c.id));
            adds.emplace_back(t.id, t.polygon);
        }
    }
    for (const auto& [id, f] : cur) {
        if (matched_c.count(id) == 0 && touches(f)) {
            removes.push_back(Edit::remove(id));
        }
    }
    for (const auto& [id, f] : tru) {
        if (matched_t.count(id) == 0 && touches(f)) {
            adds.emplace_back(id, f.polygon);
        }
    }
    auto by_target = [](const Edit& a, const Edit& b) { return *a.target_id < *b.target_id; };
    std::sort(removes.begin(), removes.end(), by_target);
    std::sort(aligns.begin(), aligns.end(), by_target);
    std::sort(adds.begin(), adds.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<Edit> out = std::move(removes);
    out.insert(out.end(), aligns.begin(), aligns.end());
    for (auto& [id, poly] : adds) {
        out.push_back(Edit::add(std::move(poly)));
    }
    return out;
}

std::vector<Edit> simulate_user(const Session& session, TileIndex tile, const UserModel& model) {
    require(session.truth().has_value(), "simulate_user needs a truth set");
    require(session.grid().valid(tile), "tile outside the grid");
    auto edits = plan_edits(session.state().current_set, *session.truth(), session.grid().window(tile), model);
    for (auto& e : edits) {
        e.tile = tile;
    }
    return edits;
}

std::size_t count_errors(const FootprintSet& current, const FootprintSet& truth, int raster_width,
                         int raster_height, const UserModel& model) {
    PixelRect everything{0, 0, raster_width, raster_height};
    for (const auto* set : {&current, &truth}) {
        for (const auto& [id, f] : *set) {
            const PixelRect c = f.polygon.bounds().pixel_cover();
            everything = {std::min(everything.x0, c.x0 - 1), std::min(everything.y0, c.y0 - 1),
                          std::max(everything.x1, c.x1 + 1), std::max(everything.y1, c.y1 + 1)};
        }
    }
    return plan_edits(current, truth, everything, model).size();
}

EvalReport evaluate(const FootprintSet& current, const FootprintSet& truth) {
    EvalReport r;
    if (current.empty() && truth.empty()) {
        r.object_precision = r.object_recall = r.object_f1 = r.overlap_accuracy = 1.0;
        return r;
    }
    const auto matches = greedy_match(current, truth, 0.0);
    std::size_t strong = 0;
    std::size_t weak = 0;
    for (const auto& m : matches) {
        strong += m.iou > 0.5;
        weak += m.iou > 0.05;
    }
    r.object_precision = current.empty() ? 0.0 : static_cast<double>(strong) / static_cast<double>(current.size());
    r.object_recall = truth.empty() ? 0.0 : static_cast<double>(strong) / static_cast<double>(truth.size());
    const double sum = r.object_precision + r.object_recall;
    r.object_f1 = sum > 0.0 ? 2.0 * r.object_precision * r.object_recall / sum : 0.0;
    r.overlap_accuracy = weak == 0 ? 0.0 : static_cast<double>(strong) / static_cast<double>(weak);
    return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
    return {{"pct_corrected", r.pct_corrected},
            {"pct_tiles_analyzed", r.pct_tiles_analyzed},
            {"object_precision", r.object_precision},
            {"object_recall", r.object_recall},
            {"object_f1", r.object_f1},
            {"overlap_accuracy", r.overlap_accuracy}};
}

} // namespace maploop
