#include "maploop/triage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "maploop/errors.hpp"
#include "maploop/kernels.hpp"

namespace maploop {

std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::mi:
        return "mi";
    case Metric::ndp:
        return "ndp";
    case Metric::sad:
        return "sad";
    }
    return "sad";
}

Metric parse_metric(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "mi") {
        return Metric::mi;
    }
    if (lower == "ndp") {
        return Metric::ndp;
    }
    if (lower == "sad") {
        return Metric::sad;
    }
    throw ContractError("unknown metric '" + std::string(s) + "'");
}

double priority_of(Metric metric, double value) { return metric == Metric::sad ? value : -value; }

bool ranks_before(const TileScore& a, const TileScore& b) {
    if (a.priority != b.priority) {
        return a.priority > b.priority;
    }
    return a.tile < b.tile;
}

RankedList::RankedList(std::vector<TileScore> scores) : entries_(std::move(scores)) {
    std::sort(entries_.begin(), entries_.end(), ranks_before);
    std::vector<TileIndex> tiles;
    tiles.reserve(entries_.size());
    for (const TileScore& s : entries_) {
        tiles.push_back(s.tile);
    }
    std::sort(tiles.begin(), tiles.end());
    require(std::adjacent_find(tiles.begin(), tiles.end()) == tiles.end(), "tile listed twice in ranking");
}

bool RankedList::contains(TileIndex t) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const TileScore& s) { return s.tile == t; });
}

std::optional<TileScore> RankedList::find(TileIndex t) const {
    for (const TileScore& s : entries_) {
        if (s.tile == t) {
            return s;
        }
    }
    return std::nullopt;
}

void RankedList::upsert(const TileScore& score) {
    erase(score.tile);
    const auto pos = std::lower_bound(entries_.begin(), entries_.end(), score, ranks_before);
    entries_.insert(pos, score);
}

void RankedList::erase(TileIndex t) {
    std::erase_if(entries_, [&](const TileScore& s) { return s.tile == t; });
}

namespace {

void check_same_shape(const BinaryMask& a, const ProbMap& b) {
    require(a.width() == b.width() && a.height() == b.height(), "mask and probability map dimensions differ");
}

} // namespace

double mutual_information(const BinaryMask& a, const ProbMap& b, int bins) {
    check_same_shape(a, b);
    require(bins >= 2, "MI needs at least 2 bins");
    const std::size_t n = a.size();
    if (n == 0) {
        return 0.0;
    }
    std::vector<std::uint64_t> joint(static_cast<std::size_t>(2 * bins), 0);
    kernels::active().joint_histogram(a.values().data(), b.values().data(), n, bins, joint.data());
    std::uint64_t row[2] = {0, 0};
    std::vector<std::uint64_t> col(static_cast<std::size_t>(bins), 0);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < bins; ++c) {
            row[r] += joint[static_cast<std::size_t>(r * bins + c)];
            col[static_cast<std::size_t>(c)] += joint[static_cast<std::size_t>(r * bins + c)];
        }
    }
    const double total = static_cast<double>(n);
    double mi = 0.0;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < bins; ++c) {
            const auto count = joint[static_cast<std::size_t>(r * bins + c)];
            if (count == 0) {
                continue;
            }
            const double pab = static_cast<double>(count) / total;
            const double ratio = static_cast<double>(count) * total /
                                 (static_cast<double>(row[r]) * static_cast<double>(col[static_cast<std::size_t>(c)]));
            mi += pab * std::log2(ratio);
        }
    }
    return std::max(0.0, mi);
}

double normalized_dot_product(const BinaryMask& a, const ProbMap& b) {
    check_same_shape(a, b);
    if (a.size() == 0) {
        return 0.0;
    }
    return kernels::dot_mask_prob(a.values(), b.values()) / static_cast<double>(a.size());
}

double sum_absolute_differences(const BinaryMask& a, const ProbMap& b) {
    check_same_shape(a, b);
    return kernels::sad_mask_prob(a.values(), b.values());
}

std::size_t largest_component(const ProbMap& prob, std::size_t cap) {
    const int w = prob.width();
    const int h = prob.height();
    std::vector<std::uint8_t> fg(prob.size());
    kernels::active().threshold(prob.values().data(), prob.size(), 0.5f, fg.data());
    std::size_t best = 0;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (!fg[static_cast<std::size_t>(start)]) {
            continue;
        }
        std::size_t area = 0;
        fg[static_cast<std::size_t>(start)] = 0;
        stack.assign(1, start);
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            ++area;
            const int x = p % w;
            const int y = p / w;
            const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& q : nbr) {
                if (q[0] < 0 || q[0] >= w || q[1] < 0 || q[1] >= h) {
                    continue;
                }
                const auto qi = static_cast<std::size_t>(q[1]) * w + q[0];
                if (fg[qi]) {
                    fg[qi] = 0;
                    stack.push_back(static_cast<int>(qi));
                }
            }
        }
        best = std::max(best, area);
        if (best >= cap) {
            return cap;
        }
    }
    return best;
}

TileScore guarded_score(const BinaryMask& tile_mask, const ProbMap& tile_prob, Metric metric, int min_component,
                        TileIndex tile) {
    require(min_component >= 0, "min_component must be non-negative");
    TileScore s;
    s.tile = tile;
    s.metric = metric;
    bool guarded = false;
    if (metric != Metric::sad && !tile_mask.any()) {
        // Vacuously guarded when there are no components at all.
        const auto cap = static_cast<std::size_t>(min_component);
        guarded = cap == 0 ? largest_component(tile_prob, 1) == 0 : largest_component(tile_prob, cap) < cap;
    }
    if (guarded) {
        s.value = 1.0;
    } else {
        switch (metric) {
        case Metric::mi:
            s.value = mutual_information(tile_mask, tile_prob);
            break;
        case Metric::ndp:
            s.value = normalized_dot_product(tile_mask, tile_prob);
            break;
        case Metric::sad:
            s.value = sum_absolute_differences(tile_mask, tile_prob);
            break;
        }
    }
    s.priority = priority_of(metric, s.value);
    return s;
}

BinaryMask tile_mask(const FootprintSet& set, TileIndex tile, const TileGrid& grid) {
    const PixelRect win = grid.window(tile);
    std::vector<Polygon> polys;
    for (const auto& [id, f] : set) {
        if (bbox_overlaps(f.polygon.bounds(), win)) {
            polys.push_back(f.polygon);
        }
    }
    return rasterize_window(polys, win, grid.raster_width(), grid.raster_height());
}

RankedList rank_tiles(const FootprintSet& set, const ProbMap& prob, const TileGrid& grid, Metric metric,
                      const std::set<TileIndex>& exclude) {
    require(prob.width() == grid.raster_width() && prob.height() == grid.raster_height(),
            "probability map does not match the tile grid");
    std::vector<TileScore> scores;
    scores.reserve(grid.tile_count());
    for (std::size_t i = 0; i < grid.tile_count(); ++i) {
        const TileIndex t = grid.tile_at(i);
        if (exclude.count(t) != 0) {
            continue;
        }
        scores.push_back(guarded_score(tile_mask(set, t, grid), crop(prob, t, grid), metric, kDefaultMinComponent, t));
    }
    return RankedList(std::move(scores));
}

std::string ranking_csv(const RankedList& list) {
    std::string out = "tile_row,tile_col,metric,value,priority,rank\n";
    char buf[160];
    std::size_t rank = 1;
    for (const TileScore& s : list.entries()) {
        std::snprintf(buf, sizeof buf, "%d,%d,%s,%.17g,%.17g,%zu\n", s.tile.row, s.tile.col,
                      std::string(to_string(s.metric)).c_str(), s.value, s.priority, rank++);
        out += buf;
    }
    return out;
}

} // namespace maploop
