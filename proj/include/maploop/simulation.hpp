#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "maploop/annotations.hpp"
#include "maploop/session.hpp"

namespace maploop {

struct DegradeParams {
    double add_pct = 0.0;
    double remove_pct = 0.0;
    int max_shift = 0;
    std::uint64_t seed = 0;
    // Added footprints land within this many pixels of a random truth
    // footprint; <= 0 places them anywhere in the raster.
    int add_radius = 30;
    int raster_width = 0;
    int raster_height = 0;
};

/// Degraded copy of a truth set. Deterministic per seed.
FootprintSet degrade(const FootprintSet& truth, const DegradeParams& params);

/// IoU of the pixel-center rasterizations of two polygons.
double polygon_iou(const Polygon& a, const Polygon& b);

/// Integer offset taking `from` onto `to` vertex by vertex, if there is one.
std::optional<ShiftVector> translation_between(const Polygon& from, const Polygon& to);

struct Match {
    FootprintId current = 0;
    FootprintId truth = 0;
    double iou = 0.0;
};

/// Greedy one-to-one pairing by descending IoU (ties: ascending ids) over
/// pairs with IoU >= min_iou. Pairs with IoU 0 are never formed.
std::vector<Match> greedy_match(const FootprintSet& current, const FootprintSet& truth, double min_iou);

struct UserModel {
    double iou_match = 0.05;
    // Matched footprints offset by at most this many pixels per axis are
    // left alone.
    int shift_tolerance = 0;
    // Footprints farther than this from the tile are ignored when pairing.
    int context_margin = 64;
};

/// Edits turning the current footprints that touch `window` into truth:
/// removals first, then alignments, then additions.
std::vector<Edit> plan_edits(const FootprintSet& current, const FootprintSet& truth, const PixelRect& window,
                             const UserModel& model);

/// plan_edits over the window of one served tile, stamped with that tile.
std::vector<Edit> simulate_user(const Session& session, TileIndex tile, const UserModel& model = {});

/// Edits needed over the whole raster; the denominator of pct_corrected.
std::size_t count_errors(const FootprintSet& current, const FootprintSet& truth, int raster_width,
                         int raster_height, const UserModel& model);

struct EvalReport {
    double pct_corrected = 0.0;
    double pct_tiles_analyzed = 0.0;
    double object_precision = 0.0;
    double object_recall = 0.0;
    double object_f1 = 0.0;
    double overlap_accuracy = 0.0;
};

/// Object metrics only; the two bookkeeping fields stay zero.
EvalReport evaluate(const FootprintSet& current, const FootprintSet& truth);

nlohmann::json report_to_json(const EvalReport& report);

} // namespace maploop
