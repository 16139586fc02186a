#include "maploop/session.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "maploop/errors.hpp"
#include "maploop/rng.hpp"

namespace maploop {

std::string_view to_string(Selection s) {
    return s == Selection::ranked ? "ranked" : "random";
}

Selection parse_selection(std::string_view s) {
    if (s == "ranked") {
        return Selection::ranked;
    }
    if (s == "random") {
        return Selection::random;
    }
    throw ContractError("unknown selection mode: " + std::string(s));
}

void SessionConfig::validate() const {
    require(k >= 1, "k must be at least 1");
    require(r_k > 0.0 && r_k < 1.0, "r_k must lie in (0,1)");
    require(retrain_every >= 1, "retrain_every must be at least 1");
    require(t >= 1, "t must be at least 1");
    require(lease_seconds > 0.0, "lease_seconds must be positive");
}

Session::Session(SessionConfig config, TileGrid grid, FootprintSet initial, ProviderState provider,
                 DetectionHead head, std::optional<FootprintSet> truth)
    : config_(config), grid_(grid), head_(head), truth_(std::move(truth)) {
    config_.validate();
    require(grid_.tile_count() > 0, "session needs a non-empty tile grid");
    require(provider.kind == ProviderKind::file_backed || truth_.has_value(),
            "the synthetic oracle provider needs a truth set");
    state_.current_set = std::move(initial);
    state_.provider = std::move(provider);
    state_.curve.push_back({0, 0});
    rescore_all();
}

double Session::p_k() const {
    if (state_.analyzed.empty()) {
        return 0.0;
    }
    const auto corrections = std::count(state_.window.begin(), state_.window.end(), true);
    const auto denom = std::min<std::size_t>(static_cast<std::size_t>(config_.k), state_.analyzed.size());
    return static_cast<double>(corrections) / static_cast<double>(denom);
}

double Session::fraction_analyzed() const {
    return static_cast<double>(state_.analyzed.size()) / static_cast<double>(grid_.tile_count());
}

bool Session::is_analyzed(TileIndex tile) const {
    return std::any_of(state_.analyzed.begin(), state_.analyzed.end(),
                       [&](const AnalyzedTile& a) { return a.tile == tile; });
}

std::vector<TileIndex> Session::next_tiles(int t, Clock::time_point now) {
    if (state_.stopped) {
        throw SessionClosed("session has stopped");
    }
    require(t >= 1, "t must be at least 1");
    std::erase_if(pending_, [&](const auto& kv) { return kv.second <= now; });
    const auto lease = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config_.lease_seconds));
    std::vector<TileIndex> out;
    for (const auto& s : state_.ranked.entries()) {
        if (static_cast<int>(out.size()) == t) {
            break;
        }
        if (pending_.count(s.tile) == 0) {
            out.push_back(s.tile);
            pending_[s.tile] = now + lease;
        }
    }
    return out;
}

void Session::submit_tile(TileIndex tile, const std::vector<Edit>& edits) {
    if (state_.stopped) {
        throw SessionClosed("session has stopped");
    }
    if (!is_pending(tile)) {
        throw ProtocolError("tile (" + std::to_string(tile.row) + "," + std::to_string(tile.col) +
                            ") was not served or its lease expired");
    }
    apply_submission(tile, edits);
    pending_.erase(tile);
}

void Session::apply_submission(TileIndex tile, const std::vector<Edit>& edits) {
    if (state_.stopped) {
        throw SessionClosed("session has stopped");
    }
    if (!grid_.valid(tile)) {
        throw RangeError("tile outside the grid");
    }
    if (!state_.ranked.contains(tile)) {
        throw ProtocolError("tile was already analyzed");
    }

    // Everything that can throw happens on copies first.
    std::vector<Edit> stamped = edits;
    FootprintSet next = state_.current_set;
    for (std::size_t i = 0; i < stamped.size(); ++i) {
        stamped[i].tile = tile;
        stamped[i].seq = state_.edits.size() + i + 1;
        next = apply_edit(next, stamped[i]);
    }
    const auto touched = tiles_touched(state_.current_set, next, stamped, grid_);

    state_.current_set = std::move(next);
    state_.edits.insert(state_.edits.end(), stamped.begin(), stamped.end());
    const bool corrected = !stamped.empty();
    state_.analyzed.push_back({tile, corrected});
    state_.window.push_back(corrected);
    while (state_.window.size() > static_cast<std::size_t>(config_.k)) {
        state_.window.pop_front();
    }
    state_.errors_found += stamped.size();
    state_.curve.push_back({state_.analyzed.size(), state_.errors_found});
    state_.ranked.erase(tile);
    state_.since_retrain.push_back(tile);
    rescore(touched);

    if (config_.stop_enabled && state_.analyzed.size() >= static_cast<std::size_t>(config_.k) &&
        p_k() < config_.r_k) {
        state_.stopped = true;
        pending_.clear();
        return;
    }
    if (config_.retrain && state_.analyzed.size() % static_cast<std::size_t>(config_.retrain_every) == 0) {
        std::vector<VerifiedTile> batch;
        batch.reserve(state_.since_retrain.size());
        for (const auto& v : state_.since_retrain) {
            batch.push_back({v, tile_mask(state_.current_set, v, grid_)});
        }
        state_.provider = update_model(state_.provider, batch);
        state_.since_retrain.clear();
        rescore_all();
    }
}

BinaryMask Session::truth_tile(TileIndex tile) const {
    require(truth_.has_value(), "session has no truth set");
    return tile_mask(*truth_, tile, grid_);
}

TileInference Session::infer(TileIndex tile) const {
    if (truth_) {
        const BinaryMask t = truth_tile(tile);
        return infer_tile(state_.provider, head_, tile, &t, grid_.tile_size());
    }
    return infer_tile(state_.provider, head_, tile, nullptr, grid_.tile_size());
}

TileScore Session::score_tile(TileIndex tile) const {
    if (config_.selection == Selection::random) {
        Rng rng(config_.seed * 0x9e3779b97f4a7c15ULL + grid_.linear(tile));
        const double v = rng.uniform();
        return {tile, config_.metric, v, v};
    }
    const TileInference inf = infer(tile);
    return guarded_score(tile_mask(state_.current_set, tile, grid_), inf.prob, config_.metric, kDefaultMinComponent,
                         tile);
}

void Session::rescore(const std::vector<TileIndex>& tiles) {
    for (const auto& t : tiles) {
        if (state_.ranked.contains(t)) {
            state_.ranked.upsert(score_tile(t));
        }
    }
}

void Session::rescore_all() {
    std::vector<TileScore> scores;
    scores.reserve(grid_.tile_count());
    std::set<TileIndex> done;
    for (const auto& a : state_.analyzed) {
        done.insert(a.tile);
    }
    for (std::size_t i = 0; i < grid_.tile_count(); ++i) {
        const TileIndex t = grid_.tile_at(i);
        if (done.count(t) == 0) {
            scores.push_back(score_tile(t));
        }
    }
    state_.ranked = RankedList(std::move(scores));
}

namespace {

void add_box_tiles(const BoundingBox& box, const TileGrid& grid, std::set<TileIndex>& out) {
    const PixelRect cover = box.pixel_cover();
    const int ts = grid.tile_size();
    auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    const int c0 = std::max(0, floor_div(cover.x0 - grid.origin_x(), ts));
    const int c1 = std::min(grid.cols() - 1, floor_div(cover.x1 - 1 - grid.origin_x(), ts));
    const int r0 = std::max(0, floor_div(cover.y0 - grid.origin_y(), ts));
    const int r1 = std::min(grid.rows() - 1, floor_div(cover.y1 - 1 - grid.origin_y(), ts));
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            out.insert({r, c});
        }
    }
}

} // namespace

std::vector<TileIndex> tiles_touched(const FootprintSet& before, const FootprintSet& after,
                                     const std::vector<Edit>& edits, const TileGrid& grid) {
    std::set<TileIndex> out;
    for (const auto& e : edits) {
        if (e.target_id) {
            if (before.contains(*e.target_id)) {
                add_box_tiles(before.get(*e.target_id).polygon.bounds(), grid, out);
            }
            if (after.contains(*e.target_id)) {
                add_box_tiles(after.get(*e.target_id).polygon.bounds(), grid, out);
            }
        }
        if (e.polygon) {
            add_box_tiles(e.polygon->bounds(), grid, out);
        }
    }
    return {out.begin(), out.end()};
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    os << "tiles_analyzed,errors_found\n";
    for (const auto& p : curve) {
        os << p.tiles_analyzed << ',' << p.errors_found << '\n';
    }
    return os.str();
}

double curve_auc(const std::vector<CurvePoint>& curve) {
    double sum = 0.0;
    for (const auto& p : curve) {
        if (p.tiles_analyzed > 0) {
            sum += static_cast<double>(p.errors_found);
        }
    }
    return sum;
}

} // namespace maploop
