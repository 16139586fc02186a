#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "maploop/annotations.hpp"
#include "maploop/raster.hpp"
#include "maploop/seg_gate.hpp"
#include "maploop/triage.hpp"

namespace maploop {

enum class Selection { ranked, random };

std::string_view to_string(Selection s);
Selection parse_selection(std::string_view s);

struct SessionConfig {
    int k = 100;
    double r_k = 0.02;
    int retrain_every = 20;
    bool retrain = true;
    Metric metric = Metric::sad;
    Selection selection = Selection::ranked;
    int t = 1;
    std::uint64_t seed = 0;
    // When false the session runs until every tile has been analyzed.
    bool stop_enabled = true;
    double lease_seconds = 600.0;

    /// Throws ContractError when an invariant is violated.
    void validate() const;

    friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

struct AnalyzedTile {
    TileIndex tile;
    bool required_correction = false;

    friend bool operator==(const AnalyzedTile&, const AnalyzedTile&) = default;
};

struct CurvePoint {
    std::size_t tiles_analyzed = 0;
    std::size_t errors_found = 0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct SessionState {
    std::vector<AnalyzedTile> analyzed;
    std::deque<bool> window;  // last k correction flags
    std::vector<Edit> edits;
    FootprintSet current_set;
    ProviderState provider;
    RankedList ranked;  // tiles not yet analyzed
    bool stopped = false;
    std::size_t errors_found = 0;
    std::vector<CurvePoint> curve;
    std::vector<TileIndex> since_retrain;

    friend bool operator==(const SessionState&, const SessionState&) = default;
};

/// The interactive loop over one tiled scene. Mutations are not thread safe;
/// callers serialize them.
class Session {
public:
    using Clock = std::chrono::steady_clock;

    Session(SessionConfig config, TileGrid grid, FootprintSet initial, ProviderState provider, DetectionHead head,
            std::optional<FootprintSet> truth);

    const SessionConfig& config() const { return config_; }
    const SessionState& state() const { return state_; }
    const TileGrid& grid() const { return grid_; }
    const DetectionHead& head() const { return head_; }
    const std::optional<FootprintSet>& truth() const { return truth_; }

    /// corrections in window / min(k, analyzed count); 0 before any submission.
    double p_k() const;
    bool stopped() const { return state_.stopped; }
    std::size_t tiles_analyzed() const { return state_.analyzed.size(); }
    double fraction_analyzed() const;

    /// Highest-priority tiles that are neither analyzed nor leased, leased to
    /// the caller. Throws SessionClosed once stopped.
    std::vector<TileIndex> next_tiles(int t, Clock::time_point now = Clock::now());
    std::vector<TileIndex> next_tiles() { return next_tiles(config_.t); }

    bool is_pending(TileIndex tile) const { return pending_.count(tile) != 0; }
    bool is_analyzed(TileIndex tile) const;

    /// Applies the edits of a served tile. Throws ProtocolError if the tile is
    /// not pending, SessionClosed once stopped; invalid edits propagate and
    /// leave the state untouched.
    void submit_tile(TileIndex tile, const std::vector<Edit>& edits);

    /// Same bookkeeping as submit_tile without the lease check. Used when a
    /// persisted log is replayed.
    void apply_submission(TileIndex tile, const std::vector<Edit>& edits);

    /// Gated provider output for a tile under the current generation.
    TileInference infer(TileIndex tile) const;
    BinaryMask truth_tile(TileIndex tile) const;
    TileScore score_tile(TileIndex tile) const;

private:
    void rescore(const std::vector<TileIndex>& tiles);
    void rescore_all();

    SessionConfig config_;
    TileGrid grid_;
    DetectionHead head_;
    std::optional<FootprintSet> truth_;
    SessionState state_;
    std::map<TileIndex, Clock::time_point> pending_;
};

/// Tiles whose window intersects the bounding box of any footprint touched by
/// the edits, before or after they were applied.
std::vector<TileIndex> tiles_touched(const FootprintSet& before, const FootprintSet& after,
                                     const std::vector<Edit>& edits, const TileGrid& grid);

std::string curve_csv(const std::vector<CurvePoint>& curve);

/// Sum of errors_found over the curve points after the origin.
double curve_auc(const std::vector<CurvePoint>& curve);

} // namespace maploop
