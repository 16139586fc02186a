#pragma once

#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "maploop/annotations.hpp"
#include "maploop/raster.hpp"

namespace maploop {

enum class Metric { mi, ndp, sad };

std::string_view to_string(Metric m);
/// Accepts "mi", "ndp", "sad" (any case).
Metric parse_metric(std::string_view s);

constexpr int kDefaultMiBins = 16;
constexpr int kDefaultMinComponent = 20;

struct TileScore {
    TileIndex tile;
    Metric metric = Metric::sad;
    double value = 0.0;
    double priority = 0.0;  // larger = more suspicious

    friend bool operator==(const TileScore&, const TileScore&) = default;
};

/// Priority convention: SAD as is, MI and NDP negated.
double priority_of(Metric metric, double value);

/// Tiles by descending priority, ties by ascending tile index. Each tile at
/// most once.
class RankedList {
public:
    RankedList() = default;
    explicit RankedList(std::vector<TileScore> scores);

    const std::vector<TileScore>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    bool contains(TileIndex t) const;
    std::optional<TileScore> find(TileIndex t) const;

    /// Inserts or replaces the entry for score.tile, keeping the order.
    void upsert(const TileScore& score);
    void erase(TileIndex t);

    friend bool operator==(const RankedList&, const RankedList&) = default;

private:
    std::vector<TileScore> entries_;
};

bool ranks_before(const TileScore& a, const TileScore& b);

/// Mutual information in bits between a binary raster and a probability map
/// quantized into `bins` equal-width bins over [0,1].
double mutual_information(const BinaryMask& a, const ProbMap& b, int bins = kDefaultMiBins);

/// (sum a_i b_i) / size(a).
double normalized_dot_product(const BinaryMask& a, const ProbMap& b);

/// sum |a_i - b_i|.
double sum_absolute_differences(const BinaryMask& a, const ProbMap& b);

/// Area of the largest 4-connected component of (prob > 0.5), capped at `cap`
/// (the search stops as soon as a component reaches it).
std::size_t largest_component(const ProbMap& prob, std::size_t cap);

/// Raw metric, except that MI/NDP return 1 for a tile with no annotations
/// whose (prob > 0.5) components are all smaller than min_component pixels.
TileScore guarded_score(const BinaryMask& tile_mask, const ProbMap& tile_prob, Metric metric,
                        int min_component = kDefaultMinComponent, TileIndex tile = {});

/// Annotation raster of one tile (zero padded past the raster edge).
BinaryMask tile_mask(const FootprintSet& set, TileIndex tile, const TileGrid& grid);

/// Scores every tile not in `exclude` and sorts.
RankedList rank_tiles(const FootprintSet& set, const ProbMap& prob, const TileGrid& grid, Metric metric,
                      const std::set<TileIndex>& exclude = {});

/// CSV with header tile_row,tile_col,metric,value,priority,rank (rank from 1).
std::string ranking_csv(const RankedList& list);

} // namespace maploop
