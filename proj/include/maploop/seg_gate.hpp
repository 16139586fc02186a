#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maploop/raster.hpp"

namespace maploop {

// ---- losses ------------------------------------------------------------------

/// Logits and {0,1} targets for the segmentation (N pixels) and detection
/// (M images) heads.
struct LossBatch {
    std::vector<double> seg_logits;
    std::vector<double> seg_targets;
    std::vector<double> det_logits;
    std::vector<double> det_targets;
};

/// Binary cross entropy of sigmoid(logit) against target, computed as
/// softplus(logit) - target * logit so that large |logit| neither overflows
/// nor underflows.
double bce_with_logits(double logit, double target);

double sigmoid(double x);

/// Mean BCE over the segmentation pairs. Throws ContractError on N = 0,
/// length mismatch or non-binary targets.
double loss_seg(const LossBatch& batch);
/// Mean BCE over the detection pairs; same contract over M.
double loss_det(const LossBatch& batch);
/// loss_seg + loss_det.
double loss_total(const LossBatch& batch);

/// d loss_seg / d seg_logits = (sigmoid(x) - y) / N.
std::vector<double> loss_seg_gradient(const LossBatch& batch);
std::vector<double> loss_det_gradient(const LossBatch& batch);

// ---- providers ---------------------------------------------------------------

enum class ProviderKind { synthetic_oracle, file_backed };

/// Stand-in for the segmentation network. The synthetic oracle derives maps
/// from truth masks; the file-backed kind reads precomputed tiles.
struct ProviderState {
    ProviderKind kind = ProviderKind::synthetic_oracle;
    double noise_sigma = 0.0;
    int blur_radius = 0;
    double false_blob_rate = 0.0;  // expected spurious blobs per tile
    std::uint64_t seed = 0;
    std::uint64_t generation = 0;

    // update_model parameters
    double gamma = 0.8;
    double sigma_floor = 0.05;
    double blob_rate_floor = 0.0;

    // file_backed only
    std::filesystem::path directory;
    std::map<std::pair<int, int>, double> det_scores;  // (row, col) -> score

    friend bool operator==(const ProviderState&, const ProviderState&) = default;
};

enum class DetectorKind {
    perfect,   // 1 iff the truth tile is non-empty
    coverage,  // min(1, gain * positive fraction)
};

struct DetectionHead {
    double theta = 0.1;
    DetectorKind detector = DetectorKind::perfect;
    double coverage_gain = 50.0;
};

struct TileInference {
    ProbMap prob;
    bool exited_early = false;
    double det_score = 0.0;
};

/// Deterministic building-presence score for a tile.
double detection_score(const DetectionHead& head, const BinaryMask& truth);

/// Box blur of the truth with blur_radius, plus false blobs, plus uniform
/// noise in [-sigma, sigma], clamped to [0,1]. Deterministic per (seed,
/// generation, tile).
ProbMap synthetic_prob_map(const BinaryMask& truth, const ProviderState& state, TileIndex tile = {});

/// Ungated provider output for one tile.
ProbMap provider_tile(const ProviderState& state, TileIndex tile, const BinaryMask* truth, int tile_size);

/// Runs the detector first; below theta the tile is all zeros and
/// exited_early is set, otherwise the provider map is returned unchanged.
/// `truth` is required by the synthetic oracle. Throws IoError when a
/// file-backed tile is missing.
TileInference infer_tile(const ProviderState& state, const DetectionHead& head, TileIndex tile,
                         const BinaryMask* truth, int tile_size = 256);

struct VerifiedTile {
    TileIndex tile;
    BinaryMask mask;
};

/// generation + 1; the synthetic oracle multiplies noise_sigma and
/// false_blob_rate by gamma, floored. Throws ContractError on an empty batch.
ProviderState update_model(const ProviderState& state, std::span<const VerifiedTile> newly_verified);

/// Reads provider.json (theta, generation, optional det_scores) from a
/// file-backed provider directory. Returns the state and fills head.theta.
ProviderState load_file_provider(const std::filesystem::path& directory, DetectionHead& head);

std::filesystem::path provider_tile_path(const std::filesystem::path& directory, TileIndex tile);

} // namespace maploop
