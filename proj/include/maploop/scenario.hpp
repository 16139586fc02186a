#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "maploop/alignment.hpp"
#include "maploop/session.hpp"
#include "maploop/simulation.hpp"

namespace maploop {

/// Everything needed to start a session or a full simulation. Scenario files
/// are JSON:
///
///   raster       {width, height, tile_size}   optional when "world" is given
///   world        synthetic truth parameters, or
///   truth        GeoJSON path
///   annotations  GeoJSON path, or
///   degrade      {add_pct, remove_pct, max_shift, seed, add_radius}
///   shift_field  {magnitude, wavelength, seed}  applied after degrade
///   provider     {kind, noise_sigma, blur_radius, false_blob_rate, seed, ...}
///   head         {theta, detector, coverage_gain}
///   alignment    {enabled, radius, beta, epsilon, neighbors, max_iters, group_distance}
///   user         {iou_match, shift_tolerance, context_margin}
///   config       SessionConfig fields
///
/// Relative paths resolve against the scenario file's directory.
struct Scenario {
    int raster_width = 0;
    int raster_height = 0;
    int tile_size = 256;
    std::optional<FootprintSet> truth;
    FootprintSet annotations;
    ProviderState provider;
    DetectionHead head;
    bool align = true;
    AlignmentParams alignment;
    UserModel user;
    SessionConfig config;

    TileGrid grid() const { return TileGrid(raster_width, raster_height, tile_size); }
};

Scenario load_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario read_scenario(const std::filesystem::path& path);

nlohmann::json config_to_json(const SessionConfig& config);
/// Fields absent from `j` keep the values of `base`.
SessionConfig config_from_json(const nlohmann::json& j, SessionConfig base = {});

/// Gated provider output for the whole raster.
ProbMap assemble_prob_map(const ProviderState& provider, const DetectionHead& head, const TileGrid& grid,
                          const FootprintSet* truth);

/// Annotations after the alignment step (unchanged when alignment is off).
FootprintSet prepare_annotations(const Scenario& scenario, std::optional<AlignmentResult>* detail = nullptr);

/// A session over the prepared annotations.
Session make_session(const Scenario& scenario, FootprintSet initial);

struct SimulationResult {
    EvalReport report;
    std::vector<CurvePoint> curve;
    std::size_t total_errors = 0;
    std::size_t tiles_analyzed = 0;
    bool stopped = false;
};

/// Align, rank, then let the simulated user work tile by tile until the
/// session stops or runs out of tiles.
SimulationResult run_simulation(const Scenario& scenario);

/// Loop part of run_simulation, starting from an existing session.
SimulationResult run_session(Session& session, const UserModel& user, std::size_t total_errors);

} // namespace maploop
