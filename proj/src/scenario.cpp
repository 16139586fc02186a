#include "maploop/scenario.hpp"

#include <algorithm>

#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"
#include "maploop/world.hpp"

namespace maploop {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

WorldParams world_from_json(const json& j) {
    WorldParams w;
    w.tiles_x = j.value("tiles_x", w.tiles_x);
    w.tiles_y = j.value("tiles_y", w.tiles_y);
    w.tile_size = j.value("tile_size", w.tile_size);
    w.villages = j.value("villages", w.villages);
    w.buildings_min = j.value("buildings_min", w.buildings_min);
    w.buildings_max = j.value("buildings_max", w.buildings_max);
    w.village_radius = j.value("village_radius", w.village_radius);
    w.center_jitter = j.value("center_jitter", w.center_jitter);
    w.size_min = j.value("size_min", w.size_min);
    w.size_max = j.value("size_max", w.size_max);
    w.spacing = j.value("spacing", w.spacing);
    w.seed = j.value("seed", w.seed);
    return w;
}

ProviderState provider_from_json(const json& j, const std::filesystem::path& base, DetectionHead& head) {
    const std::string kind = j.value("kind", std::string("synthetic_oracle"));
    if (kind == "file_backed") {
        require(j.contains("directory"), "file_backed provider needs a directory");
        return load_file_provider(resolve(base, j.at("directory").get<std::string>()), head);
    }
    require(kind == "synthetic_oracle", "unknown provider kind: " + kind);
    ProviderState p;
    p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
    p.blur_radius = j.value("blur_radius", p.blur_radius);
    p.false_blob_rate = j.value("false_blob_rate", p.false_blob_rate);
    p.seed = j.value("seed", p.seed);
    p.gamma = j.value("gamma", p.gamma);
    p.sigma_floor = j.value("sigma_floor", p.sigma_floor);
    p.blob_rate_floor = j.value("blob_rate_floor", p.blob_rate_floor);
    require(p.noise_sigma >= 0.0 && p.blur_radius >= 0 && p.false_blob_rate >= 0.0, "provider values must be non-negative");
    require(p.gamma > 0.0 && p.gamma <= 1.0, "gamma must lie in (0,1]");
    return p;
}

void head_from_json(const json& j, DetectionHead& head) {
    head.theta = j.value("theta", head.theta);
    const std::string det = j.value("detector", std::string(head.detector == DetectorKind::perfect ? "perfect" : "coverage"));
    require(det == "perfect" || det == "coverage", "unknown detector: " + det);
    head.detector = det == "perfect" ? DetectorKind::perfect : DetectorKind::coverage;
    head.coverage_gain = j.value("coverage_gain", head.coverage_gain);
    require(head.theta >= 0.0 && head.theta <= 1.0, "theta must lie in [0,1]");
}

Scenario load_impl(const json& doc, const std::filesystem::path& base) {
    require(doc.is_object(), "scenario must be a JSON object");
    Scenario s;

    if (doc.contains("world")) {
        const WorldParams w = world_from_json(doc.at("world"));
        s.raster_width = w.width();
        s.raster_height = w.height();
        s.tile_size = w.tile_size;
        s.truth = generate_world(w);
    }
    if (doc.contains("raster")) {
        const json& r = doc.at("raster");
        s.raster_width = r.value("width", s.raster_width);
        s.raster_height = r.value("height", s.raster_height);
        s.tile_size = r.value("tile_size", s.tile_size);
    }
    require(s.raster_width > 0 && s.raster_height > 0, "scenario needs a raster size");
    require(s.tile_size > 0, "tile_size must be positive");
    if (doc.contains("truth")) {
        s.truth = read_footprints(resolve(base, doc.at("truth").get<std::string>()));
    }

    if (doc.contains("annotations")) {
        s.annotations = read_footprints(resolve(base, doc.at("annotations").get<std::string>()));
    } else {
        require(s.truth.has_value(), "scenario needs annotations or a truth set to degrade");
        DegradeParams d;
        d.raster_width = s.raster_width;
        d.raster_height = s.raster_height;
        if (doc.contains("degrade")) {
            const json& j = doc.at("degrade");
            d.add_pct = j.value("add_pct", d.add_pct);
            d.remove_pct = j.value("remove_pct", d.remove_pct);
            d.max_shift = j.value("max_shift", d.max_shift);
            d.seed = j.value("seed", d.seed);
            d.add_radius = j.value("add_radius", d.add_radius);
        }
        s.annotations = degrade(*s.truth, d);
    }
    if (doc.contains("shift_field")) {
        const json& j = doc.at("shift_field");
        s.annotations = smooth_shift(s.annotations, j.value("magnitude", 8.0), j.value("wavelength", 4000.0),
                                     j.value("seed", std::uint64_t{0}));
    }

    s.provider = provider_from_json(doc.value("provider", json::object()), base, s.head);
    if (doc.contains("head")) {
        head_from_json(doc.at("head"), s.head);
    }
    require(s.provider.kind == ProviderKind::file_backed || s.truth.has_value(),
            "the synthetic oracle provider needs a truth set");

    if (doc.contains("alignment")) {
        const json& j = doc.at("alignment");
        s.align = j.value("enabled", s.align);
        s.alignment.radius = j.value("radius", s.alignment.radius);
        s.alignment.beta = j.value("beta", s.alignment.beta);
        s.alignment.epsilon = j.value("epsilon", s.alignment.epsilon);
        s.alignment.neighbors = j.value("neighbors", s.alignment.neighbors);
        s.alignment.max_iters = j.value("max_iters", s.alignment.max_iters);
        s.alignment.group_distance = j.value("group_distance", s.alignment.group_distance);
    }
    if (doc.contains("user")) {
        const json& j = doc.at("user");
        s.user.iou_match = j.value("iou_match", s.user.iou_match);
        s.user.shift_tolerance = j.value("shift_tolerance", s.user.shift_tolerance);
        s.user.context_margin = j.value("context_margin", s.user.context_margin);
    }
    s.config = config_from_json(doc.value("config", json::object()));
    return s;
}

} // namespace

Scenario load_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    try {
        return load_impl(doc, base_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("malformed scenario: ") + e.what());
    }
}

Scenario read_scenario(const std::filesystem::path& path) {
    const json doc = json::parse(read_text_file(path), nullptr, false);
    if (doc.is_discarded()) {
        throw ContractError("scenario is not valid JSON: " + path.string());
    }
    return load_scenario(doc, path.parent_path());
}

nlohmann::json config_to_json(const SessionConfig& c) {
    return {{"k", c.k},
            {"r_k", c.r_k},
            {"retrain_every", c.retrain_every},
            {"retrain", c.retrain},
            {"metric", std::string(to_string(c.metric))},
            {"selection", std::string(to_string(c.selection))},
            {"t", c.t},
            {"seed", c.seed},
            {"stop_enabled", c.stop_enabled},
            {"lease_seconds", c.lease_seconds}};
}

SessionConfig config_from_json(const nlohmann::json& j, SessionConfig c) {
    try {
        require(j.is_object(), "config must be a JSON object");
        c.k = j.value("k", c.k);
        c.r_k = j.value("r_k", c.r_k);
        c.retrain_every = j.value("retrain_every", c.retrain_every);
        c.retrain = j.value("retrain", c.retrain);
        if (j.contains("metric")) {
            c.metric = parse_metric(j.at("metric").get<std::string>());
        }
        if (j.contains("selection")) {
            c.selection = parse_selection(j.at("selection").get<std::string>());
        }
        c.t = j.value("t", c.t);
        c.seed = j.value("seed", c.seed);
        c.stop_enabled = j.value("stop_enabled", c.stop_enabled);
        c.lease_seconds = j.value("lease_seconds", c.lease_seconds);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

ProbMap assemble_prob_map(const ProviderState& provider, const DetectionHead& head, const TileGrid& grid,
                          const FootprintSet* truth) {
    ProbMap out(grid.raster_width(), grid.raster_height());
    for (std::size_t i = 0; i < grid.tile_count(); ++i) {
        const TileIndex t = grid.tile_at(i);
        TileInference inf;
        if (truth != nullptr) {
            const BinaryMask m = tile_mask(*truth, t, grid);
            inf = infer_tile(provider, head, t, &m, grid.tile_size());
        } else {
            inf = infer_tile(provider, head, t, nullptr, grid.tile_size());
        }
        if (inf.exited_early) {
            continue;
        }
        const PixelRect win = grid.window(t).intersect(out.frame());
        const PixelRect full = grid.window(t);
        for (int y = win.y0; y < win.y1; ++y) {
            const auto src = inf.prob.row(y - full.y0);
            auto dst = out.mutable_row(y);
            std::copy(src.begin() + (win.x0 - full.x0), src.begin() + (win.x1 - full.x0), dst.begin() + win.x0);
        }
    }
    return out;
}

FootprintSet prepare_annotations(const Scenario& s, std::optional<AlignmentResult>* detail) {
    if (!s.align || s.annotations.empty()) {
        return s.annotations;
    }
    const ProbMap prob = assemble_prob_map(s.provider, s.head, s.grid(), s.truth ? &*s.truth : nullptr);
    AlignmentResult r = align_footprints(s.annotations, prob, s.alignment);
    FootprintSet aligned = r.aligned;
    if (detail != nullptr) {
        *detail = std::move(r);
    }
    return aligned;
}

Session make_session(const Scenario& s, FootprintSet initial) {
    return Session(s.config, s.grid(), std::move(initial), s.provider, s.head, s.truth);
}

SimulationResult run_session(Session& session, const UserModel& user, std::size_t total_errors) {
    require(session.truth().has_value(), "simulation needs a truth set");
    while (!session.stopped()) {
        const auto tiles = session.next_tiles();
        if (tiles.empty()) {
            break;
        }
        for (const auto& t : tiles) {
            if (session.stopped()) {
                break;
            }
            session.submit_tile(t, simulate_user(session, t, user));
        }
    }
    SimulationResult r;
    r.report = evaluate(session.state().current_set, *session.truth());
    r.total_errors = total_errors;
    r.report.pct_corrected =
        total_errors == 0 ? 1.0
                          : std::min(1.0, static_cast<double>(session.state().errors_found) / static_cast<double>(total_errors));
    r.report.pct_tiles_analyzed = session.fraction_analyzed();
    r.curve = session.state().curve;
    r.tiles_analyzed = session.tiles_analyzed();
    r.stopped = session.stopped();
    return r;
}

SimulationResult run_simulation(const Scenario& s) {
    require(s.truth.has_value(), "simulation needs a truth set");
    FootprintSet initial = prepare_annotations(s);
    const std::size_t total = count_errors(initial, *s.truth, s.raster_width, s.raster_height, s.user);
    Session session = make_session(s, std::move(initial));
    return run_session(session, s.user, total);
}

} // namespace maploop
