// maploop: operator command line.

#include <cmath>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "json.hpp"
#include "maploop/alignment.hpp"
#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"
#include "maploop/http_api.hpp"
#include "maploop/pgm.hpp"
#include "maploop/scenario.hpp"
#include "maploop/seg_gate.hpp"
#include "maploop/simulation.hpp"
#include "maploop/triage.hpp"
#include "maploop/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maploop;

namespace {

constexpr int kExitCheckFailed = 3;

struct ConfigFlags {
    std::optional<int> k;
    std::optional<double> r_k;
    std::optional<int> retrain_every;
    std::optional<std::string> metric;
    std::optional<int> tile_size;
    std::optional<double> theta;
    std::optional<double> beta;
    std::optional<int> radius;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> selection;
    bool no_retrain = false;
    bool no_stop = false;

    void add_to(CLI::App* app) {
        app->add_option("--k", k, "stopping window size");
        app->add_option("--rk", r_k, "stopping threshold on p_k");
        app->add_option("--retrain-every", retrain_every, "tiles between model updates");
        app->add_option("--metric", metric, "mi, ndp or sad");
        app->add_option("--tile-size", tile_size, "tile edge in pixels");
        app->add_option("--theta", theta, "detection gate threshold");
        app->add_option("--beta", beta, "alignment pairwise weight");
        app->add_option("--radius", radius, "alignment search radius");
        app->add_option("--seed", seed, "session seed");
        app->add_option("--selection", selection, "ranked or random");
        app->add_flag("--no-retrain", no_retrain, "never update the provider");
        app->add_flag("--no-stop", no_stop, "run until every tile is analyzed");
    }

    void apply(Scenario& s) const {
        if (k) s.config.k = *k;
        if (r_k) s.config.r_k = *r_k;
        if (retrain_every) s.config.retrain_every = *retrain_every;
        if (metric) s.config.metric = parse_metric(*metric);
        if (tile_size) s.tile_size = *tile_size;
        if (theta) s.head.theta = *theta;
        if (beta) s.alignment.beta = *beta;
        if (radius) s.alignment.radius = *radius;
        if (seed) s.config.seed = *seed;
        if (selection) s.config.selection = parse_selection(*selection);
        if (no_retrain) s.config.retrain = false;
        if (no_stop) s.config.stop_enabled = false;
        s.config.validate();
    }
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

int cmd_align(const fs::path& annotations, const fs::path& prob_path, const AlignmentParams& params,
              const fs::path& out) {
    const FootprintSet set = read_footprints(annotations);
    const ProbMap prob = read_prob_pgm(prob_path);
    const AlignmentResult r = align_footprints(set, prob, params);
    ensure_dir(out);
    write_footprints(out / "aligned.geojson", r.aligned);
    json sol = solution_to_json(r.problem.groups, r.solution);
    sol["beta"] = params.beta;
    sol["radius"] = params.radius;
    write_text_file(out / "solution.json", sol.dump(2));
    std::cout << "aligned " << set.size() << " footprints in " << r.problem.groups.size() << " groups, energy "
              << r.solution.energy << '\n';
    return 0;
}

int cmd_rank(const fs::path& annotations, const fs::path& prob_path, const std::string& metric, int tile_size,
             const std::string& out) {
    const FootprintSet set = read_footprints(annotations);
    const ProbMap prob = read_prob_pgm(prob_path);
    const TileGrid grid(prob.width(), prob.height(), tile_size);
    const std::string csv = ranking_csv(rank_tiles(set, prob, grid, parse_metric(metric)));
    if (out.empty() || out == "-") {
        std::cout << csv;
    } else {
        write_text_file(out, csv);
    }
    return 0;
}

int cmd_simulate(const fs::path& scenario_path, const ConfigFlags& flags, const fs::path& out) {
    Scenario s = read_scenario(scenario_path);
    flags.apply(s);
    const SimulationResult r = run_simulation(s);
    ensure_dir(out);
    write_text_file(out / "curve.csv", curve_csv(r.curve));
    json report = report_to_json(r.report);
    report["tiles_analyzed"] = r.tiles_analyzed;
    report["tiles_total"] = s.grid().tile_count();
    report["errors_found"] = r.curve.back().errors_found;
    report["total_errors"] = r.total_errors;
    report["stopped"] = r.stopped;
    write_text_file(out / "report.json", report.dump(2));
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_degrade(const fs::path& truth_path, DegradeParams p, const fs::path& out) {
    const FootprintSet truth = read_footprints(truth_path);
    if (p.raster_width <= 0 || p.raster_height <= 0) {
        // Default frame: the truth extent.
        for (const auto& [id, f] : truth) {
            const BoundingBox b = f.polygon.bounds();
            p.raster_width = std::max(p.raster_width, static_cast<int>(std::ceil(b.max_x)));
            p.raster_height = std::max(p.raster_height, static_cast<int>(std::ceil(b.max_y)));
        }
    }
    const FootprintSet d = degrade(truth, p);
    write_footprints(out, d);
    std::cout << "wrote " << d.size() << " footprints to " << out.string() << '\n';
    return 0;
}

int cmd_synth(const WorldParams& w, double noise, const fs::path& out) {
    ensure_dir(out);
    const FootprintSet truth = generate_world(w);
    write_footprints(out / "truth.geojson", truth);
    ProviderState p;
    p.noise_sigma = noise;
    p.seed = w.seed;
    const TileGrid grid(w.width(), w.height(), w.tile_size);
    write_prob_pgm(out / "prob.pgm", assemble_prob_map(p, DetectionHead{}, grid, &truth));
    std::cout << "wrote " << truth.size() << " footprints over " << w.width() << "x" << w.height() << " px\n";
    return 0;
}

// Checks the analytic loss gradients against central differences on a
// random batch.
int cmd_losscheck(std::uint64_t seed, int n, const fs::path& batch_path) {
    LossBatch b;
    if (!batch_path.empty()) {
        const json j = json::parse(read_text_file(batch_path), nullptr, false);
        require(!j.is_discarded() && j.is_object(), "batch file must be a JSON object");
        try {
            b.seg_logits = j.at("seg_logits").get<std::vector<double>>();
            b.seg_targets = j.at("seg_targets").get<std::vector<double>>();
            b.det_logits = j.at("det_logits").get<std::vector<double>>();
            b.det_targets = j.at("det_targets").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ContractError(std::string("malformed batch: ") + e.what());
        }
    } else {
        require(n >= 1, "n must be at least 1");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> logit(-6.0, 6.0);
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < n; ++i) {
            b.seg_logits.push_back(logit(rng));
            b.seg_targets.push_back(coin(rng) ? 1.0 : 0.0);
            b.det_logits.push_back(logit(rng));
            b.det_targets.push_back(coin(rng) ? 1.0 : 0.0);
        }
    }
    const double seg = loss_seg(b);
    const double det = loss_det(b);
    const double total = loss_total(b);
    const auto gs = loss_seg_gradient(b);
    const auto gd = loss_det_gradient(b);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < b.seg_logits.size(); ++i) {
        LossBatch up = b;
        LossBatch dn = b;
        up.seg_logits[i] += h;
        dn.seg_logits[i] -= h;
        worst = std::max(worst, std::abs((loss_seg(up) - loss_seg(dn)) / (2 * h) - gs[i]));
    }
    for (std::size_t i = 0; i < b.det_logits.size(); ++i) {
        LossBatch up = b;
        LossBatch dn = b;
        up.det_logits[i] += h;
        dn.det_logits[i] -= h;
        worst = std::max(worst, std::abs((loss_det(up) - loss_det(dn)) / (2 * h) - gd[i]));
    }
    const bool ok = worst <= 1e-6 && std::abs(total - (seg + det)) <= 1e-12 * std::max(1.0, std::abs(total));
    std::cout << json{{"loss_seg", seg},
                      {"loss_det", det},
                      {"loss_total", total},
                      {"max_gradient_error", worst},
                      {"ok", ok}}
                     .dump(2)
              << '\n';
    return ok ? 0 : kExitCheckFailed;
}

int cmd_serve(ServeOptions opts, const std::string& bind_flag, const std::string& data_dir_flag) {
    opts = options_from_env(opts);
    if (!data_dir_flag.empty()) {
        opts.data_dir = data_dir_flag;
    }
    if (!bind_flag.empty()) {
        const auto colon = bind_flag.rfind(':');
        try {
            if (colon == std::string::npos) {
                opts.port = std::stoi(bind_flag);
            } else {
                opts.host = bind_flag.substr(0, colon);
                opts.port = std::stoi(bind_flag.substr(colon + 1));
            }
        } catch (const std::exception&) {
            throw ContractError("--bind must be host:port");
        }
    }
    serve(opts, [&](int port) {
        std::cout << "listening on " << opts.host << ':' << port << " data " << opts.data_dir.string() << std::endl;
    });
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"maploop: human-in-the-loop building footprint correction"};
    app.require_subcommand(1);

    // align
    auto* align = app.add_subcommand("align", "co-register annotations to a probability map");
    fs::path a_ann, a_prob, a_out = ".";
    AlignmentParams a_params;
    align->add_option("--annotations", a_ann, "input GeoJSON")->required();
    align->add_option("--prob", a_prob, "16-bit probability PGM")->required();
    align->add_option("--beta", a_params.beta, "pairwise weight")->capture_default_str();
    align->add_option("--radius", a_params.radius, "search radius in pixels")->capture_default_str();
    align->add_option("--neighbors", a_params.neighbors, "nearest groups per group")->capture_default_str();
    align->add_option("--max-iters", a_params.max_iters, "ICM sweep limit")->capture_default_str();
    align->add_option("--out", a_out, "output directory")->capture_default_str();

    // rank
    auto* rank = app.add_subcommand("rank", "score and sort tiles by annotation/prediction disagreement");
    fs::path r_ann, r_prob;
    std::string r_metric = "sad", r_out;
    int r_tile = 256;
    rank->add_option("--annotations", r_ann, "input GeoJSON")->required();
    rank->add_option("--prob", r_prob, "16-bit probability PGM")->required();
    rank->add_option("--metric", r_metric, "mi, ndp or sad")->capture_default_str();
    rank->add_option("--tile-size", r_tile, "tile edge in pixels")->capture_default_str();
    rank->add_option("--out", r_out, "CSV path, stdout when omitted");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the full loop with a simulated annotator");
    fs::path s_scenario, s_out = ".";
    ConfigFlags s_flags;
    sim->add_option("--scenario", s_scenario, "scenario JSON")->required();
    sim->add_option("--out", s_out, "output directory")->capture_default_str();
    s_flags.add_to(sim);

    // degrade
    auto* deg = app.add_subcommand("degrade", "add, remove and jitter footprints");
    fs::path d_truth, d_out;
    DegradeParams d_params;
    deg->add_option("--truth", d_truth, "truth GeoJSON")->required();
    deg->add_option("--out", d_out, "output GeoJSON")->required();
    deg->add_option("--add-pct", d_params.add_pct, "percent of footprints to add")->capture_default_str();
    deg->add_option("--remove-pct", d_params.remove_pct, "percent of footprints to remove")->capture_default_str();
    deg->add_option("--max-shift", d_params.max_shift, "per-axis jitter in pixels")->capture_default_str();
    deg->add_option("--seed", d_params.seed, "random seed")->capture_default_str();
    deg->add_option("--add-radius", d_params.add_radius, "placement radius around truth footprints")
        ->capture_default_str();
    deg->add_option("--width", d_params.raster_width, "raster width (default: truth extent)");
    deg->add_option("--height", d_params.raster_height, "raster height (default: truth extent)");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic truth set and probability map");
    WorldParams w;
    double w_noise = 0.0;
    fs::path w_out = ".";
    synth->add_option("--tiles-x", w.tiles_x)->capture_default_str();
    synth->add_option("--tiles-y", w.tiles_y)->capture_default_str();
    synth->add_option("--tile-size", w.tile_size)->capture_default_str();
    synth->add_option("--villages", w.villages)->capture_default_str();
    synth->add_option("--seed", w.seed)->capture_default_str();
    synth->add_option("--noise", w_noise, "provider noise sigma")->capture_default_str();
    synth->add_option("--out", w_out, "output directory")->capture_default_str();

    // serve
    auto* srv = app.add_subcommand("serve", "start the HTTP annotation service");
    std::string v_bind, v_data;
    srv->add_option("--bind", v_bind, "host:port (env MAPLOOP_BIND, default 127.0.0.1:8080)");
    srv->add_option("--data-dir", v_data, "session storage (env MAPLOOP_DATA_DIR)");

    // losscheck
    auto* loss = app.add_subcommand("losscheck", "evaluate the training losses and check their gradients");
    std::uint64_t l_seed = 1;
    int l_n = 64;
    fs::path l_batch;
    loss->add_option("--seed", l_seed)->capture_default_str();
    loss->add_option("--n", l_n, "random batch size")->capture_default_str();
    loss->add_option("--batch", l_batch, "JSON with seg/det logits and targets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*align) return cmd_align(a_ann, a_prob, a_params, a_out);
        if (*rank) return cmd_rank(r_ann, r_prob, r_metric, r_tile, r_out);
        if (*sim) return cmd_simulate(s_scenario, s_flags, s_out);
        if (*deg) return cmd_degrade(d_truth, d_params, d_out);
        if (*synth) return cmd_synth(w, w_noise, w_out);
        if (*srv) return cmd_serve({}, v_bind, v_data);
        if (*loss) return cmd_losscheck(l_seed, l_n, l_batch);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
