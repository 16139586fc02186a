// Acceptance suite. One line per criterion: PASS or FAIL, the name, then the
// measured numbers. Exit status is the number of failed criteria.

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "httplib.h"
#include "maploop/alignment.hpp"
#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"
#include "maploop/scenario.hpp"
#include "maploop/seg_gate.hpp"
#include "maploop/simulation.hpp"
#include "maploop/store.hpp"
#include "maploop/triage.hpp"
#include "support.hpp"

extern char** environ;

using namespace maploop;
using nlohmann::json;

namespace {

// Pinned tolerances and sizes.
constexpr double kRelTol = 1e-9;
constexpr double kGradTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr int kOracleInputs = 1000;
constexpr int kIcmProblems = 200;
constexpr double kAlignPost = 0.90;
constexpr double kAlignPre = 0.30;
constexpr double kAlignShift = 8.0;
constexpr double kDominance = 1.5;
constexpr double kStopCorrected = 0.95;
constexpr double kStopTiles = 0.30;
constexpr double kGateTheta = 0.1;
constexpr int kGateSteps = 60;
constexpr int kReplayTrials = 20;
constexpr int kSeeds = 5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- formula oracles -----------------------------------------------------------

struct ErrorTally {
    int checked = 0;
    int failed = 0;
    double worst = 0.0;

    void rel(double got, double want) {
        ++checked;
        const double scale = std::max(std::abs(got), std::abs(want));
        const double err = scale > 0.0 ? std::abs(got - want) / scale : 0.0;
        worst = std::max(worst, err);
        failed += oracle::close(got, want, kRelTol) ? 0 : 1;
    }
    void abs(double got, double want, double tol) {
        ++checked;
        const double err = std::abs(got - want);
        worst = std::max(worst, err);
        failed += err <= tol ? 0 : 1;
    }
};

LossBatch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t m, double scale) {
    std::normal_distribution<double> logit(0.0, scale);
    std::bernoulli_distribution coin(0.4);
    LossBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        b.seg_logits.push_back(logit(rng));
        b.seg_targets.push_back(coin(rng) ? 1.0 : 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        b.det_logits.push_back(logit(rng));
        b.det_targets.push_back(coin(rng) ? 1.0 : 0.0);
    }
    return b;
}

Outcome formula_oracles() {
    std::mt19937_64 rng(2024);
    std::map<std::string, ErrorTally> t;
    for (int i = 0; i < kOracleInputs; ++i) {
        const auto b = random_batch(rng, 1 + i % 50, 1 + i % 9, 0.5 + i % 8);
        const double seg = oracle::mean_bce(b.seg_logits, b.seg_targets);
        const double det = oracle::mean_bce(b.det_logits, b.det_targets);
        t["loss_seg"].rel(loss_seg(b), seg);
        t["loss_det"].rel(loss_det(b), det);
        t["loss_total"].rel(loss_total(b), seg + det);

        const int w = 1 + i % 33, h = 1 + (i * 7) % 27;
        const BinaryMask m = oracle::random_mask(rng, w, h, (i % 11) / 10.0);
        const ProbMap p = oracle::random_prob(rng, w, h);
        t["mi"].rel(mutual_information(m, p), oracle::mutual_information(m, p, kDefaultMiBins));
        t["ndp"].rel(normalized_dot_product(m, p), oracle::ndp(m, p));
        t["sad"].rel(sum_absolute_differences(m, p), oracle::sad(m, p));

        const int radius = i % 5;
        std::uniform_int_distribution<int> off(-radius, radius);
        const ShiftVector d{off(rng), off(rng)};
        const BinaryMask um = oracle::random_mask(rng, w, h, 0.1 + 0.1 * (i % 6));
        t["unary"].rel(unary_cost(to_patch(um), d, p, 1e-6, radius), oracle::unary(um, d, p, 1e-6, radius));

        std::uniform_int_distribution<int> sv(-30, 30);
        const ShiftVector a{sv(rng), sv(rng)}, c{sv(rng), sv(rng)};
        const double z = std::uniform_real_distribution<double>(0.5, 100.0)(rng);
        const long double want = std::hypot(static_cast<long double>(a.dx - c.dx),
                                            static_cast<long double>(a.dy - c.dy)) / z;
        t["pairwise"].rel(pairwise_cost(a, c, z), static_cast<double>(want));

        const double beta = std::array<double, 3>{0.0, 2.0, 10.0}[i % 3];
        const auto r = fixture::random_alignment(rng, 4, 1 + i % 3, beta);
        std::vector<ShiftVector> s;
        std::uniform_int_distribution<std::size_t> pick(0, r.problem.candidates.size() - 1);
        for (std::size_t g = 0; g < r.problem.groups.size(); ++g) {
            s.push_back(r.problem.candidates[pick(rng)]);
        }
        t["total_energy"].rel(total_energy(r.problem, s, r.prob, r.patches), fixture::oracle_energy(r, s));
    }
    for (int i = 0; i < kOracleInputs / 5; ++i) {
        auto b = random_batch(rng, 1 + i % 12, 1 + i % 6, 3.0);
        const auto gs = loss_seg_gradient(b);
        const auto gd = loss_det_gradient(b);
        for (std::size_t j = 0; j < b.seg_logits.size(); ++j) {
            auto up = b, down = b;
            up.seg_logits[j] += kFdStep;
            down.seg_logits[j] -= kFdStep;
            t["gradient"].abs(gs[j], (loss_total(up) - loss_total(down)) / (2 * kFdStep), kGradTol);
        }
        for (std::size_t j = 0; j < b.det_logits.size(); ++j) {
            auto up = b, down = b;
            up.det_logits[j] += kFdStep;
            down.det_logits[j] -= kFdStep;
            t["gradient"].abs(gd[j], (loss_total(up) - loss_total(down)) / (2 * kFdStep), kGradTol);
        }
    }
    Outcome o{true, ""};
    for (const auto& [name, tally] : t) {
        o.pass = o.pass && tally.failed == 0 && (name == "gradient" || tally.checked >= kOracleInputs);
        o.detail += fmt("%s %d/%d worst=%.2e; ", name.c_str(), tally.checked - tally.failed, tally.checked, tally.worst);
    }
    return o;
}

// ---- ICM -----------------------------------------------------------------------

Outcome icm_correctness() {
    std::mt19937_64 rng(77);
    int optimal = 0, exhaustive = 0, monotone = 0, runs = 0;
    double worst_gap = 0.0;
    for (int i = 0; i < kIcmProblems; ++i) {
        const int radius = 1 + i % 3;  // at most 49 candidates
        for (double beta : {0.0, 2.0, 10.0}) {
            auto r = fixture::random_alignment(rng, 2, radius, beta);
            const auto sol = solve_icm(r.problem, r.prob, r.patches);
            double prev = total_energy(r.problem, std::vector<ShiftVector>(r.problem.groups.size()), r.prob,
                                       r.patches);
            bool ok = true;
            for (double e : sol.sweep_energies) {
                ok = ok && e <= prev;
                prev = e;
            }
            ++runs;
            monotone += ok ? 1 : 0;
            if (beta == 0.0) {
                ++exhaustive;
                const double best = fixture::exhaustive_minimum(r);
                const double got = fixture::oracle_energy(r, sol.shifts);
                worst_gap = std::max(worst_gap, got - best);
                optimal += oracle::close(got, best, kRelTol) ? 1 : 0;
            }
        }
    }
    return {optimal == exhaustive && monotone == runs,
            fmt("beta=0 optimal %d/%d (worst gap %.2e); monotone sweeps %d/%d over beta {0,2,10}", optimal,
                exhaustive, worst_gap, monotone, runs)};
}

// ---- scenarios -----------------------------------------------------------------

json village_world(int seed) { return {{"tiles_x", 20}, {"tiles_y", 20}, {"villages", 12}, {"seed", seed}}; }

json alignment_scenario(int seed) {
    return {{"world", village_world(seed)},
            {"shift_field", {{"magnitude", kAlignShift}, {"wavelength", 4000.0}, {"seed", seed}}},
            {"provider", {{"noise_sigma", 0.0}, {"seed", seed}}}};
}

json triage_scenario(int seed) {
    return {{"world", village_world(seed)},
            {"degrade", {{"add_pct", 20}, {"remove_pct", 20}, {"max_shift", 2}, {"seed", seed}}},
            {"provider", {{"noise_sigma", 0.2}, {"blur_radius", 1}, {"false_blob_rate", 0.5}, {"seed", seed}}},
            {"user", {{"shift_tolerance", 2}}},
            {"config", {{"seed", seed}, {"metric", "sad"}, {"k", 100}, {"retrain_every", 20}}}};
}

Outcome alignment_recovery() {
    Outcome o{true, ""};
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const Scenario s = load_scenario(alignment_scenario(seed));
        const double pre = evaluate(s.annotations, *s.truth).overlap_accuracy;
        const double post = evaluate(prepare_annotations(s), *s.truth).overlap_accuracy;
        o.pass = o.pass && post >= kAlignPost && pre <= kAlignPre;
        o.detail += fmt("seed %d pre=%.3f post=%.3f; ", seed, pre, post);
    }
    o.detail += fmt("need pre<=%.2f post>=%.2f, shifts<=%.0f px", kAlignPre, kAlignPost, kAlignShift);
    return o;
}

struct TriageRuns {
    double sad = 0, random = 0, active = 0;
};

SimulationResult run_mode(int seed, const std::function<void(SessionConfig&)>& tweak) {
    Scenario s = load_scenario(triage_scenario(seed));
    tweak(s.config);
    return run_simulation(s);
}

Outcome triage_dominance() {
    TriageRuns mean;
    std::string detail;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto sad = run_mode(seed, [](SessionConfig& c) {
            c.retrain = false;
            c.stop_enabled = false;
        });
        const auto rnd = run_mode(seed, [](SessionConfig& c) {
            c.retrain = false;
            c.stop_enabled = false;
            c.selection = Selection::random;
        });
        const auto act = run_mode(seed, [](SessionConfig& c) { c.stop_enabled = false; });
        mean.sad += curve_auc(sad.curve) / kSeeds;
        mean.random += curve_auc(rnd.curve) / kSeeds;
        mean.active += curve_auc(act.curve) / kSeeds;
        detail += fmt("seed %d sad=%.0f random=%.0f active=%.0f; ", seed, curve_auc(sad.curve),
                      curve_auc(rnd.curve), curve_auc(act.curve));
    }
    const double ratio = mean.sad / mean.random;
    return {ratio >= kDominance && mean.active >= mean.sad,
            detail + fmt("mean sad/random=%.2f (need >=%.1f), active=%.0f vs sad=%.0f", ratio, kDominance,
                         mean.active, mean.sad)};
}

Outcome stopping_behavior() {
    Outcome o{true, ""};
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto strict = run_mode(seed, [](SessionConfig& c) { c.r_k = 0.02; });
        const auto loose = run_mode(seed, [](SessionConfig& c) { c.r_k = 0.10; });
        const bool ok = strict.stopped && strict.report.pct_corrected >= kStopCorrected &&
                        strict.report.pct_tiles_analyzed <= kStopTiles && loose.tiles_analyzed <= strict.tiles_analyzed;
        o.pass = o.pass && ok;
        o.detail += fmt("seed %d corrected=%.3f tiles=%.3f (%zu) r_k=0.10 tiles=%zu; ", seed,
                        strict.report.pct_corrected, strict.report.pct_tiles_analyzed, strict.tiles_analyzed,
                        loose.tiles_analyzed);
    }
    o.detail += fmt("need corrected>=%.2f tiles<=%.2f", kStopCorrected, kStopTiles);
    return o;
}

// ---- gate soundness --------------------------------------------------------------

// Ranked entries restricted to tiles whose truth is non-empty.
std::vector<TileScore> building_entries(const Session& s) {
    std::vector<TileScore> out;
    for (const auto& e : s.state().ranked.entries()) {
        if (s.truth_tile(e.tile).any()) {
            out.push_back(e);
        }
    }
    return out;
}

Outcome gate_soundness() {
    std::size_t building_tiles = 0, kept = 0, skipped_empty = 0, empty_tiles = 0, compared = 0, mismatched = 0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        Scenario s = load_scenario(triage_scenario(seed));
        s.config.stop_enabled = false;
        s.head.detector = DetectorKind::perfect;
        s.head.theta = kGateTheta;
        const FootprintSet initial = prepare_annotations(s);
        Session gated = make_session(s, initial);
        s.head.theta = 0.0;
        Session open = make_session(s, initial);

        for (std::size_t i = 0; i < gated.grid().tile_count(); ++i) {
            const TileIndex t = gated.grid().tile_at(i);
            const bool has = gated.truth_tile(t).any();
            const bool skip = gated.infer(t).exited_early;
            building_tiles += has ? 1 : 0;
            kept += has && !skip ? 1 : 0;
            empty_tiles += has ? 0 : 1;
            skipped_empty += !has && skip ? 1 : 0;
        }
        for (int step = 0; step <= kGateSteps; ++step) {
            ++compared;
            mismatched += building_entries(gated) == building_entries(open) ? 0 : 1;
            if (step == kGateSteps) {
                break;
            }
            const TileIndex t = gated.state().ranked.entries().front().tile;
            const auto edits = simulate_user(gated, t, s.user);
            gated.apply_submission(t, edits);
            open.apply_submission(t, edits);
        }
    }
    const double recall = building_tiles == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(building_tiles);
    return {recall == 1.0 && mismatched == 0,
            fmt("detection recall %.3f (%zu/%zu building tiles kept), %zu/%zu empty tiles skipped; building-tile "
                "rankings equal with and without the gate at %zu/%zu checkpoints",
                recall, kept, building_tiles, skipped_empty, empty_tiles, compared - mismatched, compared)};
}

// ---- replay and durability ---------------------------------------------------------

struct ServerProcess {
    pid_t pid = -1;
    int port = 0;
    int out_fd = -1;
};

ServerProcess start_server(const std::filesystem::path& data_dir) {
    int fds[2];
    if (::pipe(fds) != 0) {
        throw IoError("pipe failed");
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, fds[1], 1);
    posix_spawn_file_actions_addclose(&fa, fds[0]);
    posix_spawn_file_actions_addclose(&fa, fds[1]);
    std::string cli = MAPLOOP_CLI_PATH, sub = "serve", bind_flag = "--bind", bind = "127.0.0.1:0",
                data_flag = "--data-dir", data = data_dir.string();
    char* argv[] = {cli.data(), sub.data(), bind_flag.data(), bind.data(), data_flag.data(), data.data(), nullptr};
    ServerProcess p;
    const int rc = posix_spawn(&p.pid, cli.c_str(), &fa, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(fds[1]);
    if (rc != 0) {
        ::close(fds[0]);
        throw IoError("cannot start " + cli);
    }
    p.out_fd = fds[0];
    std::string line;
    char ch;
    while (::read(p.out_fd, &ch, 1) == 1 && ch != '\n') {
        line += ch;
    }
    const auto colon = line.rfind(':', line.find(" data "));
    if (line.rfind("listening on ", 0) != 0 || colon == std::string::npos) {
        ::kill(p.pid, SIGKILL);
        ::waitpid(p.pid, nullptr, 0);
        throw IoError("server did not start: " + line);
    }
    p.port = std::stoi(line.substr(colon + 1));
    return p;
}

void kill_server(ServerProcess& p) {
    ::kill(p.pid, SIGKILL);
    ::waitpid(p.pid, nullptr, 0);
    ::close(p.out_fd);
    p = {};
}

json durability_scenario(int trial) {
    json doc = {{"world",
                 {{"tiles_x", 8}, {"tiles_y", 8}, {"tile_size", 64}, {"villages", 5}, {"buildings_min", 6},
                  {"buildings_max", 10}, {"village_radius", 24.0}, {"center_jitter", 4}, {"seed", 100 + trial}}},
                {"degrade", {{"add_pct", 20}, {"remove_pct", 20}, {"max_shift", 2}, {"seed", trial}}},
                {"provider", {{"noise_sigma", 0.2}, {"false_blob_rate", 0.3}, {"seed", trial}}},
                {"alignment", {{"radius", 6}}},
                {"user", {{"shift_tolerance", 1}}}};
    return doc;
}

json durability_config(int trial) {
    // Odd trials may stop early; even trials run with retraining every 5 tiles.
    if (trial % 2 == 1) {
        return {{"k", 8}, {"r_k", 0.2}, {"retrain_every", 5}, {"seed", trial}};
    }
    return {{"k", 100}, {"r_k", 0.02}, {"retrain_every", 5}, {"seed", trial}};
}

// Sends up to n submissions through HTTP and mirrors each acknowledged one on
// the reference session. Returns the number acknowledged.
int drive_http(httplib::Client& cli, const std::string& id, Session& ref, int n, std::mt19937_64& rng,
               const std::string& key_prefix, bool& protocol_ok) {
    int done = 0;
    const std::string base = "/api/v1/sessions/" + id;
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n; ++i) {
        auto next = cli.Get(base + "/next-tile");
        if (!next) {
            protocol_ok = false;
            return done;
        }
        if (next->status == 409) {
            protocol_ok = protocol_ok && ref.stopped();
            return done;
        }
        const json body = json::parse(next->body);
        if (body.at("tile").is_null()) {
            return done;
        }
        const TileIndex t{body["tile"]["row"].get<int>(), body["tile"]["col"].get<int>()};
        std::vector<Edit> edits;
        const int policy = std::uniform_int_distribution<int>(0, 3)(rng);
        if (policy > 0) {
            for (const auto& e : simulate_user(ref, t)) {
                if (policy > 1 || coin(rng)) {
                    edits.push_back(e);
                }
            }
        }
        const std::string key = key_prefix + std::to_string(i);
        const std::string payload = json{{"edits", edits_to_json(edits)}, {"idempotency_key", key}}.dump();
        const std::string path =
            base + "/tiles/" + std::to_string(t.row) + "/" + std::to_string(t.col) + "/edits";
        auto res = cli.Post(path, payload, "application/json");
        if (!res || res->status != 200) {
            protocol_ok = false;
            return done;
        }
        ref.apply_submission(t, edits);
        ++done;
        if (std::uniform_int_distribution<int>(0, 4)(rng) == 0) {
            auto again = cli.Post(path, payload, "application/json");
            protocol_ok = protocol_ok && again && again->status == 200 && json::parse(again->body).at("replayed");
        }
    }
    return done;
}

bool status_matches(httplib::Client& cli, const std::string& id, const Session& ref) {
    auto res = cli.Get("/api/v1/sessions/" + id + "/status");
    if (!res || res->status != 200) {
        return false;
    }
    const json s = json::parse(res->body);
    return s.at("tiles_analyzed") == ref.tiles_analyzed() && s.at("p_k").get<double>() == ref.p_k() &&
           s.at("stopped") == ref.stopped() && s.at("generation") == ref.state().provider.generation &&
           s.at("errors_found") == ref.state().errors_found;
}

Outcome replay_durability() {
    int equal = 0;
    std::size_t total_submissions = 0;
    std::string failures;
    for (int trial = 0; trial < kReplayTrials; ++trial) {
        const auto dir = fixture::temp_dir("durability");
        std::mt19937_64 rng(9000 + trial);
        bool ok = true;
        try {
            const json scenario = durability_scenario(trial);
            Scenario sc = load_scenario(scenario);
            sc.config = config_from_json(durability_config(trial), sc.config);
            Session ref = make_session(sc, prepare_annotations(sc));

            ServerProcess server = start_server(dir);
            httplib::Client cli("127.0.0.1", server.port);
            cli.set_read_timeout(60);
            auto made = cli.Post("/api/v1/sessions",
                                 json{{"scenario", scenario}, {"config", durability_config(trial)}}.dump(),
                                 "application/json");
            if (!made || made->status != 201) {
                throw IoError("session creation failed");
            }
            const std::string id = json::parse(made->body).at("session_id");

            const int n = std::uniform_int_distribution<int>(1, 40)(rng);
            total_submissions += drive_http(cli, id, ref, n, rng, "a", ok);
            kill_server(server);

            const auto session_dir = dir / "sessions" / id;
            ok = ok && SessionStore::recover(session_dir)->session().state() == ref.state();

            // Restart, check the service view, continue, then crash again.
            server = start_server(dir);
            httplib::Client cli2("127.0.0.1", server.port);
            cli2.set_read_timeout(60);
            ok = ok && status_matches(cli2, id, ref);
            const int more = std::uniform_int_distribution<int>(1, 10)(rng);
            total_submissions += drive_http(cli2, id, ref, more, rng, "b", ok);
            ok = ok && status_matches(cli2, id, ref);
            kill_server(server);
            ok = ok && SessionStore::recover(session_dir)->session().state() == ref.state();
        } catch (const std::exception& e) {
            ok = false;
            failures += fmt("trial %d: %s; ", trial, e.what());
        }
        if (!ok && failures.find(fmt("trial %d:", trial)) == std::string::npos) {
            failures += fmt("trial %d differs; ", trial);
        }
        equal += ok ? 1 : 0;
        std::filesystem::remove_all(dir);
    }
    return {equal == kReplayTrials,
            fmt("%d/%d trials field-exact after SIGKILL and restart (%zu submissions)", equal, kReplayTrials,
                total_submissions) +
                (failures.empty() ? "" : "; " + failures)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"formula_oracles", formula_oracles},     {"icm_correctness", icm_correctness},
        {"alignment_recovery", alignment_recovery}, {"triage_dominance", triage_dominance},
        {"stopping_behavior", stopping_behavior},   {"gate_soundness", gate_soundness},
        {"replay_durability", replay_durability},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        if (argc > 1 && std::find(argv + 1, argv + argc, name) == argv + argc) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << fmt("%.1fs", secs) << "] " << o.detail
                  << std::endl;
        failed += o.pass ? 0 : 1;
    }
    return failed;
}
