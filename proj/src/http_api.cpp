#include "maploop/http_api.hpp"

#include <cstdlib>
#include <iostream>

#include "httplib.h"
#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"
#include "maploop/png.hpp"
#include "maploop/simulation.hpp"

namespace maploop {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    send_json(res, status, extra);
}

// Maps library errors onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const SessionClosed& e) {
        send_error(res, 409, e.what(), {{"stopped", true}});
    } catch (const ProtocolError& e) {
        send_error(res, 409, e.what());
    } catch (const RangeError& e) {
        send_error(res, 404, e.what());
    } catch (const ContractError& e) {
        send_error(res, 400, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, e.what());
    } catch (const IoError& e) {
        send_error(res, 500, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw ContractError("request body must be a JSON object");
    }
    return body;
}

TileIndex path_tile(const httplib::Request& req, std::size_t first, const Session& session) {
    TileIndex t;
    try {
        t = {std::stoi(req.matches[first].str()), std::stoi(req.matches[first + 1].str())};
    } catch (const std::exception&) {
        throw RangeError("bad tile address");
    }
    if (!session.grid().valid(t)) {
        throw RangeError("tile outside the grid");
    }
    return t;
}

json tile_footprints(const Session& session, TileIndex tile) {
    FootprintSet subset(session.state().current_set.meta());
    for (const auto id : footprints_in_tile(session.state().current_set, tile, session.grid())) {
        subset.insert(session.state().current_set.get(id));
    }
    return footprints_to_json(subset).at("features");
}

json report_json(const LiveSession& live) {
    const Session& s = live.session();
    EvalReport r = evaluate(s.state().current_set, *s.truth());
    r.pct_corrected = live.total_errors() == 0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(s.state().errors_found) /
                                              static_cast<double>(live.total_errors()));
    r.pct_tiles_analyzed = s.fraction_analyzed();
    json j = report_to_json(r);
    j["errors_found"] = s.state().errors_found;
    j["total_errors"] = live.total_errors();
    return j;
}

} // namespace

ServeOptions options_from_env(ServeOptions base) {
    if (const char* dir = std::getenv("MAPLOOP_DATA_DIR"); dir != nullptr && *dir != '\0') {
        base.data_dir = dir;
    }
    if (const char* bind = std::getenv("MAPLOOP_BIND"); bind != nullptr && *bind != '\0') {
        const std::string b(bind);
        const auto colon = b.rfind(':');
        try {
            if (colon == std::string::npos) {
                base.port = std::stoi(b);
            } else {
                base.host = b.substr(0, colon);
                base.port = std::stoi(b.substr(colon + 1));
            }
        } catch (const std::exception&) {
            throw ContractError("MAPLOOP_BIND must be host:port");
        }
    }
    return base;
}

std::string render_tile_png(const Session& session, TileIndex tile) {
    const TileInference inf = session.infer(tile);
    const BinaryMask mask = tile_mask(session.state().current_set, tile, session.grid());
    const int n = session.grid().tile_size();
    RgbImage img{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n * 3)};
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const auto g = static_cast<std::uint8_t>(std::lround(inf.prob.at(x, y) * 255.0f));
            img.set(x, y, g, g, g);
            if (mask.at(x, y) != 0) {
                const bool edge = x == 0 || y == 0 || x == n - 1 || y == n - 1 || mask.at(x - 1, y) == 0 ||
                                  mask.at(x + 1, y) == 0 || mask.at(x, y - 1) == 0 || mask.at(x, y + 1) == 0;
                if (edge) {
                    img.set(x, y, 255, 220, 0);
                }
            }
        }
    }
    const int frame = std::max(1, n / 128);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            if (x < frame || y < frame || x >= n - frame || y >= n - frame) {
                img.set(x, y, 255, 0, 255);
            }
        }
    }
    return encode_png(img);
}

void register_routes(httplib::Server& server, SessionStore& store) {
    auto lookup = [&store](const httplib::Request& req, httplib::Response& res) -> std::shared_ptr<LiveSession> {
        auto live = store.find(req.matches[1].str());
        if (!live) {
            send_error(res, 404, "unknown session");
        }
        return live;
    };

    server.Post("/api/v1/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_body(req);
            json scenario;
            std::filesystem::path base;
            if (body.contains("scenario_path")) {
                const std::filesystem::path p = body.at("scenario_path").get<std::string>();
                scenario = json::parse(read_text_file(p), nullptr, false);
                if (scenario.is_discarded()) {
                    throw ContractError("scenario file is not valid JSON");
                }
                base = p.parent_path();
            } else if (body.contains("scenario")) {
                scenario = body.at("scenario");
                base = body.value("base_dir", std::string());
            } else {
                throw ContractError("request needs scenario or scenario_path");
            }
            auto live = store.create(scenario, base, body.value("config", json::object()));
            std::lock_guard lock(live->mutex);
            json out = live->status();
            send_json(res, 201, out);
        });
    });

    server.Get(R"(/api/v1/sessions/([0-9a-zA-Z_-]+)/next-tile)", [lookup](const httplib::Request& req,
                                                                          httplib::Response& res) {
        guarded(res, [&] {
            auto live = lookup(req, res);
            if (!live) {
                return;
            }
            std::lock_guard lock(live->mutex);
            Session& s = live->session();
            const auto tiles = s.next_tiles(1);
            if (tiles.empty()) {
                send_json(res, 200, {{"tile", nullptr}, {"exhausted", true}, {"p_k", s.p_k()}});
                return;
            }
            const TileIndex t = tiles.front();
            const PixelRect w = s.grid().window(t);
            const auto score = s.state().ranked.find(t);
            json out = {
                {"tile", {{"row", t.row}, {"col", t.col}, {"pixel_bounds", {w.x0, w.y0, w.x1, w.y1}}}},
                {"image_url", "/api/v1/tiles/" + live->record().session_id + "/" + std::to_string(t.row) + "/" +
                                  std::to_string(t.col) + ".png"},
                {"footprints", tile_footprints(s, t)},
                {"score", score ? json{{"metric", std::string(to_string(score->metric))},
                                       {"value", score->value},
                                       {"priority", score->priority}}
                                : json(nullptr)},
                {"p_k", s.p_k()},
                {"tiles_analyzed", s.tiles_analyzed()},
            };
            send_json(res, 200, out);
        });
    });

    server.Post(R"(/api/v1/sessions/([0-9a-zA-Z_-]+)/tiles/(-?\d+)/(-?\d+)/edits)",
                [lookup](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                        auto live = lookup(req, res);
                        if (!live) {
                            return;
                        }
                        const json body = parse_body(req);
                        if (!body.contains("edits") || !body.at("edits").is_array()) {
                            throw ContractError("body needs an edits array");
                        }
                        std::vector<Edit> edits;
                        for (const auto& e : body.at("edits")) {
                            edits.push_back(edit_from_json(e));
                        }
                        const std::string key = body.value("idempotency_key", std::string());
                        std::lock_guard lock(live->mutex);
                        const TileIndex t = path_tile(req, 2, live->session());
                        const SubmitOutcome o = live->submit(t, edits, key);
                        send_json(res, 200,
                                  {{"accepted", true},
                                   {"replayed", o.replayed},
                                   {"p_k", o.p_k},
                                   {"stopped", o.stopped},
                                   {"tiles_analyzed", o.tiles_analyzed}});
                    });
                });

    server.Get(R"(/api/v1/sessions/([0-9a-zA-Z_-]+)/status)", [lookup](const httplib::Request& req,
                                                                       httplib::Response& res) {
        guarded(res, [&] {
            auto live = lookup(req, res);
            if (!live) {
                return;
            }
            std::lock_guard lock(live->mutex);
            send_json(res, 200, live->status());
        });
    });

    server.Get(R"(/api/v1/sessions/([0-9a-zA-Z_-]+)/report)", [lookup](const httplib::Request& req,
                                                                       httplib::Response& res) {
        guarded(res, [&] {
            auto live = lookup(req, res);
            if (!live) {
                return;
            }
            std::lock_guard lock(live->mutex);
            if (!live->session().truth()) {
                send_error(res, 404, "session has no truth set");
                return;
            }
            send_json(res, 200, report_json(*live));
        });
    });

    server.Get(R"(/api/v1/tiles/([0-9a-zA-Z_-]+)/(-?\d+)/(-?\d+)\.png)", [lookup](const httplib::Request& req,
                                                                                 httplib::Response& res) {
        guarded(res, [&] {
            auto live = lookup(req, res);
            if (!live) {
                return;
            }
            std::lock_guard lock(live->mutex);
            const TileIndex t = path_tile(req, 2, live->session());
            res.status = 200;
            res.set_content(render_tile_png(live->session(), t), "image/png");
        });
    });
}

void serve(const ServeOptions& options, const std::function<void(int)>& on_ready) {
    SessionStore store(options.data_dir);
    httplib::Server server;
    register_routes(server, store);
    int port = options.port;
    if (port == 0) {
        port = server.bind_to_any_port(options.host);
    } else if (!server.bind_to_port(options.host, port)) {
        port = -1;
    }
    if (port < 0) {
        throw IoError("cannot bind " + options.host + ":" + std::to_string(options.port));
    }
    if (on_ready) {
        on_ready(port);
    }
    server.listen_after_bind();
}

} // namespace maploop
