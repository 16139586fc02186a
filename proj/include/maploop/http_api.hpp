#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "maploop/store.hpp"

namespace httplib {
class Server;
}

namespace maploop {

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "maploop-data";
};

/// Applies MAPLOOP_DATA_DIR and MAPLOOP_BIND ("host:port" or "port") on top
/// of `base`.
ServeOptions options_from_env(ServeOptions base = {});

/// Registers every /api/v1 route on `server`.
void register_routes(httplib::Server& server, SessionStore& store);

/// The served tile: provider probabilities in gray, footprint outlines in
/// yellow, a magenta frame.
std::string render_tile_png(const Session& session, TileIndex tile);

/// Binds, calls on_ready with the bound port, then blocks until the process
/// is stopped. Port 0 picks a free port.
void serve(const ServeOptions& options, const std::function<void(int)>& on_ready = {});

} // namespace maploop
