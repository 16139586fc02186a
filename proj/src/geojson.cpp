#include "maploop/geojson.hpp"

#include <fstream>
#include <sstream>

#include "maploop/errors.hpp"

namespace maploop {

Json polygon_to_json(const Polygon& polygon) {
    Json ring = Json::array();
    for (const Point& p : polygon.vertices()) {
        ring.push_back({p.x, p.y});
    }
    if (!polygon.vertices().empty()) {
        const Point& p = polygon.vertices().front();
        ring.push_back({p.x, p.y});
    }
    return ring;
}

Polygon polygon_from_json(const Json& ring) {
    if (!ring.is_array()) {
        throw ContractError("polygon ring must be an array of [x,y] pairs");
    }
    std::vector<Point> pts;
    pts.reserve(ring.size());
    for (const Json& c : ring) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
            throw ContractError("polygon vertex must be [x,y]");
        }
        pts.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (pts.size() >= 2 && pts.front() == pts.back()) {
        pts.pop_back();
    }
    return Polygon(std::move(pts));
}

Json footprints_to_json(const FootprintSet& set) {
    Json features = Json::array();
    for (const auto& [id, f] : set) {
        features.push_back({
            {"type", "Feature"},
            {"id", id},
            {"geometry", {{"type", "Polygon"}, {"coordinates", Json::array({polygon_to_json(f.polygon)})}}},
            {"properties", {{"provenance", std::string(to_string(f.provenance))}}},
        });
    }
    const RasterMeta& m = set.meta();
    return {
        {"type", "FeatureCollection"},
        {"features", features},
        {"raster_meta", {{"origin", {m.origin_x, m.origin_y}}, {"scale", {m.scale_x, m.scale_y}}}},
        {"next_id", set.next_id()},
    };
}

FootprintSet footprints_from_json(const Json& doc) {
    try {
        if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
            throw ContractError("expected a GeoJSON FeatureCollection");
        }
        RasterMeta meta;
        if (doc.contains("raster_meta")) {
            const Json& m = doc["raster_meta"];
            meta.origin_x = m.at("origin").at(0).get<double>();
            meta.origin_y = m.at("origin").at(1).get<double>();
            meta.scale_x = m.at("scale").at(0).get<double>();
            meta.scale_y = m.at("scale").at(1).get<double>();
        }
        FootprintSet set(meta);
        for (const Json& feat : doc["features"]) {
            const Json& geom = feat.at("geometry");
            if (geom.value("type", "") != "Polygon") {
                throw ContractError("only Polygon geometries are supported");
            }
            Footprint f;
            f.id = feat.at("id").get<FootprintId>();
            f.polygon = polygon_from_json(geom.at("coordinates").at(0));
            if (feat.contains("properties") && feat["properties"].contains("provenance")) {
                f.provenance = parse_provenance(feat["properties"]["provenance"].get<std::string>());
            }
            set.insert(std::move(f));
        }
        if (doc.contains("next_id")) {
            set.set_next_id(doc["next_id"].get<FootprintId>());
        }
        return set;
    } catch (const Json::exception& e) {
        throw ContractError(std::string("malformed footprint JSON: ") + e.what());
    }
}

FootprintSet read_footprints(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        throw ContractError("invalid JSON in " + path.string());
    }
    return footprints_from_json(doc);
}

void write_footprints(const std::filesystem::path& path, const FootprintSet& set) {
    write_text_file(path, footprints_to_json(set).dump() + "\n");
}

Json edits_to_json(const std::vector<Edit>& edits) {
    Json arr = Json::array();
    for (const auto& e : edits) {
        arr.push_back(edit_to_json(e));
    }
    return arr;
}

Json edit_to_json(const Edit& e) {
    Json j = {
        {"seq", e.seq},
        {"kind", std::string(to_string(e.kind))},
        {"tile", {e.tile.row, e.tile.col}},
    };
    if (e.target_id) {
        j["target_id"] = *e.target_id;
    }
    if (e.kind == EditKind::align) {
        j["shift"] = {e.shift.dx, e.shift.dy};
    }
    if (e.polygon) {
        j["polygon"] = polygon_to_json(*e.polygon);
    }
    return j;
}

Edit edit_from_json(const Json& j) {
    try {
        if (!j.is_object()) {
            throw ContractError("edit must be a JSON object");
        }
        Edit e;
        e.kind = parse_edit_kind(j.at("kind").get<std::string>());
        e.seq = j.value("seq", std::uint64_t{0});
        if (j.contains("tile")) {
            e.tile = {j["tile"].at(0).get<int>(), j["tile"].at(1).get<int>()};
        }
        if (j.contains("target_id") && !j["target_id"].is_null()) {
            e.target_id = j["target_id"].get<FootprintId>();
        }
        if (j.contains("shift")) {
            e.shift = {j["shift"].at(0).get<int>(), j["shift"].at(1).get<int>()};
        }
        if (j.contains("polygon") && !j["polygon"].is_null()) {
            e.polygon = polygon_from_json(j["polygon"]);
        }
        switch (e.kind) {
        case EditKind::add:
            if (!e.polygon) {
                throw InvalidGeometry("add edit requires a polygon");
            }
            e.polygon->validate();
            break;
        case EditKind::align:
        case EditKind::remove:
            if (!e.target_id) {
                throw ContractError(std::string(to_string(e.kind)) + " edit requires target_id");
            }
            break;
        }
        return e;
    } catch (const Json::exception& ex) {
        throw ContractError(std::string("malformed edit JSON: ") + ex.what());
    }
}

std::vector<Edit> read_edit_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<Edit> log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ContractError("invalid JSON line in " + path.string());
        }
        log.push_back(edit_from_json(j));
    }
    return log;
}

void write_edit_log(const std::filesystem::path& path, const std::vector<Edit>& log) {
    std::string text;
    for (const Edit& e : log) {
        text += edit_to_json(e).dump();
        text += '\n';
    }
    write_text_file(path, text);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << text;
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace maploop
