#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "maploop/annotations.hpp"

namespace maploop {

using Json = nlohmann::json;

// FootprintSet as a GeoJSON FeatureCollection in pixel coordinates. Rings are
// written closed (first vertex repeated); reading accepts open or closed rings.
Json footprints_to_json(const FootprintSet& set);
FootprintSet footprints_from_json(const Json& doc);
FootprintSet read_footprints(const std::filesystem::path& path);
void write_footprints(const std::filesystem::path& path, const FootprintSet& set);

Json polygon_to_json(const Polygon& polygon);
Polygon polygon_from_json(const Json& ring);

Json edit_to_json(const Edit& e);
Json edits_to_json(const std::vector<Edit>& edits);
/// Throws ContractError on malformed input.
Edit edit_from_json(const Json& j);

std::vector<Edit> read_edit_log(const std::filesystem::path& path);
void write_edit_log(const std::filesystem::path& path, const std::vector<Edit>& log);

/// Writes text atomically (temp file + rename). Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace maploop
