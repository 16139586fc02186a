#include "maploop/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace maploop {
namespace {

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
};

PgmHeader parse_header(const std::string& bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        }
        if (start == pos) {
            throw IoError("malformed PGM header");
        }
        return std::stoi(bytes.substr(start, pos - start));
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw IoError("not a binary PGM (P5) file");
    }
    pos = 2;
    PgmHeader h;
    h.width = read_int();
    h.height = read_int();
    h.maxval = read_int();
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw IoError("malformed PGM header");
    }
    h.data_offset = pos + 1;
    if (h.maxval <= 0 || h.maxval > 65535) {
        throw IoError("PGM maxval out of range");
    }
    const std::size_t sample = h.maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(h.width) * h.height * sample;
    if (bytes.size() - h.data_offset < need) {
        throw IoError("truncated PGM data");
    }
    return h;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace

ProbMap decode_prob_pgm(const std::string& bytes) {
    const PgmHeader h = parse_header(bytes);
    std::vector<float> values(static_cast<std::size_t>(h.width) * h.height);
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
    const float maxval = static_cast<float>(h.maxval);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const unsigned raw = h.maxval > 255 ? (static_cast<unsigned>(data[2 * i]) << 8) | data[2 * i + 1]
                                            : data[i];
        values[i] = std::min(1.0f, static_cast<float>(raw) / maxval);
    }
    return ProbMap(h.width, h.height, std::move(values));
}

std::string encode_prob_pgm(const ProbMap& map) {
    std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + map.size() * 2);
    std::size_t i = header;
    for (float v : map.values()) {
        const auto raw = static_cast<unsigned>(std::lround(static_cast<double>(v) * 65535.0));
        out[i++] = static_cast<char>((raw >> 8) & 0xff);
        out[i++] = static_cast<char>(raw & 0xff);
    }
    return out;
}

ProbMap read_prob_pgm(const std::filesystem::path& path) { return decode_prob_pgm(slurp(path)); }

void write_prob_pgm(const std::filesystem::path& path, const ProbMap& map) { spill(path, encode_prob_pgm(map)); }

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    const PgmHeader h = parse_header(bytes);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(h.width) * h.height);
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const unsigned raw = h.maxval > 255 ? (static_cast<unsigned>(data[2 * i]) << 8) | data[2 * i + 1]
                                            : data[i];
        bits[i] = raw != 0 ? 1 : 0;
    }
    return BinaryMask(h.width, h.height, std::move(bits));
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
    std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
    out.reserve(out.size() + mask.size());
    for (std::uint8_t b : mask.values()) {
        out.push_back(static_cast<char>(b ? 255 : 0));
    }
    spill(path, out);
}

} // namespace maploop
