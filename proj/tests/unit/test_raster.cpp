#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <zlib.h>

#include <numbers>
#include <random>

#include "maploop/errors.hpp"
#include "maploop/pgm.hpp"
#include "maploop/png.hpp"
#include "maploop/raster.hpp"
#include "support.hpp"

using namespace maploop;

namespace {

Polygon random_star(std::mt19937_64& rng, double cx, double cy, double rmax) {
    std::uniform_real_distribution<double> r(0.3 * rmax, rmax);
    std::uniform_int_distribution<int> count(3, 12);
    const int n = count(rng);
    std::vector<Point> v;
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * (i + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng)) / n;
        const double rad = r(rng);
        v.push_back({cx + rad * std::cos(a), cy + rad * std::sin(a)});
    }
    return Polygon(v);
}

} // namespace

TEST_CASE("integer rectangle covers exactly its pixels") {
    const Polygon rect = make_rectangle(2, 3, 7, 5);
    const BinaryMask m = rasterize(std::vector<Polygon>{rect}, 10, 10);
    CHECK(m.popcount() == 10);
    CHECK(m.at(2, 3) == 1);
    CHECK(m.at(6, 4) == 1);
    CHECK(m.at(7, 4) == 0);
    CHECK(m.at(6, 5) == 0);
}

TEST_CASE("rasterization matches a point-in-polygon test at pixel centers") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Polygon p = random_star(rng, 16.3, 15.7, 14.0);
        const BinaryMask m = rasterize(std::vector<Polygon>{p}, 32, 32);
        int mismatches = 0;
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                mismatches += (m.at(x, y) != 0) != oracle::inside(p.vertices(), x + 0.5, y + 0.5);
            }
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("overlapping polygons combine by union and clip at the frame") {
    const std::vector<Polygon> polys{make_rectangle(-5, -5, 3, 3), make_rectangle(1, 1, 4, 4)};
    const BinaryMask m = rasterize(polys, 6, 6);
    CHECK(m.popcount() == 9 + 9 - 4);
    const MaskPatch patch = rasterize_patch(polys, 6, 6);
    CHECK(to_mask(patch, 6, 6) == m);
    CHECK(patch.popcount() == m.popcount());
}

TEST_CASE("polygon validation") {
    CHECK_THROWS_AS(Polygon({{0, 0}, {1, 1}}).validate(), InvalidGeometry);
    CHECK_THROWS_AS(Polygon({{0, 0}, {1, 1}, {2, 2}}).validate(), InvalidGeometry);
    CHECK_THROWS_AS(Polygon({{0, 0}, {1, NAN}, {2, 0}}).validate(), InvalidGeometry);
    CHECK_NOTHROW(make_rectangle(0, 0, 1, 1).validate());
    CHECK(make_rectangle(0, 0, 4, 2).area() == doctest::Approx(8.0));
    const Point c = make_rectangle(0, 0, 4, 2).centroid();
    CHECK(c.x == doctest::Approx(2.0));
    CHECK(c.y == doctest::Approx(1.0));
}

TEST_CASE("tile grid addressing") {
    const TileGrid g(600, 300, 256);
    CHECK(g.cols() == 3);
    CHECK(g.rows() == 2);
    CHECK(g.tile_count() == 6);
    for (std::size_t i = 0; i < g.tile_count(); ++i) {
        CHECK(g.linear(g.tile_at(i)) == i);
    }
    CHECK(g.window({1, 2}) == PixelRect{512, 256, 768, 512});
    CHECK_THROWS_AS(g.linear({2, 0}), RangeError);
    CHECK_THROWS_AS(g.linear({0, -1}), RangeError);
}

TEST_CASE("edge tiles are zero padded") {
    const TileGrid g(5, 3, 4);
    ProbMap p(5, 3, 0.5f);
    const ProbMap tile = crop(p, {0, 1}, g);
    CHECK(tile.width() == 4);
    CHECK(tile.at(0, 0) == 0.5f);
    CHECK(tile.at(1, 0) == 0.0f);
    CHECK(tile.at(0, 3) == 0.0f);
    BinaryMask m(5, 3);
    m.set(4, 2, true);
    const BinaryMask mt = crop(m, {0, 1}, g);
    CHECK(mt.at(0, 2) == 1);
    CHECK(mt.popcount() == 1);
}

TEST_CASE("shift_mask translates and zero fills") {
    BinaryMask m(4, 4);
    m.set(1, 1, true);
    m.set(3, 3, true);
    const BinaryMask s = shift_mask(m, {1, -1});
    CHECK(s.at(2, 0) == 1);
    CHECK(s.popcount() == 1);
}

TEST_CASE("raster value contracts") {
    CHECK_THROWS_AS(ProbMap(2, 1, std::vector<float>{0.5f, 1.5f}), ContractError);
    CHECK_THROWS_AS(ProbMap(2, 1, std::vector<float>{0.5f}), ContractError);
    CHECK_THROWS_AS(BinaryMask(2, 1, std::vector<std::uint8_t>{0, 2}), ContractError);
}

TEST_CASE("PGM round trips") {
    std::mt19937_64 rng(3);
    const ProbMap p = oracle::random_prob(rng, 13, 7);
    const ProbMap back = decode_prob_pgm(encode_prob_pgm(p));
    REQUIRE(back.width() == 13);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 13; ++x) {
            CHECK(std::abs(back.at(x, y) - p.at(x, y)) <= 0.5f / 65535.0f + 1e-7f);
        }
    }
    const auto dir = fixture::temp_dir("pgm");
    const BinaryMask m = oracle::random_mask(rng, 9, 4, 0.5);
    write_mask_pgm(dir / "m.pgm", m);
    CHECK(read_mask_pgm(dir / "m.pgm") == m);
    write_prob_pgm(dir / "p.pgm", p);
    CHECK(read_prob_pgm(dir / "p.pgm") == back);
    CHECK_THROWS_AS(read_prob_pgm(dir / "missing.pgm"), IoError);
    CHECK_THROWS(decode_prob_pgm("P5\n2 2\n70000\n"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("PNG decodes back to the pixels") {
    RgbImage img{3, 2, std::vector<std::uint8_t>(18)};
    for (int i = 0; i < 18; ++i) {
        img.rgb[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i * 13);
    }
    const std::string png = encode_png(img);
    REQUIRE(png.size() > 33);
    CHECK(png.substr(1, 3) == "PNG");
    CHECK(png.substr(12, 4) == "IHDR");
    auto be32 = [&](std::size_t at) {
        return (std::uint32_t(std::uint8_t(png[at])) << 24) | (std::uint32_t(std::uint8_t(png[at + 1])) << 16) |
               (std::uint32_t(std::uint8_t(png[at + 2])) << 8) | std::uint32_t(std::uint8_t(png[at + 3]));
    };
    CHECK(be32(16) == 3);
    CHECK(be32(20) == 2);
    // Walk chunks, check CRCs, gather IDAT.
    std::string idat;
    std::size_t pos = 8;
    bool saw_end = false;
    while (pos + 12 <= png.size()) {
        const std::uint32_t len = be32(pos);
        const std::string type = png.substr(pos + 4, 4);
        const auto crc = crc32(0, reinterpret_cast<const Bytef*>(png.data() + pos + 4), len + 4);
        CHECK(crc == be32(pos + 8 + len));
        if (type == "IDAT") {
            idat += png.substr(pos + 8, len);
        }
        saw_end = type == "IEND";
        pos += 12 + len;
    }
    CHECK(saw_end);
    std::vector<std::uint8_t> raw(2 * (1 + 9));
    uLongf raw_len = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_len, reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
    CHECK(raw_len == raw.size());
    for (int y = 0; y < 2; ++y) {
        CHECK(raw[static_cast<std::size_t>(y * 10)] == 0);
        for (int i = 0; i < 9; ++i) {
            CHECK(raw[static_cast<std::size_t>(y * 10 + 1 + i)] == img.rgb[static_cast<std::size_t>(y * 9 + i)]);
        }
    }
}
