#pragma once

// Independent reference evaluators used by the unit and acceptance tests.
// They recompute every quantity from its definition with plain loops in long
// double and share no code with the library beyond its value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "maploop/geometry.hpp"
#include "maploop/raster.hpp"

namespace oracle {

using maploop::BinaryMask;
using maploop::ProbMap;
using maploop::ShiftVector;

inline bool close(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + 1e-15;
}

inline long double sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

// Binary cross-entropy straight from its definition.
inline long double bce(long double logit, long double target) {
    const long double s = sigmoid(logit);
    return -(target * std::log(s) + (1.0L - target) * std::log(1.0L - s));
}

inline double mean_bce(const std::vector<double>& logits, const std::vector<double>& targets) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        sum += bce(logits[i], targets[i]);
    }
    return static_cast<double>(sum / static_cast<long double>(logits.size()));
}

// H(A) + H(B) - H(A,B) in bits over `bins` equal-width bins of [0,1].
inline double mutual_information(const BinaryMask& a, const ProbMap& b, int bins) {
    const std::size_t n = a.size();
    std::vector<long double> pa(2, 0.0L);
    std::vector<long double> pb(static_cast<std::size_t>(bins), 0.0L);
    std::vector<long double> pab(static_cast<std::size_t>(2 * bins), 0.0L);
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const int m = a.at(x, y) != 0 ? 1 : 0;
            int k = static_cast<int>(std::floor(static_cast<double>(b.at(x, y)) * bins));
            k = std::clamp(k, 0, bins - 1);
            pa[static_cast<std::size_t>(m)] += 1.0L;
            pb[static_cast<std::size_t>(k)] += 1.0L;
            pab[static_cast<std::size_t>(m * bins + k)] += 1.0L;
        }
    }
    auto entropy = [n](const std::vector<long double>& counts) {
        long double h = 0.0L;
        for (const long double c : counts) {
            if (c > 0.0L) {
                const long double p = c / static_cast<long double>(n);
                h -= p * std::log2(p);
            }
        }
        return h;
    };
    return static_cast<double>(entropy(pa) + entropy(pb) - entropy(pab));
}

inline double ndp(const BinaryMask& a, const ProbMap& b) {
    long double s = 0.0L;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            s += static_cast<long double>(a.at(x, y)) * b.at(x, y);
        }
    }
    return static_cast<double>(s / static_cast<long double>(a.size()));
}

inline double sad(const BinaryMask& a, const ProbMap& b) {
    long double s = 0.0L;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            s += std::abs(static_cast<long double>(a.at(x, y)) - static_cast<long double>(b.at(x, y)));
        }
    }
    return static_cast<double>(s);
}

// Largest 4-connected component of prob > 0.5 by flood fill.
inline std::size_t largest_component(const ProbMap& p) {
    const int w = p.width();
    const int h = p.height();
    std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
    std::size_t best = 0;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            if (p.at(sx, sy) <= 0.5f || seen[static_cast<std::size_t>(sy) * w + sx]) {
                continue;
            }
            std::size_t size = 0;
            std::vector<std::pair<int, int>> stack{{sx, sy}};
            seen[static_cast<std::size_t>(sy) * w + sx] = 1;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                ++size;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) {
                        continue;
                    }
                    auto& s = seen[static_cast<std::size_t>(ny[k]) * w + nx[k]];
                    if (!s && p.at(nx[k], ny[k]) > 0.5f) {
                        s = 1;
                        stack.push_back({nx[k], ny[k]});
                    }
                }
            }
            best = std::max(best, size);
        }
    }
    return best;
}

// -log(max(C, eps)); C = sum over the window of mask(x-dx, y-dy) * prob(x,y)
// divided by the window area. Window = tight box of set mask pixels dilated
// by radius, clipped to the raster.
inline double unary(const BinaryMask& mask, ShiftVector d, const ProbMap& prob, double eps, int radius) {
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    long double c = 0.0L;
    if (x1 >= 0) {
        const int wx0 = std::max(0, x0 - radius), wy0 = std::max(0, y0 - radius);
        const int wx1 = std::min(mask.width(), x1 + 1 + radius), wy1 = std::min(mask.height(), y1 + 1 + radius);
        long double dot = 0.0L;
        for (int y = wy0; y < wy1; ++y) {
            for (int x = wx0; x < wx1; ++x) {
                const int mx = x - d.dx, my = y - d.dy;
                if (mx >= 0 && my >= 0 && mx < mask.width() && my < mask.height() && mask.at(mx, my)) {
                    dot += prob.at(x, y);
                }
            }
        }
        c = dot / static_cast<long double>((wx1 - wx0) * (wy1 - wy0));
    }
    return static_cast<double>(-std::log(std::max(c, static_cast<long double>(eps))));
}

inline double max_distance(const std::vector<ShiftVector>& v) {
    double best = 0.0;
    for (const auto& a : v) {
        for (const auto& b : v) {
            best = std::max(best, std::hypot(double(a.dx - b.dx), double(a.dy - b.dy)));
        }
    }
    return best;
}

// PNPOLY crossing test at a point.
inline bool inside(const std::vector<maploop::Point>& poly, double px, double py) {
    bool c = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) {
            c = !c;
        }
    }
    return c;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            m.set(x, y, on(rng));
        }
    }
    return m;
}

inline ProbMap random_prob(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ProbMap p(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            p.set(x, y, u(rng));
        }
    }
    return p;
}

} // namespace oracle

namespace fixture {

// A 4x4 grid of 64 px tiles with three small villages.
inline nlohmann::json small_world(std::uint64_t seed = 7) {
    return {{"tiles_x", 4},        {"tiles_y", 4},        {"tile_size", 64},  {"villages", 3},
            {"buildings_min", 4},  {"buildings_max", 6},  {"village_radius", 18.0},
            {"center_jitter", 2},  {"seed", seed}};
}

inline nlohmann::json small_scenario(std::uint64_t seed = 7) {
    return {{"world", small_world(seed)},
            {"degrade", {{"add_pct", 20}, {"remove_pct", 20}, {"max_shift", 1}, {"seed", seed}, {"add_radius", 10}}},
            {"provider", {{"noise_sigma", 0.1}, {"seed", seed}}},
            {"alignment", {{"radius", 4}}},
            {"config", {{"k", 4}, {"r_k", 0.3}, {"retrain_every", 3}, {"seed", seed}}}};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    std::random_device rd;
    auto dir = std::filesystem::temp_directory_path() / ("maploop_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixture

#include "maploop/alignment.hpp"

namespace fixture {

struct RandomAlignment {
    maploop::AlignmentProblem problem;
    std::vector<maploop::BinaryMask> masks;  // full frame, one per group
    std::vector<maploop::MaskPatch> patches;
    maploop::ProbMap prob;
};

// Small random alignment instance: up to `max_groups` groups on a w x h
// raster, candidate grid of the given radius.
inline RandomAlignment random_alignment(std::mt19937_64& rng, int max_groups, int radius, double beta, int w = 16,
                                        int h = 16) {
    using namespace maploop;
    RandomAlignment r;
    const int n = std::uniform_int_distribution<int>(1, max_groups)(rng);
    std::vector<FootprintGroup> groups;
    for (int i = 0; i < n; ++i) {
        BinaryMask m(w, h);
        const int x0 = std::uniform_int_distribution<int>(0, w - 3)(rng);
        const int y0 = std::uniform_int_distribution<int>(0, h - 3)(rng);
        const int bw = std::uniform_int_distribution<int>(1, std::min(5, w - x0))(rng);
        const int bh = std::uniform_int_distribution<int>(1, std::min(5, h - y0))(rng);
        std::bernoulli_distribution on(0.7);
        for (int y = y0; y < y0 + bh; ++y) {
            for (int x = x0; x < x0 + bw; ++x) {
                m.set(x, y, on(rng));
            }
        }
        m.set(x0, y0, true);
        r.patches.push_back(to_patch(m));
        r.masks.push_back(std::move(m));
        groups.push_back({{static_cast<FootprintId>(i + 1)}, {x0 + bw / 2.0, y0 + bh / 2.0}});
    }
    std::vector<std::vector<std::size_t>> nb(static_cast<std::size_t>(n));
    std::bernoulli_distribution link(0.7);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (link(rng)) {
                nb[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
                nb[static_cast<std::size_t>(j)].push_back(static_cast<std::size_t>(i));
            }
        }
    }
    r.problem = make_problem(std::move(groups), std::move(nb), candidate_grid(radius), beta, 1e-6);
    r.prob = oracle::random_prob(rng, w, h);
    return r;
}

// Energy of a labelling from the definitions alone.
inline double oracle_energy(const RandomAlignment& r, const std::vector<maploop::ShiftVector>& shifts) {
    long double e = 0.0L;
    const double z = oracle::max_distance(r.problem.candidates);
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        e += oracle::unary(r.masks[i], shifts[i], r.prob, r.problem.epsilon, r.problem.window_radius);
        if (z > 0.0) {
            for (std::size_t j : r.problem.neighbors[i]) {
                e += r.problem.beta *
                     std::hypot(double(shifts[i].dx - shifts[j].dx), double(shifts[i].dy - shifts[j].dy)) / z;
            }
        }
    }
    return static_cast<double>(e);
}

// Exhaustive minimum over all labellings (small problems only).
inline double exhaustive_minimum(const RandomAlignment& r) {
    const std::size_t n = r.problem.groups.size();
    const std::size_t nc = r.problem.candidates.size();
    std::vector<std::size_t> idx(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<maploop::ShiftVector> s;
        for (std::size_t i = 0; i < n; ++i) {
            s.push_back(r.problem.candidates[idx[i]]);
        }
        best = std::min(best, oracle_energy(r, s));
        std::size_t k = 0;
        while (k < n && ++idx[k] == nc) {
            idx[k++] = 0;
        }
        if (k == n) {
            break;
        }
    }
    return best;
}

} // namespace fixture
