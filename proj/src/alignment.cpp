#include "maploop/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "maploop/errors.hpp"
#include "maploop/kernels.hpp"

namespace maploop {

bool tie_break_less(ShiftVector a, ShiftVector b) {
    const long na = static_cast<long>(a.dx) * a.dx + static_cast<long>(a.dy) * a.dy;
    const long nb = static_cast<long>(b.dx) * b.dx + static_cast<long>(b.dy) * b.dy;
    if (na != nb) {
        return na < nb;
    }
    return a < b;
}

std::vector<ShiftVector> candidate_grid(int radius) {
    require(radius >= 0, "candidate radius must be non-negative");
    std::vector<ShiftVector> out;
    out.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
    for (int dx = -radius; dx <= radius; ++dx) {
        for (int dy = -radius; dy <= radius; ++dy) {
            out.push_back({dx, dy});
        }
    }
    std::sort(out.begin(), out.end(), tie_break_less);
    return out;
}

double max_pairwise_distance(std::span<const ShiftVector> candidates) {
    // The farthest pair are convex hull vertices; hull first, then all pairs.
    std::vector<ShiftVector> pts(candidates.begin(), candidates.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 2) {
        return 0.0;
    }
    auto cross = [](ShiftVector o, ShiftVector a, ShiftVector b) {
        return static_cast<long>(a.dx - o.dx) * (b.dy - o.dy) - static_cast<long>(a.dy - o.dy) * (b.dx - o.dx);
    };
    std::vector<ShiftVector> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    hull.resize(k > 1 ? k - 1 : k);
    double best = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            best = std::max(best, distance(hull[i], hull[j]));
        }
    }
    return best;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const FootprintGroup> groups, int k) {
    const std::size_t n = groups.size();
    std::vector<std::vector<std::size_t>> adj(n);
    if (k <= 0) {
        return adj;
    }
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double dx = groups[i].centroid.x - groups[j].centroid.x;
            const double dy = groups[i].centroid.y - groups[j].centroid.y;
            dist.emplace_back(dx * dx + dy * dy, j);
        }
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
        for (std::size_t t = 0; t < take; ++t) {
            adj[i].push_back(dist[t].second);
            adj[dist[t].second].push_back(i);
        }
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
}

AlignmentProblem make_problem(std::vector<FootprintGroup> groups, std::vector<std::vector<std::size_t>> neighbors,
                              std::vector<ShiftVector> candidates, double beta, double epsilon) {
    require(neighbors.size() == groups.size(), "one neighbour list per group required");
    require(!candidates.empty(), "candidate set must be non-empty");
    require(std::find(candidates.begin(), candidates.end(), ShiftVector{0, 0}) != candidates.end(),
            "candidate set must contain (0,0)");
    require(beta >= 0.0, "beta must be non-negative");
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        for (std::size_t j : neighbors[i]) {
            require(j < groups.size() && j != i, "neighbour index out of range or self loop");
            require(std::find(neighbors[j].begin(), neighbors[j].end(), i) != neighbors[j].end(),
                    "neighbourhood must be symmetric");
        }
    }
    AlignmentProblem p;
    p.groups = std::move(groups);
    p.neighbors = std::move(neighbors);
    p.candidates = std::move(candidates);
    p.beta = beta;
    p.epsilon = epsilon;
    p.z_norm = max_pairwise_distance(p.candidates);
    for (ShiftVector c : p.candidates) {
        p.window_radius = std::max({p.window_radius, std::abs(c.dx), std::abs(c.dy)});
    }
    return p;
}

AlignmentProblem make_problem(std::vector<FootprintGroup> groups, const AlignmentParams& params) {
    auto adj = nearest_neighbors(groups, params.neighbors);
    return make_problem(std::move(groups), std::move(adj), candidate_grid(params.radius), params.beta,
                        params.epsilon);
}

std::vector<MaskPatch> group_masks(const FootprintSet& set, std::span<const FootprintGroup> groups, int width,
                                   int height) {
    std::vector<MaskPatch> out;
    out.reserve(groups.size());
    std::vector<Polygon> polys;
    for (const FootprintGroup& g : groups) {
        polys.clear();
        for (FootprintId id : g.member_ids) {
            polys.push_back(set.get(id).polygon);
        }
        out.push_back(rasterize_patch(polys, width, height));
    }
    return out;
}

PixelRect unary_window(const MaskPatch& group_mask, int radius, int width, int height) {
    if (group_mask.rect.empty()) {
        return {};
    }
    return group_mask.rect.dilate(radius).intersect({0, 0, width, height});
}

double unary_cost(const MaskPatch& group_mask, ShiftVector d, const ProbMap& prob, double epsilon, int radius) {
    const PixelRect win = unary_window(group_mask, radius, prob.width(), prob.height());
    double c = 0.0;
    if (!win.empty()) {
        const PixelRect& r = group_mask.rect;
        // Shifted mask pixels that leave the window (only possible past the
        // raster edge, since |d| <= radius) contribute nothing.
        const int x_begin = std::max(r.x0 + d.dx, win.x0);
        const int x_end = std::min(r.x1 + d.dx, win.x1);
        double dot = 0.0;
        if (x_begin < x_end) {
            for (int y = r.y0; y < r.y1; ++y) {
                const int ty = y + d.dy;
                if (ty < win.y0 || ty >= win.y1) {
                    continue;
                }
                const auto mask_row = group_mask.bits.row(y - r.y0);
                const auto prob_row = prob.row(ty);
                const auto n = static_cast<std::size_t>(x_end - x_begin);
                dot += kernels::dot_mask_prob(mask_row.subspan(static_cast<std::size_t>(x_begin - d.dx - r.x0), n),
                                              prob_row.subspan(static_cast<std::size_t>(x_begin), n));
            }
        }
        c = dot / static_cast<double>(win.area());
    }
    return -std::log(std::max(c, epsilon));
}

double unary_cost(const BinaryMask& group_mask, ShiftVector d, const ProbMap& prob, double epsilon, int radius) {
    require(group_mask.width() == prob.width() && group_mask.height() == prob.height(),
            "mask and probability map dimensions differ");
    return unary_cost(to_patch(group_mask), d, prob, epsilon, radius);
}

double pairwise_cost(ShiftVector d_i, ShiftVector d_j, double z_norm) {
    require(z_norm > 0.0, "z_norm must be positive");
    return distance(d_i, d_j) / z_norm;
}

namespace {

double pairwise_sum(const AlignmentProblem& problem, std::span<const ShiftVector> shifts) {
    if (problem.z_norm <= 0.0) {
        return 0.0;  // single candidate: every shift is equal
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        for (std::size_t j : problem.neighbors[i]) {
            sum += pairwise_cost(shifts[i], shifts[j], problem.z_norm);
        }
    }
    return sum;
}

} // namespace

double total_energy(const AlignmentProblem& problem, std::span<const ShiftVector> shifts, const ProbMap& prob,
                    std::span<const MaskPatch> masks) {
    require(shifts.size() == problem.groups.size(), "one shift per group required");
    require(masks.size() == problem.groups.size(), "one mask per group required");
    double unary = 0.0;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        require(std::find(problem.candidates.begin(), problem.candidates.end(), shifts[i]) != problem.candidates.end(),
                "shift is not a candidate");
        unary += unary_cost(masks[i], shifts[i], prob, problem.epsilon, problem.window_radius);
    }
    return unary + problem.beta * pairwise_sum(problem, shifts);
}

std::vector<double> unary_table(const AlignmentProblem& problem, const MaskPatch& group_mask, const ProbMap& prob) {
    const std::size_t nc = problem.candidates.size();
    const PixelRect win = unary_window(group_mask, problem.window_radius, prob.width(), prob.height());
    std::vector<double> costs(nc, -std::log(problem.epsilon));
    if (win.empty()) {
        return costs;
    }
    // prefix[(y - win.y0) * (w + 1) + k] = sum of prob over [win.x0, win.x0 + k) on row y
    const int w = win.width();
    std::vector<double> prefix(static_cast<std::size_t>(win.height()) * (w + 1), 0.0);
    for (int y = win.y0; y < win.y1; ++y) {
        const auto row = prob.row(y);
        double* p = prefix.data() + static_cast<std::size_t>(y - win.y0) * (w + 1);
        for (int x = 0; x < w; ++x) {
            p[x + 1] = p[x] + row[win.x0 + x];
        }
    }
    struct Run {
        int y, x0, x1;
    };
    std::vector<Run> runs;
    const PixelRect& r = group_mask.rect;
    for (int y = r.y0; y < r.y1; ++y) {
        const auto bits = group_mask.bits.row(y - r.y0);
        int x = 0;
        while (x < r.width()) {
            if (!bits[x]) {
                ++x;
                continue;
            }
            const int start = x;
            while (x < r.width() && bits[x]) {
                ++x;
            }
            runs.push_back({y, r.x0 + start, r.x0 + x});
        }
    }
    const double area = static_cast<double>(win.area());
    for (std::size_t c = 0; c < nc; ++c) {
        const ShiftVector d = problem.candidates[c];
        double dot = 0.0;
        for (const Run& run : runs) {
            const int ty = run.y + d.dy;
            if (ty < win.y0 || ty >= win.y1) {
                continue;
            }
            const int a = std::max(run.x0 + d.dx, win.x0);
            const int b = std::min(run.x1 + d.dx, win.x1);
            if (a < b) {
                const double* p = prefix.data() + static_cast<std::size_t>(ty - win.y0) * (w + 1);
                dot += p[b - win.x0] - p[a - win.x0];
            }
        }
        costs[c] = -std::log(std::max(dot / area, problem.epsilon));
    }
    return costs;
}

AlignmentSolution solve_icm(const AlignmentProblem& problem, const ProbMap& prob, std::span<const MaskPatch> masks,
                            int max_iters) {
    require(max_iters >= 1, "max_iters must be at least 1");
    require(masks.size() == problem.groups.size(), "one mask per group required");
    const std::size_t n = problem.groups.size();
    const std::size_t nc = problem.candidates.size();

    // Visit candidates in tie-break order; strict improvement keeps the first.
    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tie_break_less(problem.candidates[a], problem.candidates[b]);
    });
    const auto zero_it = std::find(problem.candidates.begin(), problem.candidates.end(), ShiftVector{0, 0});
    require(zero_it != problem.candidates.end(), "candidate set must contain (0,0)");
    const auto zero = static_cast<std::size_t>(zero_it - problem.candidates.begin());

    std::vector<std::vector<double>> unary(n);
    for (std::size_t i = 0; i < n; ++i) {
        unary[i] = unary_table(problem, masks[i], prob);
    }

    std::vector<std::size_t> label(n, zero);
    auto shift_of = [&](std::size_t i) { return problem.candidates[label[i]]; };
    // Every neighbour pair appears in both i's and j's list, so the terms of
    // the total energy that involve group i sum to twice its own list.
    const double pair_weight = problem.z_norm > 0.0 ? 2.0 * problem.beta / problem.z_norm : 0.0;
    auto local = [&](std::size_t i, std::size_t c) {
        double e = unary[i][c];
        if (pair_weight > 0.0) {
            const ShiftVector d = problem.candidates[c];
            double s = 0.0;
            for (std::size_t j : problem.neighbors[i]) {
                s += distance(d, shift_of(j));
            }
            e += pair_weight * s;
        }
        return e;
    };

    AlignmentSolution sol;
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        energy += unary[i][zero];
    }
    // pairwise terms vanish at the all-zero start

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double current = local(i, label[i]);
            std::size_t best = label[i];
            double best_e = std::numeric_limits<double>::infinity();
            for (std::size_t c : order) {
                const double e = local(i, c);
                if (e < best_e) {
                    best_e = e;
                    best = c;
                }
            }
            if (best != label[i]) {
                energy += best_e - current;
                label[i] = best;
                changed = true;
            }
            sol.update_energies.push_back(energy);
        }
        sol.iterations = iter + 1;
        sol.sweep_energies.push_back(energy);
        if (!changed) {
            break;
        }
    }
    sol.shifts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.shifts.push_back(shift_of(i));
    }
    // Report the energy recomputed from scratch rather than the running sum.
    double unary_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        unary_sum += unary[i][label[i]];
    }
    sol.energy = unary_sum + problem.beta * pairwise_sum(problem, sol.shifts);
    return sol;
}

FootprintSet apply_alignment(const FootprintSet& set, std::span<const FootprintGroup> groups,
                             const AlignmentSolution& solution) {
    require(groups.size() == solution.shifts.size(), "one shift per group required");
    FootprintSet out = set;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (FootprintId id : groups[g].member_ids) {
            if (!set.contains(id)) {
                throw ContractError("group references unknown footprint " + std::to_string(id));
            }
            Footprint f = set.get(id);
            f.polygon = f.polygon.translated(solution.shifts[g]);
            f.provenance = Provenance::aligned;
            out.replace(std::move(f));
        }
    }
    return out;
}

AlignmentResult align_footprints(const FootprintSet& set, const ProbMap& prob, const AlignmentParams& params) {
    auto groups = group_by_proximity(set, params.group_distance);
    AlignmentResult result;
    result.problem = make_problem(std::move(groups), params);
    const auto masks = group_masks(set, result.problem.groups, prob.width(), prob.height());
    result.solution = solve_icm(result.problem, prob, masks, params.max_iters);
    result.aligned = apply_alignment(set, result.problem.groups, result.solution);
    return result;
}

nlohmann::json solution_to_json(std::span<const FootprintGroup> groups, const AlignmentSolution& solution) {
    nlohmann::json out_groups = nlohmann::json::array();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        out_groups.push_back({{"members", groups[g].member_ids},
                              {"shift", {solution.shifts[g].dx, solution.shifts[g].dy}}});
    }
    return {{"groups", out_groups}, {"energy", solution.energy}, {"iterations", solution.iterations}};
}

} // namespace maploop
