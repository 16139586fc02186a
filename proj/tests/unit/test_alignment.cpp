#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "maploop/alignment.hpp"
#include "maploop/errors.hpp"
#include "maploop/kernels.hpp"
#include "support.hpp"

using namespace maploop;

TEST_CASE("candidate grid size and order") {
    const auto c = candidate_grid(2);
    CHECK(c.size() == 25);
    CHECK(c.front() == ShiftVector{0, 0});
    CHECK(c[1] == ShiftVector{-1, 0});  // distance 1, lexicographic (dx, dy)
    CHECK(c[4] == ShiftVector{1, 0});
    for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(tie_break_less(c[i - 1], c[i]));
    }
    CHECK(candidate_grid(0).size() == 1);
    CHECK(candidate_grid(30).size() == 61 * 61);
}

TEST_CASE("max pairwise distance equals brute force") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> coord(-20, 20);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ShiftVector> v{{0, 0}};
        const int n = 1 + trial % 15;
        for (int i = 0; i < n; ++i) {
            v.push_back({coord(rng), coord(rng)});
        }
        CHECK(max_pairwise_distance(v) == doctest::Approx(oracle::max_distance(v)).epsilon(1e-12));
    }
    const auto grid = candidate_grid(30);
    CHECK(max_pairwise_distance(grid) == doctest::Approx(60.0 * std::sqrt(2.0)));
}

TEST_CASE("unary cost matches the brute-force evaluator on both kernel paths") {
    std::mt19937_64 rng(8);
    const auto& saved = kernels::active();
    std::vector<const kernels::KernelTable*> tables{&kernels::scalar_table()};
    if (kernels::avx2_table() != nullptr) {
        tables.push_back(kernels::avx2_table());
    }
    for (const auto* table : tables) {
        kernels::set_active(*table);
        for (int trial = 0; trial < 400; ++trial) {
            const int w = 1 + trial % 23, h = 1 + (trial * 7) % 19;
            const BinaryMask m = oracle::random_mask(rng, w, h, 0.15 + 0.1 * (trial % 5));
            const ProbMap p = oracle::random_prob(rng, w, h);
            const int radius = trial % 4;
            const ShiftVector d{std::uniform_int_distribution<int>(-radius, radius)(rng),
                                std::uniform_int_distribution<int>(-radius, radius)(rng)};
            const double expect = oracle::unary(m, d, p, 1e-6, radius);
            CHECK(oracle::close(unary_cost(m, d, p, 1e-6, radius), expect, 1e-9));
            CHECK(oracle::close(unary_cost(to_patch(m), d, p, 1e-6, radius), expect, 1e-9));
        }
    }
    kernels::set_active(saved);
    CHECK_THROWS_AS(unary_cost(BinaryMask(2, 2), {0, 0}, ProbMap(3, 2), 1e-6, 1), ContractError);
}

TEST_CASE("empty group mask costs -log(epsilon)") {
    CHECK(unary_cost(BinaryMask(4, 4), {0, 0}, ProbMap(4, 4, 1.0f), 1e-6, 2) == doctest::Approx(-std::log(1e-6)));
}

TEST_CASE("unary table equals the reference cost for every candidate") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 60; ++trial) {
        auto r = fixture::random_alignment(rng, 3, 1 + trial % 4, 2.0, 14 + trial % 9, 12 + trial % 5);
        for (std::size_t g = 0; g < r.patches.size(); ++g) {
            const auto table = unary_table(r.problem, r.patches[g], r.prob);
            for (std::size_t c = 0; c < r.problem.candidates.size(); ++c) {
                CHECK(oracle::close(table[c],
                                    unary_cost(r.patches[g], r.problem.candidates[c], r.prob, r.problem.epsilon,
                                               r.problem.window_radius),
                                    1e-9));
            }
        }
    }
}

TEST_CASE("pairwise and total energy match the definitions") {
    CHECK(pairwise_cost({3, 4}, {0, 0}, 10.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(pairwise_cost({0, 0}, {1, 1}, 0.0), ContractError);
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const double beta = std::array<double, 3>{0.0, 2.0, 10.0}[trial % 3];
        auto r = fixture::random_alignment(rng, 4, 1 + trial % 3, beta);
        std::vector<ShiftVector> s;
        std::uniform_int_distribution<std::size_t> pick(0, r.problem.candidates.size() - 1);
        for (std::size_t i = 0; i < r.problem.groups.size(); ++i) {
            s.push_back(r.problem.candidates[pick(rng)]);
        }
        CHECK(oracle::close(total_energy(r.problem, s, r.prob, r.patches), fixture::oracle_energy(r, s), 1e-9));
    }
}

TEST_CASE("total energy rejects shifts outside the candidate set") {
    std::mt19937_64 rng(1);
    auto r = fixture::random_alignment(rng, 1, 1, 2.0);
    std::vector<ShiftVector> s{{5, 5}};
    CHECK_THROWS_AS(total_energy(r.problem, s, r.prob, r.patches), ContractError);
}

TEST_CASE("ICM reaches the global optimum without pairwise terms") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        auto r = fixture::random_alignment(rng, 2, 1 + trial % 3, 0.0);
        const auto sol = solve_icm(r.problem, r.prob, r.patches);
        CHECK(oracle::close(fixture::oracle_energy(r, sol.shifts), fixture::exhaustive_minimum(r), 1e-9));
    }
}

TEST_CASE("ICM energy never increases") {
    std::mt19937_64 rng(34);
    for (double beta : {0.0, 2.0, 10.0}) {
        for (int trial = 0; trial < 60; ++trial) {
            auto r = fixture::random_alignment(rng, 5, 1 + trial % 3, beta, 20, 20);
            const auto sol = solve_icm(r.problem, r.prob, r.patches);
            const double start = total_energy(r.problem, std::vector<ShiftVector>(r.problem.groups.size()), r.prob,
                                              r.patches);
            double prev = start;
            for (double e : sol.update_energies) {
                CHECK(e <= prev + 1e-9);
                prev = e;
            }
            CHECK(sol.sweep_energies.size() == static_cast<std::size_t>(sol.iterations));
            CHECK(sol.energy == doctest::Approx(total_energy(r.problem, sol.shifts, r.prob, r.patches)).epsilon(1e-9));
            CHECK(sol.energy <= start + 1e-9);
        }
    }
}

TEST_CASE("uniform probability keeps the zero shift") {
    std::mt19937_64 rng(2);
    auto r = fixture::random_alignment(rng, 1, 2, 2.0, 40, 40);
    r.prob = ProbMap(40, 40, 0.5f);
    // A single pixel well inside the raster.
    r.masks[0] = BinaryMask(40, 40);
    r.masks[0].set(20, 20, true);
    r.patches[0] = to_patch(r.masks[0]);
    const auto sol = solve_icm(r.problem, r.prob, r.patches);
    CHECK(sol.shifts[0] == ShiftVector{0, 0});
}

TEST_CASE("a rigidly shifted scene is recovered") {
    FootprintSet truth;
    FootprintId id = 1;
    for (int i = 0; i < 6; ++i) {
        const double x = 20 + 14 * i, y = 30 + 5 * (i % 2);
        truth.insert({id++, make_rectangle(x, y, x + 8, y + 7), Provenance::original});
    }
    const BinaryMask truth_mask = rasterize(truth.polygons(), 160, 100);
    ProbMap prob(160, 100);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 160; ++x) {
            prob.set(x, y, truth_mask.at(x, y) ? 0.9f : 0.05f);
        }
    }
    FootprintSet shifted;
    for (const auto& [fid, f] : truth) {
        shifted.insert({fid, f.polygon.translated({-6, 4}), Provenance::original});
    }
    AlignmentParams params;
    params.radius = 10;
    const auto result = align_footprints(shifted, prob, params);
    REQUIRE(result.solution.shifts.size() == 1);
    CHECK(result.solution.shifts[0] == ShiftVector{6, -4});
    for (const auto& [fid, f] : result.aligned) {
        CHECK(f.polygon == truth.get(fid).polygon);
        CHECK(f.provenance == Provenance::aligned);
    }
    const auto j = solution_to_json(result.problem.groups, result.solution);
    CHECK(j.at("groups").at(0).at("shift") == nlohmann::json::array({6, -4}));
}

TEST_CASE("problem construction validates its invariants") {
    std::vector<FootprintGroup> g{{{1}, {0, 0}}, {{2}, {5, 5}}};
    const auto cand = candidate_grid(1);
    CHECK_NOTHROW(make_problem(g, {{1}, {0}}, cand, 2.0, 1e-6));
    CHECK_THROWS_AS(make_problem(g, {{1}, {}}, cand, 2.0, 1e-6), ContractError);      // asymmetric
    CHECK_THROWS_AS(make_problem(g, {{0}, {}}, cand, 2.0, 1e-6), ContractError);      // self loop
    CHECK_THROWS_AS(make_problem(g, {{1}, {0}}, {{1, 1}}, 2.0, 1e-6), ContractError); // no (0,0)
    CHECK_THROWS_AS(make_problem(g, {{1}, {0}}, cand, -1.0, 1e-6), ContractError);
    CHECK_THROWS_AS(make_problem(g, {{1}, {0}}, cand, 2.0, 0.0), ContractError);
    const auto p = make_problem(g, {{1}, {0}}, cand, 2.0, 1e-6);
    CHECK(p.z_norm == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(p.window_radius == 1);
}

TEST_CASE("nearest neighbours are symmetric and exclude self") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> pos(0, 1000);
    std::vector<FootprintGroup> g;
    for (int i = 0; i < 30; ++i) {
        g.push_back({{static_cast<FootprintId>(i + 1)}, {pos(rng), pos(rng)}});
    }
    const auto nb = nearest_neighbors(g, 4);
    for (std::size_t i = 0; i < nb.size(); ++i) {
        CHECK(nb[i].size() >= 4);
        for (std::size_t j : nb[i]) {
            CHECK(j != i);
            CHECK(std::find(nb[j].begin(), nb[j].end(), i) != nb[j].end());
        }
    }
}
