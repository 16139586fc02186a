#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "maploop/annotations.hpp"
#include "maploop/raster.hpp"

namespace maploop {

struct AlignmentParams {
    int radius = 30;          // candidate grid half-width R
    double beta = 2.0;        // pairwise weight
    double epsilon = 1e-6;    // floor inside the log
    int neighbors = 4;        // nearest groups per group, before symmetrizing
    int max_iters = 50;
    double group_distance = kDefaultGroupDistance;
};

/// Grouped footprints, their neighbourhood graph and the candidate shifts.
/// Built with make_problem(), which enforces the invariants.
struct AlignmentProblem {
    std::vector<FootprintGroup> groups;
    std::vector<std::vector<std::size_t>> neighbors;  // symmetric, no self loops
    std::vector<ShiftVector> candidates;              // contains (0,0)
    double beta = 2.0;
    double z_norm = 0.0;     // max pairwise distance within candidates
    double epsilon = 1e-6;
    int window_radius = 0;   // max |dx|,|dy| over candidates
};

struct AlignmentSolution {
    std::vector<ShiftVector> shifts;  // one per group
    double energy = 0.0;
    int iterations = 0;
    std::vector<double> sweep_energies;   // total energy after each sweep
    std::vector<double> update_energies;  // total energy after each group update
};

/// All integer shifts with |dx|,|dy| <= radius, in tie-break order: nearest
/// to (0,0) first, then lexicographic (dx, dy).
std::vector<ShiftVector> candidate_grid(int radius);

/// Tie-break ordering used by the solver.
bool tie_break_less(ShiftVector a, ShiftVector b);

double max_pairwise_distance(std::span<const ShiftVector> candidates);

/// k nearest groups by centroid distance (ties by index), symmetrized.
std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const FootprintGroup> groups, int k);

/// Validates: neighbors symmetric and in range, candidates non-empty and
/// containing (0,0), beta >= 0, 0 < epsilon < 1. Derives z_norm and
/// window_radius. Throws ContractError.
AlignmentProblem make_problem(std::vector<FootprintGroup> groups, std::vector<std::vector<std::size_t>> neighbors,
                              std::vector<ShiftVector> candidates, double beta, double epsilon);

AlignmentProblem make_problem(std::vector<FootprintGroup> groups, const AlignmentParams& params);

/// Rasterized members of each group, clipped to the raster.
std::vector<MaskPatch> group_masks(const FootprintSet& set, std::span<const FootprintGroup> groups, int width,
                                   int height);

/// Evaluation window: mask bounding box dilated by radius, clipped to the raster.
PixelRect unary_window(const MaskPatch& group_mask, int radius, int width, int height);

/// -log(max(C, epsilon)) where C is the normalized dot product of the shifted
/// mask and the probability map over the unary window.
double unary_cost(const MaskPatch& group_mask, ShiftVector d, const ProbMap& prob, double epsilon, int radius);
/// Full-frame mask overload. Throws ContractError on a dimension mismatch.
double unary_cost(const BinaryMask& group_mask, ShiftVector d, const ProbMap& prob, double epsilon, int radius);

/// ||d_i - d_j|| / z_norm.
double pairwise_cost(ShiftVector d_i, ShiftVector d_j, double z_norm);

/// Sum of unary costs plus beta times the pairwise costs over ordered
/// neighbour pairs. Throws ContractError when a shift is not a candidate.
double total_energy(const AlignmentProblem& problem, std::span<const ShiftVector> shifts, const ProbMap& prob,
                    std::span<const MaskPatch> masks);

/// Unary cost of every candidate for one group via row prefix sums.
std::vector<double> unary_table(const AlignmentProblem& problem, const MaskPatch& group_mask, const ProbMap& prob);

/// Iterated conditional modes from the all-zero labelling, sweeping groups in
/// ascending order until a sweep changes nothing or max_iters sweeps ran.
AlignmentSolution solve_icm(const AlignmentProblem& problem, const ProbMap& prob, std::span<const MaskPatch> masks,
                            int max_iters = 50);

/// Translates every member by its group's shift; members become `aligned`.
FootprintSet apply_alignment(const FootprintSet& set, std::span<const FootprintGroup> groups,
                             const AlignmentSolution& solution);

struct AlignmentResult {
    FootprintSet aligned;
    AlignmentProblem problem;
    AlignmentSolution solution;
};

/// Grouping through applying the solved shifts, in one call.
AlignmentResult align_footprints(const FootprintSet& set, const ProbMap& prob, const AlignmentParams& params);

nlohmann::json solution_to_json(std::span<const FootprintGroup> groups, const AlignmentSolution& solution);

} // namespace maploop
