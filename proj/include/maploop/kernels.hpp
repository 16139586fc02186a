#pragma once

// Data-parallel inner loops over raster buffers. Every kernel has a scalar
// reference; an AVX2 variant is selected at startup when the CPU supports
// it. The two paths agree to floating-point reassociation error (sums are
// accumulated in double).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace maploop::kernels {

struct KernelTable {
    std::string_view name;
    // sum_i mask[i] * prob[i]
    double (*dot_mask_prob)(const std::uint8_t* mask, const float* prob, std::size_t n);
    // sum_i |mask[i] - prob[i]|
    double (*sad_mask_prob)(const std::uint8_t* mask, const float* prob, std::size_t n);
    // number of non-zero bytes
    std::size_t (*count_nonzero)(const std::uint8_t* mask, std::size_t n);
    // counts[mask[i] * bins + bin(prob[i])] += 1, bin(v) = min(floor(v*bins), bins-1)
    void (*joint_histogram)(const std::uint8_t* mask, const float* prob, std::size_t n, int bins,
                            std::uint64_t* counts);
    // out[i] = prob[i] > threshold
    void (*threshold)(const float* prob, std::size_t n, float threshold, std::uint8_t* out);
    // values[i] = clamp(values[i] + offsets[i], 0, 1)
    void (*add_clamp)(float* values, const float* offsets, std::size_t n);
};

const KernelTable& scalar_table();
/// Null when the build or CPU lacks AVX2.
const KernelTable* avx2_table();

/// The table used by the library. Chosen once: AVX2 when available, unless
/// the environment variable MAPLOOP_SIMD=scalar forces the reference path.
const KernelTable& active();

/// Overrides the active table (tests use this to run both paths).
void set_active(const KernelTable& table);

inline double dot_mask_prob(std::span<const std::uint8_t> mask, std::span<const float> prob) {
    return active().dot_mask_prob(mask.data(), prob.data(), mask.size());
}
inline double sad_mask_prob(std::span<const std::uint8_t> mask, std::span<const float> prob) {
    return active().sad_mask_prob(mask.data(), prob.data(), mask.size());
}
inline std::size_t count_nonzero(std::span<const std::uint8_t> mask) {
    return active().count_nonzero(mask.data(), mask.size());
}

} // namespace maploop::kernels
