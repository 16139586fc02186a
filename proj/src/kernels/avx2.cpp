// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "maploop/kernels.hpp"

namespace maploop::kernels {
namespace {

// Eight mask bytes widened to floats (0.0f / 1.0f for {0,1} input).
inline __m256 load_mask8(const std::uint8_t* mask) {
    const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask));
    return _mm256_cvtepi32_ps(_mm256_cvtepu8_epi32(bytes));
}

// Adds eight floats into two double accumulators.
inline void accumulate(__m256 v, __m256d& lo, __m256d& hi) {
    lo = _mm256_add_pd(lo, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    hi = _mm256_add_pd(hi, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
}

inline double horizontal_sum(__m256d lo, __m256d hi) {
    const __m256d s = _mm256_add_pd(lo, hi);
    const __m128d pair = _mm_add_pd(_mm256_castpd256_pd128(s), _mm256_extractf128_pd(s, 1));
    return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double dot_avx2(const std::uint8_t* mask, const float* prob, std::size_t n) {
    __m256d lo = _mm256_setzero_pd();
    __m256d hi = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // mask * prob is exact in float for mask in {0,1}
        accumulate(_mm256_mul_ps(load_mask8(mask + i), _mm256_loadu_ps(prob + i)), lo, hi);
    }
    double sum = horizontal_sum(lo, hi);
    for (; i < n; ++i) {
        sum += static_cast<double>(mask[i]) * static_cast<double>(prob[i]);
    }
    return sum;
}

double sad_avx2(const std::uint8_t* mask, const float* prob, std::size_t n) {
    // Subtract in double: 1 - p is not exact in float for small p.
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d lo = _mm256_setzero_pd();
    __m256d hi = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 m = load_mask8(mask + i);
        const __m256 p = _mm256_loadu_ps(prob + i);
        const __m256d diff_lo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(m)),
                                              _mm256_cvtps_pd(_mm256_castps256_ps128(p)));
        const __m256d diff_hi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(m, 1)),
                                              _mm256_cvtps_pd(_mm256_extractf128_ps(p, 1)));
        lo = _mm256_add_pd(lo, _mm256_andnot_pd(sign, diff_lo));
        hi = _mm256_add_pd(hi, _mm256_andnot_pd(sign, diff_hi));
    }
    double sum = horizontal_sum(lo, hi);
    for (; i < n; ++i) {
        sum += std::abs(static_cast<double>(mask[i]) - static_cast<double>(prob[i]));
    }
    return sum;
}

std::size_t count_avx2(const std::uint8_t* mask, std::size_t n) {
    const __m256i zero = _mm256_setzero_si256();
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(mask + i));
        const unsigned zeros = static_cast<unsigned>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, zero)));
        count += 32 - static_cast<std::size_t>(__builtin_popcount(zeros));
    }
    for (; i < n; ++i) {
        count += mask[i] != 0;
    }
    return count;
}

void histogram_avx2(const std::uint8_t* mask, const float* prob, std::size_t n, int bins,
                    std::uint64_t* counts) {
    const __m256 scale = _mm256_set1_ps(static_cast<float>(bins));
    const __m256i max_bin = _mm256_set1_epi32(bins - 1);
    const __m256i zero = _mm256_setzero_si256();
    const __m256i row = _mm256_set1_epi32(bins);
    alignas(32) std::int32_t slots[8];
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // cvttps truncates toward zero, matching the scalar static_cast<int>.
        __m256i bin = _mm256_cvttps_epi32(_mm256_mul_ps(_mm256_loadu_ps(prob + i), scale));
        bin = _mm256_min_epi32(_mm256_max_epi32(bin, zero), max_bin);
        const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
        const __m256i m = _mm256_cvtepu8_epi32(bytes);
        const __m256i on = _mm256_andnot_si256(_mm256_cmpeq_epi32(m, zero), row);
        _mm256_store_si256(reinterpret_cast<__m256i*>(slots), _mm256_add_epi32(bin, on));
        for (int k = 0; k < 8; ++k) {
            ++counts[slots[k]];
        }
    }
    for (; i < n; ++i) {
        int bin = std::clamp(static_cast<int>(prob[i] * static_cast<float>(bins)), 0, bins - 1);
        ++counts[(mask[i] != 0 ? bins : 0) + bin];
    }
}

void threshold_avx2(const float* prob, std::size_t n, float threshold, std::uint8_t* out) {
    const __m256 t = _mm256_set1_ps(threshold);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const int bits = _mm256_movemask_ps(_mm256_cmp_ps(_mm256_loadu_ps(prob + i), t, _CMP_GT_OQ));
        for (int k = 0; k < 8; ++k) {
            out[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
        }
    }
    for (; i < n; ++i) {
        out[i] = prob[i] > threshold ? 1 : 0;
    }
}

void add_clamp_avx2(float* values, const float* offsets, std::size_t n) {
    const __m256 lo = _mm256_setzero_ps();
    const __m256 hi = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_add_ps(_mm256_loadu_ps(values + i), _mm256_loadu_ps(offsets + i));
        v = _mm256_min_ps(_mm256_max_ps(v, lo), hi);
        _mm256_storeu_ps(values + i, v);
    }
    for (; i < n; ++i) {
        values[i] = std::clamp(values[i] + offsets[i], 0.0f, 1.0f);
    }
}

} // namespace

const KernelTable& avx2_kernels() {
    static const KernelTable table{"avx2",         dot_avx2,       sad_avx2, count_avx2,
                                   histogram_avx2, threshold_avx2, add_clamp_avx2};
    return table;
}

} // namespace maploop::kernels
