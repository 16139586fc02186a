#include <algorithm>
#include <cmath>

#include "maploop/kernels.hpp"

namespace maploop::kernels {
namespace {

double dot_scalar(const std::uint8_t* mask, const float* prob, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += static_cast<double>(mask[i]) * static_cast<double>(prob[i]);
    }
    return sum;
}

double sad_scalar(const std::uint8_t* mask, const float* prob, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += std::abs(static_cast<double>(mask[i]) - static_cast<double>(prob[i]));
    }
    return sum;
}

std::size_t count_scalar(const std::uint8_t* mask, std::size_t n) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        count += mask[i] != 0;
    }
    return count;
}

void histogram_scalar(const std::uint8_t* mask, const float* prob, std::size_t n, int bins,
                      std::uint64_t* counts) {
    const float scale = static_cast<float>(bins);
    for (std::size_t i = 0; i < n; ++i) {
        int bin = static_cast<int>(prob[i] * scale);
        bin = std::clamp(bin, 0, bins - 1);
        ++counts[(mask[i] != 0 ? bins : 0) + bin];
    }
}

void threshold_scalar(const float* prob, std::size_t n, float threshold, std::uint8_t* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = prob[i] > threshold ? 1 : 0;
    }
}

void add_clamp_scalar(float* values, const float* offsets, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = std::clamp(values[i] + offsets[i], 0.0f, 1.0f);
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar",         dot_scalar,       sad_scalar, count_scalar,
                                   histogram_scalar, threshold_scalar, add_clamp_scalar};
    return table;
}

} // namespace maploop::kernels
