#include <atomic>
#include <cstdlib>
#include <string_view>

#include "maploop/kernels.hpp"

namespace maploop::kernels {

#if defined(MAPLOOP_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

const KernelTable* avx2_table() {
#if defined(MAPLOOP_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernels() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* select_default() {
    const char* forced = std::getenv("MAPLOOP_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") {
        return &scalar_table();
    }
    if (const KernelTable* t = avx2_table()) {
        return t;
    }
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> table{select_default()};
    return table;
}

} // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_release); }

} // namespace maploop::kernels
