// Backend selection. AVX2 is picked automatically when the CPU supports it;
// NMRL_KERNELS=scalar|avx2 forces a backend before first use.

#include "nmrl/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace nmrl::kern {
namespace {

Backend pick_initial() {
    if (const char* env = std::getenv("NMRL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::Avx2;
        // Unknown or unavailable request falls through to autodetect.
    }
    return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> b{pick_initial()};
    return b;
}

} // namespace

bool avx2_supported() {
#if defined(__x86_64__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_supported()) return false;
    current().store(b, std::memory_order_relaxed);
    return true;
}

const KernelTable& table() {
#if defined(__x86_64__)
    if (active_backend() == Backend::Avx2) return avx2_table();
#endif
    return scalar_table();
}

std::string backend_name() { return table().name; }

} // namespace nmrl::kern
