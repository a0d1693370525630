#pragma once

#include <cstddef>
#include <string>

namespace nmrl::kern {

// Dense double-precision kernels behind the tensor engine. Two variants are
// provided: a scalar reference and an AVX2 path, selected once at startup
// (override with NMRL_KERNELS=scalar|avx2). Element-wise kernels and the
// gemm_nn/gemm_tn forms are bit-identical across backends (the AVX2 code
// performs the same mul/add sequence per output element, and the build
// disables FP contraction); gemm_nt and the reductions use lane-parallel
// accumulators, so they agree with the reference only up to rounding.
//
// Matrices are row-major, no padding.
struct KernelTable {
    const char* name;

    // c[m x n] = a[m x k] * b[k x n]
    void (*gemm_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
    // c[m x n] = a[m x k] * b[n x k]^T
    void (*gemm_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
    // c[m x n] = a[k x m]^T * b[k x n]
    void (*gemm_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

    void (*ew_add)(const double* a, const double* b, double* out, std::size_t n);
    void (*ew_sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*ew_mul)(const double* a, const double* b, double* out, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = alpha * x
    void (*scale)(const double* x, double alpha, double* out, std::size_t n);
    void (*relu)(const double* x, double* out, std::size_t n);
    // 1 where x > 0, else 0 (0 at x == 0)
    void (*relu_mask)(const double* x, double* out, std::size_t n);
    void (*clip)(const double* x, double lo, double hi, double* out, std::size_t n);
    // 1 where lo < x < hi, else 0
    void (*clip_mask)(const double* x, double lo, double hi, double* out, std::size_t n);

    double (*reduce_sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();
#if defined(__x86_64__)
const KernelTable& avx2_table();
#endif

// Active table. Defaults to the best supported backend at first use.
const KernelTable& table();
Backend active_backend();
std::string backend_name();

// Returns false if the requested backend is unsupported on this host.
bool set_backend(Backend b);

bool avx2_supported();

// Transcendental maps are shared by all backends: plain libm loops, so the
// choice of SIMD backend never changes their results.
void map_tanh(const double* x, double* out, std::size_t n);
void map_exp(const double* x, double* out, std::size_t n);
void map_log(const double* x, double* out, std::size_t n);

} // namespace nmrl::kern
