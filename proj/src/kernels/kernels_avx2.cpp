// AVX2 kernel variants. This translation unit is compiled with -mavx2 and is
// only reached through the dispatch table after a runtime CPU check.
//
// gemm_nn / gemm_tn vectorize across output columns, so every c[i][j] sees
// the same mul/add sequence as the scalar reference and the results are
// bit-identical. gemm_nt and the reductions split the accumulation across
// four lanes and differ from the reference by normal rounding.

#include "nmrl/kernels.hpp"

#if defined(__x86_64__)

#include <cstring>
#include <immintrin.h>

namespace nmrl::kern {
namespace {

void v_gemm_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const __m256d va = _mm256_set1_pd(aip);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                __m256d vb = _mm256_loadu_pd(brow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void v_gemm_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t k4 = k & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d vacc = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p < k4; p += 4) {
                __m256d va = _mm256_loadu_pd(arow + p);
                __m256d vb = _mm256_loadu_pd(brow + p);
                vacc = _mm256_add_pd(vacc, _mm256_mul_pd(va, vb));
            }
            __m128d lo = _mm256_castpd256_pd128(vacc);
            __m128d hi = _mm256_extractf128_pd(vacc, 1);
            __m128d s2 = _mm_add_pd(lo, hi);
            __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
            double acc = _mm_cvtsd_f64(s1);
            for (; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] = acc;
        }
    }
}

void v_gemm_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double api = a[p * m + i];
            const __m256d va = _mm256_set1_pd(api);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                __m256d vb = _mm256_loadu_pd(brow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void v_ew_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_ew_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_ew_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_scale(const double* x, double alpha, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void v_relu(const double* x, double* out, std::size_t n) {
    const __m256d vz = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(vz, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_mask(const double* x, double* out, std::size_t n) {
    const __m256d vz = _mm256_setzero_pd();
    const __m256d v1 = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gt = _mm256_cmp_pd(_mm256_loadu_pd(x + i), vz, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(gt, v1));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? 1.0 : 0.0;
}

void v_clip(const double* x, double lo, double hi, double* out, std::size_t n) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        v = _mm256_min_pd(vhi, _mm256_max_pd(vlo, v));
        _mm256_storeu_pd(out + i, v);
    }
    for (; i < n; ++i) {
        double v = x[i];
        if (v < lo) v = lo;
        if (v > hi) v = hi;
        out[i] = v;
    }
}

void v_clip_mask(const double* x, double lo, double hi, double* out, std::size_t n) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    const __m256d v1 = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d in = _mm256_and_pd(_mm256_cmp_pd(v, vlo, _CMP_GT_OQ),
                                   _mm256_cmp_pd(v, vhi, _CMP_LT_OQ));
        _mm256_storeu_pd(out + i, _mm256_and_pd(in, v1));
    }
    for (; i < n; ++i) out[i] = (x[i] > lo && x[i] < hi) ? 1.0 : 0.0;
}

double v_reduce_sum(const double* x, std::size_t n) {
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(vacc);
    __m128d hi = _mm256_extractf128_pd(vacc, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
    double acc = _mm_cvtsd_f64(s1);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vacc = _mm256_add_pd(vacc, _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                                 _mm256_loadu_pd(y + i)));
    __m128d lo = _mm256_castpd256_pd128(vacc);
    __m128d hi = _mm256_extractf128_pd(vacc, 1);
    __m128d s2 = _mm_add_pd(lo, hi);
    __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
    double acc = _mm_cvtsd_f64(s1);
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable t = {
        "avx2",
        v_gemm_nn, v_gemm_nt, v_gemm_tn,
        v_ew_add,  v_ew_sub,  v_ew_mul,
        v_axpy,    v_scale,
        v_relu,    v_relu_mask,
        v_clip,    v_clip_mask,
        v_reduce_sum, v_dot,
    };
    return t;
}

} // namespace nmrl::kern

#endif // __x86_64__
