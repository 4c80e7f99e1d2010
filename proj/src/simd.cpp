#include "unicon/simd.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

#include "unicon/errors.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define UNICON_X86 1
#include <immintrin.h>
#else
#define UNICON_X86 0
#endif

namespace unicon::simd {

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void combine_scalar(double alpha, const double* x, double beta,
                    const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double max_scalar(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

#if UNICON_X86

__attribute__((target("avx2,fma")))
double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    double acc = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

__attribute__((target("avx2,fma")))
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2")))
void scale_avx2(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

__attribute__((target("avx2,fma")))
void combine_avx2(double alpha, const double* x, double beta, const double* y,
                  double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        v = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), v);
        _mm256_storeu_pd(out + i, v);
    }
    for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

__attribute__((target("avx2")))
double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    }
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    lo = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) s += x[i];
    return s;
}

__attribute__((target("avx2")))
double max_avx2(const double* x, std::size_t n) {
    if (n < 4) return max_scalar(x, n);
    __m256d vm = _mm256_loadu_pd(x);
    std::size_t i = 4;
    for (; i + 4 <= n; i += 4) {
        vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    }
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    lo = _mm_max_pd(lo, hi);
    double m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

#endif  // UNICON_X86

}  // namespace detail

namespace {

struct Kernels {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*combine)(double, const double*, double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*max)(const double*, std::size_t);
};

constexpr Kernels kScalar = {
    Isa::scalar,          detail::dot_scalar, detail::axpy_scalar,
    detail::scale_scalar, detail::combine_scalar, detail::sum_scalar,
    detail::max_scalar,
};

#if UNICON_X86
constexpr Kernels kAvx2 = {
    Isa::avx2,          detail::dot_avx2, detail::axpy_avx2,
    detail::scale_avx2, detail::combine_avx2, detail::sum_avx2,
    detail::max_avx2,
};
#endif

bool cpu_has_avx2() {
#if UNICON_X86
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* table_for(Isa isa) {
#if UNICON_X86
    if (isa == Isa::avx2) return &kAvx2;
#endif
    (void)isa;
    return &kScalar;
}

const Kernels* pick_initial() {
    if (const char* env = std::getenv("UNICON_SIMD")) {
        std::string want(env);
        if (want == "scalar") return &kScalar;
        if (want == "avx2") {
            if (!cpu_has_avx2())
                throw config_error("UNICON_SIMD=avx2 but CPU lacks avx2/fma");
            return table_for(Isa::avx2);
        }
        if (!want.empty() && want != "auto")
            throw config_error("unknown UNICON_SIMD value: " + want);
    }
    return cpu_has_avx2() ? table_for(Isa::avx2) : &kScalar;
}

const Kernels*& current() {
    static const Kernels* k = pick_initial();
    return k;
}

}  // namespace

Isa active() { return current()->isa; }

const char* active_name() {
    return active() == Isa::avx2 ? "avx2" : "scalar";
}

void force(Isa isa) {
    if (isa == Isa::avx2 && !cpu_has_avx2())
        throw config_error("cannot force avx2: CPU lacks avx2/fma");
    current() = table_for(isa);
}

double dot(const double* a, const double* b, std::size_t n) {
    return current()->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    current()->axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) {
    current()->scale(alpha, x, n);
}

void combine(double alpha, const double* x, double beta, const double* y,
             double* out, std::size_t n) {
    current()->combine(alpha, x, beta, y, out, n);
}

double sum(const double* x, std::size_t n) { return current()->sum(x, n); }

double max(const double* x, std::size_t n) {
    if (n == 0) throw domain_error("max over empty range");
    return current()->max(x, n);
}

}  // namespace unicon::simd
