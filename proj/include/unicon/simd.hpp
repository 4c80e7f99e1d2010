#pragma once

#include <cstddef>

// Vector kernels for the inner loops: dot products, scaled accumulation and
// reductions over contiguous double arrays.  Every kernel has a scalar
// reference implementation and, where the ISA is available, a SIMD variant.
// The active variant is chosen once per process at first use: explicit
// force(), else the UNICON_SIMD environment variable (scalar|avx2|auto),
// else CPU detection.  All variants compute the same mathematical expression;
// results may differ by rounding only.

namespace unicon::simd {

enum class Isa { scalar, avx2 };

// Selected instruction set for this process.
Isa active();
const char* active_name();

// Test hook: pin the implementation.  Throws config_error if the requested
// ISA is not usable on this CPU.
void force(Isa isa);

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += alpha*x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x[i] *= alpha
void scale(double alpha, double* x, std::size_t n);

// out[i] = alpha*x[i] + beta*y[i]
void combine(double alpha, const double* x, double beta, const double* y,
             double* out, std::size_t n);

// sum_i x[i]
double sum(const double* x, std::size_t n);

// max_i x[i]; n must be > 0
double max(const double* x, std::size_t n);

namespace detail {
// Reference implementations, exposed for equivalence tests.
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void scale_scalar(double alpha, double* x, std::size_t n);
void combine_scalar(double alpha, const double* x, double beta,
                    const double* y, double* out, std::size_t n);
double sum_scalar(const double* x, std::size_t n);
double max_scalar(const double* x, std::size_t n);
}  // namespace detail

}  // namespace unicon::simd
