#include "km/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace km {
namespace kernels {

bool resolve_parallel(ExecMode mode, std::size_t n) {
#ifdef _OPENMP
    switch (mode) {
        case ExecMode::Serial: return false;
        case ExecMode::Parallel: return true;
        case ExecMode::Auto: return n >= kParallelThreshold;
    }
    return false;
#else
    (void)mode;
    (void)n;
    return false;
#endif
}

namespace {

// The per-cell expressions are shared by the serial and parallel loops so
// the two variants stay bitwise identical.

inline double origin_cell(const double* rho, std::size_t n, std::size_t i,
                          double courant, double dt, const double* lambda,
                          const double* mu, const double* src) {
    const double here = rho[i];
    const double right = (i + 1 < n) ? rho[i + 1] : 0.0;
    double v = here - courant * (right - here);
    double source = 0.0;
    if (lambda) source += lambda[i];
    if (mu) source -= mu[i] * here;
    if (src) source += src[i];
    return v + dt * source;
}

inline double row_cell(const double* f, std::size_t n, std::size_t i,
                       double cpos, double cneg, double dt,
                       const double* lambda, const double* mu, bool periodic) {
    const double here = f[i];
    const double left = (i > 0) ? f[i - 1] : (periodic ? f[n - 1] : 0.0);
    const double right = (i + 1 < n) ? f[i + 1] : (periodic ? f[0] : 0.0);
    double v = here - cpos * (here - left) - cneg * (right - here);
    double source = 0.0;
    if (lambda) source += lambda[i];
    if (mu) source -= mu[i] * here;
    return v + dt * source;
}

} // namespace

void advect_toward_origin_serial(const double* rho, std::size_t n,
                                 double courant, double dt,
                                 const double* lambda, const double* mu,
                                 const double* src, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = origin_cell(rho, n, i, courant, dt, lambda, mu, src);
    }
}

void advect_toward_origin_parallel(const double* rho, std::size_t n,
                                   double courant, double dt,
                                   const double* lambda, const double* mu,
                                   const double* src, double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        out[i] = origin_cell(rho, n, i, courant, dt, lambda, mu, src);
    }
#else
    advect_toward_origin_serial(rho, n, courant, dt, lambda, mu, src, out);
#endif
}

void advect_toward_origin(const double* rho, std::size_t n, double courant,
                          double dt, const double* lambda, const double* mu,
                          const double* src, double* out, ExecMode mode) {
    if (resolve_parallel(mode, n)) {
        advect_toward_origin_parallel(rho, n, courant, dt, lambda, mu, src,
                                      out);
    } else {
        advect_toward_origin_serial(rho, n, courant, dt, lambda, mu, src, out);
    }
}

void upwind_row_serial(const double* f, std::size_t n, double courant,
                       double dt, const double* lambda, const double* mu,
                       double* out, bool periodic) {
    const double cpos = courant > 0.0 ? courant : 0.0;
    const double cneg = courant < 0.0 ? courant : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = row_cell(f, n, i, cpos, cneg, dt, lambda, mu, periodic);
    }
}

void upwind_row_parallel(const double* f, std::size_t n, double courant,
                         double dt, const double* lambda, const double* mu,
                         double* out, bool periodic) {
#ifdef _OPENMP
    const double cpos = courant > 0.0 ? courant : 0.0;
    const double cneg = courant < 0.0 ? courant : 0.0;
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        out[i] = row_cell(f, n, i, cpos, cneg, dt, lambda, mu, periodic);
    }
#else
    upwind_row_serial(f, n, courant, dt, lambda, mu, out, periodic);
#endif
}

void upwind_row(const double* f, std::size_t n, double courant, double dt,
                const double* lambda, const double* mu, double* out,
                bool periodic, ExecMode mode) {
    if (resolve_parallel(mode, n)) {
        upwind_row_parallel(f, n, courant, dt, lambda, mu, out, periodic);
    } else {
        upwind_row_serial(f, n, courant, dt, lambda, mu, out, periodic);
    }
}

} // namespace kernels
} // namespace km
