#pragma once

#include <cstddef>

namespace km {

/// Execution mode for the cell-update kernels. Serial and Parallel produce
/// bitwise-identical results (each output cell depends only on input cells),
/// so Auto may pick either based on problem size without breaking the
/// determinism contract.
enum class ExecMode { Auto, Serial, Parallel };

namespace kernels {

/// Minimum cell count for Auto to go parallel.
inline constexpr std::size_t kParallelThreshold = 4096;

bool resolve_parallel(ExecMode mode, std::size_t n);

// One forward-Euler upwind update for transport toward the r = 0 face:
//   out[i] = rho[i] - courant * (rho[i+1] - rho[i])
//            + dt * (lambda[i] - mu[i] * rho[i] + src[i])
// courant = c * dt / dr with advection velocity c <= 0; the cell beyond the
// far edge is an implicit zero ghost (no inflow from large r). lambda, mu
// and src may be null (treated as zero).
void advect_toward_origin_serial(const double* rho, std::size_t n,
                                 double courant, double dt,
                                 const double* lambda, const double* mu,
                                 const double* src, double* out);
void advect_toward_origin_parallel(const double* rho, std::size_t n,
                                   double courant, double dt,
                                   const double* lambda, const double* mu,
                                   const double* src, double* out);
void advect_toward_origin(const double* rho, std::size_t n, double courant,
                          double dt, const double* lambda, const double* mu,
                          const double* src, double* out, ExecMode mode);

// Signed-velocity upwind update for one spatial row of the free field:
//   out[i] = f[i] - courant_pos * (f[i] - f[i-1])
//            - courant_neg * (f[i+1] - f[i]) + dt * (lambda[i] - mu[i]*f[i])
// with courant = v * dt / dx split into its positive/negative part. With
// periodic = false the ghost cells are zero (outflow/zero-inflow domain).
void upwind_row_serial(const double* f, std::size_t n, double courant,
                       double dt, const double* lambda, const double* mu,
                       double* out, bool periodic);
void upwind_row_parallel(const double* f, std::size_t n, double courant,
                         double dt, const double* lambda, const double* mu,
                         double* out, bool periodic);
void upwind_row(const double* f, std::size_t n, double courant, double dt,
                const double* lambda, const double* mu, double* out,
                bool periodic, ExecMode mode);

} // namespace kernels
} // namespace km
