#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "km/kernels.hpp"

namespace km {

/// One-particle phase-space field f(x, v, t) on a cell-centered grid over
/// [x_min, x_max] x [-v0, v0]. Values are expected particles per unit
/// phase-space area.
struct FreeField {
    double x_min = -1.0;
    double x_max = 1.0;
    double v0 = 1.0;
    std::size_t nx = 0;
    std::size_t nv = 0;
    std::vector<double> values;  // values[iv * nx + ix]
    double t = 0.0;

    double dx() const { return (x_max - x_min) / double(nx); }
    double dv() const { return 2.0 * v0 / double(nv); }
    double x_center(std::size_t ix) const {
        return x_min + (double(ix) + 0.5) * dx();
    }
    double v_center(std::size_t iv) const {
        return -v0 + (double(iv) + 0.5) * dv();
    }
    double& at(std::size_t ix, std::size_t iv) { return values[iv * nx + ix]; }
    double at(std::size_t ix, std::size_t iv) const {
        return values[iv * nx + ix];
    }
    double mass() const;

    void fill(const std::function<double(double, double)>& f);
};

FreeField make_free_field(double x_min, double x_max, std::size_t nx,
                          double v0, std::size_t nv);

/// Bilinear sample of the field at (x, v); coordinates are clamped to the
/// cell-center hull.
double sample_field(const FreeField& f, double x, double v);

/// Closed-form value of the transport solution with no arrivals and a
/// time-independent death rate: the initial value carried along the
/// characteristic, damped by the integrated death rate along it. Throws
/// DomainError when the characteristic leaves the domain within [0, t].
double characteristics_value(const FreeField& f0,
                             const std::function<double(double, double)>& mu,
                             double x, double v, double t, double tol = 1e-10);

enum class FieldBoundary { Outflow, Periodic };

struct FreeEvolveOptions {
    FieldBoundary boundary = FieldBoundary::Outflow;
    ExecMode exec = ExecMode::Auto;
    double cfl_safety = 0.9;
};

/// First-order upwind / explicit-source integration of
///   df/dt + v df/dx = -mu(x,v,t) f + lambda(x,v,t)
/// from f.t to f.t + t_span in steps of dt (the last step is shortened).
/// Throws CflError when v0 * dt exceeds the safety fraction of dx, and
/// DomainError when the outflow-boundary pollution would cover the whole
/// domain within t_span.
void evolve_free(FreeField& f,
                 const std::function<double(double, double, double)>& lambda,
                 const std::function<double(double, double, double)>& mu,
                 double t_span, double dt, FreeEvolveOptions opt = {});

/// True when cell ix is beyond the reach of boundary effects after the
/// given elapsed time (signals travel at most v0 * elapsed from either end).
bool in_unpolluted_interior(const FreeField& f, std::size_t ix,
                            double elapsed);

} // namespace km
