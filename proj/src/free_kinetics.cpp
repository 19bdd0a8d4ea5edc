#include "km/free_kinetics.hpp"

#include <algorithm>
#include <cmath>

#include "km/errors.hpp"
#include "km/quadrature.hpp"

namespace km {

double FreeField::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * dx() * dv();
}

void FreeField::fill(const std::function<double(double, double)>& f) {
    for (std::size_t iv = 0; iv < nv; ++iv) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            at(ix, iv) = f(x_center(ix), v_center(iv));
        }
    }
}

FreeField make_free_field(double x_min, double x_max, std::size_t nx,
                          double v0, std::size_t nv) {
    FreeField f;
    f.x_min = x_min;
    f.x_max = x_max;
    f.v0 = v0;
    f.nx = nx;
    f.nv = nv;
    f.values.assign(nx * nv, 0.0);
    return f;
}

double sample_field(const FreeField& f, double x, double v) {
    const double dx = f.dx();
    const double dv = f.dv();
    double gx = (x - f.x_min) / dx - 0.5;
    double gv = (v + f.v0) / dv - 0.5;
    gx = std::clamp(gx, 0.0, double(f.nx - 1));
    gv = std::clamp(gv, 0.0, double(f.nv - 1));
    const std::size_t ix = std::min(std::size_t(gx), f.nx - 2);
    const std::size_t iv = std::min(std::size_t(gv), f.nv - 2);
    const double tx = gx - double(ix);
    const double tv = gv - double(iv);
    const double f00 = f.at(ix, iv);
    const double f10 = f.at(ix + 1, iv);
    const double f01 = f.at(ix, iv + 1);
    const double f11 = f.at(ix + 1, iv + 1);
    return (1.0 - tx) * (1.0 - tv) * f00 + tx * (1.0 - tv) * f10 +
           (1.0 - tx) * tv * f01 + tx * tv * f11;
}

double characteristics_value(const FreeField& f0,
                             const std::function<double(double, double)>& mu,
                             double x, double v, double t, double tol) {
    const double x0 = x - v * t;
    if (x < f0.x_min || x > f0.x_max || x0 < f0.x_min || x0 > f0.x_max) {
        throw DomainError(
            "characteristics_value: characteristic leaves the domain");
    }
    const double base = sample_field(f0, x0, v);
    if (t == 0.0) return base;
    const double exponent =
        integrate([&](double s) { return mu(x - v * s, v); }, 0.0, t, tol);
    return base * std::exp(-exponent);
}

void evolve_free(FreeField& f,
                 const std::function<double(double, double, double)>& lambda,
                 const std::function<double(double, double, double)>& mu,
                 double t_span, double dt, FreeEvolveOptions opt) {
    if (t_span <= 0.0) return;
    const double dx = f.dx();
    if (f.v0 * dt > opt.cfl_safety * dx * (1.0 + 1e-12)) {
        throw CflError("evolve_free: v0 * dt exceeds the CFL limit");
    }
    if (opt.boundary == FieldBoundary::Outflow &&
        f.v0 * t_span >= 0.5 * (f.x_max - f.x_min)) {
        throw DomainError(
            "evolve_free: no unpolluted interior would remain over t_span");
    }
    const bool periodic = opt.boundary == FieldBoundary::Periodic;
    std::vector<double> lam_row(f.nx), mu_row(f.nx), out_row(f.nx);
    double remaining = t_span;
    while (remaining > 1e-15 * t_span) {
        const double step = std::min(dt, remaining);
        for (std::size_t iv = 0; iv < f.nv; ++iv) {
            const double v = f.v_center(iv);
            for (std::size_t ix = 0; ix < f.nx; ++ix) {
                const double x = f.x_center(ix);
                lam_row[ix] = lambda(x, v, f.t);
                mu_row[ix] = mu(x, v, f.t);
            }
            kernels::upwind_row(&f.values[iv * f.nx], f.nx, v * step / dx,
                                step, lam_row.data(), mu_row.data(),
                                out_row.data(), periodic, opt.exec);
            std::copy(out_row.begin(), out_row.end(), &f.values[iv * f.nx]);
        }
        f.t += step;
        remaining -= step;
    }
}

bool in_unpolluted_interior(const FreeField& f, std::size_t ix,
                            double elapsed) {
    const double reach = f.v0 * elapsed;
    const double x = f.x_center(ix);
    return x - f.x_min > reach && f.x_max - x > reach;
}

} // namespace km
