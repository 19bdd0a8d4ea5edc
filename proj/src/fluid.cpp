#include "km/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "km/errors.hpp"
#include "km/quadrature.hpp"

namespace km {

namespace {

double sum_serial(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double dot_serial(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> tabulate_cells(const CompactRateFunction& f, double dr,
                                   std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f((double(i) + 0.5) * dr);
    return out;
}

} // namespace

double FluidState::mass_plus() const { return dr * sum_serial(rho_plus); }
double FluidState::mass_minus() const { return dr * sum_serial(rho_minus); }

FluidState make_fluid_state(double dr, std::size_t cells) {
    FluidState s;
    s.dr = dr;
    s.rho_plus.assign(cells, 0.0);
    s.rho_minus.assign(cells, 0.0);
    return s;
}

void fill_density(std::vector<double>& rho, double dr,
                  const std::function<double(double)>& f) {
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = f((double(i) + 0.5) * dr);
    }
}

double recommended_r_max(const MarketParams& p, double t_end, double margin) {
    return p.support_radius() + (p.v_minus - p.v_plus) * t_end + margin;
}

BoundaryDensities boundary_densities(const FluidState& s,
                                     BoundaryExtraction extraction) {
    BoundaryDensities bd;
    if (s.cells() == 0) return bd;
    if (extraction == BoundaryExtraction::FirstCell || s.cells() < 2) {
        bd.gamma_plus = s.rho_plus[0];
        bd.gamma_minus = s.rho_minus[0];
    } else {
        // Linear extrapolation from the first two cell centers to r = 0;
        // clamped at zero so the flux balance never sees negative mass.
        bd.gamma_plus =
            std::max(0.0, 1.5 * s.rho_plus[0] - 0.5 * s.rho_plus[1]);
        bd.gamma_minus =
            std::max(0.0, 1.5 * s.rho_minus[0] - 0.5 * s.rho_minus[1]);
    }
    return bd;
}

BoundaryVelocity boundary_velocity(double rho_plus_0, double rho_minus_0,
                                   double v_plus, double v_minus, double eps) {
    BoundaryVelocity out;
    const double denom = rho_plus_0 + rho_minus_0;
    if (denom < eps) {
        out.beta = 0.5 * (v_plus + v_minus);
        out.degenerate = true;
        return out;
    }
    out.beta = (rho_plus_0 * v_plus + rho_minus_0 * v_minus) / denom;
    return out;
}

double boundary_velocity_general(const VelocityProfile& f_plus,
                                 const VelocityProfile& f_minus) {
    if (f_plus.is_zero() && f_minus.is_zero()) {
        throw NoMassAtBoundary(
            "boundary_velocity_general: both boundary profiles are zero");
    }
    const double v0 = std::max(f_plus.v0(), f_minus.v0());
    // Net boundary flux imbalance; nondecreasing in beta. The integrands are
    // piecewise quadratic, so knot-split Simpson evaluates them exactly.
    auto g = [&](double beta) {
        const double inflow_plus = integrate_with_knots(
            [&](double v) { return f_plus(v) * (beta - v); }, -v0, beta,
            f_plus.velocities(), 1e-13);
        const double inflow_minus = integrate_with_knots(
            [&](double v) { return f_minus(v) * (v - beta); }, beta, v0,
            f_minus.velocities(), 1e-13);
        return inflow_plus - inflow_minus;
    };
    double lo = -v0;
    double hi = v0;
    // g(-v0) <= 0 <= g(v0). Flat stretches of g are resolved toward the
    // smallest balancing velocity: any midpoint with g >= 0 moves hi down.
    for (int iter = 0; iter < 200 && (hi - lo) > 1e-14 * 2.0 * v0; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) >= 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

double MassBudget::closure_error() const {
    const double p =
        delta_plus - (arrivals_plus + recycled_plus - deaths_plus -
                      annihilated_plus);
    const double m =
        delta_minus - (arrivals_minus + recycled_minus - deaths_minus -
                       annihilated_minus);
    return std::abs(p) + std::abs(m);
}

double MassBudget::throughput() const {
    return annihilated_plus + annihilated_minus + deaths_plus + deaths_minus +
           arrivals_plus + arrivals_minus + recycled_plus + recycled_minus;
}

MassBudget& MassBudget::operator+=(const MassBudget& o) {
    annihilated_plus += o.annihilated_plus;
    annihilated_minus += o.annihilated_minus;
    deaths_plus += o.deaths_plus;
    deaths_minus += o.deaths_minus;
    arrivals_plus += o.arrivals_plus;
    arrivals_minus += o.arrivals_minus;
    recycled_plus += o.recycled_plus;
    recycled_minus += o.recycled_minus;
    delta_plus += o.delta_plus;
    delta_minus += o.delta_minus;
    return *this;
}

FluidSolver::FluidSolver(MarketParams params, double dr, std::size_t cells,
                         FluidOptions opt)
    : params_(std::move(params)), opt_(opt), dr_(dr), n_(cells) {
    lambda_plus_ = tabulate_cells(params_.lambda_plus, dr_, n_);
    lambda_minus_ = tabulate_cells(params_.lambda_minus, dr_, n_);
    mu_plus_ = tabulate_cells(params_.mu_plus, dr_, n_);
    mu_minus_ = tabulate_cells(params_.mu_minus, dr_, n_);
    for (double m : mu_plus_) max_mu_ = std::max(max_mu_, m);
    for (double m : mu_minus_) max_mu_ = std::max(max_mu_, m);
    if (params_.p_minus_plus) {
        kernel_mp_ = tabulate_cells(*params_.p_minus_plus, dr_, n_);
    }
    if (params_.p_plus_minus) {
        kernel_pm_ = tabulate_cells(*params_.p_plus_minus, dr_, n_);
    }
    has_kernels_ = !kernel_mp_.empty() || !kernel_pm_.empty();
}

double FluidSolver::max_stable_dt() const {
    const double speed = params_.v_minus - params_.v_plus;
    double dt = opt_.cfl_safety * dr_ / speed;
    if (max_mu_ > 0.0) {
        dt = std::min(dt, 0.9 / max_mu_);
        dt = std::min(dt, 0.999 / (speed / dr_ + max_mu_));
    }
    return dt;
}

double FluidSolver::annihilation_flux(const FluidState& s) const {
    const BoundaryDensities bd = boundary_densities(s, opt_.extraction);
    const BoundaryVelocity bv =
        boundary_velocity(bd.gamma_plus, bd.gamma_minus, params_.v_plus,
                          params_.v_minus, opt_.degenerate_eps);
    return (params_.v_minus - bv.beta) * bd.gamma_minus;
}

StepInfo FluidSolver::step(FluidState& s, double dt) const {
    const BoundaryDensities bd = boundary_densities(s, opt_.extraction);
    const BoundaryVelocity bv =
        boundary_velocity(bd.gamma_plus, bd.gamma_minus, params_.v_plus,
                          params_.v_minus, opt_.degenerate_eps);
    const double nu = (params_.v_minus - bv.beta) * bd.gamma_minus;
    std::vector<double> src_plus;
    std::vector<double> src_minus;
    if (!kernel_mp_.empty()) {
        src_plus.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) src_plus[i] = nu * kernel_mp_[i];
    }
    if (!kernel_pm_.empty()) {
        src_minus.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) src_minus[i] = nu * kernel_pm_[i];
    }
    return step_with_sources(s, dt, src_plus, src_minus, bv.beta,
                             bv.degenerate, nu, -1);
}

StepInfo FluidSolver::step_with_sources(FluidState& s, double dt,
                                        const std::vector<double>& src_plus,
                                        const std::vector<double>& src_minus,
                                        double beta, bool degenerate,
                                        double nu, int market_tag) const {
    const std::string tag =
        market_tag >= 0 ? " (market " + std::to_string(market_tag) + ")" : "";
    const double c_plus = params_.v_plus - beta;       // <= 0
    const double c_minus = -(params_.v_minus - beta);  // <= 0
    const double speed = std::max(-c_plus, -c_minus);
    if (speed * dt > opt_.cfl_safety * dr_ * (1.0 + 1e-12)) {
        throw CflError("fluid step: advection CFL violated" + tag);
    }
    if (dt * max_mu_ > 0.9 * (1.0 + 1e-12)) {
        throw CflError("fluid step: dt * max(mu) exceeds 0.9" + tag);
    }
    // Stronger combined bound; with it the update is a nonnegative
    // combination of nonnegative inputs.
    if (speed * dt / dr_ + dt * max_mu_ > 1.0) {
        throw CflError("fluid step: combined advection/death limit" + tag);
    }

    StepInfo info;
    info.beta = beta;
    info.nu = nu;
    info.degenerate = degenerate;

    const double mass_plus_before = dr_ * sum_serial(s.rho_plus);
    const double mass_minus_before = dr_ * sum_serial(s.rho_minus);

    MassBudget& bud = info.budget;
    bud.annihilated_plus = -c_plus * dt * (n_ > 0 ? s.rho_plus[0] : 0.0);
    bud.annihilated_minus = -c_minus * dt * (n_ > 0 ? s.rho_minus[0] : 0.0);
    bud.deaths_plus = dt * dr_ * dot_serial(mu_plus_, s.rho_plus);
    bud.deaths_minus = dt * dr_ * dot_serial(mu_minus_, s.rho_minus);
    bud.arrivals_plus = dt * dr_ * sum_serial(lambda_plus_);
    bud.arrivals_minus = dt * dr_ * sum_serial(lambda_minus_);
    bud.recycled_plus =
        src_plus.empty() ? 0.0 : dt * dr_ * sum_serial(src_plus);
    bud.recycled_minus =
        src_minus.empty() ? 0.0 : dt * dr_ * sum_serial(src_minus);

    std::vector<double> out(n_);
    kernels::advect_toward_origin(
        s.rho_plus.data(), n_, c_plus * dt / dr_, dt, lambda_plus_.data(),
        mu_plus_.data(), src_plus.empty() ? nullptr : src_plus.data(),
        out.data(), opt_.exec);
    s.rho_plus.swap(out);
    kernels::advect_toward_origin(
        s.rho_minus.data(), n_, c_minus * dt / dr_, dt, lambda_minus_.data(),
        mu_minus_.data(), src_minus.empty() ? nullptr : src_minus.data(),
        out.data(), opt_.exec);
    s.rho_minus.swap(out);

    bud.delta_plus = dr_ * sum_serial(s.rho_plus) - mass_plus_before;
    bud.delta_minus = dr_ * sum_serial(s.rho_minus) - mass_minus_before;

    s.beta = beta;
    s.degenerate_boundary = degenerate;
    s.b += beta * dt;
    s.t += dt;
    return info;
}

NetworkFluidSolver::NetworkFluidSolver(NetworkSpec spec, double dr,
                                       std::size_t cells, FluidOptions opt)
    : spec_(std::move(spec)), opt_(opt), dr_(dr), n_(cells) {
    const std::size_t v = spec_.size();
    markets_.reserve(v);
    for (std::size_t m = 0; m < v; ++m) {
        markets_.emplace_back(spec_.markets[m], dr_, n_, opt_);
    }
    kernel_mp_.assign(v, std::vector<std::vector<double>>(v));
    kernel_pm_.assign(v, std::vector<std::vector<double>>(v));
    for (std::size_t k = 0; k < v; ++k) {
        for (std::size_t m = 0; m < v; ++m) {
            if (const auto* f = spec_.kernel_minus_plus(k, m)) {
                kernel_mp_[k][m] = tabulate_cells(*f, dr_, n_);
            }
            if (const auto* f = spec_.kernel_plus_minus(k, m)) {
                kernel_pm_[k][m] = tabulate_cells(*f, dr_, n_);
            }
        }
    }
}

NetworkFluidState NetworkFluidSolver::make_state() const {
    NetworkFluidState s;
    s.markets.reserve(markets_.size());
    for (std::size_t m = 0; m < markets_.size(); ++m) {
        s.markets.push_back(make_fluid_state(dr_, n_));
    }
    return s;
}

double NetworkFluidSolver::max_stable_dt() const {
    double dt = std::numeric_limits<double>::infinity();
    for (const auto& m : markets_) dt = std::min(dt, m.max_stable_dt());
    return dt;
}

std::vector<StepInfo> NetworkFluidSolver::step(NetworkFluidState& s,
                                               double dt) const {
    const std::size_t v = markets_.size();
    // Start-of-step boundary data for every market (Jacobi coupling).
    std::vector<double> beta(v), nu(v);
    std::vector<bool> degen(v);
    for (std::size_t m = 0; m < v; ++m) {
        const auto& p = markets_[m].params();
        const BoundaryDensities bd =
            boundary_densities(s.markets[m], opt_.extraction);
        const BoundaryVelocity bv = boundary_velocity(
            bd.gamma_plus, bd.gamma_minus, p.v_plus, p.v_minus,
            opt_.degenerate_eps);
        beta[m] = bv.beta;
        degen[m] = bv.degenerate;
        nu[m] = (p.v_minus - bv.beta) * bd.gamma_minus;
    }
    std::vector<StepInfo> infos(v);
    for (std::size_t m = 0; m < v; ++m) {
        std::vector<double> src_plus;
        std::vector<double> src_minus;
        for (std::size_t k = 0; k < v; ++k) {
            if (!kernel_mp_[k][m].empty()) {
                const auto& table = kernel_mp_[k][m];
                if (src_plus.empty()) {
                    src_plus.resize(n_);
                    for (std::size_t i = 0; i < n_; ++i) {
                        src_plus[i] = nu[k] * table[i];
                    }
                } else {
                    for (std::size_t i = 0; i < n_; ++i) {
                        src_plus[i] += nu[k] * table[i];
                    }
                }
            }
            if (!kernel_pm_[k][m].empty()) {
                const auto& table = kernel_pm_[k][m];
                if (src_minus.empty()) {
                    src_minus.resize(n_);
                    for (std::size_t i = 0; i < n_; ++i) {
                        src_minus[i] = nu[k] * table[i];
                    }
                } else {
                    for (std::size_t i = 0; i < n_; ++i) {
                        src_minus[i] += nu[k] * table[i];
                    }
                }
            }
        }
        infos[m] = markets_[m].step_with_sources(s.markets[m], dt, src_plus,
                                                 src_minus, beta[m], degen[m],
                                                 nu[m], static_cast<int>(m));
    }
    s.t = s.markets.empty() ? s.t + dt : s.markets[0].t;
    return infos;
}

StepInfo step_single(FluidState& s, const MarketParams& p, double dt,
                     const FluidOptions& opt) {
    MarketParams stripped = p;
    stripped.p_minus_plus.reset();
    stripped.p_plus_minus.reset();
    FluidSolver solver(stripped, s.dr, s.cells(), opt);
    return solver.step(s, dt);
}

StepInfo step_recycling(FluidState& s, const MarketParams& p, double dt,
                        const FluidOptions& opt) {
    FluidSolver solver(p, s.dr, s.cells(), opt);
    return solver.step(s, dt);
}

std::vector<StepInfo> step_network(NetworkFluidState& s,
                                   const NetworkSpec& spec, double dt,
                                   const FluidOptions& opt) {
    const std::size_t cells = s.markets.empty() ? 0 : s.markets[0].cells();
    const double dr = s.markets.empty() ? 1e-3 : s.markets[0].dr;
    NetworkFluidSolver solver(spec, dr, cells, opt);
    return solver.step(s, dt);
}

double annihilation_flux(const FluidState& s, const MarketParams& p,
                         const FluidOptions& opt) {
    const BoundaryDensities bd = boundary_densities(s, opt.extraction);
    const BoundaryVelocity bv = boundary_velocity(
        bd.gamma_plus, bd.gamma_minus, p.v_plus, p.v_minus,
        opt.degenerate_eps);
    return (p.v_minus - bv.beta) * bd.gamma_minus;
}

} // namespace km
