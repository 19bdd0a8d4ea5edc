#include "km/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "km/errors.hpp"
#include "km/particles.hpp"

namespace km {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

FluidOptions fluid_options(const Scenario& s) {
    FluidOptions opt;
    opt.extraction = s.numerics.extraction;
    return opt;
}

std::size_t cell_count(const Scenario& s) {
    return static_cast<std::size_t>(
        std::ceil(s.effective_r_max() / s.numerics.dr));
}

void init_state_from(const Scenario& s, std::size_t market, FluidState& st) {
    if (market < s.initial.size()) {
        const InitialConditions& ic = s.initial[market];
        fill_density(st.rho_plus, st.dr,
                     [&](double r) { return ic.rho_plus(r); });
        fill_density(st.rho_minus, st.dr,
                     [&](double r) { return ic.rho_minus(r); });
        st.b = ic.b;
    }
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

/// Bin-averages a fluid density onto histogram bins of width w.
std::vector<double> bin_fluid(const FluidState& s,
                              const std::vector<double>& rho, double w,
                              std::size_t n_bins) {
    std::vector<double> out(n_bins, 0.0);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(s.r_center(i) / w);
        if (k < n_bins) out[k] += rho[i] * s.dr;
    }
    for (double& v : out) v /= w;
    return out;
}

struct LadderPoint {
    double intensity = 0.0;
    double l1 = 0.0;
    double max_z = 0.0;
    double b_mean = 0.0;
    double b_se = 0.0;
};

} // namespace

void load_equilibrium(FluidState& s, const EquilibriumProfile& prof) {
    const double dr_prof = prof.grid[1] - prof.grid[0];
    auto lerp = [&](const std::vector<double>& vals, double r) {
        if (r >= prof.grid.back()) return 0.0;
        const double g = r / dr_prof;
        const std::size_t i =
            std::min(static_cast<std::size_t>(g), vals.size() - 2);
        const double t = g - double(i);
        return (1.0 - t) * vals[i] + t * vals[i + 1];
    };
    for (std::size_t i = 0; i < s.cells(); ++i) {
        const double r = s.r_center(i);
        s.rho_plus[i] = lerp(prof.rho_plus, r);
        s.rho_minus[i] = lerp(prof.rho_minus, r);
    }
}

ScenarioEquilibrium scenario_equilibrium(const Scenario& s, GridSpec grid) {
    ScenarioEquilibrium out;
    switch (s.tier) {
        case ModelTier::Single: {
            const auto cc = critical_constants(s.market);
            out.gamma_plus = s.validation.gamma_plus >= 0.0
                                 ? s.validation.gamma_plus
                                 : cc.gamma_cr;
            const auto fp = fixed_point_single(s.market, out.gamma_plus, grid);
            if (!fp.exists) {
                throw ConfigError(
                    "validation: no fixed point at gamma_plus = " +
                    fmt(out.gamma_plus) + " (critical density " +
                    fmt(fp.threshold) + ")");
            }
            out.profiles.push_back(fp.profile);
            break;
        }
        case ModelTier::Recycling: {
            const auto st = stationary_point_recycling(s.market, grid);
            out.gamma_plus = st.profile.gamma_plus;
            out.profiles.push_back(st.profile);
            break;
        }
        case ModelTier::Network: {
            const auto nc = network_constants(s.network);
            const auto sol = solve_network_inequalities(
                nc.lambda_hat_plus, nc.lambda_hat_minus, nc.a_mp, nc.a_pm);
            if (!sol.feasible) {
                throw ConfigError(
                    "validation: the network inequality system has no "
                    "positive solution");
            }
            out.profiles = fixed_point_network(s.network, sol.s, grid);
            break;
        }
        case ModelTier::Free:
            throw ConfigError(
                "validation: the free tier has no two-phase equilibrium");
    }
    return out;
}

std::vector<CheckResult> check_persistence(const Scenario& s) {
    std::vector<CheckResult> out;
    const double dr = s.numerics.dr;
    const std::size_t cells = cell_count(s);
    const GridSpec grid{dr * double(cells), dr};
    const auto eq = scenario_equilibrium(s, grid);
    const double dt = s.effective_dt();
    const std::size_t steps =
        static_cast<std::size_t>(std::ceil(s.numerics.t_end / dt));

    auto run_market = [&](const FluidSolver& solver,
                          const EquilibriumProfile& prof, int tag) {
        FluidState st = solver.make_state();
        load_equilibrium(st, prof);
        const std::vector<double> init_plus = st.rho_plus;
        const std::vector<double> init_minus = st.rho_minus;
        double drift = 0.0;
        double beta_max = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const auto info = solver.step(st, dt);
            beta_max = std::max(beta_max, std::abs(info.beta));
            if ((k + 1) % 64 == 0 || k + 1 == steps) {
                drift = std::max(drift, sup_diff(st.rho_plus, init_plus));
                drift = std::max(drift, sup_diff(st.rho_minus, init_minus));
            }
        }
        const std::string suffix =
            tag >= 0 ? "[market " + std::to_string(tag) + "]" : "";
        out.push_back({"persistence.drift" + suffix,
                       drift < s.validation.drift_tol, drift,
                       s.validation.drift_tol,
                       "sup-norm density drift over t_end = " +
                           fmt(s.numerics.t_end)});
        out.push_back({"persistence.beta" + suffix,
                       beta_max < s.validation.beta_tol, beta_max,
                       s.validation.beta_tol, "largest |beta| seen"});
    };

    if (s.tier == ModelTier::Network) {
        NetworkFluidSolver solver(s.network, dr, cells, fluid_options(s));
        NetworkFluidState ns = solver.make_state();
        for (std::size_t m = 0; m < ns.markets.size(); ++m) {
            load_equilibrium(ns.markets[m], eq.profiles[m]);
        }
        std::vector<std::vector<double>> init_plus, init_minus;
        for (const auto& st : ns.markets) {
            init_plus.push_back(st.rho_plus);
            init_minus.push_back(st.rho_minus);
        }
        std::vector<double> drift(ns.markets.size(), 0.0);
        std::vector<double> beta_max(ns.markets.size(), 0.0);
        for (std::size_t k = 0; k < steps; ++k) {
            const auto infos = solver.step(ns, dt);
            for (std::size_t m = 0; m < infos.size(); ++m) {
                beta_max[m] = std::max(beta_max[m], std::abs(infos[m].beta));
            }
            if ((k + 1) % 64 == 0 || k + 1 == steps) {
                for (std::size_t m = 0; m < ns.markets.size(); ++m) {
                    drift[m] = std::max(
                        drift[m],
                        sup_diff(ns.markets[m].rho_plus, init_plus[m]));
                    drift[m] = std::max(
                        drift[m],
                        sup_diff(ns.markets[m].rho_minus, init_minus[m]));
                }
            }
        }
        for (std::size_t m = 0; m < ns.markets.size(); ++m) {
            out.push_back({"persistence.drift[market " + std::to_string(m) +
                               "]",
                           drift[m] < s.validation.drift_tol, drift[m],
                           s.validation.drift_tol, ""});
            out.push_back({"persistence.beta[market " + std::to_string(m) +
                               "]",
                           beta_max[m] < s.validation.beta_tol, beta_max[m],
                           s.validation.beta_tol, ""});
        }
    } else {
        FluidSolver solver(s.market, dr, cells, fluid_options(s));
        run_market(solver, eq.profiles[0], -1);
    }
    return out;
}

std::vector<CheckResult> check_residuals(const Scenario& s) {
    std::vector<CheckResult> out;
    const double r_max = s.effective_r_max();
    auto report_for = [&](double dr) {
        const GridSpec grid{r_max, dr};
        const auto eq = scenario_equilibrium(s, grid);
        ResidualReport worst;
        if (s.tier == ModelTier::Network) {
            worst = verify_equilibrium_network(eq.profiles, s.network);
        } else if (s.tier == ModelTier::Recycling) {
            worst = verify_equilibrium_recycling(eq.profiles[0], s.market);
        } else {
            worst = verify_equilibrium(eq.profiles[0], s.market);
        }
        return worst;
    };
    const auto coarse = report_for(s.numerics.dr);
    const auto fine = report_for(0.5 * s.numerics.dr);
    const double coarse_max =
        std::max(coarse.max_residual_plus, coarse.max_residual_minus);
    const double fine_max =
        std::max(fine.max_residual_plus, fine.max_residual_minus);
    out.push_back({"residual.max", coarse_max < s.validation.residual_tol,
                   coarse_max, s.validation.residual_tol,
                   "stationary-system residual at dr = " +
                       fmt(s.numerics.dr) + " (" +
                       std::to_string(coarse.points_checked) + " points)"});
    const bool both_tiny = coarse_max < 1e-12 && fine_max < 1e-12;
    const double ratio = fine_max > 0.0 ? coarse_max / fine_max : 1e9;
    out.push_back({"residual.scaling", both_tiny || ratio >= 3.5,
                   ratio, 3.5,
                   both_tiny ? "residuals at rounding level on both grids"
                             : "coarse/fine residual ratio (dr halved)"});
    out.push_back({"residual.balance", coarse.boundary_balance < 1e-10,
                   coarse.boundary_balance, 1e-10,
                   "boundary flux balance of the closed form"});
    return out;
}

std::vector<CheckResult> check_conservation(const Scenario& s) {
    std::vector<CheckResult> out;
    const double dr = s.numerics.dr;
    const std::size_t cells = cell_count(s);
    const double dt = s.effective_dt();
    const std::size_t steps =
        static_cast<std::size_t>(std::ceil(s.numerics.t_end / dt));

    auto audit = [&](const FluidSolver& solver, FluidState& st, int tag) {
        double cumulative_error = 0.0;
        double max_step_error = 0.0;
        MassBudget total;
        for (std::size_t k = 0; k < steps; ++k) {
            const auto info = solver.step(st, dt);
            cumulative_error += info.budget.closure_error();
            max_step_error =
                std::max(max_step_error, info.budget.closure_error());
            total += info.budget;
        }
        const double throughput = std::max(total.throughput(), 1e-12);
        const std::string suffix =
            tag >= 0 ? "[market " + std::to_string(tag) + "]" : "";
        out.push_back({"conservation.budget" + suffix,
                       cumulative_error < 1e-3 * throughput,
                       cumulative_error, 1e-3 * throughput,
                       "cumulative closure error vs throughput " +
                           fmt(throughput)});
        out.push_back({"conservation.step" + suffix,
                       max_step_error < 1e-6 * std::max(1.0, throughput),
                       max_step_error, 1e-6 * std::max(1.0, throughput),
                       "worst per-step closure error"});
    };

    if (s.tier == ModelTier::Network) {
        NetworkFluidSolver solver(s.network, dr, cells, fluid_options(s));
        NetworkFluidState ns = solver.make_state();
        for (std::size_t m = 0; m < ns.markets.size(); ++m) {
            init_state_from(s, m, ns.markets[m]);
        }
        double cumulative = 0.0;
        double throughput = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const auto infos = solver.step(ns, dt);
            for (const auto& info : infos) {
                cumulative += info.budget.closure_error();
                throughput += info.budget.throughput();
            }
        }
        throughput = std::max(throughput, 1e-12);
        out.push_back({"conservation.budget", cumulative < 1e-3 * throughput,
                       cumulative, 1e-3 * throughput, ""});
    } else {
        FluidSolver solver(s.market, dr, cells, fluid_options(s));
        FluidState st = solver.make_state();
        init_state_from(s, 0, st);
        audit(solver, st, -1);
    }
    return out;
}

std::vector<CheckResult> check_particle_fluid(const Scenario& s) {
    std::vector<CheckResult> out;
    if (s.tier != ModelTier::Single && s.tier != ModelTier::Recycling) {
        return out;
    }
    if (s.initial.empty()) {
        out.push_back({"particle_fluid.setup", false, 0.0, 0.0,
                       "scenario has no initial conditions"});
        return out;
    }
    const InitialConditions& ic = s.initial[0];
    const double dr = s.numerics.dr;
    const std::size_t cells = cell_count(s);
    const double w = s.numerics.bin_width;
    const double compare_to = std::min(
        s.market.support_radius() + 1.0, dr * double(cells));
    const std::size_t n_bins = static_cast<std::size_t>(compare_to / w);

    // Fluid reference.
    FluidSolver solver(s.market, dr, cells, fluid_options(s));
    FluidState fs = solver.make_state();
    init_state_from(s, 0, fs);
    const double dt_fluid = s.effective_dt();
    const std::size_t fluid_steps =
        static_cast<std::size_t>(std::ceil(s.numerics.t_end / dt_fluid));
    for (std::size_t k = 0; k < fluid_steps; ++k) solver.step(fs, dt_fluid);
    const auto fluid_plus = bin_fluid(fs, fs.rho_plus, w, n_bins);
    const auto fluid_minus = bin_fluid(fs, fs.rho_minus, w, n_bins);

    std::vector<double> ladder = s.validation.n_ladder;
    if (ladder.empty()) ladder = {100.0, 1000.0, 10000.0};
    const std::size_t replicas = std::max<std::size_t>(2,
                                                       s.validation.replicas);
    const double window = s.validation.window;

    std::vector<LadderPoint> points;
    for (std::size_t ni = 0; ni < ladder.size(); ++ni) {
        const double intensity = ladder[ni];
        km::ParticleRunConfig cfg;
        cfg.intensity = intensity;
        cfg.t_end = s.numerics.t_end;
        cfg.dt = std::min(2e-3, dt_fluid * 4.0);
        cfg.bin_width = w;
        cfg.n_bins = n_bins;
        const std::size_t steps_in_window = std::max<std::size_t>(
            1, static_cast<std::size_t>(window / cfg.dt));
        cfg.sample_every = std::max<std::size_t>(1, steps_in_window / 16);

        std::vector<std::vector<double>> hist_plus(replicas),
            hist_minus(replicas);
        std::vector<double> b_final(replicas, 0.0);
#pragma omp parallel for schedule(dynamic)
        for (long long rep = 0; rep < (long long)replicas; ++rep) {
            km::ParticleRunConfig local = cfg;
            local.seed = s.numerics.seed + 104729ull * (ni + 1) +
                         7919ull * std::uint64_t(rep);
            km::InitialDensitySpec init{ic.rho_plus, ic.rho_minus, ic.b};
            const auto traj = km::run_particles(s.market, init, local);
            std::vector<double> hp(n_bins, 0.0), hm(n_bins, 0.0);
            std::size_t used = 0;
            for (const auto& snap : traj.densities) {
                if (snap.t < s.numerics.t_end - window - 1e-12) continue;
                for (std::size_t k = 0; k < n_bins; ++k) {
                    hp[k] += snap.density.plus[k];
                    hm[k] += snap.density.minus[k];
                }
                ++used;
            }
            for (std::size_t k = 0; k < n_bins; ++k) {
                hp[k] /= double(used) * intensity;
                hm[k] /= double(used) * intensity;
            }
            hist_plus[rep] = std::move(hp);
            hist_minus[rep] = std::move(hm);
            b_final[rep] = traj.b.back();
        }

        LadderPoint pt;
        pt.intensity = intensity;
        double l1 = 0.0;
        double max_z = 0.0;
        for (std::size_t k = 0; k < n_bins; ++k) {
            for (int phase = 0; phase < 2; ++phase) {
                const auto& hists = phase == 0 ? hist_plus : hist_minus;
                const double fluid_val =
                    phase == 0 ? fluid_plus[k] : fluid_minus[k];
                double mean = 0.0;
                for (const auto& h : hists) mean += h[k];
                mean /= double(replicas);
                double var = 0.0;
                for (const auto& h : hists) {
                    var += (h[k] - mean) * (h[k] - mean);
                }
                var /= double(replicas - 1);
                const double se = std::sqrt(var / double(replicas));
                l1 += std::abs(mean - fluid_val) * w;
                // Skip bins whose expected occupancy is too thin for a
                // normal-error band.
                if (fluid_val * intensity * w >= 5.0 && se > 0.0) {
                    max_z = std::max(max_z,
                                     std::abs(mean - fluid_val) / se);
                }
            }
        }
        pt.l1 = l1;
        pt.max_z = max_z;
        double bm = 0.0;
        for (double b : b_final) bm += b;
        bm /= double(replicas);
        double bv = 0.0;
        for (double b : b_final) bv += (b - bm) * (b - bm);
        bv /= double(replicas - 1);
        pt.b_mean = bm;
        pt.b_se = std::sqrt(bv / double(replicas));
        points.push_back(pt);
    }

    // Least-squares slope of log L1 against log intensity.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& pt : points) {
        const double x = std::log(pt.intensity);
        const double y = std::log(std::max(pt.l1, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = double(points.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    std::string detail = "L1:";
    for (const auto& pt : points) {
        detail += " N=" + fmt(pt.intensity) + "->" + fmt(pt.l1);
    }
    out.push_back({"particle_fluid.slope",
                   slope >= s.validation.slope_lo &&
                       slope <= s.validation.slope_hi,
                   slope, s.validation.slope_lo, detail});

    double worst_z = 0.0;
    for (const auto& pt : points) worst_z = std::max(worst_z, pt.max_z);
    out.push_back({"particle_fluid.density_band", worst_z <= 5.0, worst_z,
                   5.0, "largest per-bin |mean - fluid| / SE"});

    for (const auto& pt : points) {
        const double diff = std::abs(pt.b_mean - fs.b);
        const double band = 5.0 * pt.b_se + 1e-9;
        out.push_back({"particle_fluid.boundary[N=" + fmt(pt.intensity) + "]",
                       diff <= band, diff, band,
                       "fluid b(T) = " + fmt(fs.b) + ", particle mean = " +
                           fmt(pt.b_mean)});
    }
    return out;
}

std::vector<CheckResult> run_validation(const Scenario& s) {
    std::vector<CheckResult> out;
    if (s.tier == ModelTier::Free) {
        out.push_back({"validate.tier", false, 0.0, 0.0,
                       "the free tier has no cross-engine harness"});
        return out;
    }
    if (s.validation.persistence) {
        auto r = check_persistence(s);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (s.validation.residuals) {
        auto r = check_residuals(s);
        out.insert(out.end(), r.begin(), r.end());
    }
    {
        auto r = check_conservation(s);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (!s.validation.n_ladder.empty()) {
        auto r = check_particle_fluid(s);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

std::string format_check_line(const CheckResult& r) {
    std::string line = r.passed ? "[PASS] " : "[FAIL] ";
    line += r.name + ": measured " + fmt(r.measured) + " vs threshold " +
            fmt(r.threshold);
    if (!r.detail.empty()) line += " (" + r.detail + ")";
    return line;
}

} // namespace km
