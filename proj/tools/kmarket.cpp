// Scenario-driven front end: load a JSON scenario, dispatch to the particle
// or fluid engine, compute closed-form equilibria, or run the cross-engine
// validation harness. Exit codes: 0 success (including "no equilibrium
// exists" answers), 1 configuration error, 2 runtime/numerical error,
// 3 validation criteria failed.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "km/csv.hpp"
#include "km/equilibria.hpp"
#include "km/errors.hpp"
#include "km/free_kinetics.hpp"
#include "km/particles.hpp"
#include "km/scenario.hpp"
#include "km/validate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool log_enabled() {
    static const bool on = [] {
        const char* v = std::getenv("KM_LOG");
        return v != nullptr && std::string(v) != "" &&
               std::string(v) != "off" && std::string(v) != "0";
    }();
    return on;
}

void log_line(const std::string& msg) {
    if (log_enabled()) std::cerr << "[km] " << msg << "\n";
}

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
};

km::Scenario load(const CommonArgs& args) {
    km::Scenario s = km::load_scenario(args.scenario_path);
    if (!args.out_dir.empty()) s.out_dir = args.out_dir;
    if (args.seed) s.numerics.seed = *args.seed;
    if (args.replicas) s.numerics.replicas = *args.replicas;
    return s;
}

void write_manifest(const km::Scenario& s, const std::string& command,
                    double wall_seconds, json extra = {}) {
    json m = km::run_manifest(s, command, wall_seconds);
    for (auto& [k, v] : extra.items()) m[k] = v;
    fs::create_directories(s.out_dir);
    std::ofstream out(fs::path(s.out_dir) / "manifest.json");
    out << m.dump(2) << "\n";
}

double wall_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int simulate_fluid(const km::Scenario& s) {
    const auto t0 = std::chrono::steady_clock::now();
    const double dr = s.numerics.dr;
    const std::size_t cells =
        static_cast<std::size_t>(std::ceil(s.effective_r_max() / dr));
    const double dt = s.effective_dt();
    const std::size_t steps =
        static_cast<std::size_t>(std::ceil(s.numerics.t_end / dt));
    fs::create_directories(s.out_dir);
    km::FluidOptions opt;
    opt.extraction = s.numerics.extraction;

    auto write_state = [&](km::CsvWriter& csv, const km::FluidState& st) {
        for (std::size_t i = 0; i < st.cells(); ++i) {
            csv.row(st.t, st.b, st.beta, "plus", st.r_center(i),
                    st.rho_plus[i]);
            csv.row(st.t, st.b, st.beta, "minus", st.r_center(i),
                    st.rho_minus[i]);
        }
    };

    km::MassBudget total;
    if (s.tier == km::ModelTier::Network) {
        km::NetworkFluidSolver solver(s.network, dr, cells, opt);
        km::NetworkFluidState ns = solver.make_state();
        std::vector<km::CsvWriter> csvs;
        for (std::size_t m = 0; m < ns.markets.size(); ++m) {
            if (m < s.initial.size()) {
                const auto& ic = s.initial[m];
                km::fill_density(ns.markets[m].rho_plus, dr,
                                 [&](double r) { return ic.rho_plus(r); });
                km::fill_density(ns.markets[m].rho_minus, dr,
                                 [&](double r) { return ic.rho_minus(r); });
                ns.markets[m].b = ic.b;
            }
            csvs.emplace_back(
                (fs::path(s.out_dir) /
                 ("fluid_market" + std::to_string(m) + ".csv"))
                    .string(),
                std::initializer_list<const char*>{"t", "b", "beta", "phase",
                                                   "r", "rho"});
            write_state(csvs[m], ns.markets[m]);
        }
        for (std::size_t k = 0; k < steps; ++k) {
            const auto infos = solver.step(ns, dt);
            for (const auto& info : infos) total += info.budget;
            if ((k + 1) % s.numerics.sample_every == 0 || k + 1 == steps) {
                for (std::size_t m = 0; m < ns.markets.size(); ++m) {
                    write_state(csvs[m], ns.markets[m]);
                }
            }
        }
    } else {
        km::FluidSolver solver(s.market, dr, cells, opt);
        km::FluidState st = solver.make_state();
        if (!s.initial.empty()) {
            const auto& ic = s.initial[0];
            km::fill_density(st.rho_plus, dr,
                             [&](double r) { return ic.rho_plus(r); });
            km::fill_density(st.rho_minus, dr,
                             [&](double r) { return ic.rho_minus(r); });
            st.b = ic.b;
        }
        km::CsvWriter csv(
            (fs::path(s.out_dir) / "fluid_snapshots.csv").string(),
            {"t", "b", "beta", "phase", "r", "rho"});
        write_state(csv, st);
        for (std::size_t k = 0; k < steps; ++k) {
            const auto info = solver.step(st, dt);
            total += info.budget;
            if ((k + 1) % s.numerics.sample_every == 0 || k + 1 == steps) {
                write_state(csv, st);
            }
        }
    }
    json extra;
    extra["engine"] = "fluid";
    extra["mass_budget"] = {
        {"annihilated", total.annihilated_plus + total.annihilated_minus},
        {"deaths", total.deaths_plus + total.deaths_minus},
        {"arrivals", total.arrivals_plus + total.arrivals_minus},
        {"recycled", total.recycled_plus + total.recycled_minus},
        {"closure_error", total.closure_error()},
    };
    write_manifest(s, "simulate --engine fluid", wall_since(t0), extra);
    std::cout << "fluid run complete: " << steps << " steps, artifacts in "
              << s.out_dir << "\n";
    return 0;
}

int simulate_particles(const km::Scenario& s) {
    const auto t0 = std::chrono::steady_clock::now();
    if (s.tier == km::ModelTier::Network) {
        throw km::ConfigError(
            "the particle engine covers single and recycling tiers only");
    }
    fs::create_directories(s.out_dir);
    km::InitialDensitySpec init;
    if (!s.initial.empty()) {
        init.rho_plus = s.initial[0].rho_plus;
        init.rho_minus = s.initial[0].rho_minus;
        init.b0 = s.initial[0].b;
    }
    const std::size_t replicas = s.numerics.replicas;
    std::vector<km::SimTrajectory> trajectories(replicas);
    std::vector<std::uint64_t> seeds(replicas);
    for (std::size_t i = 0; i < replicas; ++i) {
        seeds[i] = s.numerics.seed + i;
    }
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)replicas; ++i) {
        km::ParticleRunConfig cfg;
        cfg.intensity = s.numerics.intensity;
        cfg.seed = seeds[i];
        cfg.t_end = s.numerics.t_end;
        cfg.dt = std::min(s.effective_dt(), 2e-3);
        cfg.sample_every = s.numerics.sample_every;
        cfg.bin_width = s.numerics.bin_width;
        trajectories[i] = km::run_particles(s.market, init, cfg);
    }
    for (std::size_t i = 0; i < replicas; ++i) {
        const std::string tag = "seed" + std::to_string(seeds[i]);
        const auto& traj = trajectories[i];
        km::CsvWriter tcsv(
            (fs::path(s.out_dir) / ("trajectory_" + tag + ".csv")).string(),
            {"t", "b", "n_plus", "n_minus"});
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            tcsv.row(traj.times[k], traj.b[k], traj.n_plus[k],
                     traj.n_minus[k]);
        }
        km::CsvWriter ecsv(
            (fs::path(s.out_dir) / ("annihilations_" + tag + ".csv"))
                .string(),
            {"t", "x"});
        for (const auto& ev : traj.events) ecsv.row(ev.t, ev.x);
        km::CsvWriter dcsv(
            (fs::path(s.out_dir) / ("densities_" + tag + ".csv")).string(),
            {"t", "phase", "r_bin", "density"});
        for (const auto& snap : traj.densities) {
            for (std::size_t k = 0; k < snap.density.plus.size(); ++k) {
                dcsv.row(snap.t, "plus", double(k) * snap.density.bin_width,
                         snap.density.plus[k]);
            }
            for (std::size_t k = 0; k < snap.density.minus.size(); ++k) {
                dcsv.row(snap.t, "minus", double(k) * snap.density.bin_width,
                         snap.density.minus[k]);
            }
        }
    }
    json extra;
    extra["engine"] = "particles";
    extra["seeds"] = seeds;
    write_manifest(s, "simulate --engine particles", wall_since(t0), extra);
    std::cout << "particle run complete: " << replicas
              << " replica(s), artifacts in " << s.out_dir << "\n";
    return 0;
}

int simulate_free(const km::Scenario& s) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(s.out_dir);
    const auto& f = s.free_field;
    auto field = km::make_free_field(f.x_min, f.x_max, f.nx, f.v0, f.nv);
    field.fill([&](double x, double v) {
        return km::eval_bumps(f.f0, x, v);
    });
    auto lambda = [&](double x, double v, double) {
        return km::eval_bumps(f.lambda, x, v);
    };
    auto mu = [&](double x, double v, double) {
        return km::eval_bumps(f.mu, x, v);
    };
    const double dt = 0.9 * field.dx() / field.v0;
    km::evolve_free(field, lambda, mu, s.numerics.t_end, dt);
    km::CsvWriter csv((fs::path(s.out_dir) / "free_field.csv").string(),
                      {"x", "v", "f"});
    for (std::size_t iv = 0; iv < field.nv; ++iv) {
        for (std::size_t ix = 0; ix < field.nx; ++ix) {
            csv.row(field.x_center(ix), field.v_center(iv),
                    field.at(ix, iv));
        }
    }
    write_manifest(s, "simulate --engine fluid (free tier)", wall_since(t0),
                   json{{"engine", "free"}});
    std::cout << "free-field run complete, artifacts in " << s.out_dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

void write_profile_csv(const std::string& path,
                       const km::EquilibriumProfile& prof) {
    km::CsvWriter csv(path, {"phase", "r", "rho"});
    for (std::size_t i = 0; i < prof.grid.size(); ++i) {
        csv.row("plus", prof.grid[i], prof.rho_plus[i]);
    }
    for (std::size_t i = 0; i < prof.grid.size(); ++i) {
        csv.row("minus", prof.grid[i], prof.rho_minus[i]);
    }
}

json profile_report(const km::EquilibriumProfile& prof) {
    return json{{"gamma_plus", prof.gamma_plus},
                {"gamma_minus", prof.gamma_minus},
                {"beta", prof.beta},
                {"finite_mass", prof.finite_mass},
                {"mass_plus", prof.mass_plus},
                {"mass_minus", prof.mass_minus},
                {"tail_plus", prof.tail_plus},
                {"tail_minus", prof.tail_minus}};
}

json residual_report_json(const km::ResidualReport& rep) {
    return json{{"max_residual_plus", rep.max_residual_plus},
                {"max_residual_minus", rep.max_residual_minus},
                {"boundary_balance", rep.boundary_balance},
                {"points_checked", rep.points_checked}};
}

int cmd_equilibrium(const CommonArgs& common, const std::string& kind,
                    std::optional<double> gamma_plus,
                    std::optional<double> gamma_minus,
                    const std::vector<double>& s_bar) {
    const auto t0 = std::chrono::steady_clock::now();
    km::Scenario s = load(common);
    fs::create_directories(s.out_dir);
    const km::GridSpec grid{s.effective_r_max(), s.numerics.dr};
    json report;
    report["kind"] = kind;
    report["model_tier"] = km::tier_name(s.tier);

    if (s.tier == km::ModelTier::Single ||
        s.tier == km::ModelTier::Recycling) {
        const auto cc = km::critical_constants(s.market);
        report["thresholds"] = {{"gamma_cr_plus", cc.gamma_cr_plus},
                                {"gamma_cr_minus", cc.gamma_cr_minus},
                                {"gamma_cr", cc.gamma_cr},
                                {"gamma_hat_cr", cc.gamma_hat_cr},
                                {"alpha_mp", cc.alpha_mp},
                                {"alpha_pm", cc.alpha_pm}};
        if (kind == "fixed") {
            if (!gamma_plus) {
                throw km::ConfigError(
                    "equilibrium --kind fixed needs --gamma-plus");
            }
            const auto res =
                s.tier == km::ModelTier::Recycling
                    ? km::fixed_point_recycling(s.market, *gamma_plus, grid)
                    : km::fixed_point_single(s.market, *gamma_plus, grid);
            report["no_fixed_point"] = !res.exists;
            report["threshold"] = res.threshold;
            if (res.exists) {
                report["profile"] = profile_report(res.profile);
                const auto rep =
                    s.tier == km::ModelTier::Recycling
                        ? km::verify_equilibrium_recycling(res.profile,
                                                           s.market)
                        : km::verify_equilibrium(res.profile, s.market);
                report["residuals"] = residual_report_json(rep);
                write_profile_csv(
                    (fs::path(s.out_dir) / "equilibrium_densities.csv")
                        .string(),
                    res.profile);
            }
        } else if (kind == "stationary") {
            if (s.tier == km::ModelTier::Recycling) {
                const auto res = km::stationary_point_recycling(s.market,
                                                                grid);
                report["profile"] = profile_report(res.profile);
                report["linear_branch"] = res.linear_branch;
                report["quadratic_residual"] = res.quad_residual;
                report["balance_residual"] = res.balance_residual;
                report["residuals"] = residual_report_json(
                    km::verify_equilibrium_recycling(res.profile, s.market));
                write_profile_csv(
                    (fs::path(s.out_dir) / "equilibrium_densities.csv")
                        .string(),
                    res.profile);
            } else {
                if (!gamma_plus || !gamma_minus) {
                    throw km::ConfigError(
                        "equilibrium --kind stationary needs --gamma-plus "
                        "and --gamma-minus in the single tier");
                }
                const auto res = km::stationary_point_single(
                    s.market, *gamma_plus, *gamma_minus, grid);
                report["below_critical"] = !res.admissible;
                if (res.admissible) {
                    report["profile"] = profile_report(res.profile);
                    report["residuals"] = residual_report_json(
                        km::verify_equilibrium(res.profile, s.market));
                    write_profile_csv(
                        (fs::path(s.out_dir) / "equilibrium_densities.csv")
                            .string(),
                        res.profile);
                } else {
                    report["violation"] = {
                        {"phase", res.violation.phase == km::Phase::Plus
                                      ? "plus"
                                      : "minus"},
                        {"gamma", res.violation.gamma},
                        {"required", res.violation.required}};
                }
            }
        } else {
            throw km::ConfigError("unknown equilibrium kind: " + kind);
        }
    } else if (s.tier == km::ModelTier::Network) {
        if (kind != "fixed") {
            throw km::ConfigError(
                "the network tier has fixed points only; use --kind fixed");
        }
        const auto nc = km::network_constants(s.network);
        report["lambda_hat_plus"] = nc.lambda_hat_plus;
        report["lambda_hat_minus"] = nc.lambda_hat_minus;
        std::vector<double> s_used = s_bar;
        if (s_used.empty()) {
            const auto sol = km::solve_network_inequalities(
                nc.lambda_hat_plus, nc.lambda_hat_minus, nc.a_mp, nc.a_pm);
            report["iterations"] = sol.iterations;
            if (!sol.feasible) {
                report["no_fixed_point"] = true;
                report["detail"] =
                    "the inequality system has no positive solution";
                std::ofstream out(fs::path(s.out_dir) /
                                  "equilibrium_report.json");
                report["manifest"] =
                    km::run_manifest(s, "equilibrium", wall_since(t0));
                out << report.dump(2) << "\n";
                std::cout << report.dump(2) << "\n";
                return 0;
            }
            s_used = sol.s;
            report["canonical_least_solution"] = true;
        }
        report["s_bar"] = s_used;
        const auto profiles =
            km::fixed_point_network(s.network, s_used, grid);
        report["no_fixed_point"] = false;
        report["profiles"] = json::array();
        for (std::size_t m = 0; m < profiles.size(); ++m) {
            report["profiles"].push_back(profile_report(profiles[m]));
            write_profile_csv(
                (fs::path(s.out_dir) /
                 ("equilibrium_market" + std::to_string(m) + ".csv"))
                    .string(),
                profiles[m]);
        }
        report["residuals"] =
            residual_report_json(km::verify_equilibrium_network(profiles,
                                                                s.network));
    } else {
        throw km::ConfigError("the free tier has no equilibrium command");
    }

    report["manifest"] = km::run_manifest(s, "equilibrium", wall_since(t0));
    std::ofstream out(fs::path(s.out_dir) / "equilibrium_report.json");
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// validate / inspect
// ---------------------------------------------------------------------------

int cmd_validate(const CommonArgs& common) {
    const auto t0 = std::chrono::steady_clock::now();
    km::Scenario s = load(common);
    log_line("running validation harness on tier " +
             std::string(km::tier_name(s.tier)));
    const auto results = km::run_validation(s);
    bool all_passed = true;
    json rows = json::array();
    for (const auto& r : results) {
        std::cout << km::format_check_line(r) << "\n";
        all_passed = all_passed && r.passed;
        rows.push_back({{"name", r.name},
                        {"passed", r.passed},
                        {"measured", r.measured},
                        {"threshold", r.threshold},
                        {"detail", r.detail}});
    }
    fs::create_directories(s.out_dir);
    json report;
    report["checks"] = rows;
    report["all_passed"] = all_passed;
    report["manifest"] = km::run_manifest(s, "validate", wall_since(t0));
    std::ofstream out(fs::path(s.out_dir) / "validation_report.json");
    out << report.dump(2) << "\n";
    return all_passed ? 0 : 3;
}

int cmd_inspect(const CommonArgs& common) {
    std::ifstream in(common.scenario_path);
    if (!in) {
        std::cerr << "cannot open scenario file: " << common.scenario_path
                  << "\n";
        return 1;
    }
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        std::cerr << "scenario JSON parse error: " << e.what() << "\n";
        return 1;
    }
    const auto errors = km::validate_scenario_json(j);
    if (!errors.empty()) {
        std::cerr << "scenario invalid (" << errors.size()
                  << " violation(s)):\n";
        for (const auto& e : errors) std::cerr << "  - " << e << "\n";
        return 1;
    }
    const km::Scenario s = km::parse_scenario(j);
    json summary;
    summary["model_tier"] = km::tier_name(s.tier);
    summary["markets"] = s.market_count();
    summary["dr"] = s.numerics.dr;
    summary["dt_effective"] = s.effective_dt();
    summary["r_max_effective"] = s.effective_r_max();
    summary["t_end"] = s.numerics.t_end;
    summary["seed"] = s.numerics.seed;
    std::ostringstream hex;
    hex << std::hex << km::config_hash(s.raw);
    summary["config_hash"] = hex.str();
    std::cout << summary.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "kmarket: two-phase kinetic market laboratory (particle and fluid "
        "engines plus closed-form equilibria)"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string engine = "fluid";
    std::string kind = "fixed";
    std::optional<double> gamma_plus, gamma_minus;
    std::vector<double> s_bar;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", common.scenario_path,
                        "scenario JSON path")
            ->required();
        sub->add_option("--out", common.out_dir,
                        "output directory (overrides the scenario)");
        sub->add_option("--seed", common.seed, "seed override");
        sub->add_option("--replicas", common.replicas, "replica override");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run an engine");
    add_common(sim);
    sim->add_option("--engine", engine, "particles|fluid")
        ->check(CLI::IsMember({"particles", "fluid"}));

    CLI::App* eq = app.add_subcommand("equilibrium",
                                      "closed-form equilibrium computation");
    add_common(eq);
    eq->add_option("--kind", kind, "fixed|stationary")
        ->check(CLI::IsMember({"fixed", "stationary"}));
    eq->add_option("--gamma-plus", gamma_plus, "boundary density of (+)");
    eq->add_option("--gamma-minus", gamma_minus, "boundary density of (-)");
    eq->add_option("--s-bar", s_bar,
                   "network parameter vector (defaults to the canonical "
                   "least solution)");

    CLI::App* val = app.add_subcommand("validate",
                                       "cross-engine validation harness");
    add_common(val);

    CLI::App* ins = app.add_subcommand("inspect-config",
                                       "parse and summarize a scenario");
    ins->add_option("--scenario", common.scenario_path, "scenario JSON path")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) {
            km::Scenario s = load(common);
            if (s.tier == km::ModelTier::Free) {
                if (engine == "particles") {
                    throw km::ConfigError(
                        "the free tier has no particle engine");
                }
                return simulate_free(s);
            }
            return engine == "particles" ? simulate_particles(s)
                                         : simulate_fluid(s);
        }
        if (eq->parsed()) {
            return cmd_equilibrium(common, kind, gamma_plus, gamma_minus,
                                   s_bar);
        }
        if (val->parsed()) return cmd_validate(common);
        if (ins->parsed()) return cmd_inspect(common);
    } catch (const km::ConfigError& e) {
        std::cerr << "configuration error:\n" << e.what() << "\n";
        return 1;
    } catch (const km::RootSelectionAmbiguous& e) {
        std::cerr << "numerical degeneracy: " << e.what() << "\n";
        return 2;
    } catch (const km::SubstochasticityViolated& e) {
        std::cerr << "routing matrix violation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
