#include "km/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "km/errors.hpp"

namespace km {

namespace {

using nlohmann::json;

struct Collector {
    std::vector<std::string> errors;

    void add(const std::string& msg) { errors.push_back(msg); }
    bool ok() const { return errors.empty(); }
};

bool expect_object(const json& j, const std::string& where, Collector& c) {
    if (!j.is_object()) {
        c.add(where + ": expected an object");
        return false;
    }
    return true;
}

double number_or(const json& j, const char* key, double fallback,
                 const std::string& where, Collector& c,
                 bool required = false) {
    if (!j.contains(key)) {
        if (required) c.add(where + ": missing required field '" + key + "'");
        return fallback;
    }
    if (!j[key].is_number()) {
        c.add(where + ": field '" + key + "' must be a number");
        return fallback;
    }
    return j[key].get<double>();
}

std::uint64_t unsigned_or(const json& j, const char* key,
                          std::uint64_t fallback, const std::string& where,
                          Collector& c) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned() && !j[key].is_number_integer()) {
        c.add(where + ": field '" + key + "' must be a nonnegative integer");
        return fallback;
    }
    const auto v = j[key].get<long long>();
    if (v < 0) {
        c.add(where + ": field '" + key + "' must be nonnegative");
        return fallback;
    }
    return static_cast<std::uint64_t>(v);
}

bool parse_rate(const json& j, const std::string& where, Collector& c,
                CompactRateFunction& out) {
    if (!j.is_object() || !j.contains("breakpoints") || !j.contains("values")) {
        c.add(where + ": expected {\"breakpoints\": [...], \"values\": [...]}");
        return false;
    }
    if (!j["breakpoints"].is_array() || !j["values"].is_array()) {
        c.add(where + ": breakpoints and values must be arrays");
        return false;
    }
    std::vector<double> bp, vals;
    for (const auto& x : j["breakpoints"]) {
        if (!x.is_number()) {
            c.add(where + ": breakpoints must be numeric");
            return false;
        }
        bp.push_back(x.get<double>());
    }
    for (const auto& x : j["values"]) {
        if (!x.is_number()) {
            c.add(where + ": values must be numeric");
            return false;
        }
        vals.push_back(x.get<double>());
    }
    try {
        out = CompactRateFunction(std::move(bp), std::move(vals));
    } catch (const std::exception& e) {
        c.add(where + ": " + e.what());
        return false;
    }
    return true;
}

bool parse_optional_rate(const json& j, const char* key,
                         const std::string& where, Collector& c,
                         std::optional<CompactRateFunction>& out) {
    if (!j.contains(key)) return false;
    CompactRateFunction f;
    if (parse_rate(j[key], where + "." + key, c, f)) {
        out = std::move(f);
        return true;
    }
    return false;
}

void parse_market(const json& j, const std::string& where, Collector& c,
                  MarketParams& out, bool allow_kernels) {
    if (!expect_object(j, where, c)) return;
    out.v_plus = number_or(j, "v_plus", -1.0, where, c, true);
    out.v_minus = number_or(j, "v_minus", 1.0, where, c, true);
    if (j.contains("lambda_plus")) {
        parse_rate(j["lambda_plus"], where + ".lambda_plus", c,
                   out.lambda_plus);
    } else {
        c.add(where + ": missing required field 'lambda_plus'");
    }
    if (j.contains("lambda_minus")) {
        parse_rate(j["lambda_minus"], where + ".lambda_minus", c,
                   out.lambda_minus);
    } else {
        c.add(where + ": missing required field 'lambda_minus'");
    }
    if (j.contains("mu_plus")) {
        parse_rate(j["mu_plus"], where + ".mu_plus", c, out.mu_plus);
    }
    if (j.contains("mu_minus")) {
        parse_rate(j["mu_minus"], where + ".mu_minus", c, out.mu_minus);
    }
    const bool has_mp =
        parse_optional_rate(j, "p_minus_plus", where, c, out.p_minus_plus);
    const bool has_pm =
        parse_optional_rate(j, "p_plus_minus", where, c, out.p_plus_minus);
    if (!allow_kernels && (has_mp || has_pm)) {
        c.add(where + ": recycling kernels are not allowed in this tier");
    }
}

void parse_density(const json& j, const char* key, const std::string& where,
                   Collector& c, CompactRateFunction& out) {
    if (!j.contains(key)) return;
    CompactRateFunction f;
    if (parse_rate(j[key], where + "." + std::string(key), c, f)) {
        for (const std::string& v : f.validate()) {
            c.add(where + "." + key + ": " + v);
        }
        out = std::move(f);
    }
}

std::vector<GaussianBump> parse_bumps(const json& j, const char* key,
                                      const std::string& where, Collector& c) {
    std::vector<GaussianBump> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) {
        c.add(where + ": '" + key + "' must be an array of bumps");
        return out;
    }
    std::size_t idx = 0;
    for (const auto& b : j[key]) {
        const std::string w =
            where + "." + key + "[" + std::to_string(idx++) + "]";
        GaussianBump g;
        g.amplitude = number_or(b, "amplitude", 1.0, w, c, true);
        g.x_center = number_or(b, "x_center", 0.0, w, c);
        g.x_sigma = number_or(b, "x_sigma", 1.0, w, c);
        g.v_center = number_or(b, "v_center", 0.0, w, c);
        g.v_sigma = number_or(b, "v_sigma", 1.0, w, c);
        if (g.x_sigma <= 0.0 || g.v_sigma <= 0.0) {
            c.add(w + ": sigmas must be positive");
        }
        if (g.amplitude < 0.0) c.add(w + ": amplitude must be nonnegative");
        out.push_back(g);
    }
    return out;
}

struct ParseOutcome {
    Scenario scenario;
    std::vector<std::string> errors;
};

ParseOutcome parse_impl(const json& j) {
    ParseOutcome out;
    Collector c;
    Scenario& s = out.scenario;
    s.raw = j;

    if (!j.is_object()) {
        c.add("top level: expected a JSON object");
        out.errors = c.errors;
        return out;
    }

    const std::string tier_str =
        j.contains("model_tier") && j["model_tier"].is_string()
            ? j["model_tier"].get<std::string>()
            : "";
    if (tier_str == "free") {
        s.tier = ModelTier::Free;
    } else if (tier_str == "single") {
        s.tier = ModelTier::Single;
    } else if (tier_str == "recycling") {
        s.tier = ModelTier::Recycling;
    } else if (tier_str == "network") {
        s.tier = ModelTier::Network;
    } else {
        c.add("model_tier: must be one of free|single|recycling|network");
    }

    if (s.tier == ModelTier::Single || s.tier == ModelTier::Recycling) {
        if (j.contains("market")) {
            parse_market(j["market"], "market", c, s.market,
                         s.tier == ModelTier::Recycling);
            for (const std::string& v : validate_market(s.market)) {
                c.add("market: " + v);
            }
            if (s.tier == ModelTier::Recycling && !s.market.has_recycling()) {
                c.add("market: recycling tier requires at least one "
                      "recycling kernel");
            }
        } else {
            c.add("missing required field 'market' for this tier");
        }
        if (j.contains("network")) {
            c.add("'network' is only allowed in the network tier");
        }
    } else if (s.tier == ModelTier::Network) {
        if (j.contains("market")) {
            c.add("'market' is not allowed in the network tier");
        }
        if (!j.contains("network") || !j["network"].is_object()) {
            c.add("missing required object 'network' for the network tier");
        } else {
            const json& net = j["network"];
            if (!net.contains("markets") || !net["markets"].is_array() ||
                net["markets"].empty()) {
                c.add("network.markets: must be a nonempty array");
            } else {
                std::size_t idx = 0;
                for (const auto& mj : net["markets"]) {
                    MarketParams mp;
                    parse_market(mj,
                                 "network.markets[" + std::to_string(idx) +
                                     "]",
                                 c, mp, false);
                    s.network.markets.push_back(std::move(mp));
                    ++idx;
                }
                const std::size_t v = s.network.markets.size();
                s.network.routing.assign(
                    v, std::vector<RoutingKernels>(v));
                if (net.contains("routing")) {
                    if (!net["routing"].is_array()) {
                        c.add("network.routing: must be an array");
                    } else {
                        std::size_t ridx = 0;
                        for (const auto& rj : net["routing"]) {
                            const std::string w = "network.routing[" +
                                                  std::to_string(ridx++) + "]";
                            const auto from = static_cast<std::size_t>(
                                number_or(rj, "from", 0, w, c, true));
                            const auto to = static_cast<std::size_t>(
                                number_or(rj, "to", 0, w, c, true));
                            if (from >= v || to >= v) {
                                c.add(w + ": market index out of range");
                                continue;
                            }
                            parse_optional_rate(
                                rj, "p_minus_plus", w, c,
                                s.network.routing[from][to].minus_plus);
                            parse_optional_rate(
                                rj, "p_plus_minus", w, c,
                                s.network.routing[from][to].plus_minus);
                        }
                    }
                }
                for (const std::string& msg : validate_network(s.network)) {
                    c.add("network: " + msg);
                }
            }
        }
    } else if (s.tier == ModelTier::Free) {
        if (j.contains("free")) {
            const json& fj = j["free"];
            const std::string w = "free";
            if (expect_object(fj, w, c)) {
                s.free_field.x_min = number_or(fj, "x_min", -3.0, w, c);
                s.free_field.x_max = number_or(fj, "x_max", 3.0, w, c);
                s.free_field.nx = static_cast<std::size_t>(
                    unsigned_or(fj, "nx", 400, w, c));
                s.free_field.v0 = number_or(fj, "v0", 1.0, w, c);
                s.free_field.nv = static_cast<std::size_t>(
                    unsigned_or(fj, "nv", 16, w, c));
                if (s.free_field.x_max <= s.free_field.x_min) {
                    c.add("free: x_max must exceed x_min");
                }
                if (s.free_field.v0 <= 0.0) c.add("free: v0 must be positive");
                if (s.free_field.nx < 2) c.add("free: nx must be at least 2");
                if (s.free_field.nv < 8) {
                    c.add("free: nv must be at least 8 (full phase-space "
                          "discretization)");
                }
                s.free_field.f0 = parse_bumps(fj, "f0", w, c);
                s.free_field.lambda = parse_bumps(fj, "lambda", w, c);
                s.free_field.mu = parse_bumps(fj, "mu", w, c);
            }
        } else {
            c.add("missing required object 'free' for the free tier");
        }
    }

    // Initial conditions: a single object or a per-market array.
    if (j.contains("initial")) {
        const json& ij = j["initial"];
        auto parse_one = [&](const json& obj, const std::string& w) {
            InitialConditions ic;
            if (expect_object(obj, w, c)) {
                parse_density(obj, "rho_plus", w, c, ic.rho_plus);
                parse_density(obj, "rho_minus", w, c, ic.rho_minus);
                ic.b = number_or(obj, "b", 0.0, w, c);
            }
            s.initial.push_back(std::move(ic));
        };
        if (ij.is_array()) {
            std::size_t idx = 0;
            for (const auto& obj : ij) {
                parse_one(obj, "initial[" + std::to_string(idx++) + "]");
            }
            if (s.tier == ModelTier::Network &&
                s.initial.size() != s.network.markets.size()) {
                c.add("initial: array length must equal the market count");
            }
        } else {
            parse_one(ij, "initial");
        }
    }

    if (j.contains("numerics")) {
        const json& nj = j["numerics"];
        const std::string w = "numerics";
        if (expect_object(nj, w, c)) {
            s.numerics.dr = number_or(nj, "dr", 1e-3, w, c);
            s.numerics.dt = number_or(nj, "dt", 0.0, w, c);
            s.numerics.t_end = number_or(nj, "t_end", 1.0, w, c);
            s.numerics.r_max = number_or(nj, "r_max", 0.0, w, c);
            s.numerics.seed = unsigned_or(nj, "seed", 1, w, c);
            s.numerics.replicas = static_cast<std::size_t>(
                unsigned_or(nj, "replicas", 1, w, c));
            s.numerics.sample_every = static_cast<std::size_t>(
                unsigned_or(nj, "sample_every", 10, w, c));
            s.numerics.intensity =
                number_or(nj, "intensity", 1000.0, w, c);
            s.numerics.bin_width = number_or(nj, "bin_width", 0.05, w, c);
            if (nj.contains("boundary_extraction")) {
                const std::string e =
                    nj["boundary_extraction"].is_string()
                        ? nj["boundary_extraction"].get<std::string>()
                        : "";
                if (e == "first_cell") {
                    s.numerics.extraction = BoundaryExtraction::FirstCell;
                } else if (e == "two_cell") {
                    s.numerics.extraction =
                        BoundaryExtraction::TwoCellExtrapolation;
                } else {
                    c.add("numerics.boundary_extraction: must be "
                          "first_cell|two_cell");
                }
            }
            if (s.numerics.dr <= 0.0) c.add("numerics.dr must be positive");
            if (s.numerics.t_end <= 0.0) {
                c.add("numerics.t_end must be positive");
            }
            if (s.numerics.dt < 0.0) c.add("numerics.dt must be nonnegative");
            if (s.numerics.replicas == 0) {
                c.add("numerics.replicas must be at least 1");
            }
            if (s.numerics.sample_every == 0) {
                c.add("numerics.sample_every must be at least 1");
            }
            if (s.numerics.bin_width <= 0.0) {
                c.add("numerics.bin_width must be positive");
            }
            if (s.numerics.intensity < 0.0) {
                c.add("numerics.intensity must be nonnegative");
            }
        }
    }

    if (j.contains("output")) {
        const json& oj = j["output"];
        if (oj.is_object() && oj.contains("directory") &&
            oj["directory"].is_string()) {
            s.out_dir = oj["directory"].get<std::string>();
        } else if (!oj.is_object()) {
            c.add("output: expected an object");
        }
    }

    if (j.contains("validation")) {
        const json& vj = j["validation"];
        const std::string w = "validation";
        if (expect_object(vj, w, c)) {
            if (vj.contains("persistence") && vj["persistence"].is_boolean()) {
                s.validation.persistence = vj["persistence"].get<bool>();
            }
            if (vj.contains("residuals") && vj["residuals"].is_boolean()) {
                s.validation.residuals = vj["residuals"].get<bool>();
            }
            if (vj.contains("n_ladder")) {
                if (!vj["n_ladder"].is_array()) {
                    c.add(w + ".n_ladder: must be an array of intensities");
                } else {
                    for (const auto& x : vj["n_ladder"]) {
                        if (!x.is_number() || x.get<double>() <= 0.0) {
                            c.add(w + ".n_ladder: entries must be positive "
                                      "numbers");
                            break;
                        }
                        s.validation.n_ladder.push_back(x.get<double>());
                    }
                }
            }
            s.validation.replicas = static_cast<std::size_t>(
                unsigned_or(vj, "replicas", 16, w, c));
            s.validation.drift_tol =
                number_or(vj, "drift_tol", 1e-3, w, c);
            s.validation.beta_tol = number_or(vj, "beta_tol", 1e-6, w, c);
            s.validation.slope_lo = number_or(vj, "slope_lo", -0.7, w, c);
            s.validation.slope_hi = number_or(vj, "slope_hi", -0.3, w, c);
            s.validation.residual_tol =
                number_or(vj, "residual_tol", 1e-5, w, c);
            s.validation.gamma_plus =
                number_or(vj, "gamma_plus", -1.0, w, c);
            s.validation.window = number_or(vj, "window", 0.25, w, c);
        }
    }

    // The time step, when given, must already satisfy the CFL bound.
    if (c.ok() && s.tier != ModelTier::Free && s.numerics.dt > 0.0) {
        if (s.numerics.dt > s.cfl_dt_limit() * (1.0 + 1e-9)) {
            c.add("numerics.dt violates the CFL precomputation (limit " +
                  std::to_string(s.cfl_dt_limit()) + ")");
        }
    }

    out.errors = c.errors;
    return out;
}

double max_value(const CompactRateFunction& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, v);
    return m;
}

} // namespace

const char* tier_name(ModelTier tier) {
    switch (tier) {
        case ModelTier::Free: return "free";
        case ModelTier::Single: return "single";
        case ModelTier::Recycling: return "recycling";
        case ModelTier::Network: return "network";
    }
    return "?";
}

double eval_bumps(const std::vector<GaussianBump>& bumps, double x, double v) {
    double s = 0.0;
    for (const auto& b : bumps) {
        const double ax = (x - b.x_center) / b.x_sigma;
        const double av = (v - b.v_center) / b.v_sigma;
        s += b.amplitude * std::exp(-0.5 * (ax * ax + av * av));
    }
    return s;
}

const MarketParams& Scenario::market_at(std::size_t m) const {
    if (tier == ModelTier::Network) return network.markets.at(m);
    return market;
}

std::size_t Scenario::market_count() const {
    return tier == ModelTier::Network ? network.markets.size() : 1;
}

double Scenario::effective_r_max() const {
    if (numerics.r_max > 0.0) return numerics.r_max;
    double r = 0.0;
    for (std::size_t m = 0; m < market_count(); ++m) {
        r = std::max(r, recommended_r_max(market_at(m), numerics.t_end));
    }
    for (const auto& ic : initial) {
        r = std::max(r, ic.rho_plus.support_radius());
        r = std::max(r, ic.rho_minus.support_radius());
    }
    return r;
}

double Scenario::effective_dt() const {
    return numerics.dt > 0.0 ? numerics.dt : cfl_dt_limit();
}

double Scenario::cfl_dt_limit() const {
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < market_count(); ++m) {
        const MarketParams& p = market_at(m);
        const double speed = p.v_minus - p.v_plus;
        const double mu_max =
            std::max(max_value(p.mu_plus), max_value(p.mu_minus));
        double local = 0.9 * numerics.dr / speed;
        if (mu_max > 0.0) {
            local = std::min(local, 0.9 / mu_max);
            local = std::min(local, 0.999 / (speed / numerics.dr + mu_max));
        }
        dt = std::min(dt, local);
    }
    return dt;
}

std::vector<std::string> validate_scenario_json(const nlohmann::json& j) {
    return parse_impl(j).errors;
}

Scenario parse_scenario(const nlohmann::json& j) {
    ParseOutcome out = parse_impl(j);
    if (!out.errors.empty()) {
        std::string msg;
        for (const std::string& e : out.errors) {
            if (!msg.empty()) msg += '\n';
            msg += e;
        }
        throw ConfigError(msg);
    }
    return std::move(out.scenario);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("scenario JSON parse error: ") +
                          e.what());
    }
    return parse_scenario(j);
}

std::uint64_t config_hash(const nlohmann::json& j) {
    const std::string canonical = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

nlohmann::json run_manifest(const Scenario& s, const std::string& command,
                            double wall_seconds) {
    nlohmann::json m;
    m["tool_version"] = kVersion;
    m["command"] = command;
    m["model_tier"] = tier_name(s.tier);
    std::ostringstream hex;
    hex << std::hex << config_hash(s.raw);
    m["config_hash"] = hex.str();
    m["seed"] = s.numerics.seed;
    m["replicas"] = s.numerics.replicas;
    m["dr"] = s.numerics.dr;
    m["dt"] = s.effective_dt();
    m["t_end"] = s.numerics.t_end;
    m["r_max"] = s.effective_r_max();
    m["wall_seconds"] = wall_seconds;
    return m;
}

nlohmann::json rate_to_json(const CompactRateFunction& f) {
    return nlohmann::json{{"breakpoints", f.breakpoints()},
                          {"values", f.values()}};
}

CompactRateFunction rate_from_json(const nlohmann::json& j) {
    Collector c;
    CompactRateFunction f;
    if (!parse_rate(j, "rate", c, f)) {
        throw ConfigError(c.errors.empty() ? "invalid rate function"
                                           : c.errors.front());
    }
    return f;
}

} // namespace km
