#include "km/market.hpp"

#include <algorithm>
#include <cmath>

namespace km {

namespace {

constexpr double kMassSlack = 1e-12;

void append_rate_violations(const CompactRateFunction& f, const char* name,
                            std::vector<std::string>& out) {
    for (const std::string& v : f.validate()) {
        out.push_back(std::string(name) + ": " + v);
    }
}

} // namespace

double MarketParams::support_radius() const {
    double r0 = std::max(lambda_plus.support_radius(),
                         lambda_minus.support_radius());
    r0 = std::max(r0, mu_plus.support_radius());
    r0 = std::max(r0, mu_minus.support_radius());
    if (p_minus_plus) r0 = std::max(r0, p_minus_plus->support_radius());
    if (p_plus_minus) r0 = std::max(r0, p_plus_minus->support_radius());
    return r0;
}

std::vector<std::string> validate_market(const MarketParams& p) {
    std::vector<std::string> out;
    if (!(p.v_plus < 0.0)) {
        out.push_back("v_plus must be negative (sellers drift toward the "
                      "boundary from above)");
    }
    if (!(p.v_minus > 0.0)) {
        out.push_back("v_minus must be positive (buyers drift toward the "
                      "boundary from below)");
    }
    if (!std::isfinite(p.v_plus) || !std::isfinite(p.v_minus)) {
        out.push_back("velocities must be finite");
    }
    append_rate_violations(p.lambda_plus, "lambda_plus", out);
    append_rate_violations(p.lambda_minus, "lambda_minus", out);
    append_rate_violations(p.mu_plus, "mu_plus", out);
    append_rate_violations(p.mu_minus, "mu_minus", out);
    if (p.p_minus_plus) {
        append_rate_violations(*p.p_minus_plus, "p_minus_plus", out);
        if (p.p_minus_plus->integral() > 1.0 + kMassSlack) {
            out.push_back("p_minus_plus: recycling mass exceeds 1");
        }
    }
    if (p.p_plus_minus) {
        append_rate_violations(*p.p_plus_minus, "p_plus_minus", out);
        if (p.p_plus_minus->integral() > 1.0 + kMassSlack) {
            out.push_back("p_plus_minus: recycling mass exceeds 1");
        }
    }
    return out;
}

const CompactRateFunction* NetworkSpec::kernel_minus_plus(
    std::size_t k, std::size_t m) const {
    if (k >= routing.size() || m >= routing[k].size()) return nullptr;
    const auto& opt = routing[k][m].minus_plus;
    return opt ? &*opt : nullptr;
}

const CompactRateFunction* NetworkSpec::kernel_plus_minus(
    std::size_t k, std::size_t m) const {
    if (k >= routing.size() || m >= routing[k].size()) return nullptr;
    const auto& opt = routing[k][m].plus_minus;
    return opt ? &*opt : nullptr;
}

std::vector<std::string> validate_network(const NetworkSpec& spec) {
    std::vector<std::string> out;
    if (spec.markets.empty()) {
        out.push_back("network must contain at least one market");
        return out;
    }
    for (std::size_t m = 0; m < spec.markets.size(); ++m) {
        const std::string tag = "market[" + std::to_string(m) + "] ";
        for (const std::string& v : validate_market(spec.markets[m])) {
            out.push_back(tag + v);
        }
        if (spec.markets[m].has_recycling()) {
            out.push_back(tag + "per-market recycling kernels are not used "
                          "in a network; route via the routing matrix");
        }
    }
    if (!spec.routing.empty()) {
        if (spec.routing.size() != spec.markets.size()) {
            out.push_back("routing matrix row count must equal |V|");
            return out;
        }
        for (std::size_t k = 0; k < spec.routing.size(); ++k) {
            if (spec.routing[k].size() != spec.markets.size()) {
                out.push_back("routing matrix must be square (row " +
                              std::to_string(k) + ")");
                return out;
            }
            double mass_mp = 0.0;
            double mass_pm = 0.0;
            for (std::size_t m = 0; m < spec.routing[k].size(); ++m) {
                const std::string tag = "routing[" + std::to_string(k) + "][" +
                                        std::to_string(m) + "] ";
                if (const auto* f = spec.kernel_minus_plus(k, m)) {
                    append_rate_violations(*f, (tag + "minus_plus").c_str(),
                                           out);
                    mass_mp += f->integral();
                }
                if (const auto* f = spec.kernel_plus_minus(k, m)) {
                    append_rate_violations(*f, (tag + "plus_minus").c_str(),
                                           out);
                    mass_pm += f->integral();
                }
            }
            if (mass_mp > 1.0 + kMassSlack) {
                out.push_back("routing row " + std::to_string(k) +
                              ": total minus->plus mass exceeds 1");
            }
            if (mass_pm > 1.0 + kMassSlack) {
                out.push_back("routing row " + std::to_string(k) +
                              ": total plus->minus mass exceeds 1");
            }
        }
    }
    return out;
}

} // namespace km
