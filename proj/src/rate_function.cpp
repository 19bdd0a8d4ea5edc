#include "km/rate_function.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace km {

CompactRateFunction::CompactRateFunction()
    : breakpoints_{0.0}, values_{0.0}, prefix_{0.0} {}

CompactRateFunction::CompactRateFunction(std::vector<double> breakpoints,
                                         std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
        throw std::invalid_argument(
            "CompactRateFunction: breakpoints and values must be nonempty "
            "and of equal length");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!std::isfinite(breakpoints_[i]) || !std::isfinite(values_[i])) {
            throw std::invalid_argument(
                "CompactRateFunction: non-finite entry");
        }
        if (i > 0 && breakpoints_[i] <= breakpoints_[i - 1]) {
            throw std::invalid_argument(
                "CompactRateFunction: breakpoints must be strictly "
                "increasing");
        }
    }
    build_prefix();
}

void CompactRateFunction::build_prefix() {
    prefix_.assign(breakpoints_.size(), 0.0);
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        const double h = breakpoints_[i] - breakpoints_[i - 1];
        prefix_[i] = prefix_[i - 1] + 0.5 * h * (values_[i] + values_[i - 1]);
    }
}

CompactRateFunction CompactRateFunction::zero() {
    return CompactRateFunction();
}

CompactRateFunction CompactRateFunction::box(double height, double width,
                                             double ramp) {
    if (width <= 0.0) return zero();
    ramp = std::min(ramp, 0.5 * width);
    return CompactRateFunction({0.0, width - ramp, width},
                               {height, height, 0.0});
}

CompactRateFunction CompactRateFunction::wedge(double value_at_zero,
                                               double width) {
    if (width <= 0.0) return zero();
    return CompactRateFunction({0.0, width}, {value_at_zero, 0.0});
}

CompactRateFunction CompactRateFunction::scaled(const CompactRateFunction& f,
                                                double factor) {
    std::vector<double> v = f.values_;
    for (double& x : v) x *= factor;
    CompactRateFunction out;
    out.breakpoints_ = f.breakpoints_;
    out.values_ = std::move(v);
    out.build_prefix();
    return out;
}

double CompactRateFunction::operator()(double r) const {
    if (r <= breakpoints_.front()) {
        return r == breakpoints_.front() ? values_.front() : 0.0;
    }
    if (r >= breakpoints_.back()) return 0.0;
    const auto it =
        std::upper_bound(breakpoints_.begin(), breakpoints_.end(), r);
    const std::size_t hi = static_cast<std::size_t>(it - breakpoints_.begin());
    const std::size_t lo = hi - 1;
    const double t =
        (r - breakpoints_[lo]) / (breakpoints_[hi] - breakpoints_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
}

bool CompactRateFunction::is_zero() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v == 0.0; });
}

double CompactRateFunction::prefix_integral(double r) const {
    if (r <= breakpoints_.front()) return 0.0;
    if (r >= breakpoints_.back()) return prefix_.back();
    const auto it =
        std::upper_bound(breakpoints_.begin(), breakpoints_.end(), r);
    const std::size_t hi = static_cast<std::size_t>(it - breakpoints_.begin());
    const std::size_t lo = hi - 1;
    const double h = r - breakpoints_[lo];
    const double slope =
        (values_[hi] - values_[lo]) / (breakpoints_[hi] - breakpoints_[lo]);
    return prefix_[lo] + values_[lo] * h + 0.5 * slope * h * h;
}

std::vector<std::string> CompactRateFunction::validate() const {
    std::vector<std::string> out;
    if (breakpoints_.front() != 0.0) {
        out.push_back("first breakpoint must be 0");
    }
    if (values_.back() != 0.0) {
        out.push_back("value at the support radius must be 0");
    }
    for (double v : values_) {
        if (v < 0.0) {
            out.push_back("values must be nonnegative");
            break;
        }
    }
    return out;
}

PiecewiseLinearSampler::PiecewiseLinearSampler(const CompactRateFunction& f)
    : breakpoints_(f.breakpoints()), values_(f.values()) {
    cumulative_.assign(breakpoints_.size(), 0.0);
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        const double h = breakpoints_[i] - breakpoints_[i - 1];
        cumulative_[i] =
            cumulative_[i - 1] + 0.5 * h * (values_[i] + values_[i - 1]);
    }
    total_ = cumulative_.back();
}

double PiecewiseLinearSampler::sample(double u) const {
    const double target = u * total_;
    const auto it =
        std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    std::size_t hi = static_cast<std::size_t>(it - cumulative_.begin());
    if (hi == 0) hi = 1;
    if (hi >= cumulative_.size()) hi = cumulative_.size() - 1;
    const std::size_t lo = hi - 1;
    const double seg = breakpoints_[hi] - breakpoints_[lo];
    const double y0 = values_[lo];
    const double slope = (values_[hi] - values_[lo]) / seg;
    const double local = std::max(0.0, target - cumulative_[lo]);
    // Solve y0*t + slope*t^2/2 = local for t in [0, seg].
    double t;
    if (std::abs(slope) * seg < 1e-14 * std::max(y0, 1e-300)) {
        t = y0 > 0.0 ? local / y0 : 0.0;
    } else {
        const double disc = y0 * y0 + 2.0 * slope * local;
        t = disc > 0.0 ? (-y0 + std::sqrt(disc)) / slope : -y0 / slope;
    }
    t = std::clamp(t, 0.0, seg);
    return breakpoints_[lo] + t;
}

} // namespace km
