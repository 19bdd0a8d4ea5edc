#include "km/velocity_profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace km {

VelocityProfile::VelocityProfile()
    : velocities_{-1.0, 1.0}, values_{0.0, 0.0}, v0_(1.0) {}

VelocityProfile::VelocityProfile(std::vector<double> velocities,
                                 std::vector<double> values, double v0)
    : velocities_(std::move(velocities)), values_(std::move(values)), v0_(v0) {
    if (velocities_.size() < 2 || velocities_.size() != values_.size()) {
        throw std::invalid_argument(
            "VelocityProfile: need matching velocity/value samples");
    }
    for (std::size_t i = 1; i < velocities_.size(); ++i) {
        if (velocities_[i] <= velocities_[i - 1]) {
            throw std::invalid_argument(
                "VelocityProfile: velocities must be strictly increasing");
        }
    }
}

VelocityProfile VelocityProfile::delta_like(double v, double mass,
                                            double half_width, double v0) {
    const double peak = mass / half_width;  // triangle area = mass
    return VelocityProfile({v - half_width, v, v + half_width},
                           {0.0, peak, 0.0}, v0);
}

double VelocityProfile::operator()(double v) const {
    if (std::abs(v) >= v0_) return 0.0;
    if (v <= velocities_.front() || v >= velocities_.back()) {
        return v == velocities_.front()
                   ? values_.front()
                   : (v == velocities_.back() ? values_.back() : 0.0);
    }
    const auto it =
        std::upper_bound(velocities_.begin(), velocities_.end(), v);
    const std::size_t hi = static_cast<std::size_t>(it - velocities_.begin());
    const std::size_t lo = hi - 1;
    const double t =
        (v - velocities_[lo]) / (velocities_[hi] - velocities_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
}

double VelocityProfile::mass() const {
    double m = 0.0;
    for (std::size_t i = 1; i < velocities_.size(); ++i) {
        m += 0.5 * (values_[i] + values_[i - 1]) *
             (velocities_[i] - velocities_[i - 1]);
    }
    return m;
}

bool VelocityProfile::is_zero() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v == 0.0; });
}

std::vector<std::string> VelocityProfile::validate() const {
    std::vector<std::string> out;
    if (!(v0_ > 0.0)) out.push_back("v0 must be positive");
    for (double v : values_) {
        if (v < 0.0) {
            out.push_back("values must be nonnegative");
            break;
        }
    }
    for (std::size_t i = 0; i < velocities_.size(); ++i) {
        if (std::abs(velocities_[i]) >= v0_ && values_[i] != 0.0) {
            out.push_back("profile must vanish for |v| >= v0");
            break;
        }
    }
    return out;
}

} // namespace km
