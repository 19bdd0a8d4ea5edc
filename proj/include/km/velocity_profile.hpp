#pragma once

#include <string>
#include <vector>

namespace km {

/// Piecewise-linear boundary-trace density f(0, v) over v in [-v0, v0],
/// zero for |v| >= v0. Used by the flux-balance root finder.
class VelocityProfile {
  public:
    VelocityProfile();  // identically zero with v0 = 1
    VelocityProfile(std::vector<double> velocities, std::vector<double> values,
                    double v0);

    /// Narrow triangle of unit-normalized shape carrying the given mass,
    /// centered at v (a delta-velocity stand-in).
    static VelocityProfile delta_like(double v, double mass, double half_width,
                                      double v0);

    double operator()(double v) const;
    double v0() const { return v0_; }
    double mass() const;
    bool is_zero() const;

    const std::vector<double>& velocities() const { return velocities_; }
    const std::vector<double>& values() const { return values_; }

    std::vector<std::string> validate() const;

  private:
    std::vector<double> velocities_;
    std::vector<double> values_;
    double v0_;
};

} // namespace km
