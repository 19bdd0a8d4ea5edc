#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace km {

/// Nonnegative piecewise-linear function of r >= 0 with compact support.
/// The last breakpoint is the support radius R0 and must carry value 0;
/// evaluation beyond R0 is identically 0. Used for arrival intensities,
/// death rates and recycling kernels.
class CompactRateFunction {
  public:
    CompactRateFunction();  // identically zero, R0 = 0
    CompactRateFunction(std::vector<double> breakpoints,
                        std::vector<double> values);

    static CompactRateFunction zero();
    /// Box of the given height on [0, width], closed with a linear ramp of
    /// the given length down to 0 at width (a true jump is not representable).
    static CompactRateFunction box(double height, double width,
                                   double ramp = 1e-12);
    /// Linear decay from value_at_zero at r = 0 to 0 at r = width.
    static CompactRateFunction wedge(double value_at_zero, double width);
    /// Copy of f with all values scaled by factor (factor >= 0).
    static CompactRateFunction scaled(const CompactRateFunction& f,
                                      double factor);

    double operator()(double r) const;
    double support_radius() const { return breakpoints_.back(); }
    bool is_zero() const;

    /// Exact integral over [0, inf) (equals the integral over the support).
    double integral() const { return prefix_.back(); }
    /// Exact integral over [0, r].
    double prefix_integral(double r) const;

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

    /// Invariant violations ("" prefix added by callers); empty means valid.
    std::vector<std::string> validate() const;

  private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::vector<double> prefix_;  // exact running integral at breakpoints

    void build_prefix();
};

/// Inverse-CDF sampler for the density f / integral(f) of a piecewise-linear
/// rate function. Deterministic given the uniform input.
class PiecewiseLinearSampler {
  public:
    explicit PiecewiseLinearSampler(const CompactRateFunction& f);

    bool empty() const { return total_ <= 0.0; }
    double total_mass() const { return total_; }

    /// Maps u in [0, 1) to a radius distributed with density f / total.
    double sample(double u) const;

  private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
    double total_ = 0.0;
};

} // namespace km
