#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stackel/expr.hpp"

namespace stk {

// A smooth real function on a closed interval, optionally periodic.
class SmoothFn1D {
public:
    SmoothFn1D() = default;
    SmoothFn1D(Expr f, double lo, double hi, std::optional<double> period = std::nullopt);

    double operator()(double x) const { return f_(reduce(x)); }
    Jet jet(double x) const { return f_.jet(reduce(x)); }
    // (f, f', ..., f^(k)) for k <= 2.
    std::vector<double> eval_with_derivs(double x, int k) const;

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    bool periodic() const { return period_.has_value(); }
    std::optional<double> period() const { return period_; }
    const Expr& expr() const { return f_; }

    // Periodic functions wrap into [lo, lo + period); others throw outside [lo, hi].
    double reduce(double x) const;

private:
    Expr f_{0.0};
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::optional<double> period_;
};

// Liouville coordinate X = g(x) = int_lo^x sqrt(weight).
class LiouvilleChart {
public:
    explicit LiouvilleChart(SmoothFn1D weight, double rel_tol = 1e-12);

    double forward(double x) const;
    // int_x^hi sqrt(weight), accurate near the right end.
    double from_right(double x) const;
    double inverse(double X) const;
    double length() const { return length_; }
    double lo() const { return weight_.lo(); }
    double hi() const { return weight_.hi(); }
    const SmoothFn1D& weight() const { return weight_; }

private:
    double panel_integral(double a, double b) const;
    std::size_t panel_of(double x) const;

    SmoothFn1D weight_;
    double rel_tol_;
    std::vector<double> nodes_;
    std::vector<double> cum_;
    double length_ = 0.0;
};

// Chart-variable terms ((log f)'^2/16, (log f)''/4) given the x-jet of log f
// and the x-jet of the chart weight w (dX/dx = sqrt(w)).
std::pair<double, double> schwarzian_terms(const Jet& log_f, const Jet& w);

// Both terms as functions of the chart variable on [0, length].
std::pair<SmoothFn1D, SmoothFn1D> pushforward_potential_terms(const LiouvilleChart& chart, const SmoothFn1D& f);

}  // namespace stk
