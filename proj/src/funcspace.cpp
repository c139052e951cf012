#include "stackel/funcspace.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stackel/errors.hpp"

namespace stk {

SmoothFn1D::SmoothFn1D(Expr f, double lo, double hi, std::optional<double> period)
    : f_(std::move(f)), lo_(lo), hi_(hi), period_(period) {
    if (!(hi > lo)) throw StackelError("domain", "empty function domain");
    if (period_ && !(*period_ > 0.0)) throw StackelError("domain", "period must be positive");
}

double SmoothFn1D::reduce(double x) const {
    if (period_) {
        double p = *period_;
        if (x >= lo_ && x < lo_ + p) return x;
        double t = std::fmod(x - lo_, p);
        if (t < 0.0) t += p;
        return lo_ + t;
    }
    double slack = 1e-12 * (hi_ - lo_);
    if (!(x >= lo_ - slack && x <= hi_ + slack))
        throw StackelError("domain", "point " + std::to_string(x) + " outside [" + std::to_string(lo_) + ", " +
                                         std::to_string(hi_) + "]");
    return std::clamp(x, lo_, hi_);
}

std::vector<double> SmoothFn1D::eval_with_derivs(double x, int k) const {
    if (k < 0 || k > 2) throw StackelError("domain", "derivative order must be 0, 1 or 2");
    Jet j = jet(x);
    std::vector<double> out{j.v, j.d1, j.d2};
    out.resize(static_cast<std::size_t>(k) + 1);
    return out;
}

LiouvilleChart::LiouvilleChart(SmoothFn1D weight, double rel_tol) : weight_(std::move(weight)), rel_tol_(rel_tol) {
    const double a = weight_.lo(), b = weight_.hi(), span = b - a;
    constexpr int uniform = 32;
    constexpr int refine = 24;
    std::vector<double> nodes;
    for (int i = 0; i <= uniform; ++i) nodes.push_back(a + span * i / uniform);
    for (int k = 1; k <= refine; ++k) {
        double d = span / uniform * std::ldexp(1.0, -k);
        nodes.push_back(a + d);
        nodes.push_back(b - d);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes_ = nodes;
    cum_.assign(nodes_.size(), 0.0);
    for (std::size_t i = 1; i < nodes_.size(); ++i) cum_[i] = cum_[i - 1] + panel_integral(nodes_[i - 1], nodes_[i]);
    length_ = cum_.back();
    if (!(length_ > 0.0)) throw StackelError("positivity", "chart length is not positive");
}

double LiouvilleChart::panel_integral(double a, double b) const {
    if (b == a) return 0.0;
    // integrate over the unit interval; the error estimate is unreliable on very narrow panels
    const double h = b - a;
    auto f = [this, a, h](double s) {
        double t = a + h * s;
        double w = weight_(t);
        if (!(w > 0.0)) throw StackelError("positivity", "chart weight non-positive at x = " + std::to_string(t));
        return std::sqrt(w);
    };
    using boost::math::quadrature::gauss_kronrod;
    return h * gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 12, rel_tol_);
}

std::size_t LiouvilleChart::panel_of(double x) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return std::min(i, nodes_.size() - 2);
}

double LiouvilleChart::forward(double x) const {
    x = weight_.reduce(x);
    std::size_t i = panel_of(x);
    return cum_[i] + panel_integral(nodes_[i], x);
}

double LiouvilleChart::from_right(double x) const {
    x = weight_.reduce(x);
    std::size_t i = panel_of(x);
    return (length_ - cum_[i + 1]) + panel_integral(x, nodes_[i + 1]);
}

double LiouvilleChart::inverse(double X) const {
    if (X <= 0.0) return lo();
    if (X >= length_) return hi();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), X);
    std::size_t i = std::min(static_cast<std::size_t>(it - cum_.begin()) - 1, nodes_.size() - 2);
    double a = nodes_[i], b = nodes_[i + 1];
    double ga = cum_[i], gb = cum_[i + 1];
    double x = a + (b - a) * (X - ga) / (gb - ga);
    for (int iter = 0; iter < 60; ++iter) {
        double g = cum_[i] + panel_integral(nodes_[i], x) - X;
        if (g > 0.0) b = x; else a = x;
        double step = g / std::sqrt(weight_(x));
        double next = x - step;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - x) <= 1e-15 * (std::abs(x) + (hi() - lo()) * 1e-3)) return next;
        x = next;
    }
    return x;
}

std::pair<double, double> schwarzian_terms(const Jet& log_f, const Jet& w) {
    double dX = log_f.d1 / std::sqrt(w.v);
    double ddX = log_f.d2 / w.v - log_f.d1 * w.d1 / (2.0 * w.v * w.v);
    return {dX * dX / 16.0, ddX / 4.0};
}

std::pair<SmoothFn1D, SmoothFn1D> pushforward_potential_terms(const LiouvilleChart& chart, const SmoothFn1D& f) {
    auto chart_ptr = std::make_shared<LiouvilleChart>(chart);
    auto terms = [chart_ptr, f](double X) {
        double x = chart_ptr->inverse(X);
        Jet fj = f.jet(x);
        if (!(fj.v > 0.0)) throw StackelError("positivity", "log argument non-positive at x = " + std::to_string(x));
        return schwarzian_terms(log(fj), chart_ptr->weight().jet(x));
    };
    Expr t1 = Expr::callable([terms](double X) { return terms(X).first; });
    Expr t2 = Expr::callable([terms](double X) { return terms(X).second; });
    double L = chart.length();
    return {SmoothFn1D(t1, 0.0, L), SmoothFn1D(t2, 0.0, L)};
}

}  // namespace stk
