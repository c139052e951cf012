#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackel/jet.hpp"

namespace stk {

class Node;

// Immutable expression tree in one real variable. Values and two derivatives
// are exact for every node except Callable, which falls back to Richardson
// extrapolated central differences.
class Expr {
public:
    Expr();
    Expr(double c);  // NOLINT(google-explicit-constructor)
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static Expr x();
    static Expr callable(std::function<double(double)> f);
    // Cubic spline through (knots, values); periodic splines require
    // values.front() == values.back(). deriv selects s (0) or s' (1).
    static Expr spline(std::vector<double> knots, std::vector<double> values, bool periodic, int deriv = 0);

    double operator()(double x) const;
    Jet jet(double x) const;

    // f.compose(g) is f(g(x)).
    Expr compose(const Expr& inner) const;

    bool serializable() const;
    bool is_constant() const;
    double constant_value() const;

    nlohmann::json to_json() const;
    static Expr from_json(const nlohmann::json& j);

    const Node& node() const { return *node_; }

private:
    std::shared_ptr<const Node> node_;
};

class Node {
public:
    virtual ~Node() = default;
    virtual double value(double x) const = 0;
    virtual Jet jet(double x) const = 0;
    virtual nlohmann::json to_json() const = 0;
    virtual bool serializable() const { return true; }
    virtual bool is_constant() const { return false; }
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

Expr sqrt(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr pow(const Expr& a, double p);
// Smooth compactly supported bump exp(-1/(1-u^2)) on |u| < 1.
Expr bump(const Expr& u);

// Central differences with Richardson extrapolation, step max(1e-5, 1e-4|x|).
Jet finite_difference_jet(const std::function<double(double)>& f, double x);

}  // namespace stk
