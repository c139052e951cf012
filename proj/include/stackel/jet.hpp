#pragma once

#include <cmath>

namespace stk {

// Value with first and second derivative, propagated by the chain rule.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;

    static Jet constant(double c) { return {c, 0.0, 0.0}; }
    static Jet variable(double x) { return {x, 1.0, 0.0}; }
};

inline Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Jet operator-(const Jet& a) { return {-a.v, -a.d1, -a.d2}; }

inline Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}

inline Jet operator*(double s, const Jet& a) { return {s * a.v, s * a.d1, s * a.d2}; }
inline Jet operator*(const Jet& a, double s) { return s * a; }
inline Jet operator+(const Jet& a, double s) { return {a.v + s, a.d1, a.d2}; }
inline Jet operator+(double s, const Jet& a) { return a + s; }
inline Jet operator-(const Jet& a, double s) { return {a.v - s, a.d1, a.d2}; }
inline Jet operator-(double s, const Jet& a) { return {s - a.v, -a.d1, -a.d2}; }

// Apply a scalar function given f(v), f'(v), f''(v).
inline Jet chain(const Jet& a, double f0, double f1, double f2) {
    return {f0, f1 * a.d1, f2 * a.d1 * a.d1 + f1 * a.d2};
}

inline Jet recip(const Jet& a) {
    double r = 1.0 / a.v;
    return chain(a, r, -r * r, 2.0 * r * r * r);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * recip(b); }
inline Jet operator/(const Jet& a, double s) { return {a.v / s, a.d1 / s, a.d2 / s}; }
inline Jet operator/(double s, const Jet& a) { return s * recip(a); }

inline Jet sqrt(const Jet& a) {
    double r = std::sqrt(a.v);
    return chain(a, r, 0.5 / r, -0.25 / (r * a.v));
}

inline Jet exp(const Jet& a) {
    double e = std::exp(a.v);
    return chain(a, e, e, e);
}

inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }

inline Jet sin(const Jet& a) {
    double s = std::sin(a.v), c = std::cos(a.v);
    return chain(a, s, c, -s);
}

inline Jet cos(const Jet& a) {
    double s = std::sin(a.v), c = std::cos(a.v);
    return chain(a, c, -s, -c);
}

inline Jet pow(const Jet& a, double p) {
    double f0 = std::pow(a.v, p);
    double f1 = p * std::pow(a.v, p - 1.0);
    double f2 = p * (p - 1.0) * std::pow(a.v, p - 2.0);
    return chain(a, f0, f1, f2);
}

}  // namespace stk
