#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackel/funcspace.hpp"

namespace stk {

using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat2 identity2();
Mat2 mul(const Mat2& a, const Mat2& b);
Mat2 inverse(const Mat2& g);
double det(const Mat2& g);

// Row i depends on x^{i+1} only. Row 0 lives on [0, A]; rows 1 and 2 are
// periodic with periods B and C.
struct StackelMatrix {
    std::array<std::array<Expr, 3>, 3> s;
    double A = 2.0;
    double B = 6.283185307179586;
    double C = 6.283185307179586;

    double operator()(int i, int j, double x) const { return s[i][j](x); }
    Jet jet(int i, int j, double x) const { return s[i][j].jet(x); }
    std::array<double, 3> row(int i, double x) const { return {s[i][0](x), s[i][1](x), s[i][2](x)}; }
    Mat3 at(double x1, double x2, double x3) const { return {row(0, x1), row(1, x2), row(2, x3)}; }
    double period(int i) const { return i == 1 ? B : C; }
    SmoothFn1D fn(int i, int j) const;

    nlohmann::json to_json() const;
    static StackelMatrix from_json(const nlohmann::json& j);
};

// det(S) and the first-column cofactors s^{i1}.
struct Minors {
    double det = 0.0;
    std::array<double, 3> m{};
};

Minors minors(const Mat3& v);
// H_i^2 = det(S) / s^{i1}.
std::array<double, 3> metric_coefficients(const Minors& mn);
// Determinant by the rule of Sarrus, independent of the cofactor route.
double sarrus(const Mat3& v);

struct ValidationGrid {
    std::vector<double> x1, x2, x3;
};

// Radial points geometric toward both ends, angular points uniform.
ValidationGrid validation_grid(const StackelMatrix& S, int radial = 64, int angular = 32);
std::vector<double> radial_grid(double A, int n);

struct MetricData {
    StackelMatrix S;
    int sign = 1;
    double cofactor_residual = 0.0;

    Minors minors_at(double x1, double x2, double x3) const { return minors(S.at(x1, x2, x3)); }
    std::array<double, 3> H_sq(double x1, double x2, double x3) const {
        return metric_coefficients(minors_at(x1, x2, x3));
    }
};

MetricData metric(const StackelMatrix& S);

// Columns 2-3 right-multiplied by G.
StackelMatrix apply_column_invariance(const StackelMatrix& S, const Mat2& G);
// First column shifted by C1 * column 2 + C2 * column 3.
StackelMatrix apply_first_column_shift(const StackelMatrix& S, double C1, double C2);

struct NormalizeResult {
    StackelMatrix S;
    Mat2 G = identity2();
    std::vector<std::string> steps;
};

NormalizeResult gauge_normalize(const StackelMatrix& S);

// lim s_{1j} at the radial end x = end (0 or A).
double radial_limit(const Expr& e, double end, double A);

struct RobertsonFactors {
    SmoothFn1D f1, f2, f3;
    double residual = 0.0;
    std::array<double, 3> worst{};
    // max deviation of R along x2 and x3 lines from f2, f3.
    double factor_consistency = 0.0;
};

RobertsonFactors check_robertson(const StackelMatrix& S, double tol = 1e-6);

struct AngularNormalizeResult {
    StackelMatrix S;
    std::array<bool, 2> rescaled{};
    std::array<bool, 2> resampled{};
    double residual = 0.0;
};

// Liouville change in x2 and x3 so that s23 - s22 = s32 - s33 = 1.
AngularNormalizeResult normalize_angular_gauge(const StackelMatrix& S);

struct AHEndReport {
    int end = 0;
    // n = 0 then n = 1 weighted sups for (x^2 s11 - 1, s12 - 1, s13 - 1).
    std::array<double, 6> deviations{};
    double eps0 = 0.0;
    double eps1 = 0.0;
    double bound = 0.0;
    double trend = 0.0;
    bool pass = false;
    std::string reason;
};

std::array<AHEndReport, 2> check_ah_ends(const StackelMatrix& S, double eps0, double eps1, double bound = 100.0);

// Presets: hyperbolic-template, example1, example2, example3.
StackelMatrix make_preset(const std::string& name, const nlohmann::json& params = nlohmann::json::object());
const std::vector<std::string>& preset_names();

// s11 multiplied by (1 + amp * bump((x - center) / width)).
StackelMatrix apply_bump(const StackelMatrix& S, double amp, double center, double width);
// x = phi(y) = y + b sin^3(pi y / A); row 1 becomes old(phi(y)) phi'(y)^2.
StackelMatrix reparametrize_x1(const StackelMatrix& S, double b);
// Row (1 or 2, zero based) scaled by factor > 0 with period divided by sqrt(factor).
StackelMatrix scale_row(const StackelMatrix& S, int row, double factor);
StackelMatrix apply_transform(const StackelMatrix& S, const nlohmann::json& t);

Expr lincomb(double a, const Expr& x, double b, const Expr& y);

}  // namespace stk
