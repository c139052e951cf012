#include "stackel/stackel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "stackel/errors.hpp"

namespace stk {

using nlohmann::json;

Mat2 identity2() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

Mat2 mul(const Mat2& a, const Mat2& b) {
    Mat2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

double det(const Mat2& g) { return g[0][0] * g[1][1] - g[0][1] * g[1][0]; }

Mat2 inverse(const Mat2& g) {
    double d = det(g);
    if (d == 0.0) throw StackelError("invalid-gauge", "singular 2x2 matrix");
    return {{{g[1][1] / d, -g[0][1] / d}, {-g[1][0] / d, g[0][0] / d}}};
}

Expr lincomb(double a, const Expr& x, double b, const Expr& y) {
    auto term = [](double c, const Expr& e) -> std::optional<Expr> {
        if (c == 0.0) return std::nullopt;
        if (e.is_constant()) {
            double v = c * e.constant_value();
            if (v == 0.0) return std::nullopt;
            return Expr(v);
        }
        if (c == 1.0) return e;
        if (c == -1.0) return -e;
        return Expr(c) * e;
    };
    auto tx = term(a, x), ty = term(b, y);
    if (!tx && !ty) return Expr(0.0);
    if (!tx) return *ty;
    if (!ty) return *tx;
    if (tx->is_constant() && ty->is_constant()) return Expr(tx->constant_value() + ty->constant_value());
    return *tx + *ty;
}

SmoothFn1D StackelMatrix::fn(int i, int j) const {
    if (i == 0) return SmoothFn1D(s[0][j], 0.0, A);
    double p = period(i);
    return SmoothFn1D(s[i][j], 0.0, p, p);
}

json StackelMatrix::to_json() const {
    json rows = json::array();
    for (const auto& r : s) {
        json row = json::array();
        for (const auto& e : r) row.push_back(e.to_json());
        rows.push_back(row);
    }
    return {{"A", A}, {"B", B}, {"C", C}, {"rows", rows}};
}

StackelMatrix StackelMatrix::from_json(const json& j) {
    StackelMatrix S;
    S.A = j.at("A").get<double>();
    S.B = j.at("B").get<double>();
    S.C = j.at("C").get<double>();
    const auto& rows = j.at("rows");
    if (rows.size() != 3) throw StackelError("config", "matrix needs three rows");
    for (int i = 0; i < 3; ++i) {
        if (rows[i].size() != 3) throw StackelError("config", "matrix rows need three entries");
        for (int k = 0; k < 3; ++k) S.s[i][k] = Expr::from_json(rows[i][k]);
    }
    return S;
}

Minors minors(const Mat3& v) {
    Minors r;
    r.m[0] = v[1][1] * v[2][2] - v[1][2] * v[2][1];
    double m12 = -(v[1][0] * v[2][2] - v[1][2] * v[2][0]);
    double m13 = v[1][0] * v[2][1] - v[1][1] * v[2][0];
    r.m[1] = v[0][2] * v[2][1] - v[0][1] * v[2][2];
    r.m[2] = v[0][1] * v[1][2] - v[0][2] * v[1][1];
    r.det = v[0][0] * r.m[0] + v[0][1] * m12 + v[0][2] * m13;
    return r;
}

std::array<double, 3> metric_coefficients(const Minors& mn) {
    return {mn.det / mn.m[0], mn.det / mn.m[1], mn.det / mn.m[2]};
}

double sarrus(const Mat3& v) {
    return v[0][0] * v[1][1] * v[2][2] + v[0][1] * v[1][2] * v[2][0] + v[0][2] * v[1][0] * v[2][1] -
           v[0][2] * v[1][1] * v[2][0] - v[0][0] * v[1][2] * v[2][1] - v[0][1] * v[1][0] * v[2][2];
}

std::vector<double> radial_grid(double A, int n) {
    int half = n / 2;
    std::vector<double> x;
    for (int k = 0; k < half; ++k) {
        double d = 0.5 * A * std::pow(10.0, -6.0 * (k + 0.5) / half);
        x.push_back(d);
        x.push_back(A - d);
    }
    std::sort(x.begin(), x.end());
    return x;
}

namespace {

std::vector<double> uniform_grid(double P, int n) {
    std::vector<double> x(n);
    for (int j = 0; j < n; ++j) x[j] = P * (j + 0.5) / n;
    return x;
}

std::string point_str(double a, double b, double c) {
    std::ostringstream os;
    os.precision(6);
    os << "(" << a << ", " << b << ", " << c << ")";
    return os.str();
}

std::vector<std::array<double, 3>> sample_row(const StackelMatrix& S, int i, const std::vector<double>& xs) {
    std::vector<std::array<double, 3>> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(S.row(i, x));
    return out;
}

}  // namespace

ValidationGrid validation_grid(const StackelMatrix& S, int radial, int angular) {
    return {radial_grid(S.A, radial), uniform_grid(S.B, angular), uniform_grid(S.C, angular)};
}

MetricData metric(const StackelMatrix& S) {
    ValidationGrid g = validation_grid(S);
    auto r1 = sample_row(S, 0, g.x1), r2 = sample_row(S, 1, g.x2), r3 = sample_row(S, 2, g.x3);
    MetricData md{S, 0, 0.0};
    auto check = [&](double v, const char* what, double a, double b, double c) {
        int sg = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        if (!std::isfinite(v) || sg == 0 || (md.sign != 0 && sg != md.sign))
            throw StackelError("non-riemannian",
                               std::string(what) + " breaks the common strict sign at " + point_str(a, b, c));
        md.sign = sg;
    };
    for (std::size_t a = 0; a < g.x1.size(); ++a)
        for (std::size_t b = 0; b < g.x2.size(); ++b)
            for (std::size_t c = 0; c < g.x3.size(); ++c) {
                Mat3 v{r1[a], r2[b], r3[c]};
                Minors mn = minors(v);
                check(mn.det, "det(S)", g.x1[a], g.x2[b], g.x3[c]);
                for (int i = 0; i < 3; ++i) check(mn.m[i], "minor s^{i1}", g.x1[a], g.x2[b], g.x3[c]);
                double scale = std::abs(v[0][0] * mn.m[0]) + std::abs(v[0][1] * (v[1][2] * v[2][0] - v[1][0] * v[2][2])) +
                               std::abs(v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0]));
                double res = std::abs(mn.det - sarrus(v)) / scale;
                md.cofactor_residual = std::max(md.cofactor_residual, res);
            }
    if (md.cofactor_residual > 1e-10)
        throw StackelError("non-riemannian", "cofactor identity violated by " + std::to_string(md.cofactor_residual));
    return md;
}

StackelMatrix apply_column_invariance(const StackelMatrix& S, const Mat2& G) {
    if (std::abs(det(G)) < 1e-14 * (std::abs(G[0][0]) + std::abs(G[0][1]) + std::abs(G[1][0]) + std::abs(G[1][1])))
        throw StackelError("invalid-gauge", "column transform must be invertible");
    StackelMatrix R = S;
    for (int i = 0; i < 3; ++i) {
        const Expr& a = S.s[i][1];
        const Expr& b = S.s[i][2];
        R.s[i][1] = lincomb(G[0][0], a, G[1][0], b);
        R.s[i][2] = lincomb(G[0][1], a, G[1][1], b);
    }
    return R;
}

StackelMatrix apply_first_column_shift(const StackelMatrix& S, double C1, double C2) {
    StackelMatrix R = S;
    for (int i = 0; i < 3; ++i)
        R.s[i][0] = lincomb(1.0, S.s[i][0], 1.0, lincomb(C1, S.s[i][1], C2, S.s[i][2]));
    return R;
}

double radial_limit(const Expr& e, double end, double A) {
    double v = e(end);
    if (std::isfinite(v)) return v;
    double d = 1e-12 * A;
    return e(end == 0.0 ? d : A - d);
}

// ---------------------------------------------------------------------------
// Condition (C) normalization

namespace {

struct SignClass {
    int sign = 0;       // +1, -1, or 0 when identically zero
    bool strict = true;  // false when the coefficient touches zero
};

struct Samples {
    // v[i] holds (s_i2, s_i3) along row i's grid.
    std::array<std::vector<std::array<double, 2>>, 3> v;
};

Samples sample_columns(const StackelMatrix& S) {
    ValidationGrid g = validation_grid(S);
    std::array<const std::vector<double>*, 3> xs{&g.x1, &g.x2, &g.x3};
    Samples out;
    for (int i = 0; i < 3; ++i)
        for (double x : *xs[i]) out.v[i].push_back({S(i, 1, x), S(i, 2, x)});
    return out;
}

SignClass classify(const std::vector<std::array<double, 2>>& v, int col, int row) {
    double maxabs = 0.0;
    for (const auto& p : v) maxabs = std::max(maxabs, std::abs(p[col]));
    double tol = 1e-12 * maxabs;
    bool pos = false, neg = false, zero = false;
    for (const auto& p : v) {
        if (p[col] > tol) pos = true;
        else if (p[col] < -tol) neg = true;
        else zero = true;
    }
    if (pos && neg)
        throw StackelError("not-stackel-riemannian", "coefficient s_" + std::to_string(row + 1) +
                                                         std::to_string(col + 2) + " changes sign on the grid");
    if (!pos && !neg) return {0, false};
    return {pos ? 1 : -1, !zero};
}

std::array<std::array<SignClass, 2>, 3> classify_all(const Samples& s) {
    std::array<std::array<SignClass, 2>, 3> c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) c[i][j] = classify(s.v[i], j, i);
    return c;
}

bool all_strict(const std::array<std::array<SignClass, 2>, 3>& c) {
    for (const auto& r : c)
        for (const auto& e : r)
            if (!e.strict || e.sign == 0) return false;
    return true;
}

bool condition_c_signs(const std::array<std::array<SignClass, 2>, 3>& c) {
    return all_strict(c) && c[0][0].sign > 0 && c[0][1].sign > 0 && c[1][0].sign < 0 && c[1][1].sign > 0 &&
           c[2][0].sign > 0 && c[2][1].sign < 0;
}

// Step 2: G = [[a, g12], [g21, b]] turning vanishing coefficients strict.
Mat2 step2_gauge(const Samples& s, const std::array<std::array<SignClass, 2>, 3>& c) {
    double qa = 0.0, qb = 0.0;
    int vanish2 = -1, vanish3 = -1;
    for (int i = 0; i < 3; ++i) {
        if (c[i][0].strict) {
            for (const auto& p : s.v[i]) qa = std::max(qa, std::abs(p[1] / p[0]));
        } else {
            vanish2 = i;
        }
        if (c[i][1].strict) {
            for (const auto& p : s.v[i]) qb = std::max(qb, std::abs(p[0] / p[1]));
        } else {
            vanish3 = i;
        }
    }
    double a = std::max(2.0, 2.0 * qa), b = std::max(2.0, 2.0 * qb);
    auto sgn = [](int v) { return v == 0 ? 1.0 : static_cast<double>(v); };
    double g21 = 1.0, g12 = 1.0;
    if (vanish2 >= 0) g21 = sgn(c[vanish2][0].sign) * sgn(c[vanish2][1].sign);
    if (vanish3 >= 0) g12 = sgn(c[vanish3][1].sign) * sgn(c[vanish3][0].sign);
    if (vanish2 < 0 && vanish3 >= 0) g21 = g12;
    if (vanish3 < 0 && vanish2 >= 0) g12 = g21;
    return {{{a, g12}, {g21, b}}};
}

int quadrant(const SignClass& c2, const SignClass& c3) {
    if (c2.sign > 0 && c3.sign > 0) return 0;
    if (c2.sign < 0 && c3.sign > 0) return 1;
    if (c2.sign < 0 && c3.sign < 0) return 2;
    return 3;
}

double wrap_angle(double a) {
    constexpr double tau = 2.0 * std::numbers::pi;
    a = std::fmod(a, tau);
    if (a < 0) a += tau;
    return a;
}

struct Arc {
    double start = 0.0;
    double len = 0.0;
};

Arc row_sector(const std::vector<std::array<double, 2>>& v) {
    double ref = std::atan2(v.front()[1], v.front()[0]);
    double lo = 0.0, hi = 0.0;
    for (const auto& p : v) {
        double d = std::remainder(std::atan2(p[1], p[0]) - ref, 2.0 * std::numbers::pi);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {wrap_angle(ref + lo), hi - lo};
}

Arc gap_between(const Arc& a, const Arc& b) {
    double end = a.start + a.len;
    return {wrap_angle(end), wrap_angle(b.start - end)};
}

std::optional<Arc> intersect(const Arc& a, const Arc& b) {
    constexpr double tau = 2.0 * std::numbers::pi;
    double t = wrap_angle(b.start - a.start);
    Arc best{0.0, -1.0};
    for (double shift : {t, t - tau}) {
        double lo = std::max(0.0, shift), hi = std::min(a.len, shift + b.len);
        if (hi - lo > best.len) best = {wrap_angle(a.start + lo), hi - lo};
    }
    if (best.len <= 0.0) return std::nullopt;
    return best;
}

// Generic Step 3: map the row sectors into the quadrants of condition (C).
std::optional<Mat2> sector_gauge(const Samples& s) {
    Arc k1 = row_sector(s.v[0]), k2 = row_sector(s.v[1]), k3 = row_sector(s.v[2]);
    Arc g31 = gap_between(k3, k1), g12 = gap_between(k1, k2), g23 = gap_between(k2, k3);
    Arc opposite{wrap_angle(g23.start + std::numbers::pi), g23.len};
    auto i0 = intersect(g31, opposite), i1 = intersect(g12, opposite);
    if (!i0 || !i1) return std::nullopt;
    double a0 = i0->start + 0.5 * i0->len, a1 = i1->start + 0.5 * i1->len;
    double d0x = std::cos(a0), d0y = std::sin(a0), d1x = std::cos(a1), d1y = std::sin(a1);
    double dd = d0x * d1y - d1x * d0y;
    if (!(dd > 0.0)) return std::nullopt;
    // T = [d0 d1]^{-1}; G = T^T.
    Mat2 T{{{d1y / dd, -d1x / dd}, {-d0y / dd, d0x / dd}}};
    return Mat2{{{T[0][0], T[1][0]}, {T[0][1], T[1][1]}}};
}

double min_ratio(const std::vector<std::array<double, 2>>& v, int num, int den) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : v) m = std::min(m, p[num] / p[den]);
    return m;
}

double max_ratio(const std::vector<std::array<double, 2>>& v, int num, int den) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : v) m = std::max(m, p[num] / p[den]);
    return m;
}

}  // namespace

NormalizeResult gauge_normalize(const StackelMatrix& S) {
    MetricData md = metric(S);
    NormalizeResult res{S, identity2(), {}};
    auto apply = [&](const Mat2& G, const std::string& what) {
        res.S = apply_column_invariance(res.S, G);
        res.G = mul(res.G, G);
        res.steps.push_back(what);
    };
    if (md.sign < 0) apply({{{0.0, 1.0}, {1.0, 0.0}}}, "orientation swap");

    Samples smp = sample_columns(res.S);
    auto cls = classify_all(smp);
    if (!all_strict(cls)) {
        apply(step2_gauge(smp, cls), "step 2 vanishing coefficients");
        smp = sample_columns(res.S);
        cls = classify_all(smp);
        if (!all_strict(cls))
            throw StackelError("normalization-failure", "coefficients still vanish after step 2");
    }

    if (!condition_c_signs(cls)) {
        int q = quadrant(cls[0][0], cls[0][1]);
        if (q != 0) {
            Mat2 R = identity2();
            const Mat2 ccw{{{0.0, 1.0}, {-1.0, 0.0}}};
            for (int k = 0; k < (4 - q) % 4; ++k) R = mul(R, ccw);
            apply(R, "quarter-turn rotation");
            smp = sample_columns(res.S);
            cls = classify_all(smp);
        }
    }

    if (!condition_c_signs(cls)) {
        bool listed = cls[1][0].sign < 0 && cls[2][0].sign > 0 && cls[1][1].sign < 0;
        if (listed) {
            double lo = max_ratio(smp.v[0], 0, 1);
            double hi = min_ratio(smp.v[1], 0, 1);
            if (cls[2][1].sign > 0) hi = std::min(hi, min_ratio(smp.v[2], 0, 1));
            if (!(lo < hi))
                throw StackelError("normalization-failure", "no admissible b between separating quotients");
            double b = 0.5 * (lo + hi);
            apply({{{1.0, -1.0}, {0.0, b}}}, "step 3 case table");
        } else {
            auto G = sector_gauge(smp);
            if (!G) throw StackelError("normalization-failure", "row sectors cannot be separated");
            apply(*G, "step 3 sector construction");
        }
        smp = sample_columns(res.S);
        cls = classify_all(smp);
        if (!condition_c_signs(cls))
            throw StackelError("normalization-failure", "sign pattern of condition (C) not reached");
    }

    double alpha = radial_limit(res.S.s[0][1], 0.0, S.A);
    double beta = radial_limit(res.S.s[0][2], 0.0, S.A);
    if (!(alpha > 0.0 && beta > 0.0))
        throw StackelError("normalization-failure", "radial limits of s12, s13 must be positive");
    if (std::abs(alpha - 1.0) > 1e-14 || std::abs(beta - 1.0) > 1e-14)
        apply({{{1.0 / alpha, 0.0}, {0.0, 1.0 / beta}}}, "diagonal scaling");
    return res;
}

// ---------------------------------------------------------------------------
// Robertson condition

namespace {

// Hyper-dual number: exact first partials in two directions and their mixed partial.
struct HD {
    double v = 0, a = 0, b = 0, ab = 0;
};

HD operator+(const HD& x, const HD& y) { return {x.v + y.v, x.a + y.a, x.b + y.b, x.ab + y.ab}; }
HD operator-(const HD& x, const HD& y) { return {x.v - y.v, x.a - y.a, x.b - y.b, x.ab - y.ab}; }
HD operator*(const HD& x, const HD& y) {
    return {x.v * y.v, x.a * y.v + x.v * y.a, x.b * y.v + x.v * y.b, x.ab * y.v + x.a * y.b + x.b * y.a + x.v * y.ab};
}
HD log_abs(const HD& x) {
    double r = 1.0 / x.v;
    return {std::log(std::abs(x.v)), x.a * r, x.b * r, x.ab * r - x.a * x.b * r * r};
}

using HRow = std::array<HD, 3>;

HD log_r(const HRow& r1, const HRow& r2, const HRow& r3) {
    HD m1 = r2[1] * r3[2] - r2[2] * r3[1];
    HD m12 = r3[2] * r2[0] - r2[2] * r3[0];
    m12 = HD{} - m12;
    HD m13 = r2[0] * r3[1] - r2[1] * r3[0];
    HD m2 = r1[2] * r3[1] - r1[1] * r3[2];
    HD m3 = r1[1] * r2[2] - r1[2] * r2[1];
    HD d = r1[0] * m1 + r1[1] * m12 + r1[2] * m13;
    return log_abs(m1) + log_abs(m2) + log_abs(m3) - log_abs(d);
}

HRow hrow(const StackelMatrix& S, int i, double x, int dir) {
    HRow r;
    for (int j = 0; j < 3; ++j) {
        Jet jt = S.jet(i, j, x);
        r[j] = dir == 0 ? HD{jt.v, jt.d1, 0, 0} : (dir == 1 ? HD{jt.v, 0, jt.d1, 0} : HD{jt.v, 0, 0, 0});
    }
    return r;
}

}  // namespace

RobertsonFactors check_robertson(const StackelMatrix& S, double tol) {
    ValidationGrid g = validation_grid(S, 32, 16);
    RobertsonFactors out;
    std::array<const std::vector<double>*, 3> xs{&g.x1, &g.x2, &g.x3};
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pr : pairs) {
        int p = pr[0], q = pr[1], r = 3 - p - q;
        for (double xp : *xs[p])
            for (double xq : *xs[q])
                for (double xr : *xs[r]) {
                    std::array<HRow, 3> rows;
                    rows[p] = hrow(S, p, xp, 0);
                    rows[q] = hrow(S, q, xq, 1);
                    rows[r] = hrow(S, r, xr, 2);
                    double mixed = log_r(rows[0], rows[1], rows[2]).ab;
                    double w = p == 0 ? xp * (S.A - xp) / S.A : 1.0;
                    double v = std::abs(mixed) * w;
                    if (!(v <= out.residual)) {
                        out.residual = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
                        std::array<double, 3> pt{};
                        pt[p] = xp;
                        pt[q] = xq;
                        pt[r] = xr;
                        out.worst = pt;
                    }
                }
    }
    if (!(out.residual <= tol)) {
        std::ostringstream os;
        os << "mixed log derivative " << out.residual << " at " << point_str(out.worst[0], out.worst[1], out.worst[2]);
        throw StackelError("robertson-violated", os.str());
    }

    const double x2b = 0.5 * S.B, x3b = 0.5 * S.C;
    Expr f2 = lincomb(1.0, S.s[1][2], -1.0, S.s[1][1]);
    Expr f3 = lincomb(1.0, S.s[2][1], -1.0, S.s[2][2]);
    auto r2 = S.row(1, x2b), r3 = S.row(2, x3b);
    double m1 = r2[1] * r3[2] - r2[2] * r3[1];
    double m12 = -(r2[0] * r3[2] - r2[2] * r3[0]);
    double m13 = r2[0] * r3[1] - r2[1] * r3[0];
    const auto& s = S.s[0];
    Expr minor2 = lincomb(r3[1], s[2], -r3[2], s[1]);
    Expr minor3 = lincomb(r2[2], s[1], -r2[1], s[2]);
    Expr dt = lincomb(1.0, lincomb(m1, s[0], m12, s[1]), m13, s[2]);
    double norm = m1 / (f2(x2b) * f3(x3b));
    Expr f1 = Expr(norm) * minor2 * minor3 / dt;
    out.f1 = SmoothFn1D(f1, 0.0, S.A);
    out.f2 = SmoothFn1D(f2, 0.0, S.B, S.B);
    out.f3 = SmoothFn1D(f3, 0.0, S.C, S.C);

    auto R = [&](double a, double b, double c) {
        Minors mn = minors(S.at(a, b, c));
        return mn.m[0] * mn.m[1] * mn.m[2] / mn.det;
    };
    double x1b = 0.5 * S.A;
    double base = R(x1b, x2b, x3b);
    for (double x2 : g.x2)
        out.factor_consistency = std::max(out.factor_consistency, std::abs(R(x1b, x2, x3b) / base - f2(x2) / f2(x2b)));
    for (double x3 : g.x3)
        out.factor_consistency = std::max(out.factor_consistency, std::abs(R(x1b, x2b, x3) / base - f3(x3) / f3(x3b)));
    return out;
}

// ---------------------------------------------------------------------------
// Angular gauge f2 = f3 = 1

AngularNormalizeResult normalize_angular_gauge(const StackelMatrix& S) {
    AngularNormalizeResult out{S, {}, {}, 0.0};
    for (int i = 1; i <= 2; ++i) {
        Expr f = i == 1 ? lincomb(1.0, S.s[1][2], -1.0, S.s[1][1]) : lincomb(1.0, S.s[2][1], -1.0, S.s[2][2]);
        double P = S.period(i);
        std::vector<double> xs = uniform_grid(P, 256);
        double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
        for (double x : xs) {
            double v = f(x);
            fmin = std::min(fmin, v);
            fmax = std::max(fmax, v);
        }
        if (!(fmin > 0.0)) throw StackelError("gauge", "Robertson factor f" + std::to_string(i + 1) + " non-positive");
        if (fmax - fmin <= 1e-12 * fmax) {
            double c = 0.5 * (fmin + fmax);
            if (std::abs(c - 1.0) <= 1e-14) continue;
            double k = std::sqrt(c);
            Expr sub = Expr(1.0 / k) * Expr::x();
            for (int j = 0; j < 3; ++j) {
                const Expr& e = S.s[i][j];
                out.S.s[i][j] = e.is_constant() ? Expr(e.constant_value() / c) : Expr(1.0 / c) * e.compose(sub);
            }
            (i == 1 ? out.S.B : out.S.C) = k * P;
            out.rescaled[i - 1] = true;
        } else {
            LiouvilleChart chart(SmoothFn1D(f, 0.0, P, P));
            double Pn = chart.length();
            constexpr int knots = 257;
            std::vector<double> X(knots), p(knots);
            for (int k = 0; k < knots; ++k) {
                X[k] = Pn * k / (knots - 1);
                double x = k == 0 ? 0.0 : (k == knots - 1 ? P : chart.inverse(X[k]));
                p[k] = x - X[k] * P / Pn;
            }
            p.front() = p.back() = 0.0;
            Expr phi = Expr(P / Pn) * Expr::x() + Expr::spline(X, p, true);
            Expr fphi = f.compose(phi);
            for (int j = 0; j < 3; ++j) out.S.s[i][j] = S.s[i][j].compose(phi) / fphi;
            (i == 1 ? out.S.B : out.S.C) = Pn;
            out.resampled[i - 1] = true;
        }
    }
    for (int i = 1; i <= 2; ++i) {
        for (double x : uniform_grid(out.S.period(i), 64)) {
            double d = i == 1 ? out.S(1, 2, x) - out.S(1, 1, x) : out.S(2, 1, x) - out.S(2, 2, x);
            out.residual = std::max(out.residual, std::abs(d - 1.0));
        }
    }
    if (out.residual > 1e-10) throw StackelError("gauge", "angular gauge residual " + std::to_string(out.residual));
    return out;
}

// ---------------------------------------------------------------------------
// Asymptotically hyperbolic ends

std::array<AHEndReport, 2> check_ah_ends(const StackelMatrix& S, double eps0, double eps1, double bound) {
    std::array<AHEndReport, 2> out;
    constexpr int levels = 45;
    for (int end = 0; end < 2; ++end) {
        AHEndReport& r = out[end];
        r.end = end;
        r.eps0 = eps0;
        r.eps1 = eps1;
        r.bound = bound;
        std::vector<double> logs;
        std::array<std::vector<double>, 6> weighted, unweighted;
        for (int k = 0; k < levels; ++k) {
            double d = 0.5 * S.A * std::pow(10.0, -0.25 * k);
            double x = end == 0 ? d : S.A - d;
            if (end == 1) d = S.A - x;
            double sgn = end == 0 ? 1.0 : -1.0;
            double L = 1.0 + std::abs(std::log(d));
            Jet s11 = S.jet(0, 0, x), s12 = S.jet(0, 1, x), s13 = S.jet(0, 2, x);
            double u = d * d * s11.v - 1.0;
            // d * d/dd (d^2 s11) with d/dd = sgn d/dx
            double du = d * (2.0 * d * s11.v * 1.0 + d * d * sgn * s11.d1);
            std::array<double, 6> raw{std::abs(u), std::abs(s12.v - 1.0), std::abs(s13.v - 1.0),
                                      std::abs(du), std::abs(d * s12.d1), std::abs(d * s13.d1)};
            std::array<double, 6> eps{eps0, eps1, eps1, eps0, eps1, eps1};
            logs.push_back(std::log(L));
            for (int c = 0; c < 6; ++c) {
                double n = c < 3 ? 0.0 : 1.0;
                weighted[c].push_back(raw[c] * std::pow(L, n + 1.0 + eps[c]));
                unweighted[c].push_back(raw[c]);
            }
        }
        r.pass = true;
        for (int c = 0; c < 6; ++c) {
            const auto& w = weighted[c];
            r.deviations[c] = *std::max_element(w.begin(), w.end());
            // log-log slope of the weighted deviation over the innermost third of the grid
            std::vector<double> lx, ly;
            for (int k = 2 * levels / 3; k < levels; ++k)
                if (unweighted[c][k] > 1e-12) {
                    lx.push_back(logs[k]);
                    ly.push_back(std::log(w[k]));
                }
            double slope = 0.0;
            if (lx.size() >= 3) {
                double mx = 0, my = 0;
                for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k], my += ly[k];
                mx /= lx.size();
                my /= ly.size();
                double sxy = 0, sxx = 0;
                for (std::size_t k = 0; k < lx.size(); ++k) {
                    sxy += (lx[k] - mx) * (ly[k] - my);
                    sxx += (lx[k] - mx) * (lx[k] - mx);
                }
                slope = sxy / sxx;
            }
            r.trend = std::max(r.trend, slope);
            if (!(r.deviations[c] <= bound)) {
                r.pass = false;
                r.reason = "weighted deviation exceeds bound";
            } else if (slope > 1e-3) {
                r.pass = false;
                r.reason = "weighted deviation grows toward the end";
            }
        }
        double l12 = radial_limit(S.s[0][1], end == 0 ? 0.0 : S.A, S.A);
        double l13 = radial_limit(S.s[0][2], end == 0 ? 0.0 : S.A, S.A);
        if (std::abs(l12 - 1.0) > 1e-8 || std::abs(l13 - 1.0) > 1e-8) {
            r.pass = false;
            r.reason = "limits of s12, s13 differ from 1";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Presets and transforms

namespace {

double param(const json& p, const char* key, double def) { return p.contains(key) ? p.at(key).get<double>() : def; }

std::array<double, 3> row_param(const json& p, const char* key, std::array<double, 3> def) {
    if (!p.contains(key)) return def;
    auto v = p.at(key).get<std::vector<double>>();
    if (v.size() != 3) throw StackelError("config", std::string(key) + " needs three entries");
    return {v[0], v[1], v[2]};
}

Expr hyperbolic_s11(double A) {
    Expr x = Expr::x();
    return Expr(1.0) / (x * x) + Expr(1.0) / ((Expr(A) - x) * (Expr(A) - x));
}

Expr sin_sq(double A) {
    Expr s = sin(Expr(std::numbers::pi / A) * Expr::x());
    return s * s;
}

void set_constant_rows(StackelMatrix& S, const json& p) {
    auto r2 = row_param(p, "row2", {0.0, -0.75, 0.25});
    auto r3 = row_param(p, "row3", {0.0, 0.25, -0.75});
    for (int j = 0; j < 3; ++j) {
        S.s[1][j] = Expr(r2[j]);
        S.s[2][j] = Expr(r3[j]);
    }
}

void set_domain(StackelMatrix& S, const json& p) {
    S.A = param(p, "A", 2.0);
    S.B = param(p, "B", 2.0 * std::numbers::pi);
    S.C = param(p, "C", 2.0 * std::numbers::pi);
    if (!(S.A > 0 && S.B > 0 && S.C > 0)) throw StackelError("config", "A, B, C must be positive");
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"hyperbolic-template", "example1", "example2", "example3"};
    return names;
}

StackelMatrix make_preset(const std::string& name, const json& p) {
    StackelMatrix S;
    set_domain(S, p);
    const double A = S.A;
    Expr x = Expr::x();
    if (name == "hyperbolic-template") {
        S.s[0] = {hyperbolic_s11(A), Expr(1.0), Expr(1.0)};
        set_constant_rows(S, p);
    } else if (name == "example1") {
        double pp = param(p, "p", 0.5), a1 = param(p, "a1", 0.3), a2 = param(p, "a2", -0.2);
        Expr sq = sin_sq(A);
        S.s[0] = {lincomb(1.0, hyperbolic_s11(A), pp, sq), lincomb(1.0, Expr(1.0), a1, sq),
                  lincomb(1.0, Expr(1.0), a2, sq)};
        set_constant_rows(S, p);
    } else if (name == "example2") {
        double pp = param(p, "p", 0.5), a1 = param(p, "a1", 0.3);
        double e2 = param(p, "eps2", 0.1), e3 = param(p, "eps3", 0.1);
        if (std::abs(e2) >= 0.25 || std::abs(e3) >= 0.25) throw StackelError("config", "|eps2|, |eps3| must be < 0.25");
        Expr sq = sin_sq(A);
        Expr s12 = lincomb(1.0, Expr(1.0), a1, sq);
        S.s[0] = {lincomb(1.0, hyperbolic_s11(A), pp, sq), s12, s12};
        Expr s22 = lincomb(1.0, Expr(-0.75), e2, cos(Expr(2.0 * std::numbers::pi / S.B) * x));
        Expr s32 = lincomb(1.0, Expr(0.25), e3, cos(Expr(2.0 * std::numbers::pi / S.C) * x));
        S.s[1] = {Expr(0.0), s22, s22 + Expr(1.0)};
        S.s[2] = {Expr(0.0), s32, s32 - Expr(1.0)};
    } else if (name == "example3") {
        double e2 = param(p, "eps2", 0.1), e3 = param(p, "eps3", 0.1);
        double c2 = param(p, "s2_mean", 0.6), c3 = param(p, "s3_mean", 0.3);
        Expr sigma = hyperbolic_s11(A);
        S.s[0] = {sigma, Expr(1.0), Expr(1.0) - Expr(1.0) / sigma};
        Expr s2 = lincomb(1.0, Expr(c2), e2, cos(Expr(2.0 * std::numbers::pi / S.B) * x));
        Expr s3 = lincomb(1.0, Expr(c3), e3, cos(Expr(2.0 * std::numbers::pi / S.C) * x));
        if (!(c3 + std::abs(e3) < c2 - std::abs(e2) && c2 + std::abs(e2) < 1.0 && c3 - std::abs(e3) > 0.0 &&
              8.0 / (A * A) > 1.0))
            throw StackelError("config", "example3 needs s1 > s2 > s3 > 0 and s2 < 1 < min s1");
        S.s[1] = {-(s2 * s2), -s2, Expr(1.0) - s2};
        S.s[2] = {s3 * s3, s3, s3 - Expr(1.0)};
    } else {
        throw StackelError("config", "unknown preset " + name);
    }
    return S;
}

StackelMatrix apply_bump(const StackelMatrix& S, double amp, double center, double width) {
    StackelMatrix R = S;
    Expr u = (Expr::x() - Expr(center)) / Expr(width);
    R.s[0][0] = S.s[0][0] * (Expr(1.0) + Expr(amp) * bump(u));
    return R;
}

StackelMatrix reparametrize_x1(const StackelMatrix& S, double b) {
    const double k = std::numbers::pi / S.A;
    if (std::abs(b) * 3.0 * k * 0.385 >= 1.0) throw StackelError("config", "reparametrization is not a diffeomorphism");
    Expr y = Expr::x();
    Expr s = sin(Expr(k) * y);
    Expr phi = y + Expr(b) * s * s * s;
    Expr dphi = Expr(1.0) + Expr(3.0 * b * k) * s * s * cos(Expr(k) * y);
    StackelMatrix R = S;
    for (int j = 0; j < 3; ++j) {
        const Expr& e = S.s[0][j];
        Expr c = e.is_constant() ? e : e.compose(phi);
        R.s[0][j] = c * dphi * dphi;
    }
    return R;
}

StackelMatrix scale_row(const StackelMatrix& S, int row, double factor) {
    if (row < 1 || row > 2 || !(factor > 0.0)) throw StackelError("config", "row scaling needs row 2 or 3 and factor > 0");
    StackelMatrix R = S;
    for (int j = 0; j < 3; ++j) R.s[row][j] = lincomb(factor, S.s[row][j], 0.0, Expr(0.0));
    double k = std::sqrt(factor);
    (row == 1 ? R.B : R.C) = S.period(row) / k;
    for (int j = 0; j < 3; ++j)
        if (!R.s[row][j].is_constant()) R.s[row][j] = R.s[row][j].compose(Expr(k) * Expr::x());
    return R;
}

StackelMatrix apply_transform(const StackelMatrix& S, const json& t) {
    const std::string type = t.at("type").get<std::string>();
    if (type == "column") {
        auto g = t.at("G").get<std::vector<std::vector<double>>>();
        if (g.size() != 2 || g[0].size() != 2 || g[1].size() != 2) throw StackelError("config", "G must be 2x2");
        return apply_column_invariance(S, {{{g[0][0], g[0][1]}, {g[1][0], g[1][1]}}});
    }
    if (type == "shift") return apply_first_column_shift(S, t.at("C1").get<double>(), t.at("C2").get<double>());
    if (type == "row_scale") return scale_row(S, t.at("row").get<int>() - 1, t.at("factor").get<double>());
    if (type == "reparam_x1") return reparametrize_x1(S, t.at("b").get<double>());
    if (type == "bump")
        return apply_bump(S, t.at("amp").get<double>(), t.value("center", 0.5 * S.A), t.value("width", 0.25 * S.A));
    throw StackelError("config", "unknown transform " + type);
}

}  // namespace stk
