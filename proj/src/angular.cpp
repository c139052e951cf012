#include "stackel/angular.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "stackel/errors.hpp"
#include "stackel/ode.hpp"
#include "stackel/parallel.hpp"

namespace stk {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Extremum of f on [0, P) from a uniform grid refined by Brent's method.
double periodic_extremum(const Expr& f, double P, bool maximum, int grid = 4096) {
    double sgn = maximum ? -1.0 : 1.0;
    int best = 0;
    double bestv = kInf;
    for (int i = 0; i < grid; ++i) {
        double v = sgn * f(P * i / grid);
        if (v < bestv) bestv = v, best = i;
    }
    double h = P / grid;
    auto g = [&](double x) { return sgn * f(x); };
    auto r = boost::math::tools::brent_find_minima(g, (best - 1) * h, (best + 1) * h, 50);
    return sgn * std::min(bestv, r.second);
}

double grid_min(const Expr& f, double P) { return periodic_extremum(f, P, false); }
double grid_max(const Expr& f, double P) { return periodic_extremum(f, P, true); }

double mean_over(const Expr& f, double P, int n = 256) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f(P * i / n);
    return s / n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shooting

Monodromy monodromy(const HillEquation& eq, double E, double rtol) {
    // (C, C', S, S') and their derivatives in E
    std::array<double, 8> y{1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    auto rhs = [&](const std::array<double, 8>& s, std::array<double, 8>& d, double x) {
        double r = eq.rho(x);
        double c = eq.p(x) - E * r;
        d[0] = s[1];
        d[1] = c * s[0];
        d[2] = s[3];
        d[3] = c * s[2];
        d[4] = s[5];
        d[5] = c * s[4] - r * s[0];
        d[6] = s[7];
        d[7] = c * s[6] - r * s[2];
    };
    constexpr int interior = 16;
    std::vector<double> stops;
    for (int i = 1; i <= interior; ++i) stops.push_back(eq.length * i / (interior + 1));
    stops.push_back(eq.length);
    Monodromy out;
    integrate_through<8>(rhs, y, 0.0, stops, rtol, rtol, [&](std::size_t, const std::array<double, 8>& s) {
        out.wronskian_drift = std::max(out.wronskian_drift, std::abs(s[0] * s[3] - s[2] * s[1] - 1.0));
    });
    out.m = {{{y[0], y[2]}, {y[1], y[3]}}};
    out.dm = {{{y[4], y[6]}, {y[5], y[7]}}};
    return out;
}

double Monodromy::root_distance() const {
    double d = 2.0 - trace();
    double slope = -(dm[0][0] + dm[1][1]);
    if (d == 0.0) return 0.0;
    return slope == 0.0 ? kInf : std::abs(d / slope);
}

double periodicity_char(const HillEquation& eq, double E, double rtol) { return 2.0 - monodromy(eq, E, rtol).trace(); }

namespace {

struct CoefficientRange {
    double pmin, pmax, rmin, rmax, ratio_min;
};

CoefficientRange coefficient_range(const HillEquation& eq) {
    CoefficientRange c{kInf, -kInf, kInf, -kInf, kInf};
    for (int i = 0; i < 1024; ++i) {
        double x = eq.length * i / 1024;
        double p = eq.p(x), r = eq.rho(x);
        if (!(r > 0.0)) throw StackelError("window", "Hill weight must be positive");
        c.pmin = std::min(c.pmin, p);
        c.pmax = std::max(c.pmax, p);
        c.rmin = std::min(c.rmin, r);
        c.rmax = std::max(c.rmax, r);
        c.ratio_min = std::min(c.ratio_min, p / r);
    }
    return c;
}

// Prufer angle at x = length for y(0) = 0.
double prufer_angle(const HillEquation& eq, double E, double k) {
    std::array<double, 1> th{0.0};
    auto rhs = [&](const std::array<double, 1>& s, std::array<double, 1>& d, double x) {
        double c = std::cos(s[0]), sn = std::sin(s[0]);
        d[0] = k * c * c + (E * eq.rho(x) - eq.p(x)) / k * sn * sn;
    };
    integrate_through<1>(rhs, th, 0.0, {eq.length}, 1e-13, 1e-13, [](std::size_t, const std::array<double, 1>&) {});
    return th[0];
}

double toms748(const std::function<double(double)>& f, double a, double b, double fa, double fb) {
    std::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(52);
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

double dirichlet_eigenvalue(const HillEquation& eq, int n) {
    if (n < 1) throw StackelError("domain", "Dirichlet index starts at 1");
    CoefficientRange c = coefficient_range(eq);
    double base = std::pow(n * std::numbers::pi / eq.length, 2);
    double nlo = base + c.pmin, nhi = base + c.pmax;
    double lo = nlo >= 0 ? nlo / c.rmax : nlo / c.rmin;
    double hi = nhi >= 0 ? nhi / c.rmin : nhi / c.rmax;
    double pad = 1e-6 * (1.0 + std::abs(hi - lo));
    lo -= pad;
    hi += pad;
    double rho_mean = mean_over(eq.rho, eq.length), p_mean = mean_over(eq.p, eq.length);
    auto f = [&](double E) {
        double k = std::sqrt(std::max(1.0, E * rho_mean - p_mean));
        return prufer_angle(eq, E, k) - n * std::numbers::pi;
    };
    return toms748(f, lo, hi, f(lo), f(hi));
}

std::vector<double> periodic_eigenvalues_shooting(const HillEquation& eq, int count) {
    std::vector<double> out;
    if (count <= 0) return out;
    CoefficientRange c = coefficient_range(eq);
    auto delta = [&](double E) { return periodicity_char(eq, E, 1e-13); };
    std::vector<double> dir{0.0};
    auto mu = [&](int n) {
        while (static_cast<int>(dir.size()) <= n) dir.push_back(dirichlet_eigenvalue(eq, static_cast<int>(dir.size())));
        return dir[n];
    };
    double lo = c.ratio_min - 1.0, hi = mu(1);
    out.push_back(toms748(delta, lo, hi, delta(lo), delta(hi)));
    for (int m = 1; static_cast<int>(out.size()) < count; ++m) {
        double a = mu(2 * m - 1), b = mu(2 * m), d = mu(2 * m + 1);
        double fa = delta(a), fb = delta(b), fd = delta(d);
        if (fb > -1e-12) {
            out.push_back(b);
            out.push_back(b);
        } else {
            out.push_back(toms748(delta, a, b, fa, fb));
            out.push_back(toms748(delta, b, d, fb, fd));
        }
    }
    out.resize(count);
    return out;
}

// ---------------------------------------------------------------------------
// Fourier-Galerkin

namespace {

// Multiplication by f in the orthonormal basis {1, cos(n w x), sin(n w x)}.
Eigen::MatrixXd multiplication_matrix(const std::vector<double>& a, const std::vector<double>& b, int M) {
    int N = 2 * M + 1;
    Eigen::MatrixXd F(N, N);
    auto bb = [&](int n) { return n >= 0 ? b[n] : -b[-n]; };
    auto ci = [](int n) { return 2 * n - 1; };
    auto si = [](int n) { return 2 * n; };
    F(0, 0) = a[0];
    for (int n = 1; n <= M; ++n) {
        F(0, ci(n)) = F(ci(n), 0) = std::numbers::sqrt2 * a[n];
        F(0, si(n)) = F(si(n), 0) = std::numbers::sqrt2 * b[n];
    }
    for (int m = 1; m <= M; ++m)
        for (int n = 1; n <= M; ++n) {
            F(ci(m), ci(n)) = a[std::abs(m - n)] + a[m + n];
            F(si(m), si(n)) = a[std::abs(m - n)] - a[m + n];
            F(ci(m), si(n)) = F(si(n), ci(m)) = bb(m + n) + bb(n - m);
        }
    return F;
}

}  // namespace

HillGalerkin::HillGalerkin(const Expr& p0, const Expr& p1, const Expr& rho, double period, int M) : period_(period) {
    if (M < 1) throw StackelError("domain", "Galerkin basis needs M >= 1");
    int Ns = 512;
    while (Ns < 8 * M) Ns *= 2;
    std::vector<double> cosT(Ns), sinT(Ns);
    for (int i = 0; i < Ns; ++i) {
        cosT[i] = std::cos(2.0 * std::numbers::pi * i / Ns);
        sinT[i] = std::sin(2.0 * std::numbers::pi * i / Ns);
    }
    auto coefficients = [&](const Expr& f, std::vector<double>& a, std::vector<double>& b) {
        std::vector<double> v(Ns);
        for (int i = 0; i < Ns; ++i) v[i] = f(period * i / Ns);
        a.assign(2 * M + 1, 0.0);
        b.assign(2 * M + 1, 0.0);
        for (int n = 0; n <= 2 * M; ++n) {
            double sa = 0.0, sb = 0.0;
            for (int i = 0; i < Ns; ++i) {
                int idx = static_cast<int>((static_cast<long long>(n) * i) % Ns);
                sa += v[i] * cosT[idx];
                sb += v[i] * sinT[idx];
            }
            a[n] = sa / Ns;
            b[n] = sb / Ns;
        }
        return v;
    };
    std::vector<double> a, b;
    auto rv = coefficients(rho, a, b);
    for (double r : rv)
        if (!(r > 0.0)) throw StackelError("window", "Galerkin weight must be positive");
    Eigen::MatrixXd R = multiplication_matrix(a, b, M);
    coefficients(p0, a, b);
    Eigen::MatrixXd P0 = multiplication_matrix(a, b, M);
    coefficients(p1, a, b);
    Eigen::MatrixXd P1 = multiplication_matrix(a, b, M);
    double w = 2.0 * std::numbers::pi / period;
    for (int n = 1; n <= M; ++n) {
        P0(2 * n - 1, 2 * n - 1) += n * n * w * w;
        P0(2 * n, 2 * n) += n * n * w * w;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) throw StackelError("window", "Galerkin mass matrix is not positive definite");
    auto congruence = [&](const Eigen::MatrixXd& X) {
        Eigen::MatrixXd Y = llt.matrixL().solve(X);
        Eigen::MatrixXd Z = llt.matrixL().solve(Y.transpose());
        return Eigen::MatrixXd(0.5 * (Z + Z.transpose()));
    };
    A0_ = congruence(P0);
    A1_ = congruence(P1);
}

HillGalerkin::Spectrum HillGalerkin::solve(double t, bool derivatives) const {
    Eigen::MatrixXd A = A0_ + t * A1_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, derivatives ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    Spectrum s;
    s.E.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    if (derivatives) {
        const Eigen::MatrixXd& V = es.eigenvectors();
        Eigen::MatrixXd AV = A1_ * V;
        s.dE.resize(s.E.size());
        for (int j = 0; j < V.cols(); ++j) s.dE[j] = V.col(j).dot(AV.col(j));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Angular problems

Expr AngularProblem::weight(double theta_sq) const { return lincomb(-1.0, row[1], -theta_sq, row[2]); }

HillEquation AngularProblem::theta_form(double theta_sq) const {
    return {lincomb(-kappa(), row[0], 0.0, Expr(0.0)), weight(theta_sq), period};
}

HillEquation AngularProblem::frozen_form(double other_sq) const {
    if (which == 2) return {lincomb(-kappa(), row[0], other_sq, row[2]), lincomb(-1.0, row[1], 0.0, Expr(0.0)), period};
    return {lincomb(-kappa(), row[0], other_sq, row[1]), lincomb(-1.0, row[2], 0.0, Expr(0.0)), period};
}

AngularProblem angular_problem(const StackelMatrix& S, int which, double lambda) {
    if (which != 2 && which != 3) throw StackelError("domain", "angular rows are 2 and 3");
    if (lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
    int i = which - 1;
    return {which, {S.s[i][0], S.s[i][1], S.s[i][2]}, S.period(i), lambda};
}

std::pair<double, double> admissible_window(const StackelMatrix& S) {
    double lo = grid_max(Expr(-1.0) * S.s[2][1] / S.s[2][2], S.C);
    double hi = grid_min(Expr(-1.0) * S.s[1][1] / S.s[1][2], S.B);
    return {lo, hi};
}

AngularSchrodinger angular_schrodinger(const AngularProblem& pb, double theta_sq) {
    Expr w = pb.weight(theta_sq);
    if (!(grid_min(w, pb.period) > 0.0))
        throw StackelError("window", "angular weight not positive at theta^2 = " + std::to_string(theta_sq));
    auto chart = std::make_shared<LiouvilleChart>(SmoothFn1D(w, 0.0, pb.period, pb.period));
    Expr r1 = pb.row[0];
    double kappa = pb.kappa();
    Expr Q = Expr::callable([chart, w, r1, kappa](double X) {
        double x = chart->inverse(X);
        Jet wj = w.jet(x);
        Jet ell = log(wj);
        ell = Jet{-ell.v, -ell.d1, -ell.d2};
        auto [t1, t2] = schwarzian_terms(ell, wj);
        return -kappa * r1(x) / wj.v + t1 - t2;
    });
    double L = chart->length();
    return {*chart, SmoothFn1D(Q, 0.0, L, L), L};
}

Monodromy monodromy(const AngularProblem& pb, double mu_sq, double theta_sq, double rtol) {
    HillEquation eq = pb.theta_form(theta_sq);
    Monodromy mx = monodromy(eq, mu_sq, rtol);
    Jet w = eq.rho.jet(0.0);
    double q = std::pow(w.v, 0.25);
    Mat2 T{{{q, 0.0}, {0.25 * w.d1 / (w.v * q), 1.0 / q}}};
    Monodromy out = mx;
    out.m = mul(mul(T, mx.m), inverse(T));
    out.dm = mul(mul(T, mx.dm), inverse(T));
    return out;
}

double periodicity_char(const AngularProblem& pb, double mu_sq, double theta_sq, double rtol) {
    return 2.0 - monodromy(pb, mu_sq, theta_sq, rtol).trace();
}

// ---------------------------------------------------------------------------
// Cone bounds

bool ConeBounds::contains(double mu_sq, double nu_sq, double tol) const {
    if (mu_sq < 0.0) return true;
    double slack = tol * (1.0 + std::abs(nu_sq));
    return nu_sq >= C1 * mu_sq + D1 - slack && nu_sq <= C2 * mu_sq + D2 + slack;
}

json ConeBounds::to_json() const { return {{"C1", C1}, {"C2", C2}, {"D1", D1}, {"D2", D2}}; }

ConeBounds cone_bounds(const StackelMatrix& S, double lambda) {
    double kappa = lambda * lambda + 1.0;
    ConeBounds c;
    c.C1 = grid_min(Expr(-1.0) * S.s[2][1] / S.s[2][2], S.C);
    c.C2 = grid_max(Expr(-1.0) * S.s[1][1] / S.s[1][2], S.B);
    c.D1 = kappa * grid_min(S.s[2][0] / S.s[2][2], S.C);
    c.D2 = kappa * grid_max(S.s[1][0] / S.s[1][2], S.B);
    return c;
}

// ---------------------------------------------------------------------------
// Coupled spectrum

json CoupledEigenvalue::to_json() const {
    return {{"m", index},         {"mu_sq", mu_sq}, {"nu_sq", nu_sq},   {"theta_sq", theta_sq},
            {"multiplicity", multiplicity}, {"j", j}, {"k", k}, {"delta2", delta2},
            {"delta3", delta3},   {"shift2", shift2}, {"shift3", shift3}, {"verified", verified},
            {"floquet_multiplicity", floquet_multiplicity}};
}

json SpectrumResult::to_json() const {
    json modes_j = json::array();
    for (const auto& m : modes) modes_j.push_back(m.to_json());
    return {{"lambda", lambda},
            {"r_max", r_max},
            {"cone", cone.to_json()},
            {"dropped_negative", dropped_negative},
            {"flagged_cells", flagged_cells},
            {"multiplicity_mismatches", multiplicity_mismatches},
            {"max_residual", max_residual},
            {"max_shift", max_shift},
            {"unverified", unverified},
            {"basis_size", basis_size},
            {"modes", modes_j}};
}

namespace {

struct RawPair {
    int j = 0, k = 0;
    double mu = 0.0, nu = 0.0;
    bool ok = false;
};

// Eigenvalue curves of one Galerkin family sampled on a uniform parameter grid.
struct CurveTable {
    std::vector<Expr> curves;

    CurveTable(const HillGalerkin& g, double lo, double hi, int n, int workers) {
        std::vector<double> knots(n);
        for (int i = 0; i < n; ++i) knots[i] = lo + (hi - lo) * i / (n - 1);
        std::vector<std::vector<double>> E(n);
        parallel_for(static_cast<std::size_t>(n), workers,
                     [&](std::size_t i) { E[i] = g.solve(knots[i], false).E; });
        for (int c = 0; c < g.size(); ++c) {
            std::vector<double> v(n);
            for (int i = 0; i < n; ++i) v[i] = E[i][c];
            curves.push_back(Expr::spline(knots, v, false));
        }
    }
};

struct PairSolver {
    const HillGalerkin& g2;
    const HillGalerkin& g3;
    const CurveTable& t2;
    const CurveTable& t3;
    double q;
    const SpectrumOptions& opt;

    // Fixed point of nu -> G_k(F_j(nu)) on the interpolated curves.
    double seed(int j, int k, double nu) const {
        for (int it = 0; it < 60; ++it) {
            Jet f = t2.curves[j].jet(nu);
            Jet g = t3.curves[k].jet(f.v);
            double step = (g.v - nu) / (1.0 - g.d1 * f.d1);
            nu += step;
            if (std::abs(step) <= 1e-14 * (1.0 + std::abs(nu))) break;
        }
        return nu;
    }

    double slope(int j, int k, double nu) const {
        Jet f = t2.curves[j].jet(nu);
        return t3.curves[k].jet(f.v).d1 * f.d1;
    }

    RawPair solve(int j, int k, double nu0) const {
        RawPair r{j, k};
        double cur = seed(j, k, nu0);
        double lo = -kInf, hi = kInf;
        double prev_nu = 0.0, prev_g = 0.0;
        bool have_prev = false;
        for (int it = 0; it < opt.max_iter; ++it) {
            auto f = g2.solve(cur, false);
            double mu = f.E[j];
            auto gk = g3.solve(mu, false);
            double t = gk.E[k];
            double g = t - cur;
            double scale = std::max(std::abs(f.E.back()), std::abs(gk.E.back()));
            double tol = opt.newton_tol * (1.0 + std::abs(cur) + scale);
            if (std::abs(g) <= tol) {
                r.mu = mu;
                r.nu = cur;
                r.ok = true;
                return r;
            }
            double span = q / (1.0 - q) * std::abs(g);
            if (g > 0) {
                lo = std::max(lo, t);
                hi = std::min(hi, t + span);
            } else {
                hi = std::min(hi, t);
                lo = std::max(lo, t - span);
            }
            if (hi - lo <= tol) {
                r.mu = mu;
                r.nu = cur;
                r.ok = true;
                return r;
            }
            double next;
            if (have_prev && g != prev_g)
                next = cur - g * (cur - prev_nu) / (g - prev_g);
            else
                next = cur - g / (slope(j, k, cur) - 1.0);
            if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
            prev_nu = cur;
            prev_g = g;
            have_prev = true;
            cur = next;
        }
        return r;
    }
};

int basis_half_width(double emax, double rho_max, double pot_max, double period) {
    double freq = std::sqrt(std::max(0.0, emax * rho_max + pot_max)) * period / (2.0 * std::numbers::pi);
    return static_cast<int>(std::ceil(freq)) + 24;
}

int dsu_find(std::vector<int>& p, int i) {
    while (p[i] != i) i = p[i] = p[p[i]];
    return i;
}

}  // namespace

SpectrumResult coupled_solve(const StackelMatrix& S, double lambda, double r_max, const SpectrumOptions& opt) {
    if (lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
    if (!(r_max > 0.0)) throw StackelError("config", "r_max must be positive");
    for (double x : {0.1, 0.37, 1.3, 2.9, 4.4}) {
        if (std::abs(S(1, 2, x * S.B / 6.0) - S(1, 1, x * S.B / 6.0) - 1.0) > 1e-8 ||
            std::abs(S(2, 1, x * S.C / 6.0) - S(2, 2, x * S.C / 6.0) - 1.0) > 1e-8)
            throw StackelError("gauge", "coupled spectrum needs the f2 = f3 = 1 gauge");
    }
    const double kappa = lambda * lambda + 1.0;
    SpectrumResult res;
    res.lambda = lambda;
    res.r_max = r_max;
    res.cone = cone_bounds(S, lambda);

    const auto& r2 = S.s[1];
    const auto& r3 = S.s[2];
    double q2 = grid_max(r2[2] / (Expr(-1.0) * r2[1]), S.B);
    double q3 = grid_max(r3[1] / (Expr(-1.0) * r3[2]), S.C);
    double q = q2 * q3;
    if (!(q < 1.0)) throw StackelError("window", "angular fixed-point map is not a contraction");

    auto max_abs = [](const Expr& f, double P) { return std::max(grid_max(f, P), -grid_min(f, P)); };
    double e2 = (1.0 + q2) * r_max + std::abs(res.cone.D2) + 10.0;
    int M2 = basis_half_width(e2, max_abs(r2[1], S.B), kappa * max_abs(r2[0], S.B) + r_max * max_abs(r2[2], S.B), S.B);
    int M3 = basis_half_width(r_max + 10.0, max_abs(r3[2], S.C),
                              kappa * max_abs(r3[0], S.C) + e2 * max_abs(r3[1], S.C), S.C);

    HillGalerkin g2(Expr(-kappa) * r2[0], r2[2], Expr(-1.0) * r2[1], S.B, M2);
    HillGalerkin g3(Expr(-kappa) * r3[0], r3[1], Expr(-1.0) * r3[2], S.C, M3);
    res.basis_size = std::max(g2.size(), g3.size());

    // rows j that can reach the ball: F_j(r_max) <= r_max
    auto top = g2.solve(r_max, false);
    int jmax = 0;
    while (jmax < static_cast<int>(top.E.size()) && top.E[jmax] <= r_max) ++jmax;
    const int reliable2 = g2.size() - 40, reliable3 = g3.size() - 40;

    // parameter ranges swept by the fixed-point iteration
    double nu_lo = std::min({0.0, g3.solve(e2, false).E[0], g3.solve(0.0, false).E[0]}) - 1.0;
    double mu_lo = std::min({0.0, g2.solve(nu_lo, false).E[0], top.E[0]}) - 1.0;
    nu_lo = std::min(nu_lo, g3.solve(mu_lo, false).E[0] - 1.0);
    CurveTable t2(g2, nu_lo, r_max + 1.0, opt.table_points, opt.workers);
    CurveTable t3(g3, mu_lo, e2, opt.table_points, opt.workers);

    PairSolver solver{g2, g3, t2, t3, q, opt};
    std::vector<std::vector<RawPair>> rows(jmax);
    parallel_for(static_cast<std::size_t>(jmax), opt.workers, [&](std::size_t jj) {
        int j = static_cast<int>(jj);
        double nu0 = 0.0;
        for (int k = 0; k < g3.size(); ++k) {
            RawPair p = solver.solve(j, k, nu0);
            if (j >= reliable2 || k >= reliable3) p.ok = false;
            rows[jj].push_back(p);
            if (!p.ok) break;
            if (p.nu > r_max) break;
            nu0 = p.nu;
        }
    });

    std::vector<RawPair> kept;
    for (const auto& row : rows)
        for (const auto& p : row) {
            if (!p.ok) {
                ++res.flagged_cells;
                continue;
            }
            if (std::hypot(p.mu, p.nu) > r_max) continue;
            if (std::abs(p.mu) + std::abs(p.nu) < 1e-10) continue;
            if (std::min(p.mu, p.nu) < 0.0) {
                ++res.dropped_negative;
                continue;
            }
            kept.push_back(p);
        }
    std::sort(kept.begin(), kept.end(), [](const RawPair& a, const RawPair& b) {
        return std::tie(a.mu, a.nu, a.j, a.k) < std::tie(b.mu, b.nu, b.j, b.k);
    });

    // single-linkage clusters within the deduplication radius
    std::vector<int> parent(kept.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t b = a + 1; b < kept.size(); ++b) {
            double rad = opt.cluster_radius * (1.0 + std::abs(kept[a].mu));
            if (kept[b].mu - kept[a].mu > rad) break;
            if (std::abs(kept[b].nu - kept[a].nu) <= rad) parent[dsu_find(parent, b)] = dsu_find(parent, a);
        }
    std::map<int, std::vector<int>> clusters;
    for (std::size_t a = 0; a < kept.size(); ++a) clusters[dsu_find(parent, static_cast<int>(a))].push_back(a);

    std::vector<std::vector<int>> groups;
    for (auto& [root, members] : clusters) groups.push_back(members);

    // per-member residuals and Floquet dimensions
    struct Check {
        double d2 = 0.0, d3 = 0.0, s2 = 0.0, s3 = 0.0;
        int dim = 1;
    };
    std::vector<Check> checks(kept.size());
    AngularProblem p2 = angular_problem(S, 2, lambda), p3 = angular_problem(S, 3, lambda);
    if (opt.verify) {
        parallel_for(kept.size(), opt.workers, [&](std::size_t a) {
            const RawPair& p = kept[a];
            Monodromy m2 = monodromy(p2.frozen_form(p.nu), p.mu, opt.monodromy_rtol);
            Monodromy m3 = monodromy(p3.frozen_form(p.mu), p.nu, opt.monodromy_rtol);
            auto dim = [&](const Monodromy& m) {
                return std::abs(m.m[0][1]) < opt.offdiag_tol && std::abs(m.m[1][0]) < opt.offdiag_tol ? 2 : 1;
            };
            checks[a] = {std::abs(2.0 - m2.trace()), std::abs(2.0 - m3.trace()), m2.root_distance(),
                         m3.root_distance(), dim(m2) * dim(m3)};
        });
    }

    for (const auto& g : groups) {
        CoupledEigenvalue e;
        double smu = 0.0, snu = 0.0;
        e.j = kept[g.front()].j;
        e.k = kept[g.front()].k;
        for (int a : g) {
            smu += kept[a].mu;
            snu += kept[a].nu;
            e.j = std::min(e.j, kept[a].j);
            e.k = std::min(e.k, kept[a].k);
            e.delta2 = std::max(e.delta2, checks[a].d2);
            e.delta3 = std::max(e.delta3, checks[a].d3);
            e.shift2 = std::max(e.shift2, checks[a].s2);
            e.shift3 = std::max(e.shift3, checks[a].s3);
            e.floquet_multiplicity = std::max(e.floquet_multiplicity, checks[a].dim);
        }
        e.mu_sq = smu / g.size();
        e.nu_sq = snu / g.size();
        e.theta_sq = e.nu_sq / e.mu_sq;
        e.multiplicity = static_cast<int>(g.size());
        if (opt.verify) {
            auto ok = [&](double d, double sh, double E) {
                return d < opt.residual_tol || sh < opt.shift_tol * (1.0 + std::abs(E));
            };
            e.verified = ok(e.delta2, e.shift2, e.mu_sq) && ok(e.delta3, e.shift3, e.nu_sq);
            if (!e.verified) ++res.unverified;
            if (e.floquet_multiplicity != e.multiplicity) ++res.multiplicity_mismatches;
        }
        res.max_residual = std::max({res.max_residual, e.delta2, e.delta3});
        if (e.delta2 >= opt.residual_tol) res.max_shift = std::max(res.max_shift, e.shift2 / (1.0 + std::abs(e.mu_sq)));
        if (e.delta3 >= opt.residual_tol) res.max_shift = std::max(res.max_shift, e.shift3 / (1.0 + std::abs(e.nu_sq)));
        res.modes.push_back(e);
    }
    std::sort(res.modes.begin(), res.modes.end(), [](const CoupledEigenvalue& a, const CoupledEigenvalue& b) {
        return std::tie(a.mu_sq, a.nu_sq) < std::tie(b.mu_sq, b.nu_sq);
    });
    for (std::size_t i = 0; i < res.modes.size(); ++i) res.modes[i].index = static_cast<int>(i) + 1;
    return res;
}

// ---------------------------------------------------------------------------
// Counting

double symbol_volume_ratio(const StackelMatrix& S, double theta_lo, double theta_hi, int samples,
                           unsigned long long seed) {
    if (theta_lo > theta_hi || samples <= 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        double x2 = S.B * u(rng), x3 = S.C * u(rng), phi = 2.0 * std::numbers::pi * u(rng);
        auto a = S.row(1, x2), b = S.row(2, x3);
        double m11 = a[1] * b[2] - a[2] * b[1];
        double c = std::cos(phi), s = std::sin(phi);
        double p1 = (-b[2] * c * c + a[2] * s * s) / m11;
        double p2 = (b[1] * c * c - a[1] * s * s) / m11;
        double th = p2 / p1;
        if (p1 > 0 && th >= theta_lo && th <= theta_hi) acc += 0.5 / (p1 + p2);
    }
    double vol = S.B * S.C * 2.0 * std::numbers::pi * acc / samples;
    return vol / (4.0 * std::numbers::pi * std::numbers::pi);
}

CountResult count_in_cone(const std::vector<CoupledEigenvalue>& spectrum, const StackelMatrix& S, double theta_lo,
                          double theta_hi, double r, int samples) {
    CountResult c;
    if (theta_lo > theta_hi) return c;
    for (const auto& e : spectrum) {
        if (!(e.mu_sq > 0.0) || e.mu_sq + e.nu_sq > r * r) continue;
        double th = e.nu_sq / e.mu_sq;
        if (th >= theta_lo && th <= theta_hi) ++c.count;
    }
    c.ratio = c.count / (r * r);
    c.symbol_ratio = symbol_volume_ratio(S, theta_lo, theta_hi, samples);
    return c;
}

// ---------------------------------------------------------------------------
// Curve separation

double curve_separation(const StackelMatrix& S, double theta_lo, double theta_hi, int m_lo, int m_hi, int samples) {
    auto [wlo, whi] = admissible_window(S);
    if (theta_lo > theta_hi || theta_lo <= wlo || theta_hi >= whi)
        throw StackelError("window", "theta window outside the admissible interval");
    AngularProblem p2 = angular_problem(S, 2, 1.0), p3 = angular_problem(S, 3, 1.0);
    int n = theta_hi > theta_lo ? std::max(2, samples) : 1;
    std::vector<double> th(n), Bt(n), Ct(n);
    for (int i = 0; i < n; ++i) {
        th[i] = n == 1 ? theta_lo : theta_lo + (theta_hi - theta_lo) * i / (n - 1);
        Bt[i] = LiouvilleChart(SmoothFn1D(p2.weight(th[i]), 0.0, S.B, S.B)).length();
        Ct[i] = LiouvilleChart(SmoothFn1D(p3.weight(th[i]), 0.0, S.C, S.C)).length();
        if (i > 0 && !(Bt[i] < Bt[i - 1] && Ct[i] > Ct[i - 1]))
            throw StackelError("window", "chart lengths are not monotone on the window");
    }
    double h = kInf;
    for (const auto* len : {&Bt, &Ct})
        for (int m = m_lo; m < m_hi; ++m)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    double mu1 = 2.0 * m * std::numbers::pi / (*len)[a];
                    double mu2 = 2.0 * (m + 1) * std::numbers::pi / (*len)[b];
                    double t1 = std::sqrt(th[a]), t2 = std::sqrt(th[b]);
                    h = std::min(h, std::hypot(mu2 - mu1, mu2 * t2 - mu1 * t1));
                }
    return h;
}

}  // namespace stk
