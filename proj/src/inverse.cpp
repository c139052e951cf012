#include "stackel/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "stackel/errors.hpp"
#include "stackel/ode.hpp"
#include "stackel/parallel.hpp"

namespace stk {

using nlohmann::json;

namespace {

std::vector<double> periodic_points(double P, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = P * i / n;
    return v;
}

// interior chart points away from the singular ends
std::vector<double> chart_points(double L, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = L * (0.02 + 0.96 * i / (n - 1));
    return v;
}

json mat2_json(const Mat2& g) { return json::array({json::array({g[0][0], g[0][1]}), json::array({g[1][0], g[1][1]})}); }

}  // namespace

Mat2 angular_block_gauge(double c) { return {{{1.0 - c, -c}, {c, 1.0 + c}}}; }

// ---------------------------------------------------------------------------
// Angular recovery

json AngularRecovery::to_json() const {
    return {{"s11_match", s11_match},
            {"s11_deviation", s11_deviation},
            {"c", c},
            {"constancy_residual", constancy_residual},
            {"block_gauge_G", mat2_json(G)},
            {"shift_constants", json::array({C1, C2})},
            {"shift_residual", shift_residual},
            {"block_deviation", block_deviation},
            {"pass", pass},
            {"reason", reason}};
}

StackelMatrix undo_angular_gauges(const StackelMatrix& St, const AngularRecovery& rec) {
    return apply_first_column_shift(apply_column_invariance(St, inverse(rec.G)), -rec.C1, -rec.C2);
}

AngularRecovery angular_recover(const StackelMatrix& S, const StackelMatrix& St, const VerifyTolerances& tol) {
    AngularRecovery rec;
    if (std::abs(S.B - St.B) > tol.structural * S.B || std::abs(S.C - St.C) > tol.structural * S.C) {
        rec.reason = "angular periods differ";
        return rec;
    }
    const auto x2s = periodic_points(S.B, 32), x3s = periodic_points(S.C, 32);
    for (double a : x2s)
        for (double b : x3s) {
            double m = S(1, 1, a) * S(2, 2, b) - S(1, 2, a) * S(2, 1, b);
            double mt = St(1, 1, a) * St(2, 2, b) - St(1, 2, a) * St(2, 1, b);
            rec.s11_deviation = std::max(rec.s11_deviation, std::abs(m - mt) / (1.0 + std::abs(m)));
        }
    rec.s11_match = rec.s11_deviation <= tol.structural;

    std::vector<double> d;
    for (double a : x2s) d.push_back(St(1, 1, a) - S(1, 1, a));
    for (double b : x3s) d.push_back(S(2, 2, b) - St(2, 2, b));
    double sum = 0.0;
    for (double v : d) sum += v;
    rec.c = sum / d.size();
    for (double v : d) rec.constancy_residual = std::max(rec.constancy_residual, std::abs(v - rec.c));
    rec.G = angular_block_gauge(rec.c);
    if (!rec.s11_match) {
        rec.reason = "cofactor s^11 differs";
        return rec;
    }
    if (rec.constancy_residual > tol.structural) {
        rec.reason = "s~22 - s22 is not a constant matching s33 - s~33";
        return rec;
    }

    // first column: s'_i1 - s_i1 = C1 s_i2 + C2 s_i3 on rows 2 and 3 jointly
    StackelMatrix Sg = apply_column_invariance(St, inverse(rec.G));
    const int n = static_cast<int>(x2s.size() + x3s.size());
    Eigen::MatrixXd M(n, 2);
    Eigen::VectorXd v(n);
    int k = 0;
    for (double a : x2s) {
        M(k, 0) = S(1, 1, a);
        M(k, 1) = S(1, 2, a);
        v(k++) = Sg(1, 0, a) - S(1, 0, a);
    }
    for (double b : x3s) {
        M(k, 0) = S(2, 1, b);
        M(k, 1) = S(2, 2, b);
        v(k++) = Sg(2, 0, b) - S(2, 0, b);
    }
    Eigen::Vector2d C = M.colPivHouseholderQr().solve(v);
    rec.C1 = C(0);
    rec.C2 = C(1);
    rec.shift_residual = (M * C - v).lpNorm<Eigen::Infinity>();

    StackelMatrix back = undo_angular_gauges(St, rec);
    for (int row = 1; row <= 2; ++row)
        for (double x : row == 1 ? x2s : x3s)
            for (int j = 0; j < 3; ++j)
                rec.block_deviation = std::max(rec.block_deviation,
                                               std::abs(back(row, j, x) - S(row, j, x)) / (1.0 + std::abs(S(row, j, x))));
    rec.pass = rec.block_deviation <= tol.structural;
    if (!rec.pass) rec.reason = "angular rows differ after removing the gauges";
    return rec;
}

// ---------------------------------------------------------------------------
// Radial reconstruction

namespace {

SmoothFn1D robertson_f1(const StackelMatrix& S) { return check_robertson(S).f1; }

}  // namespace

ReconstructionState::ReconstructionState(const StackelMatrix& S, double x2, double x3)
    : S_(S), f1_(robertson_f1(S)), chart_(SmoothFn1D(S.s[0][1], 0.0, S.A)) {
    row2_ = {S(1, 1, x2), S(1, 2, x2)};
    row3_ = {S(2, 1, x3), S(2, 2, x3)};
}

double ReconstructionState::f(double X) const {
    double x = x_at(X);
    return S_(0, 0, x) / S_(0, 1, x);
}

double ReconstructionState::h(double X) const {
    double x = x_at(X);
    return S_(0, 1, x) / f1_(x);
}

double ReconstructionState::l(double X) const {
    double x = x_at(X);
    return S_(0, 2, x) / S_(0, 1, x);
}

double ReconstructionState::dlog_h(double X) const {
    double x = x_at(X);
    Jet w = S_.jet(0, 1, x), f = f1_.jet(x);
    return (w.d1 / w.v - f.d1 / f.v) / std::sqrt(w.v);
}

double ReconstructionState::angular_factor(double X) const {
    double lv = l(X);
    return (lv * row3_[0] - row3_[1]) * (row2_[1] - lv * row2_[0]);
}

double cauchy_deviation(const ReconstructionState& st, double lambda, double rtol) {
    const double L = st.length();
    const double kappa = lambda * lambda + 1.0;
    const double X0 = 1e-6 * L;
    std::array<double, 2> y{1.0, 0.0};
    auto rhs = [&](const std::array<double, 2>& s, std::array<double, 2>& d, double X) {
        double u = s[0];
        d[0] = s[1];
        d[1] = -0.5 * st.dlog_h(X) * s[1] + kappa * st.h(X) * st.angular_factor(X) * (std::pow(u, 5) - u);
    };
    std::vector<double> stops;
    for (int k = 1; k <= 64; ++k) stops.push_back(X0 + (L - 2.0 * X0) * k / 64.0);
    double dev = 0.0;
    integrate_through<2>(rhs, y, X0, stops, rtol, 1e-15,
                         [&](std::size_t, const std::array<double, 2>& s) { dev = std::max(dev, std::abs(s[0] - 1.0)); });
    return dev;
}

json RadialRecovery::to_json() const {
    return {{"nu_sq", json::array({nu_sq[0], nu_sq[1]})},
            {"potential_deviation", potential_deviation},
            {"potential_deviation_at", potential_deviation_at},
            {"l_deviation", l_deviation},
            {"quotient_s13_s12_match", quotient_s13_s12_match},
            {"f_deviation", f_deviation},
            {"min_angular_factor", min_angular_factor},
            {"u_deviation", u_deviation},
            {"pass", pass},
            {"reason", reason}};
}

RadialRecovery radial_recover(const StackelMatrix& S, const StackelMatrix& St, double lambda,
                              const std::vector<CoupledEigenvalue>& spectrum, const VerifyTolerances& tol) {
    RadialRecovery rec;
    std::vector<double> nus;
    for (const auto& e : spectrum) {
        if (std::none_of(nus.begin(), nus.end(), [&](double v) { return std::abs(v - e.nu_sq) <= tol.spectral; }))
            nus.push_back(e.nu_sq);
        if (nus.size() == 2) break;
    }
    if (nus.size() < 2) nus = {0.0, 1.0};
    rec.nu_sq = {nus[0], nus[1]};

    RadialModel m = RadialModel::from_matrix(S), mt = RadialModel::from_matrix(St);
    std::array<RadialPotential, 2> p, pt;
    for (int i = 0; i < 2; ++i) {
        p[i] = build_potential(m, Gauge::q, lambda, 0.0, rec.nu_sq[i]);
        pt[i] = build_potential(mt, Gauge::q, lambda, 0.0, rec.nu_sq[i]);
    }
    const double L = p[0].length;
    if (std::abs(pt[0].length - L) > tol.structural * L) {
        rec.reason = "radial chart lengths differ";
        rec.potential_deviation = std::numeric_limits<double>::infinity();
        return rec;
    }
    const auto Xs = chart_points(L, 97);
    const double dnu = rec.nu_sq[1] - rec.nu_sq[0];
    for (double X : Xs) {
        std::array<double, 2> q, qt;
        for (int i = 0; i < 2; ++i) {
            q[i] = p[i].q(p[i].x_at(X)).real();
            qt[i] = pt[i].q(pt[i].x_at(X)).real();
            double dev = std::abs(q[i] - qt[i]) / (1.0 + std::abs(q[i]));
            if (dev > rec.potential_deviation) {
                rec.potential_deviation = dev;
                rec.potential_deviation_at = X;
            }
        }
        rec.l_deviation = std::max(rec.l_deviation, std::abs((q[1] - q[0]) / dnu - (qt[1] - qt[0]) / dnu));
    }
    rec.quotient_s13_s12_match = rec.l_deviation <= tol.spectral;
    if (rec.potential_deviation > tol.spectral) {
        rec.reason = "radial potentials differ";
        return rec;
    }
    if (!rec.quotient_s13_s12_match) {
        rec.reason = "s13 / s12 differs";
        return rec;
    }

    const auto x2s = periodic_points(S.B, 8), x3s = periodic_points(S.C, 8);
    rec.min_angular_factor = std::numeric_limits<double>::infinity();
    for (double a : x2s)
        for (double b : x3s) {
            ReconstructionState st(St, a, b);
            for (double X : chart_points(L, 16)) rec.min_angular_factor = std::min(rec.min_angular_factor, st.angular_factor(X));
        }
    if (!(rec.min_angular_factor > 0.0)) {
        rec.reason = "Cauchy coefficient (l s32 - s33)(s23 - l s22) is not positive";
        return rec;
    }

    ReconstructionState st(St, 0.5 * St.B, 0.5 * St.C), s(S, 0.5 * S.B, 0.5 * S.C);
    rec.u_deviation = cauchy_deviation(st, lambda);
    for (double X : Xs) rec.f_deviation = std::max(rec.f_deviation, std::abs(s.f(X) - st.f(X)) / (1.0 + std::abs(s.f(X))));
    rec.pass = rec.u_deviation <= tol.spectral && rec.f_deviation <= tol.spectral;
    if (!rec.pass) rec.reason = rec.u_deviation > tol.spectral ? "Cauchy solution departs from 1" : "s11 / s12 differs";
    return rec;
}

// ---------------------------------------------------------------------------
// Pullback comparison

json PullbackReport::to_json() const {
    return {{"length", length},         {"length_tilde", length_tilde}, {"periods_match", periods_match},
            {"max_deviation", max_deviation}, {"at_X", at_X},           {"at_x1", at_x1},
            {"pass", pass},             {"reason", reason}};
}

PullbackReport pullback_compare(const StackelMatrix& S, const StackelMatrix& St, const VerifyTolerances& tol) {
    PullbackReport rep;
    LiouvilleChart a(SmoothFn1D(S.s[0][1], 0.0, S.A)), b(SmoothFn1D(St.s[0][1], 0.0, St.A));
    rep.length = a.length();
    rep.length_tilde = b.length();
    rep.periods_match = std::abs(S.B - St.B) <= tol.structural * S.B && std::abs(S.C - St.C) <= tol.structural * S.C;
    if (std::abs(rep.length - rep.length_tilde) > tol.structural * rep.length || !rep.periods_match) {
        rep.max_deviation = std::numeric_limits<double>::infinity();
        rep.reason = rep.periods_match ? "chart lengths differ" : "angular periods differ";
        return rep;
    }
    const auto x2s = periodic_points(S.B, 10), x3s = periodic_points(S.C, 10);
    for (double X : chart_points(rep.length, 10)) {
        double x = a.inverse(X), xt = b.inverse(X);
        for (double u : x2s)
            for (double v : x3s) {
                auto H = metric_coefficients(minors(S.at(x, u, v)));
                auto Ht = metric_coefficients(minors(St.at(xt, u, v)));
                H[0] /= S(0, 1, x);
                Ht[0] /= St(0, 1, xt);
                for (int i = 0; i < 3; ++i) {
                    double dev = std::abs(H[i] - Ht[i]) / std::abs(H[i]);
                    if (dev > rep.max_deviation) {
                        rep.max_deviation = dev;
                        rep.at_X = X;
                        rep.at_x1 = x;
                    }
                }
            }
    }
    rep.pass = rep.max_deviation <= tol.structural;
    if (!rep.pass) rep.reason = "metric coefficients differ in the common chart";
    return rep;
}

// ---------------------------------------------------------------------------
// Scattering comparison and the full pipeline

json ScatteringComparison::to_json() const {
    json modes_j = json::array();
    for (const auto& d : per_mode)
        modes_j.push_back({{"m", d.m}, {"mu_sq", d.mu_sq}, {"nu_sq", d.nu_sq}, {"deviation", d.deviation}});
    return {{"modes", modes},
            {"modes_tilde", modes_tilde},
            {"spectrum_deviation", spectrum_deviation},
            {"first_disagreement", first_disagreement},
            {"max_deviation", max_deviation},
            {"pass", pass},
            {"reason", reason},
            {"per_mode", modes_j}};
}

ScatteringComparison compare_scattering(const StackelMatrix& S, const StackelMatrix& St, double lambda, double r_max,
                                        int workers, const VerifyTolerances& tol) {
    ScatteringComparison cmp;
    SpectrumOptions opt;
    opt.workers = workers;
    SpectrumResult a = coupled_solve(S, lambda, r_max, opt), b = coupled_solve(St, lambda, r_max, opt);
    cmp.modes = static_cast<int>(a.modes.size());
    cmp.modes_tilde = static_cast<int>(b.modes.size());
    const std::size_t n = std::min(a.modes.size(), b.modes.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto &x = a.modes[i], &y = b.modes[i];
        double dev = std::max(std::abs(x.mu_sq - y.mu_sq) / (1.0 + std::abs(x.mu_sq)),
                              std::abs(x.nu_sq - y.nu_sq) / (1.0 + std::abs(x.nu_sq)));
        if (x.multiplicity != y.multiplicity) dev = std::numeric_limits<double>::infinity();
        cmp.spectrum_deviation = std::max(cmp.spectrum_deviation, dev);
        if (dev > tol.spectral && cmp.first_disagreement == 0) cmp.first_disagreement = static_cast<int>(i) + 1;
    }
    if (a.modes.size() != b.modes.size() && cmp.first_disagreement == 0) cmp.first_disagreement = static_cast<int>(n) + 1;
    if (cmp.first_disagreement != 0) {
        cmp.reason = "coupled spectra differ";
        cmp.max_deviation = std::numeric_limits<double>::infinity();
        return cmp;
    }
    cmp.spectrum = a.modes;

    FssOptions fopt;
    auto sa = scatter_spectrum(RadialModel::from_matrix(S), a.modes, lambda, Gauge::q, fopt, workers);
    auto sb = scatter_spectrum(RadialModel::from_matrix(St), a.modes, lambda, Gauge::q, fopt, workers);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        ModeDeviation d{sa[i].m, sa[i].mu_sq, sa[i].nu_sq, 0.0};
        if (sa[i].S && sb[i].S) {
            d.deviation = std::max({std::abs(sa[i].S->L - sb[i].S->L), std::abs(sa[i].S->T - sb[i].S->T),
                                    std::abs(sa[i].S->R - sb[i].S->R)});
        } else if (sa[i].chi.pole != sb[i].chi.pole) {
            d.deviation = std::numeric_limits<double>::infinity();
        }
        cmp.max_deviation = std::max(cmp.max_deviation, d.deviation);
        cmp.per_mode.push_back(d);
    }
    cmp.pass = cmp.max_deviation <= tol.scattering;
    if (!cmp.pass) cmp.reason = "partial scattering matrices differ";
    return cmp;
}

json ComparisonReport::to_json() const {
    return {{"verdict", verdict()},
            {"failed_stage", stage.empty() ? json(nullptr) : json(stage)},
            {"angular", angular.to_json()},
            {"scattering", scattering ? scattering->to_json() : json(nullptr)},
            {"radial", radial ? radial->to_json() : json(nullptr)},
            {"pullback", pullback ? pullback->to_json() : json(nullptr)}};
}

ComparisonReport verify_pair(const StackelMatrix& S, const StackelMatrix& St, double lambda, double r_max,
                             int workers, const VerifyTolerances& tol) {
    ComparisonReport rep;
    rep.angular = angular_recover(S, St, tol);
    if (!rep.angular.pass) {
        rep.stage = "angular";
        return rep;
    }
    StackelMatrix back = undo_angular_gauges(St, rep.angular);
    rep.scattering = compare_scattering(S, back, lambda, r_max, workers, tol);
    if (!rep.scattering->pass) {
        rep.stage = "scattering";
        return rep;
    }
    rep.radial = radial_recover(S, back, lambda, rep.scattering->spectrum, tol);
    if (!rep.radial->pass) {
        rep.stage = "radial";
        return rep;
    }
    rep.pullback = pullback_compare(S, back, tol);
    if (!rep.pullback->pass) {
        rep.stage = "pullback";
        return rep;
    }
    rep.equivalent = true;
    return rep;
}

}  // namespace stk
