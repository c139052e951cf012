#include "stackel/radial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <gsl/gsl_sf_gamma.h>

#include "stackel/errors.hpp"
#include "stackel/ode.hpp"
#include "stackel/parallel.hpp"

namespace stk {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace

std::string gauge_name(Gauge g) {
    switch (g) {
        case Gauge::q: return "q";
        case Gauge::q_hat: return "q_hat";
        case Gauge::q_check: return "q_check";
    }
    return "q";
}

Gauge gauge_from_name(const std::string& name) {
    if (name == "q") return Gauge::q;
    if (name == "q_hat") return Gauge::q_hat;
    if (name == "q_check") return Gauge::q_check;
    throw StackelError("config", "unknown gauge '" + name + "'");
}

cplx complex_gamma(cplx z) {
    gsl_sf_result lnr, arg;
    if (gsl_sf_lngamma_complex_e(z.real(), z.imag(), &lnr, &arg) != 0)
        throw StackelError("domain", "complex gamma failed");
    return std::exp(cplx(lnr.val, arg.val));
}

cplx EnergyContext::k() const { return 2.0 * I * lambda * omega_minus / omega_plus; }

EnergyContext energy_context(double lambda) {
    if (lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
    EnergyContext e;
    e.lambda = lambda;
    double base = std::sqrt(2.0 * lambda * std::sinh(kPi * lambda));
    e.omega_plus = kPi / (base * complex_gamma(cplx(1.0, -lambda)));
    e.omega_minus = kPi / (base * complex_gamma(cplx(1.0, lambda)));
    return e;
}

// ---------------------------------------------------------------------------
// Potentials

RadialModel RadialModel::from_matrix(const StackelMatrix& S) {
    RobertsonFactors rf = check_robertson(S);
    RadialModel m;
    m.s11 = S.s[0][0];
    m.s12 = S.s[0][1];
    m.s13 = S.s[0][2];
    m.f1 = rf.f1.expr();
    m.A = S.A;
    return m;
}

double RadialPotential::X(double x) const { return chart ? chart->forward(x) : x; }
double RadialPotential::X_right(double x) const { return chart ? chart->from_right(x) : length - x; }
double RadialPotential::x_at(double X) const { return chart ? chart->inverse(X) : X; }

namespace {

// Least-squares strength s in d^2 q = -s + beta d over the innermost decades, plus
// the weighted regular moment.
void fit_ends(RadialPotential& pot) {
    const double c = pot.lambda * pot.lambda + 0.25;
    for (int end = 0; end < 2; ++end) {
        Eigen::MatrixXd M(9, 2);
        Eigen::VectorXd v(9);
        double moment = 0.0;
        for (int k = 0; k < 9; ++k) {
            double d = pot.length * std::pow(10.0, -4.0 - 0.5 * k);
            double x = pot.x_at(end == 0 ? d : pot.length - d);
            d = end == 0 ? pot.X(x) : pot.X_right(x);
            double q = pot.q(x).real();
            M(k, 0) = 1.0;
            M(k, 1) = d;
            v(k) = -d * d * q;
            moment += d * d * std::abs(q + c / (d * d)) * 0.5 * std::log(10.0);
        }
        Eigen::Vector2d sol = M.colPivHouseholderQr().solve(v);
        pot.singular_strength[end] = sol(0);
        pot.regular_moment[end] = moment;
        if (std::abs(sol(0) - c) > 0.05 * c) {
            std::ostringstream os;
            os << "singular strength " << sol(0) << " at end " << end << ", expected " << c;
            throw StackelError("ah-structure", os.str());
        }
    }
}

}  // namespace

RadialPotential build_potential(const RadialModel& m, Gauge g, double lambda, cplx mu_sq, cplx nu_sq) {
    if (lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
    RadialPotential pot;
    pot.gauge = g;
    pot.lambda = lambda;
    pot.mu_sq = mu_sq;
    pot.nu_sq = nu_sq;
    pot.x_length = m.A;
    Expr w;
    switch (g) {
        case Gauge::q:
            w = m.s12;
            pot.spectral = mu_sq;
            break;
        case Gauge::q_hat:
            w = m.s13;
            pot.spectral = nu_sq;
            break;
        case Gauge::q_check: {
            cplx om = mu_sq + nu_sq;
            if (om == 0.0) throw StackelError("domain", "q_check needs mu^2 + nu^2 != 0");
            if (mu_sq.imag() != 0.0 || nu_sq.imag() != 0.0)
                throw StackelError("domain", "q_check needs real mu^2 and nu^2");
            double a = mu_sq.real() / om.real(), b = nu_sq.real() / om.real();
            w = lincomb(a, m.s12, b, m.s13);
            pot.spectral = om;
            break;
        }
    }
    pot.chart = std::make_shared<LiouvilleChart>(SmoothFn1D(w, 0.0, m.A));
    pot.length = pot.chart->length();
    const double kappa = lambda * lambda + 1.0;
    Expr s11 = m.s11, s12 = m.s12, s13 = m.s13, f1 = m.f1;
    pot.coeffs = [=](double x) {
        Jet wj = w.jet(x);
        if (!(wj.v > 0.0)) throw StackelError("positivity", "radial weight non-positive at x = " + std::to_string(x));
        Jet fj = f1.jet(x);
        auto [t1, t2] = schwarzian_terms(log(fj) - log(wj), wj);
        cplx c = -kappa * s11(x) + mu_sq * s12(x) + nu_sq * s13(x);
        return std::pair<double, cplx>{std::sqrt(wj.v), c / wj.v + t1 - t2};
    };
    fit_ends(pot);
    return pot;
}

RadialPotential model_potential(double lambda, double length, cplx constant) {
    if (lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
    RadialPotential pot;
    pot.lambda = lambda;
    pot.spectral = constant;
    pot.mu_sq = constant;
    pot.x_length = length;
    pot.length = length;
    const double c = lambda * lambda + 0.25;
    pot.coeffs = [=](double x) {
        double d = std::min(x, length - x);
        return std::pair<double, cplx>{1.0, -c / (d * d) + constant};
    };
    fit_ends(pot);
    return pot;
}

// ---------------------------------------------------------------------------
// Fundamental systems

namespace {

using State = std::array<double, 8>;

struct PairRun {
    std::vector<std::array<SolutionValue, 2>> at;
    double drift = 0.0;
    double offset = 0.0;
};

// Integrates the pair anchored at the left (S10, S20) or right (S11, S21) end.
// Stops are distances t from the anchoring end, strictly increasing; drift is
// measured at the stops flagged in `check`.
PairRun run_pair(const RadialPotential& pot, bool left, double offset, const std::vector<double>& stops,
                 const std::vector<bool>& check, const FssOptions& opt) {
    const double L = pot.length;
    const double lam = pot.lambda;
    const double c = lam * lam + 0.25;
    auto x_of_t = [&](double t) { return pot.x_at(left ? t : L - t); };
    auto t_of_x = [&](double x) { return left ? pot.X(x) : pot.X_right(x); };

    double x0 = x_of_t(offset);
    double t0 = t_of_x(x0);
    double x1 = x_of_t(2.0 * offset);
    double t1 = t_of_x(x1);
    // t^2 P + c = b t + c0 t^2 near the end
    cplx g0 = t0 * t0 * pot.coeffs(x0).second + c;
    cplx g1 = t1 * t1 * pot.coeffs(x1).second + c;
    cplx c0 = (g1 / t1 - g0 / t0) / (t1 - t0);
    cplx b = g0 / t0 - c0 * t0;

    auto frobenius = [&](cplx a) {
        cplx k1 = b / (2.0 * a);
        cplx k2 = (b * k1 + c0) / (2.0 * (2.0 * a + 1.0));
        cplx p = std::pow(cplx(t0), a);
        cplx u = p * (1.0 + k1 * t0 + k2 * t0 * t0);
        cplx du = p / t0 * (a + k1 * (a + 1.0) * t0 + k2 * (a + 2.0) * t0 * t0);
        return SolutionValue{u, du};
    };
    const cplx a1(0.5, -lam), a2(0.5, lam);
    SolutionValue s1 = frobenius(a1), s2 = frobenius(a2);
    const cplx n2 = 1.0 / (2.0 * I * lam);
    s2.u *= n2;
    s2.du *= n2;
    if (!left) {
        // d/dX = -d/dt, and S21 carries the opposite sign
        s1.du = -s1.du;
        s2.u = -s2.u;
    }
    State y{s1.u.real(), s1.u.imag(), s1.du.real(), s1.du.imag(),
            s2.u.real(), s2.u.imag(), s2.du.real(), s2.du.imag()};

    auto rhs = [&](const State& s, State& d, double x) {
        auto [sw, P] = pot.coeffs(x);
        for (int k = 0; k < 2; ++k) {
            int o = 4 * k;
            cplx u(s[o], s[o + 1]), du(s[o + 2], s[o + 3]);
            cplx dd = sw * P * u;
            d[o] = sw * du.real();
            d[o + 1] = sw * du.imag();
            d[o + 2] = dd.real();
            d[o + 3] = dd.imag();
        }
    };
    std::vector<double> xs;
    xs.reserve(stops.size());
    for (double t : stops) xs.push_back(x_of_t(t));
    PairRun run;
    run.offset = t0;
    run.at.resize(stops.size());
    integrate_through<8>(rhs, y, x0, xs, opt.rtol, opt.atol, [&](std::size_t i, const State& s) {
        SolutionValue u{{s[0], s[1]}, {s[2], s[3]}}, v{{s[4], s[5]}, {s[6], s[7]}};
        run.at[i] = {u, v};
        if (check[i]) {
            cplx w = u.u * v.du - u.du * v.u;
            run.drift = std::max(run.drift, std::abs(w - 1.0));
        }
    });
    return run;
}

cplx wronskian(const SolutionValue& a, const SolutionValue& b) { return a.u * b.du - a.du * b.u; }

}  // namespace

FundamentalSystem solve_fss(const RadialPotential& pot, const FssOptions& opt, double offset) {
    const double L = pot.length;
    if (offset <= 0.0) offset = opt.offset_factor * L;
    FundamentalSystem fs;
    std::vector<std::pair<double, int>> marks;  // distance from the left end, tag
    for (int k = 1; k <= 16; ++k) marks.push_back({L * k / 32.0, -1});
    for (int j = 0; j < 5; ++j) {
        fs.match_X[j] = L * (0.4 + 0.05 * j);
        marks.push_back({fs.match_X[j], j});
    }
    std::sort(marks.begin(), marks.end());

    // left pair: increasing distance from 0
    std::vector<double> ls;
    std::vector<bool> lc;
    std::vector<int> ltag;
    for (auto [X, tag] : marks) {
        if (!ls.empty() && X == ls.back()) {
            if (tag >= 0) ltag.back() = tag;
            lc.back() = lc.back() || tag < 0;
            continue;
        }
        ls.push_back(X);
        lc.push_back(tag < 0);
        ltag.push_back(tag);
    }
    // right pair: mirrored stops
    std::vector<double> rs;
    std::vector<bool> rc;
    std::vector<int> rtag;
    for (int i = static_cast<int>(ls.size()) - 1; i >= 0; --i) {
        rs.push_back(L - ls[i]);
        rtag.push_back(ltag[i]);
        rc.push_back(false);
    }
    for (int k = 1; k <= 16; ++k) {
        double t = L * k / 32.0;
        auto it = std::find_if(rs.begin(), rs.end(), [&](double r) { return std::abs(r - t) <= 1e-14 * L; });
        if (it != rs.end()) {
            rc[it - rs.begin()] = true;
        } else {
            auto pos = std::lower_bound(rs.begin(), rs.end(), t) - rs.begin();
            rs.insert(rs.begin() + pos, t);
            rc.insert(rc.begin() + pos, true);
            rtag.insert(rtag.begin() + pos, -1);
        }
    }

    PairRun lr = run_pair(pot, true, offset, ls, lc, opt);
    PairRun rr = run_pair(pot, false, offset, rs, rc, opt);
    for (std::size_t i = 0; i < ls.size(); ++i)
        if (ltag[i] >= 0) {
            fs.s10[ltag[i]] = lr.at[i][0];
            fs.s20[ltag[i]] = lr.at[i][1];
        }
    for (std::size_t i = 0; i < rs.size(); ++i)
        if (rtag[i] >= 0) {
            fs.s11[rtag[i]] = rr.at[i][0];
            fs.s21[rtag[i]] = rr.at[i][1];
        }
    fs.start_offset = lr.offset;
    fs.wronskian_drift = std::max(lr.drift, rr.drift);
    if (fs.wronskian_drift > opt.wronskian_tol) {
        std::ostringstream os;
        os << "Wronskian drift " << fs.wronskian_drift << " exceeds " << opt.wronskian_tol;
        throw StackelError("accuracy", os.str());
    }
    return fs;
}

std::vector<SolutionValue> left_solution(const RadialPotential& pot, const std::vector<double>& X,
                                         const FssOptions& opt) {
    std::vector<bool> check(X.size(), false);
    PairRun run = run_pair(pot, true, opt.offset_factor * pot.length, X, check, opt);
    std::vector<SolutionValue> out;
    for (const auto& p : run.at) out.push_back(p[0]);
    return out;
}

// ---------------------------------------------------------------------------
// Characteristic functions and scattering

json CharacteristicData::to_json() const {
    return {{"gauge", gauge_name(gauge)},
            {"mu_sq", cjson(mu_sq)},
            {"nu_sq", cjson(nu_sq)},
            {"Delta", cjson(Delta)},
            {"delta", cjson(delta)},
            {"M", pole ? json(nullptr) : cjson(M)},
            {"pole", pole},
            {"Delta_spread", Delta_spread},
            {"delta_spread", delta_spread},
            {"ladder_diff", ladder_diff},
            {"wronskian_drift", wronskian_drift}};
}

namespace {

struct Averaged {
    cplx Delta, delta;
    double sD = 0.0, sd = 0.0;
};

Averaged average_wronskians(const FundamentalSystem& fs) {
    Averaged a;
    std::array<cplx, 5> D, d;
    for (int j = 0; j < 5; ++j) {
        D[j] = wronskian(fs.s11[j], fs.s10[j]);
        d[j] = wronskian(fs.s11[j], fs.s20[j]);
        a.Delta += D[j] / 5.0;
        a.delta += d[j] / 5.0;
    }
    for (int j = 0; j < 5; ++j) {
        a.sD = std::max(a.sD, std::abs(D[j] - a.Delta));
        a.sd = std::max(a.sd, std::abs(d[j] - a.delta));
    }
    return a;
}

}  // namespace

CharacteristicData characteristic(const RadialPotential& pot, const FssOptions& opt) {
    FundamentalSystem fs = solve_fss(pot, opt);
    Averaged a = average_wronskians(fs);
    CharacteristicData chi;
    chi.gauge = pot.gauge;
    chi.mu_sq = pot.mu_sq;
    chi.nu_sq = pot.nu_sq;
    chi.Delta = a.Delta;
    chi.delta = a.delta;
    chi.Delta_spread = a.sD;
    chi.delta_spread = a.sd;
    chi.wronskian_drift = fs.wronskian_drift;
    if (opt.ladder) {
        FundamentalSystem fine = solve_fss(pot, opt, 0.25 * opt.offset_factor * pot.length);
        Averaged b = average_wronskians(fine);
        chi.ladder_diff = std::max(std::abs(a.Delta - b.Delta) / (1.0 + std::abs(a.Delta)),
                                   std::abs(a.delta - b.delta) / (1.0 + std::abs(a.delta)));
        chi.wronskian_drift = std::max(chi.wronskian_drift, fine.wronskian_drift);
        if (chi.ladder_diff > opt.ladder_tol) {
            std::ostringstream os;
            os << "endpoint offset ladder disagrees by " << chi.ladder_diff;
            throw StackelError("accuracy", os.str());
        }
    }
    chi.pole = std::abs(chi.Delta) < opt.pole_tol * (std::abs(chi.delta) + 1.0);
    chi.M = chi.pole ? cplx(std::nan(""), std::nan("")) : -chi.delta / chi.Delta;
    return chi;
}

json PartialScatteringMatrix::to_json() const {
    return {{"L", cjson(L)}, {"T", cjson(T)}, {"R", cjson(R)}, {"unitarity_residual", unitarity_residual},
            {"flagged", flagged}};
}

PartialScatteringMatrix scattering_entry(const CharacteristicData& chi, const EnergyContext& energy,
                                         double unit_tol) {
    if (chi.pole) throw StackelError("pole", "Weyl-Titchmarsh function has a pole at this mode");
    cplx k = energy.k();
    PartialScatteringMatrix s;
    s.L = -k * chi.M;
    s.T = k / chi.Delta;
    s.R = k * (std::conj(chi.Delta) / chi.Delta) * std::conj(chi.M);
    // S S^* - I for S = [[L, T], [T, R]]
    cplx e00 = s.L * std::conj(s.L) + s.T * std::conj(s.T) - 1.0;
    cplx e01 = s.L * std::conj(s.T) + s.T * std::conj(s.R);
    cplx e11 = s.T * std::conj(s.T) + s.R * std::conj(s.R) - 1.0;
    s.unitarity_residual = std::max({std::abs(e00), std::abs(e01), std::abs(e11)});
    s.flagged = !(s.unitarity_residual <= unit_tol);
    return s;
}

json ModeScattering::to_json() const {
    json j = {{"m", m},
              {"mu_sq", mu_sq},
              {"nu_sq", nu_sq},
              {"multiplicity", multiplicity},
              {"Delta", cjson(chi.Delta)},
              {"delta", cjson(chi.delta)},
              {"M", chi.pole ? json(nullptr) : cjson(chi.M)},
              {"pole", chi.pole}};
    if (S) {
        j["L"] = cjson(S->L);
        j["T"] = cjson(S->T);
        j["R"] = cjson(S->R);
        j["unitarity_residual"] = S->unitarity_residual;
        j["flagged"] = S->flagged;
    }
    return j;
}

std::vector<ModeScattering> scatter_spectrum(const RadialModel& model, const std::vector<CoupledEigenvalue>& modes,
                                             double lambda, Gauge g, const FssOptions& opt, int workers) {
    EnergyContext energy = energy_context(lambda);
    std::vector<ModeScattering> out(modes.size());
    parallel_for(modes.size(), workers, [&](std::size_t i) {
        const auto& e = modes[i];
        ModeScattering ms;
        ms.m = e.index;
        ms.mu_sq = e.mu_sq;
        ms.nu_sq = e.nu_sq;
        ms.multiplicity = e.multiplicity;
        ms.chi = characteristic(build_potential(model, g, lambda, e.mu_sq, e.nu_sq), opt);
        if (!ms.chi.pole) ms.S = scattering_entry(ms.chi, energy);
        out[i] = ms;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Oracles and asymptotics

SolutionValue bessel_s10(double lambda, cplx omega_sq, double x) {
    const cplx a(0.5, -lambda);
    cplx t = omega_sq * x * x / 4.0;
    cplx term = 1.0, sum = 0.0, dsum = 0.0;
    for (int k = 0; k < 400; ++k) {
        if (k > 0) term *= t / (static_cast<double>(k) * (cplx(k, -lambda)));
        sum += term;
        dsum += term * (a + 2.0 * k);
        if (k > 4 && std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    cplx p = std::pow(cplx(x), a);
    return {p * sum, p / x * dsum};
}

json AsymptoticsReport::to_json() const {
    json r = json::array();
    for (const auto& row : rows)
        r.push_back({{"y", row.y},
                     {"Delta", cjson(row.Delta)},
                     {"Delta_pred", cjson(row.Delta_pred)},
                     {"Delta_error", row.Delta_error},
                     {"delta", cjson(row.delta)},
                     {"delta_pred", cjson(row.delta_pred)},
                     {"delta_error", row.delta_error}});
    return {{"chart_length", chart_length}, {"decreasing", decreasing}, {"rows", r}};
}

std::string AsymptoticsReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "y,Delta_ratio_error,delta_ratio_error\n";
    for (const auto& row : rows) os << row.y << ',' << row.Delta_error << ',' << row.delta_error << '\n';
    return os.str();
}

AsymptoticsReport asymptotics_check(const RadialModel& model, double lambda, const std::vector<double>& ys,
                                    double phi, const FssOptions& opt) {
    AsymptoticsReport rep;
    const cplx g1 = complex_gamma(cplx(1.0, -lambda)), g2 = complex_gamma(cplx(1.0, lambda));
    const double c2 = std::cos(phi) * std::cos(phi), s2 = std::sin(phi) * std::sin(phi);
    for (double y : ys) {
        RadialPotential pot = build_potential(model, Gauge::q_check, lambda, -y * y * c2, -y * y * s2);
        CharacteristicData chi = characteristic(pot, opt);
        double Ac = pot.length;
        rep.chart_length = Ac;
        cplx w = I * y;
        double sgn = y >= 0 ? 1.0 : -1.0;
        cplx pre = g1 * g1 / (kPi * std::pow(cplx(2.0), 2.0 * I * lambda)) * std::exp(2.0 * I * lambda * std::log(w)) *
                   std::exp(sgn * lambda * kPi);
        AsymptoticsRow row;
        row.y = y;
        row.Delta = chi.Delta;
        row.delta = chi.delta;
        row.Delta_pred = pre * 2.0 * std::cosh(w * Ac - sgn * lambda * kPi);
        row.delta_pred = g1 * g2 / (2.0 * I * lambda * kPi) * 2.0 * std::cosh(w * Ac);
        row.Delta_error = std::abs(row.Delta / row.Delta_pred - 1.0);
        row.delta_error = std::abs(row.delta / row.delta_pred - 1.0);
        rep.rows.push_back(row);
    }
    rep.decreasing = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (!(rep.rows[i].Delta_error < rep.rows[i - 1].Delta_error)) rep.decreasing = false;
    return rep;
}

// ---------------------------------------------------------------------------
// Complex angular momentum diagnostics

json CamReport::to_json() const {
    json s = json::array();
    for (const auto& p : samples) s.push_back({{"mu", cjson(p.mu)}, {"nu", cjson(p.nu)}, {"psi", cjson(p.psi)}});
    return {{"sup_imaginary", sup_imaginary},
            {"bounded", bounded},
            {"fit_A", fit_A},
            {"fit_B", fit_B},
            {"max_on_spectrum", max_on_spectrum},
            {"vanishing_on_spectrum", vanishing_on_spectrum},
            {"spectrum_points", spectrum_points},
            {"samples", s}};
}

std::vector<std::pair<cplx, cplx>> cam_default_grid(double radius, int per_ray) {
    std::vector<std::pair<cplx, cplx>> g;
    // purely imaginary samples
    for (int i = 1; i <= per_ray; ++i)
        for (double phi : {0.3, 0.8, 1.2}) {
            double t = radius * i / per_ray;
            g.push_back({cplx(0.0, t * std::cos(phi)), cplx(0.0, t * std::sin(phi))});
        }
    // real parts growing along the two axes
    for (int i = 1; i <= per_ray; ++i) {
        double t = radius * i / per_ray;
        g.push_back({cplx(t, 1.0), cplx(0.0, 1.0)});
        g.push_back({cplx(0.0, 1.0), cplx(t, 1.0)});
        g.push_back({cplx(t, 1.0), cplx(t, 1.0)});
    }
    return g;
}

CamReport cam_diagnostics(const RadialModel& a, const RadialModel& b, double lambda,
                          const std::vector<std::pair<cplx, cplx>>& grid,
                          const std::vector<CoupledEigenvalue>& spectrum, double tol, int workers) {
    FssOptions opt;
    opt.wronskian_tol = std::numeric_limits<double>::infinity();
    opt.ladder = false;
    auto psi = [&](cplx mu_sq, cplx nu_sq) {
        CharacteristicData x = characteristic(build_potential(a, Gauge::q, lambda, mu_sq, nu_sq), opt);
        CharacteristicData y = characteristic(build_potential(b, Gauge::q, lambda, mu_sq, nu_sq), opt);
        return y.Delta * x.delta - x.Delta * y.delta;
    };
    CamReport rep;
    rep.samples.resize(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        auto [mu, nu] = grid[i];
        rep.samples[i] = {mu, nu, psi(mu * mu, nu * nu)};
    });

    std::vector<double> inner, outer;
    double rmax = 0.0;
    for (const auto& s : rep.samples)
        if (s.mu.real() == 0.0 && s.nu.real() == 0.0) rmax = std::max(rmax, std::hypot(s.mu.imag(), s.nu.imag()));
    double sup_in = 0.0, sup_out = 0.0;
    std::vector<const CamSample*> fit;
    for (const auto& s : rep.samples) {
        if (s.mu.real() == 0.0 && s.nu.real() == 0.0) {
            double r = std::hypot(s.mu.imag(), s.nu.imag());
            double v = std::abs(s.psi);
            rep.sup_imaginary = std::max(rep.sup_imaginary, v);
            (r <= 0.5 * rmax ? sup_in : sup_out) = std::max(r <= 0.5 * rmax ? sup_in : sup_out, v);
        } else if (std::abs(s.psi) > 0.0) {
            fit.push_back(&s);
        }
    }
    rep.bounded = std::isfinite(rep.sup_imaginary) && sup_out <= 10.0 * std::max(sup_in, tol);

    if (fit.size() >= 3) {
        Eigen::MatrixXd M(fit.size(), 3);
        Eigen::VectorXd v(fit.size());
        for (std::size_t i = 0; i < fit.size(); ++i) {
            M(i, 0) = 1.0;
            M(i, 1) = std::abs(fit[i]->mu.real());
            M(i, 2) = std::abs(fit[i]->nu.real());
            v(i) = std::log(std::abs(fit[i]->psi));
        }
        Eigen::Vector3d sol = M.colPivHouseholderQr().solve(v);
        rep.fit_A = sol(1);
        rep.fit_B = sol(2);
    }

    std::vector<cplx> on(spectrum.size());
    parallel_for(spectrum.size(), workers,
                 [&](std::size_t i) { on[i] = psi(spectrum[i].mu_sq, spectrum[i].nu_sq); });
    rep.spectrum_points = static_cast<int>(spectrum.size());
    for (cplx p : on) {
        rep.max_on_spectrum = std::max(rep.max_on_spectrum, std::abs(p));
        if (std::abs(p) < tol) ++rep.vanishing_on_spectrum;
    }
    return rep;
}

}  // namespace stk
