#include <doctest.h>

#include <cmath>
#include <random>

#include "stackel/errors.hpp"
#include "stackel/radial.hpp"

using namespace stk;

namespace {

cplx connection_oracle(double lambda, cplx omega_sq) {
    SolutionValue s = bessel_s10(lambda, omega_sq, 1.0);
    return 2.0 * s.u * s.du;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace

TEST_CASE("energy context") {
    for (double lam : {0.3, 1.0, 2.5, -0.7}) {
        EnergyContext e = energy_context(lam);
        CHECK(std::abs(e.omega_plus) == doctest::Approx(std::abs(e.omega_minus)).epsilon(1e-13));
        CHECK(std::abs(std::abs(e.k()) - 2.0 * std::abs(lam)) < 1e-12);
    }
    CHECK(std::abs(complex_gamma(cplx(5.0, 0.0)) - 24.0) < 1e-11);
    cplx g = complex_gamma(cplx(1.0, 1.0));
    CHECK(std::abs(g - cplx(0.49801566811835604, -0.15494982830181069)) < 1e-13);
    CHECK_THROWS_AS(energy_context(0.0), StackelError);
}

TEST_CASE("left solution matches the Bessel series") {
    const double lam = 0.7;
    std::vector<double> X;
    for (int i = 0; i <= 18; ++i) X.push_back(0.1 + 0.05 * i);
    for (cplx w2 : {cplx(-4.0, 0.0), cplx(3.0, 0.0), cplx(-1.0, 2.0), cplx(-25.0, 0.0)}) {
        RadialPotential pot = model_potential(lam, 2.0, w2);
        std::vector<SolutionValue> s = left_solution(pot, X);
        for (std::size_t i = 0; i < X.size(); ++i) {
            SolutionValue b = bessel_s10(lam, w2, X[i]);
            CHECK(std::abs(s[i].u - b.u) / std::abs(b.u) < 1e-6);
            CHECK(std::abs(s[i].du - b.du) / std::abs(b.du) < 1e-6);
        }
        SolutionValue mid = bessel_s10(lam, w2, 0.5);
        CHECK(std::abs(left_solution(pot, {0.5})[0].u - mid.u) < 1e-7 * std::abs(mid.u));
    }
}

TEST_CASE("characteristic function of the mirrored Bessel model") {
    const double lam = 0.7;
    EnergyContext e = energy_context(lam);
    for (cplx w2 : {cplx(-4.0, 0.0), cplx(3.0, 0.0), cplx(-1.0, 2.0)}) {
        RadialPotential pot = model_potential(lam, 2.0, w2);
        CharacteristicData chi = characteristic(pot);
        cplx oracle = connection_oracle(lam, w2);
        CHECK(rel(chi.Delta, oracle) < 1e-6);
        CHECK(chi.wronskian_drift < 1e-8);
        CHECK(chi.Delta_spread < 1e-7 * (1.0 + std::abs(chi.Delta)));
        CHECK(chi.delta_spread < 1e-7 * (1.0 + std::abs(chi.delta)));
        if (w2.imag() == 0.0) {
            PartialScatteringMatrix S = scattering_entry(chi, e);
            CHECK(rel(S.T, e.k() / oracle) < 1e-6);
        }
    }
}

TEST_CASE("fundamental system normalization") {
    StackelMatrix S = make_preset("example1");
    RadialModel m = RadialModel::from_matrix(S);
    RadialPotential pot = build_potential(m, Gauge::q, 1.0, 4.0, 6.0);
    FundamentalSystem fs = solve_fss(pot);
    CHECK(fs.wronskian_drift < 1e-8);
    for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(fs.s10[j].u * fs.s20[j].du - fs.s10[j].du * fs.s20[j].u - 1.0) < 1e-8);
        CHECK(std::abs(fs.s11[j].u * fs.s21[j].du - fs.s11[j].du * fs.s21[j].u - 1.0) < 1e-8);
    }
    FssOptions strict;
    strict.wronskian_tol = 0.0;
    CHECK_THROWS_AS(solve_fss(pot, strict), StackelError);
}

TEST_CASE("evenness in the spectral parameter") {
    RadialModel m = RadialModel::from_matrix(make_preset("example3"));
    const double mu = 2.3, nu = 1.7;
    CharacteristicData a = characteristic(build_potential(m, Gauge::q, 1.0, mu * mu, nu * nu));
    CharacteristicData b = characteristic(build_potential(m, Gauge::q, 1.0, (-mu) * (-mu), (-nu) * (-nu)));
    CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("template potential near the ends") {
    StackelMatrix S = make_preset("hyperbolic-template");
    RadialModel m = RadialModel::from_matrix(S);
    const double lam = 0.8, nu_sq = 5.0;
    RadialPotential q = build_potential(m, Gauge::q, lam, 3.0, nu_sq);
    RadialPotential qh = build_potential(m, Gauge::q_hat, lam, nu_sq, 3.0);
    const double c = lam * lam + 0.25;
    for (double X : {1e-3, 1e-2, 3e-2}) {
        double x = q.x_at(X);
        double g = q.X(x);
        CHECK(std::abs(g * g * (q.q(x).real() - nu_sq) + c) < 0.05 * g);
        CHECK(std::abs(q.q(x) - qh.q(x)) < 1e-12);
    }
    CHECK(q.singular_strength[0] == doctest::Approx(c).epsilon(1e-3));
    CHECK(q.singular_strength[1] == doctest::Approx(c).epsilon(1e-3));
    CHECK(q.regular_moment[0] < 1e-2);
}

TEST_CASE("q_check on a purely imaginary ray") {
    RadialModel m = RadialModel::from_matrix(make_preset("hyperbolic-template"));
    cplx mu(0.0, 3.0), nu(0.0, 4.0);
    RadialPotential chk = build_potential(m, Gauge::q_check, 1.0, mu * mu, nu * nu);
    RadialPotential q = build_potential(m, Gauge::q, 1.0, mu * mu, nu * nu);
    CHECK(chk.spectral == cplx(-25.0, 0.0));
    CHECK(chk.length == doctest::Approx(q.length).epsilon(1e-12));
    CHECK_THROWS_AS(build_potential(m, Gauge::q_check, 1.0, 2.0, -2.0), StackelError);
}

TEST_CASE("characteristic function is independent of the gauge") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& name : preset_names()) {
        RadialModel m = RadialModel::from_matrix(make_preset(name));
        for (int i = 0; i < 4; ++i) {
            double mu_sq = 10.0 * u(rng), nu_sq = 10.0 * u(rng);
            CharacteristicData a = characteristic(build_potential(m, Gauge::q, 0.9, mu_sq, nu_sq));
            CharacteristicData b = characteristic(build_potential(m, Gauge::q_hat, 0.9, mu_sq, nu_sq));
            CharacteristicData c = characteristic(build_potential(m, Gauge::q_check, 0.9, mu_sq, nu_sq));
            CHECK(rel(b.Delta, a.Delta) < 1e-6);
            CHECK(rel(c.Delta, a.Delta) < 1e-6);
            CHECK(rel(b.delta, a.delta) < 1e-6);
        }
    }
}

TEST_CASE("partial scattering matrices are unitary") {
    EnergyContext e = energy_context(1.2);
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        SpectrumResult sp = coupled_solve(S, 1.2, 10.0);
        REQUIRE(!sp.modes.empty());
        std::vector<ModeScattering> ms = scatter_spectrum(RadialModel::from_matrix(S), sp.modes, 1.2);
        REQUIRE(ms.size() == sp.modes.size());
        for (const auto& x : ms) {
            CHECK(x.chi.wronskian_drift < 1e-8);
            REQUIRE(x.S.has_value());
            CHECK(x.S->unitarity_residual < 1e-6);
            CHECK(!x.S->flagged);
            CHECK(std::norm(x.S->T) + std::norm(x.S->L) == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(std::abs(std::abs(x.chi.Delta) * std::abs(x.chi.Delta) -
                           4.0 * 1.44 * (1.0 + std::norm(x.chi.delta))) < 1e-7 * std::norm(x.chi.Delta));
        }
        CHECK(scattering_entry(ms[0].chi, e).to_json() == ms[0].S->to_json());
    }
}

TEST_CASE("pole threshold") {
    CharacteristicData chi;
    chi.Delta = 1e-12;
    chi.delta = 1.0;
    chi.pole = true;
    CHECK_THROWS_AS(scattering_entry(chi, energy_context(1.0)), StackelError);
    CHECK(chi.to_json()["M"].is_null());
}

TEST_CASE("tolerance halving") {
    RadialModel m = RadialModel::from_matrix(make_preset("example2"));
    RadialPotential pot = build_potential(m, Gauge::q, 1.0, 3.0, 2.0);
    FssOptions a;
    a.rtol = 1e-10;
    a.ladder = false;
    FssOptions b = a;
    b.rtol = 0.5e-10;
    cplx d1 = characteristic(pot, a).Delta, d2 = characteristic(pot, b).Delta;
    CHECK(std::abs(d1 - d2) / std::abs(d1) < 10.0 * a.rtol);
}

TEST_CASE("asymptotics on the template") {
    RadialModel m = RadialModel::from_matrix(make_preset("hyperbolic-template"));
    AsymptoticsReport rep = asymptotics_check(m, 1.0, {20, 40, 80, 160});
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.decreasing);
    CHECK(rep.rows.back().Delta_error < 0.05);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].Delta_error < rep.rows[i - 1].Delta_error);
    CHECK(rep.chart_length > 0.0);
    CHECK(rep.to_csv().rfind("y,Delta_ratio_error,delta_ratio_error\n", 0) == 0);
}

TEST_CASE("complex angular momentum diagnostics") {
    StackelMatrix S = make_preset("example3");
    RadialModel m = RadialModel::from_matrix(S);
    SpectrumResult sp = coupled_solve(S, 1.0, 10.0);
    auto grid = cam_default_grid();

    RadialModel same = RadialModel::from_matrix(reparametrize_x1(S, 0.2));
    CamReport g = cam_diagnostics(m, same, 1.0, grid, sp.modes);
    CHECK(g.sup_imaginary < 1e-7);
    CHECK(g.max_on_spectrum < 1e-7);
    CHECK(g.vanishing_on_spectrum == g.spectrum_points);

    RadialModel bump = RadialModel::from_matrix(apply_bump(S, 0.3, 1.0, 0.2));
    CamReport p = cam_diagnostics(m, bump, 1.0, grid, sp.modes);
    CHECK(p.bounded);
    CHECK(p.vanishing_on_spectrum == 0);
    CHECK(std::isfinite(p.fit_A));
    CHECK(std::isfinite(p.fit_B));
    CHECK(p.fit_A > 0.0);
    CHECK(p.fit_B > 0.0);
}
