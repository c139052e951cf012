#include <doctest.h>

#include <cmath>
#include <random>

#include "stackel/errors.hpp"
#include "stackel/inverse.hpp"

using namespace stk;

namespace {

StackelMatrix gauge_pair(const StackelMatrix& S, double c, double C1, double C2) {
    return apply_column_invariance(apply_first_column_shift(S, C1, C2), angular_block_gauge(c));
}

}  // namespace

TEST_CASE("angular recovery of the identity") {
    StackelMatrix S = make_preset("example1");
    AngularRecovery r = angular_recover(S, S);
    CHECK(r.pass);
    CHECK(r.c == 0.0);
    CHECK(r.C1 == 0.0);
    CHECK(r.C2 == 0.0);
    CHECK(r.s11_match);
}

TEST_CASE("angular recovery inverts a known gauge") {
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        AngularRecovery r = angular_recover(S, gauge_pair(S, 0.1, 0.3, -0.2));
        CHECK(r.pass);
        CHECK(std::abs(r.c - 0.1) < 1e-8);
        CHECK(std::abs(r.C1 - 0.3) < 1e-8);
        CHECK(std::abs(r.C2 + 0.2) < 1e-8);
        CHECK(r.block_deviation < 1e-12);
        CHECK(det(r.G) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("angular recovery rejects a non-gauge change of the angular rows") {
    StackelMatrix S = make_preset("example3");
    StackelMatrix P = S;
    Expr w = Expr(0.05) * sin(Expr::x());
    P.s[1][1] = lincomb(1.0, S.s[1][1], 1.0, w);
    P.s[1][2] = lincomb(1.0, S.s[1][2], 1.0, w);
    AngularRecovery r = angular_recover(S, P);
    CHECK(!r.pass);
    CHECK(r.constancy_residual > 1e-3);
    ComparisonReport rep = verify_pair(S, P, 1.0, 10.0);
    CHECK(rep.verdict() == "distinct");
    CHECK(rep.stage == "angular");
}

TEST_CASE("reconstruction quotients") {
    StackelMatrix S = make_preset("example1");
    const double x2 = 0.7, x3 = 2.1;
    ReconstructionState st(S, x2, x3);
    for (double X : {0.1 * st.length(), 0.5 * st.length(), 0.8 * st.length()}) {
        double x = st.x_at(X);
        double a = st.l(X) * S(2, 1, x3) - S(2, 2, x3);
        double b = S(1, 2, x2) - st.l(X) * S(1, 1, x2);
        CHECK(st.angular_factor(X) == doctest::Approx(a * b).epsilon(1e-14));
        double m11 = S(1, 1, x2) * S(2, 2, x3) - S(1, 2, x2) * S(2, 1, x3);
        double h = st.f(X) / (a * b) + S(1, 0, x2) / (m11 * b) + S(2, 0, x3) / (m11 * a);
        CHECK(st.h(X) == doctest::Approx(h).epsilon(1e-6));
        double e = 1e-5;
        double fd = (std::log(st.h(X + e)) - std::log(st.h(X - e))) / (2.0 * e);
        CHECK(st.dlog_h(X) == doctest::Approx(fd).epsilon(1e-6));
        CHECK(st.l(X) == doctest::Approx(S(0, 2, x) / S(0, 1, x)));
    }
}

TEST_CASE("Cauchy problem with equal inputs stays at one") {
    for (const auto& name : preset_names()) {
        ReconstructionState st(make_preset(name), 1.0, 2.0);
        CHECK(cauchy_deviation(st, 1.0) <= 1e-11);
    }
}

TEST_CASE("Cauchy coefficient is positive on all presets") {
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        for (double x2 : {0.0, 1.3, 2.9, 4.4})
            for (double x3 : {0.2, 1.9, 3.7, 5.5}) {
                ReconstructionState st(S, x2, x3);
                for (int k = 1; k < 20; ++k) CHECK(st.angular_factor(st.length() * k / 20.0) > 0.0);
            }
    }
}

TEST_CASE("radial recovery detects a bump in s11") {
    StackelMatrix S = make_preset("example1");
    StackelMatrix B = apply_bump(S, 0.01, 1.0, 0.5);
    SpectrumResult sp = coupled_solve(S, 1.0, 10.0);
    RadialRecovery r = radial_recover(S, B, 1.0, sp.modes);
    CHECK(!r.pass);
    CHECK(r.potential_deviation > 1e-3 * 2.0 * 0.01 / (1.0 + 2.0 * 10.0));
    CHECK(std::abs(ReconstructionState(S, 0.0, 0.0).x_at(r.potential_deviation_at) - 1.0) < 0.5);

    RadialRecovery same = radial_recover(S, reparametrize_x1(S, 0.2), 1.0, sp.modes);
    CHECK(same.pass);
    CHECK(same.quotient_s13_s12_match);
    CHECK(same.u_deviation < 1e-7);
    CHECK(same.nu_sq[0] != same.nu_sq[1]);
}

TEST_CASE("pullback comparison") {
    StackelMatrix S = make_preset("example2");
    PullbackReport same = pullback_compare(S, reparametrize_x1(S, 0.2));
    CHECK(same.pass);
    CHECK(same.max_deviation < 1e-8);
    CHECK(same.length == doctest::Approx(same.length_tilde).epsilon(1e-10));

    PullbackReport diff = pullback_compare(S, apply_bump(S, 0.05, 0.6, 0.2));
    CHECK(!diff.pass);
    CHECK(std::abs(diff.at_x1 - 0.6) < 0.25);

    StackelMatrix L = S;
    L.s[0][1] = lincomb(1.1, S.s[0][1], 0.0, Expr(0.0));
    PullbackReport len = pullback_compare(S, L);
    CHECK(!len.pass);
    CHECK(len.reason == "chart lengths differ");
}

TEST_CASE("scattering comparison") {
    StackelMatrix S = make_preset("hyperbolic-template");
    ScatteringComparison self = compare_scattering(S, S, 1.0, 10.0);
    CHECK(self.pass);
    CHECK(self.max_deviation == 0.0);
    for (const auto& d : self.per_mode) CHECK(d.deviation == 0.0);

    ScatteringComparison bump = compare_scattering(S, apply_bump(S, 0.01, 1.0, 0.5), 1.0, 10.0);
    CHECK(!bump.pass);
    CHECK(bump.max_deviation > 1e-3);

    ScatteringComparison other = compare_scattering(S, make_preset("example2"), 1.0, 10.0);
    CHECK(!other.pass);
    CHECK(other.first_disagreement >= 1);
}

TEST_CASE("verification verdicts") {
    StackelMatrix S = make_preset("hyperbolic-template");
    ComparisonReport a = verify_pair(S, gauge_pair(S, 0.1, 0.3, -0.2), 1.0, 10.0);
    CHECK(a.verdict() == "equivalent");
    REQUIRE(a.scattering);
    CHECK(a.scattering->max_deviation < 1e-6);
    REQUIRE(a.radial);
    CHECK(a.radial->u_deviation < 1e-6);
    REQUIRE(a.pullback);
    CHECK(a.pullback->max_deviation < 1e-8);

    ComparisonReport b = verify_pair(S, apply_bump(S, 0.01, 1.0, 0.5), 1.0, 10.0);
    CHECK(b.verdict() == "distinct");
    CHECK(b.stage == "scattering");
    CHECK(b.to_json()["radial"].is_null());

    ComparisonReport again = verify_pair(S, gauge_pair(S, 0.1, 0.3, -0.2), 1.0, 10.0);
    CHECK(again.to_json().dump() == a.to_json().dump());
}

TEST_CASE("soundness over random invariance transforms") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    StackelMatrix S = make_preset("example1");
    for (int i = 0; i < 3; ++i) {
        double c = 0.2 * u(rng), C1 = u(rng), C2 = u(rng);
        StackelMatrix T = gauge_pair(S, c, C1, C2);
        T = normalize_angular_gauge(scale_row(T, 1 + i % 2, 1.0 + 0.5 * std::abs(u(rng)))).S;
        ComparisonReport r = verify_pair(S, T, 1.0, 6.0);
        CHECK(r.verdict() == "equivalent");
        CHECK(std::abs(r.angular.c - c) < 1e-8);
    }
}
