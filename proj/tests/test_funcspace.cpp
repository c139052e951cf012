#include <doctest.h>

#include <cmath>
#include <random>

#include "stackel/errors.hpp"
#include "stackel/funcspace.hpp"

using namespace stk;

TEST_CASE("eval_with_derivs on closed forms") {
    Expr x = Expr::x();
    auto d = SmoothFn1D(x * x, -10, 10).eval_with_derivs(3.0, 2);
    REQUIRE(d.size() == 3);
    CHECK(d[0] == doctest::Approx(9.0));
    CHECK(d[1] == doctest::Approx(6.0));
    CHECK(d[2] == doctest::Approx(2.0));

    auto s = SmoothFn1D(sin(x), -1, 1).eval_with_derivs(0.0, 1);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[1] == doctest::Approx(1.0));

    auto p = SmoothFn1D(Expr(1.0) / (x * x), 0.0, 1.0).eval_with_derivs(0.5, 2);
    CHECK(p[0] == doctest::Approx(4.0));
    CHECK(p[1] == doctest::Approx(-16.0));
    CHECK(p[2] == doctest::Approx(96.0));
}

TEST_CASE("out of domain point raises domain error") {
    SmoothFn1D f(Expr::x(), 0.0, 1.0);
    CHECK_THROWS_AS(f(1.5), StackelError);
    try {
        f(-0.1);
    } catch (const StackelError& e) {
        CHECK(e.code() == "domain");
    }
}

TEST_CASE("periodic functions wrap") {
    SmoothFn1D f(sin(Expr::x()), 0.0, 2 * M_PI, 2 * M_PI);
    CHECK(f(2 * M_PI + 0.3) == doctest::Approx(std::sin(0.3)).epsilon(1e-14));
    CHECK(f(-0.3) == doctest::Approx(std::sin(-0.3)).epsilon(1e-14));
}

TEST_CASE("analytic second derivative agrees with Richardson differences") {
    Expr x = Expr::x();
    Expr e = exp(sin(x)) / (Expr(2.0) + cos(x));
    for (double t : {0.1, 0.7, 1.9, 3.3}) {
        Jet a = e.jet(t);
        Jet fd = finite_difference_jet([&](double s) { return e(s); }, t);
        CHECK(std::abs(a.d1 - fd.d1) < 1e-8);
        // roundoff of the second difference is about 16 eps |f| / h^2
        CHECK(std::abs(a.d2 - fd.d2) < 16 * 2.2e-16 * std::abs(a.v) / 1e-10);
    }
}

TEST_CASE("callable expressions fall back to differences") {
    Expr c = Expr::callable([](double t) { return t * t * t; });
    Jet j = c.jet(2.0);
    CHECK(j.v == doctest::Approx(8.0));
    CHECK(j.d1 == doctest::Approx(12.0).epsilon(1e-8));
    CHECK(j.d2 == doctest::Approx(12.0).epsilon(1e-6));
    CHECK_FALSE(c.serializable());
}

TEST_CASE("periodic spline reproduces smooth data") {
    std::vector<double> k, v;
    for (int i = 0; i <= 128; ++i) {
        k.push_back(2 * M_PI * i / 128);
        v.push_back(std::cos(k.back()));
    }
    v.back() = v.front();
    Expr s = Expr::spline(k, v, true);
    CHECK(std::abs(s(1.0) - std::cos(1.0)) < 1e-6);
    CHECK(std::abs(s.jet(1.0).d1 + std::sin(1.0)) < 1e-4);
    CHECK(std::abs(s(2 * M_PI + 1.0) - std::cos(1.0)) < 1e-6);
}

TEST_CASE("expression json round trip") {
    Expr x = Expr::x();
    Expr e = pow(Expr(1.0) + x * x, 1.5) - bump((x - Expr(0.5)) / Expr(0.25)) + log(Expr(3.0) + cos(x));
    Expr r = Expr::from_json(e.to_json());
    for (double t : {0.0, 0.4, 0.6, 2.0}) CHECK(r(t) == e(t));
}

TEST_CASE("chart of unit and constant weights") {
    LiouvilleChart id(SmoothFn1D(Expr(1.0), 0.0, 2.0));
    CHECK(id.length() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(id.forward(0.7) == doctest::Approx(0.7).epsilon(1e-14));

    LiouvilleChart four(SmoothFn1D(Expr(4.0), 0.0, 1.0));
    CHECK(four.length() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(four.forward(0.3) == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("chart of weight x^2 has g = x^2/2") {
    Expr x = Expr::x();
    LiouvilleChart c(SmoothFn1D(x * x, 0.0, 1.0));
    CHECK(c.length() == doctest::Approx(0.5).epsilon(1e-12));
    for (double t : {0.1, 0.5, 0.9}) CHECK(c.forward(t) == doctest::Approx(t * t / 2).epsilon(1e-12));
}

TEST_CASE("forward and inverse maps compose to identity") {
    Expr x = Expr::x();
    LiouvilleChart c(SmoothFn1D(Expr(1.0) + Expr(0.5) * sin(Expr(3.0) * x) * sin(Expr(3.0) * x) + x, 0.0, 3.0));
    for (int i = 0; i < 64; ++i) {
        double t = 3.0 * (i + 0.5) / 64;
        CHECK(std::abs(c.inverse(c.forward(t)) - t) < 1e-10);
    }
    CHECK(std::abs(c.forward(1.3) + c.from_right(1.3) - c.length()) < 1e-12);
}

TEST_CASE("non-positive weight raises positivity error") {
    Expr x = Expr::x();
    try {
        LiouvilleChart c(SmoothFn1D(x - Expr(0.5), 0.0, 1.0));
        FAIL("expected a positivity error");
    } catch (const StackelError& e) {
        CHECK(e.code() == "positivity");
    }
}

TEST_CASE("pushforward potential terms") {
    Expr x = Expr::x();
    LiouvilleChart id(SmoothFn1D(Expr(1.0), 0.0, 2.0));
    auto [c1, c2] = pushforward_potential_terms(id, SmoothFn1D(Expr(3.0), 0.0, 2.0));
    CHECK(std::abs(c1(0.7)) < 1e-14);
    CHECK(std::abs(c2(0.7)) < 1e-14);

    auto [q1, q2] = pushforward_potential_terms(id, SmoothFn1D(x * x, 0.0, 2.0));
    for (double X : {0.3, 1.1}) {
        CHECK(q1(X) == doctest::Approx(1.0 / (4 * X * X)).epsilon(1e-10));
        CHECK(q2(X) == doctest::Approx(-1.0 / (2 * X * X)).epsilon(1e-10));
    }

    auto [e1, e2] = pushforward_potential_terms(id, SmoothFn1D(exp(x), 0.0, 2.0));
    CHECK(e1(1.0) == doctest::Approx(1.0 / 16).epsilon(1e-12));
    CHECK(std::abs(e2(1.0)) < 1e-12);

    CHECK_THROWS_AS(pushforward_potential_terms(id, SmoothFn1D(x - Expr(1.0), 0.0, 2.0)).first(0.5), StackelError);
}

TEST_CASE("potential terms are additive in log f for random positive polynomials") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(0.1, 2.0);
    Expr x = Expr::x();
    LiouvilleChart id(SmoothFn1D(Expr(1.0) + x, 0.0, 1.0));
    for (int trial = 0; trial < 10; ++trial) {
        Expr f = Expr(coef(rng)) + Expr(coef(rng)) * x + Expr(coef(rng)) * x * x;
        Expr g = Expr(coef(rng)) + Expr(coef(rng)) * x * x * x;
        double X = 0.4;
        double xx = id.inverse(X);
        Jet w = id.weight().jet(xx);
        auto tf = schwarzian_terms(log(f.jet(xx)), w);
        auto tg = schwarzian_terms(log(g.jet(xx)), w);
        auto tfg = schwarzian_terms(log((f * g).jet(xx)), w);
        CHECK(tfg.second == doctest::Approx(tf.second + tg.second).epsilon(1e-12));
        double a = std::sqrt(16 * tf.first), b = std::sqrt(16 * tg.first);
        double df = f.jet(xx).d1 > 0 ? a : -a, dg = g.jet(xx).d1 > 0 ? b : -b;
        CHECK(tfg.first == doctest::Approx((df + dg) * (df + dg) / 16).epsilon(1e-12));
    }
}
