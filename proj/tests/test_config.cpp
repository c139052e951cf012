#include <doctest.h>

#include <cmath>

#include "stackel/config.hpp"
#include "stackel/errors.hpp"

using namespace stk;
using nlohmann::json;

namespace {

json preset_config(const std::string& name) {
    return {{"schema", kConfigSchema}, {"source", {{"preset", name}}}, {"lambda", 1.0}};
}

}  // namespace

TEST_CASE("sha256 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config parsing") {
    ManifoldConfig cfg = parse_config(preset_config("example1"));
    CHECK(cfg.lambda == 1.0);
    CHECK(cfg.hash.size() == 64);
    CHECK(cfg.S(0, 1, 0.5) == make_preset("example1")(0, 1, 0.5));
    CHECK(parse_config(preset_config("example1")).hash == cfg.hash);
    CHECK(parse_config(preset_config("example2")).hash != cfg.hash);

    json j = preset_config("example1");
    j["lambda"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), StackelError);
    j = preset_config("example1");
    j["A"] = -1.0;
    CHECK_THROWS_AS(parse_config(j), StackelError);
    j = preset_config("example1");
    j["schema"] = "stackel-config/9";
    CHECK_THROWS_AS(parse_config(j), StackelError);
    CHECK_THROWS_AS(parse_config({{"lambda", 1.0}}), StackelError);
    j = preset_config("example1");
    j["tolerances"] = {{"bogus", 1.0}};
    CHECK_THROWS_AS(parse_config(j), StackelError);
    j["tolerances"] = {{"residual_tol", 1e-6}, {"unit_tol", 1e-5}};
    ManifoldConfig t = parse_config(j);
    CHECK(t.tol.spectrum.residual_tol == 1e-6);
    CHECK(t.tol.unit_tol == 1e-5);
    CHECK(t.tol.to_json()["residual_tol"] == 1e-6);
}

TEST_CASE("transforms in configs") {
    json j = preset_config("example2");
    j["transforms"] = json::array({{{"type", "reparam_x1"}, {"b", 0.1}}});
    ManifoldConfig cfg = parse_config(j);
    StackelMatrix ref = reparametrize_x1(make_preset("example2"), 0.1);
    for (double x : {0.1, 0.7, 1.9}) CHECK(cfg.S(0, 0, x) == ref(0, 0, x));
    j["transforms"] = json::array({{{"type", "nonsense"}}});
    CHECK_THROWS_AS(parse_config(j), StackelError);
}

TEST_CASE("tabulated sources") {
    const double P = 6.283185307179586;
    std::vector<double> k, v, w;
    for (int i = 0; i <= 64; ++i) {
        double x = P * i / 64;
        k.push_back(x);
        v.push_back(-2.0 + 0.1 * std::cos(x));
        w.push_back(-1.0 + 0.1 * std::cos(x));
    }
    StackelMatrix T = make_preset("hyperbolic-template");
    json rows = json::array({json::array({T.s[0][0].to_json(), 1.0, 1.0}),
                             json::array({0.0, {{"knots", k}, {"values", v}}, {{"knots", k}, {"values", w}}}),
                             json::array({0.0, 1.0, 0.0})});
    json j = {{"source", {{"table", {{"A", 2.0}, {"rows", rows}}}}}, {"lambda", 0.5}};
    ManifoldConfig cfg = parse_config(j);
    CHECK(cfg.S(1, 1, 1.0) == doctest::Approx(-2.0 + 0.1 * std::cos(1.0)).epsilon(1e-6));
    CHECK(cfg.S(1, 1, 1.0 + P) == doctest::Approx(cfg.S(1, 1, 1.0)).epsilon(1e-14));
    CHECK(cfg.S(0, 1, 0.3) == 1.0);

    rows[1][1] = {{"knots", {0.0, 1.0, 2.0, 3.0}}, {"values", {1.0, 1.0, 1.0, 1.0}}};
    j["source"]["table"]["rows"] = rows;
    CHECK_THROWS_AS(parse_config(j), StackelError);
}

TEST_CASE("normalized dump re-ingests to identical evaluations") {
    for (const auto& name : preset_names()) {
        ManifoldConfig cfg = parse_config(preset_config(name));
        NormalizedManifold n = normalize_manifold(cfg);
        CHECK(n.pass);
        json dumped = json::parse(normalized_config(cfg, n.S).dump());
        ManifoldConfig back = parse_config(dumped);
        NormalizedManifold again = normalize_manifold(back);
        for (double x1 : {0.05, 0.9, 1.7})
            for (double x2 : {0.3, 2.5})
                for (double x3 : {1.1, 4.0}) {
                    auto a = metric(n.S).H_sq(x1, x2, x3);
                    auto b = metric(again.S).H_sq(x1, x2, x3);
                    for (int i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::abs(a[i]));
                }
    }
}

TEST_CASE("manifest") {
    RunManifest m{"spectrum", {"abc"}, Tolerances().to_json()};
    json j = m.to_json();
    CHECK(j["command"] == "spectrum");
    CHECK(j["tool_version"] == kToolVersion);
    CHECK(j["tolerances"]["wronskian_tol"] == 1e-8);
}
