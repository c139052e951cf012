#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "stackel/angular.hpp"
#include "stackel/config.hpp"
#include "stackel/errors.hpp"
#include "stackel/inverse.hpp"
#include "stackel/radial.hpp"

using namespace stk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double time_limit, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (time_limit > 0.0 && secs > time_limit) {
        o.pass = false;
        o.detail += " [over the " + std::to_string(int(time_limit)) + " s budget]";
    }
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double metric_deviation(const StackelMatrix& a, const StackelMatrix& b, int n) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double x1 = a.A * (i + 0.5) / n, x2 = a.B * (j + 0.5) / n, x3 = a.C * (k + 0.5) / n;
                auto h = metric_coefficients(minors(a.at(x1, x2, x3)));
                auto g = metric_coefficients(minors(b.at(x1, x2, x3)));
                for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(h[c] - g[c]) / std::abs(h[c]));
            }
    return worst;
}

bool condition_c(const StackelMatrix& S) {
    ValidationGrid g = validation_grid(S);
    for (double x : g.x1)
        if (!(S(0, 1, x) > 0 && S(0, 2, x) > 0)) return false;
    for (double x : g.x2)
        if (!(S(1, 1, x) < 0 && S(1, 2, x) > 0)) return false;
    for (double x : g.x3)
        if (!(S(2, 1, x) > 0 && S(2, 2, x) < 0)) return false;
    return std::abs(radial_limit(S.s[0][1], 0.0, S.A) - 1) < 1e-12 &&
           std::abs(radial_limit(S.s[0][2], 0.0, S.A) - 1) < 1e-12;
}

Outcome gauge_invariance() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
        StackelMatrix S = make_preset(preset_names()[done % 4]);
        Mat2 G{{{u(rng), u(rng)}, {u(rng), u(rng)}}};
        if (std::abs(det(G)) < 0.1) continue;
        StackelMatrix T = apply_first_column_shift(apply_column_invariance(S, G), u(rng), u(rng));
        worst = std::max(worst, metric_deviation(S, T, 10));
        ++done;
    }
    return {worst < 1e-9, fmt("max relative H_i^2 deviation %.2e over 100 transforms", worst)};
}

Outcome normalization() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> mag(0.5, 2.0), shift(-1.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    int ok = 0;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        StackelMatrix S = make_preset(preset_names()[t % 4]);
        double a = (coin(rng) ? 1 : -1) * mag(rng), b = (coin(rng) ? 1 : -1) * mag(rng);
        Mat2 G = coin(rng) ? Mat2{{{0.0, b}, {a, 0.0}}} : Mat2{{{a, 0.0}, {0.0, b}}};
        StackelMatrix T = apply_first_column_shift(apply_column_invariance(S, G), shift(rng), shift(rng));
        NormalizeResult r = gauge_normalize(T);
        NormalizeResult again = gauge_normalize(r.S);
        double dev = metric_deviation(S, r.S, 6);
        worst = std::max(worst, dev);
        if (condition_c(r.S) && again.steps.empty() && dev < 1e-9) ++ok;
    }
    return {ok == 20, std::to_string(ok) + "/20 scrambled matrices normalized and idempotent, metric deviation " +
                          fmt("%.2e", worst)};
}

Outcome angular_oracle() {
    StackelMatrix S = make_preset("hyperbolic-template");
    SpectrumResult res = coupled_solve(S, 1.0, 20.0);
    struct P {
        double mu, nu;
        int mult;
    };
    std::vector<P> lattice;
    for (int k = 0; k <= 10; ++k)
        for (int l = 0; l <= 10; ++l) {
            if (k == 0 && l == 0) continue;
            double mu = 1.5 * k * k + 0.5 * l * l, nu = 0.5 * k * k + 1.5 * l * l;
            if (std::hypot(mu, nu) <= 20.0) lattice.push_back({mu, nu, (k ? 2 : 1) * (l ? 2 : 1)});
        }
    std::sort(lattice.begin(), lattice.end(), [](auto& a, auto& b) { return std::tie(a.mu, a.nu) < std::tie(b.mu, b.nu); });
    if (res.modes.size() != lattice.size())
        return {false, "spectrum has " + std::to_string(res.modes.size()) + " points, lattice " +
                           std::to_string(lattice.size())};
    double err = 0.0;
    bool mult = true;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        err = std::max({err, std::abs(res.modes[i].mu_sq - lattice[i].mu), std::abs(res.modes[i].nu_sq - lattice[i].nu)});
        mult = mult && res.modes[i].multiplicity == lattice[i].mult;
    }
    return {err < 1e-8 && mult, std::to_string(lattice.size()) + " lattice points, max error " + fmt("%.2e", err) +
                                    (mult ? ", multiplicities exact" : ", multiplicity mismatch")};
}

Outcome cone_counting() {
    bool pass = true;
    std::string detail;
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        SpectrumResult res = coupled_solve(S, 1.0, 1600.0);
        int outside = 0;
        for (const auto& m : res.modes) outside += !res.cone.contains(m.mu_sq, m.nu_sq);
        double lo = res.cone.C1 * (1.0 - 1e-9), hi = res.cone.C2 * (1.0 + 1e-9);
        double rmin = 1e300, rmax = 0.0, sym = 0.0;
        bool factor = true;
        for (double r : {10.0, 20.0, 40.0}) {
            CountResult c = count_in_cone(res.modes, S, lo, hi, r);
            rmin = std::min(rmin, c.ratio);
            rmax = std::max(rmax, c.ratio);
            sym = c.symbol_ratio;
            factor = factor && c.ratio <= 4.0 * sym && c.ratio >= sym / 4.0;
        }
        double variation = (rmax - rmin) / rmax;
        bool ok = outside == 0 && variation < 0.5 && factor;
        pass = pass && ok;
        detail += (detail.empty() ? "" : "; ") + name + fmt(" variation %.0f%%", 100.0 * variation) +
                  fmt(" n/r^2 in [%.3f,", rmin) + fmt(" %.3f]", rmax) + fmt(" symbol %.3f", sym) +
                  (outside ? " cone violated" : "");
    }
    return {pass, detail};
}

Outcome radial_oracle() {
    const double lam = 0.7;
    double sol = 0.0, delta = 0.0;
    std::vector<double> X;
    for (int i = 0; i <= 18; ++i) X.push_back(0.1 + 0.05 * i);
    for (cplx w2 : {cplx(-4.0, 0.0), cplx(3.0, 0.0), cplx(-25.0, 0.0), cplx(-1.0, 2.0)}) {
        RadialPotential pot = model_potential(lam, 2.0, w2);
        auto s = left_solution(pot, X);
        for (std::size_t i = 0; i < X.size(); ++i) {
            SolutionValue b = bessel_s10(lam, w2, X[i]);
            sol = std::max(sol, std::abs(s[i].u - b.u) / std::abs(b.u));
        }
        SolutionValue one = bessel_s10(lam, w2, 1.0);
        cplx oracle = 2.0 * one.u * one.du;
        delta = std::max(delta, std::abs(characteristic(pot).Delta - oracle) / std::abs(oracle));
    }
    return {sol < 1e-6 && delta < 1e-6,
            fmt("S10 vs series %.2e", sol) + fmt(", Delta vs connection oracle %.2e", delta)};
}

Outcome wronskian_unitarity() {
    double drift = 0.0, unit = 0.0;
    int modes = 0;
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        SpectrumResult sp = coupled_solve(S, 1.0, 10.0);
        for (const auto& ms : scatter_spectrum(RadialModel::from_matrix(S), sp.modes, 1.0)) {
            drift = std::max(drift, ms.chi.wronskian_drift);
            unit = ms.S ? std::max(unit, ms.S->unitarity_residual) : INFINITY;
            ++modes;
        }
    }
    return {drift < 1e-8 && unit < 1e-6 && modes > 0,
            std::to_string(modes) + " modes, Wronskian drift " + fmt("%.2e", drift) + fmt(", unitarity %.2e", unit)};
}

Outcome gauge_equality() {
    double worst = 0.0;
    int checked = 0;
    for (const auto& name : preset_names()) {
        StackelMatrix S = make_preset(name);
        RadialModel m = RadialModel::from_matrix(S);
        SpectrumResult sp = coupled_solve(S, 1.0, 60.0);
        if (sp.modes.size() < 20) return {false, name + " has fewer than 20 modes"};
        for (int i = 0; i < 20; ++i) {
            const auto& e = sp.modes[i];
            cplx a = characteristic(build_potential(m, Gauge::q, 1.0, e.mu_sq, e.nu_sq)).Delta;
            cplx b = characteristic(build_potential(m, Gauge::q_hat, 1.0, e.mu_sq, e.nu_sq)).Delta;
            cplx c = characteristic(build_potential(m, Gauge::q_check, 1.0, e.mu_sq, e.nu_sq)).Delta;
            worst = std::max({worst, std::abs(a - b) / std::abs(a), std::abs(a - c) / std::abs(a)});
            ++checked;
        }
    }
    return {worst < 1e-6, std::to_string(checked) + " modes, max relative Delta difference " + fmt("%.2e", worst)};
}

Outcome asymptotics() {
    RadialModel m = RadialModel::from_matrix(make_preset("hyperbolic-template"));
    AsymptoticsReport rep = asymptotics_check(m, 1.0, {20.0, 40.0, 80.0, 160.0});
    bool strict = true;
    std::string errs;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (i > 0) strict = strict && rep.rows[i].Delta_error < rep.rows[i - 1].Delta_error;
        errs += fmt(i ? ", %.2e" : "%.2e", rep.rows[i].Delta_error);
    }
    double last = rep.rows.back().Delta_error;
    return {strict && last < 0.05, "ratio errors " + errs + (strict ? " strictly decreasing" : " not decreasing")};
}

StackelMatrix gauge_partner(const StackelMatrix& S) {
    return reparametrize_x1(
        apply_column_invariance(apply_first_column_shift(S, 0.3, -0.2), angular_block_gauge(0.1)), 0.2);
}

Outcome uniqueness() {
    StackelMatrix S = make_preset("example1");
    ComparisonReport eq = verify_pair(S, gauge_partner(S), 1.0, 10.0);
    ComparisonReport ds = verify_pair(S, apply_bump(S, 0.01, 1.0, 0.5), 1.0, 10.0);
    bool a = eq.equivalent && eq.scattering && eq.scattering->max_deviation < 1e-6 && eq.radial &&
             eq.radial->u_deviation < 1e-6;
    bool b = !ds.equivalent && ds.scattering && ds.scattering->max_deviation > 1e-3;
    std::string detail = "gauge pair " + eq.verdict();
    if (eq.scattering) detail += fmt(" (scattering %.2e", eq.scattering->max_deviation);
    if (eq.radial) detail += fmt(", |u-1| %.2e)", eq.radial->u_deviation);
    detail += "; bump pair " + ds.verdict();
    if (ds.scattering) detail += fmt(" (max mode deviation %.2e)", ds.scattering->max_deviation);
    return {a && b, detail};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    namespace fs = std::filesystem;
    fs::path base = fs::temp_directory_path() / "stackel_acceptance";
    fs::remove_all(base);
    const std::string cli = STACKEL_CLI, cfg = STACKEL_CONFIGS;
    int mismatches = 0, files = 0;
    for (const std::string verb : {"spectrum", "scatter", "verify"}) {
        for (int run = 0; run < 2; ++run) {
            fs::path out = base / (verb + std::to_string(run));
            std::string cmd = cli + " " + verb + " --config " + cfg + "/example3.json --r-max 20 --workers " +
                              std::to_string(run + 1) + " --out-dir " + out.string();
            if (verb == "verify") cmd += " --config-b " + cfg + "/example3.json";
            cmd += " 2>/dev/null >/dev/null";
            if (std::system(cmd.c_str()) != 0) return {false, verb + " run failed"};
        }
        for (const auto& entry : fs::directory_iterator(base / (verb + "0"))) {
            ++files;
            fs::path other = base / (verb + "1") / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++mismatches;
        }
    }
    ComparisonReport a = verify_pair(make_preset("example2"), make_preset("example2"), 1.0, 10.0, 1);
    ComparisonReport b = verify_pair(make_preset("example2"), make_preset("example2"), 1.0, 10.0, 2);
    if (a.to_json().dump() != b.to_json().dump()) ++mismatches;
    fs::remove_all(base);
    return {mismatches == 0 && files > 0,
            std::to_string(files) + " output files from repeated CLI runs, " + std::to_string(mismatches) + " differ"};
}

}  // namespace

int main() {
    criterion(1, "gauge invariance of the metric", 10.0, gauge_invariance);
    criterion(2, "normalization to condition (C)", 5.0, normalization);
    criterion(3, "angular Fourier lattice oracle", 60.0, angular_oracle);
    criterion(4, "cone bounds and eigenvalue counting", 0.0, cone_counting);
    criterion(5, "radial Bessel oracle", 0.0, radial_oracle);
    criterion(6, "Wronskian conservation and unitarity", 0.0, wronskian_unitarity);
    criterion(7, "gauge equality of characteristic functions", 0.0, gauge_equality);
    criterion(8, "large-momentum asymptotics", 30.0, asymptotics);
    criterion(9, "uniqueness end to end", 300.0, uniqueness);
    criterion(10, "determinism", 0.0, determinism);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
