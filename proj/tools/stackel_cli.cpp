#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stackel/angular.hpp"
#include "stackel/config.hpp"
#include "stackel/errors.hpp"
#include "stackel/inverse.hpp"
#include "stackel/radial.hpp"

using nlohmann::json;
using namespace stk;

namespace {

struct Options {
    std::string config;
    std::string config_b;
    double r_max = 10.0;
    std::optional<double> lambda;
    std::string out_dir = ".";
    int workers = 1;
    std::string tol_overrides;
};

struct Loaded {
    ManifoldConfig cfg;
    NormalizedManifold norm;
};

Loaded load(const std::string& path, const Options& o) {
    if (path.empty()) throw StackelError("usage", "missing --config");
    Loaded l{load_config(path), {}};
    if (o.lambda) {
        if (*o.lambda == 0.0) throw StackelError("config", "lambda must be nonzero");
        l.cfg.lambda = *o.lambda;
    }
    if (!o.tol_overrides.empty()) l.cfg.tol.apply(read_json_argument(o.tol_overrides));
    l.norm = normalize_manifold(l.cfg);
    return l;
}

void write_file(const Options& o, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(o.out_dir);
    std::filesystem::path p = std::filesystem::path(o.out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw StackelError("io", "cannot write " + p.string());
    out << content;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

RunManifest manifest(const std::string& command, const std::vector<const Loaded*>& inputs) {
    RunManifest m;
    m.command = command;
    for (const auto* l : inputs) m.config_hashes.push_back(l->cfg.hash);
    m.tolerances = inputs.front()->cfg.tol.to_json();
    return m;
}

void require_structure(const Loaded& l) {
    if (!l.norm.pass) {
        std::string why;
        for (const auto& e : l.norm.ah)
            if (!e.pass) why += (why.empty() ? "" : "; ") + ("end " + std::to_string(e.end) + ": " + e.reason);
        throw StackelError("ah-structure", why);
    }
}

SpectrumResult spectrum_of(const Loaded& l, const Options& o) {
    SpectrumOptions opt = l.cfg.tol.spectrum;
    opt.workers = o.workers;
    SpectrumResult res = coupled_solve(l.norm.S, l.cfg.lambda, o.r_max, opt);
    if (res.flagged_cells > 0) std::cerr << "warning: " << res.flagged_cells << " solver cells failed\n";
    if (res.unverified > 0) std::cerr << "warning: " << res.unverified << " modes failed verification\n";
    if (res.multiplicity_mismatches > 0)
        std::cerr << "warning: " << res.multiplicity_mismatches << " multiplicity mismatches\n";
    return res;
}

json counting_report(const SpectrumResult& res, const StackelMatrix& S, double r_max) {
    json rows = json::array();
    double eps = 0.02 * (res.cone.C2 - res.cone.C1);
    double lo = res.cone.C1 + eps, hi = res.cone.C2 - eps;
    for (double r : {0.25 * r_max, 0.5 * r_max, r_max}) {
        CountResult c = count_in_cone(res.modes, S, lo, hi, r);
        rows.push_back({{"r", r}, {"count", c.count}, {"ratio", c.ratio}, {"symbol_ratio", c.symbol_ratio}});
    }
    return {{"theta_sq_window", json::array({lo, hi})}, {"rows", rows}};
}

const std::vector<double> kAsymptoticY{20.0, 40.0, 80.0, 160.0};

std::string csv_with_manifest(const RunManifest& m, const std::string& body) {
    return "# " + m.to_json().dump() + "\n" + body;
}

int cmd_normalize(const Options& o) {
    Loaded l = load(o.config, o);
    json out = normalized_config(l.cfg, l.norm.S);
    out["report"] = l.norm.report();
    out["manifest"] = manifest("normalize", {&l}).to_json();
    write_file(o, "normalized.json", pretty(out));
    require_structure(l);
    return 0;
}

int cmd_spectrum(const Options& o) {
    Loaded l = load(o.config, o);
    require_structure(l);
    SpectrumResult res = spectrum_of(l, o);
    json out = {{"manifest", manifest("spectrum", {&l}).to_json()},
                {"spectrum", res.to_json()},
                {"counting", counting_report(res, l.norm.S, o.r_max)}};
    write_file(o, "spectrum.json", pretty(out));
    return 0;
}

int cmd_scatter(const Options& o) {
    Loaded l = load(o.config, o);
    require_structure(l);
    SpectrumResult res = spectrum_of(l, o);
    const double lam = l.cfg.lambda;
    const FssOptions& fopt = l.cfg.tol.fss;
    RadialModel model = RadialModel::from_matrix(l.norm.S);
    auto modes = scatter_spectrum(model, res.modes, lam, Gauge::q, fopt, o.workers);
    EnergyContext energy = energy_context(lam);
    RunManifest man = manifest("scatter", {&l});

    std::string lines = json({{"manifest", man.to_json()}}).dump() + "\n";
    double max_unit = 0.0, max_gauge = 0.0;
    int poles = 0, flagged = 0;
    for (auto& ms : modes) {
        if (ms.S) ms.S = scattering_entry(ms.chi, energy, l.cfg.tol.unit_tol);
        json rec = ms.to_json();
        cplx dh = characteristic(build_potential(model, Gauge::q_hat, lam, ms.mu_sq, ms.nu_sq), fopt).Delta;
        cplx dc = characteristic(build_potential(model, Gauge::q_check, lam, ms.mu_sq, ms.nu_sq), fopt).Delta;
        double dev = std::max(std::abs(dh - ms.chi.Delta), std::abs(dc - ms.chi.Delta)) / (1.0 + std::abs(ms.chi.Delta));
        rec["Delta_q_hat"] = json::array({dh.real(), dh.imag()});
        rec["Delta_q_check"] = json::array({dc.real(), dc.imag()});
        rec["gauge_deviation"] = dev;
        max_gauge = std::max(max_gauge, dev);
        if (ms.S) {
            max_unit = std::max(max_unit, ms.S->unitarity_residual);
            flagged += ms.S->flagged;
        } else {
            ++poles;
        }
        lines += rec.dump() + "\n";
    }
    write_file(o, "scattering.jsonl", lines);

    AsymptoticsReport asym = asymptotics_check(model, lam, kAsymptoticY, 0.7853981633974483, fopt);
    write_file(o, "asymptotics.csv", csv_with_manifest(man, asym.to_csv()));

    const cplx w2(-4.0, 0.0);
    CharacteristicData oracle_chi = characteristic(model_potential(lam, 2.0, w2), fopt);
    SolutionValue s = bessel_s10(lam, w2, 1.0);
    cplx oracle = 2.0 * s.u * s.du;
    json summary = {{"manifest", man.to_json()},
                    {"modes", modes.size()},
                    {"poles", poles},
                    {"flagged", flagged},
                    {"max_unitarity_residual", max_unit},
                    {"max_gauge_deviation", max_gauge},
                    {"bessel_oracle",
                     {{"omega_sq", -4.0},
                      {"Delta", json::array({oracle_chi.Delta.real(), oracle_chi.Delta.imag()})},
                      {"oracle", json::array({oracle.real(), oracle.imag()})},
                      {"relative_error", std::abs(oracle_chi.Delta - oracle) / std::abs(oracle)}}},
                    {"asymptotics", asym.to_json()}};
    write_file(o, "scatter_summary.json", pretty(summary));
    if (poles > 0) std::cerr << "warning: " << poles << " modes sit on poles of M\n";
    return 0;
}

int cmd_asymptotics(const Options& o) {
    Loaded l = load(o.config, o);
    require_structure(l);
    RadialModel model = RadialModel::from_matrix(l.norm.S);
    AsymptoticsReport asym = asymptotics_check(model, l.cfg.lambda, kAsymptoticY, 0.7853981633974483, l.cfg.tol.fss);
    RunManifest man = manifest("asymptotics", {&l});
    write_file(o, "asymptotics.csv", csv_with_manifest(man, asym.to_csv()));
    write_file(o, "asymptotics.json", pretty({{"manifest", man.to_json()}, {"asymptotics", asym.to_json()}}));
    return 0;
}

int cmd_verify(const Options& o) {
    if (o.config_b.empty()) throw StackelError("usage", "verify needs --config-b");
    Loaded a = load(o.config, o), b = load(o.config_b, o);
    require_structure(a);
    require_structure(b);
    if (a.cfg.lambda != b.cfg.lambda) throw StackelError("config", "the two configs use different lambda");
    ComparisonReport rep = verify_pair(a.norm.S, b.norm.S, a.cfg.lambda, o.r_max, o.workers, a.cfg.tol.verify);
    json out = rep.to_json();
    out["manifest"] = manifest("verify", {&a, &b}).to_json();
    out["r_max"] = o.r_max;
    out["lambda"] = a.cfg.lambda;
    write_file(o, "comparison.json", pretty(out));
    std::cout << rep.verdict() << "\n";
    return rep.equivalent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stackel metric scattering laboratory"};
    app.require_subcommand(1);
    Options o;
    if (const char* env = std::getenv("STACKEL_WORKERS")) {
        try {
            o.workers = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            std::cerr << "{\"error\":\"usage\",\"message\":\"STACKEL_WORKERS must be an integer\"}\n";
            return 2;
        }
    }
    app.add_option("--config", o.config, "manifold config (JSON)");
    app.add_option("--config-b", o.config_b, "second manifold config for verify");
    app.add_option("--r-max", o.r_max, "spectral radius")->check(CLI::PositiveNumber);
    app.add_option("--lambda", o.lambda, "energy, overrides the config");
    app.add_option("--out-dir", o.out_dir, "output directory");
    app.add_option("--workers", o.workers, "worker threads (default STACKEL_WORKERS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--tol-overrides", o.tol_overrides, "tolerance overrides, JSON text or file");

    std::function<int(const Options&)> run;
    auto verb = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        app.add_subcommand(name, help)->fallthrough()->callback([&run, fn] { run = fn; });
    };
    verb("normalize", "normalize and validate a manifold", cmd_normalize);
    verb("spectrum", "coupled angular spectrum with cone and counting diagnostics", cmd_spectrum);
    verb("scatter", "partial scattering matrices and asymptotics table", cmd_scatter);
    verb("verify", "compare two manifolds through their scattering data", cmd_verify);
    verb("asymptotics", "large-momentum asymptotics of the characteristic functions", cmd_asymptotics);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto start = std::chrono::steady_clock::now();
    int code = 2;
    try {
        code = run(o);
    } catch (const StackelError& e) {
        std::cerr << json({{"error", e.code()}, {"message", e.what()}}).dump() << "\n";
        code = 2;
    } catch (const std::exception& e) {
        std::cerr << json({{"error", "internal"}, {"message", e.what()}}).dump() << "\n";
        code = 2;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wall time " << secs << " s\n";
    return code;
}
