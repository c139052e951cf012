#include "stackel/config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "stackel/errors.hpp"

namespace stk {

using nlohmann::json;

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw StackelError("io", "SHA-256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

json read_json_argument(const std::string& text) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(text, ec)) {
        std::ifstream in(text);
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            throw StackelError("config", text + ": " + e.what());
        }
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw StackelError("config", "not a file or JSON text: " + text);
    }
}

// ---------------------------------------------------------------------------
// Tolerances

namespace {

template <class T>
void set_if(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

void Tolerances::apply(const json& o) {
    if (!o.is_object()) throw StackelError("config", "tolerance overrides must be an object");
    static const std::vector<std::string> known{
        "newton_tol",    "cluster_radius", "residual_tol", "shift_tol",  "offdiag_tol", "monodromy_rtol",
        "table_points",  "offset_factor",  "rtol",         "atol",       "wronskian_tol", "ladder_tol",
        "pole_tol",      "unit_tol",       "structural",   "spectral",   "scattering",  "sensitivity"};
    for (const auto& [k, v] : o.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw StackelError("config", "unknown tolerance '" + k + "'");
    try {
        set_if(o, "newton_tol", spectrum.newton_tol);
        set_if(o, "cluster_radius", spectrum.cluster_radius);
        set_if(o, "residual_tol", spectrum.residual_tol);
        set_if(o, "shift_tol", spectrum.shift_tol);
        set_if(o, "offdiag_tol", spectrum.offdiag_tol);
        set_if(o, "monodromy_rtol", spectrum.monodromy_rtol);
        set_if(o, "table_points", spectrum.table_points);
        set_if(o, "offset_factor", fss.offset_factor);
        set_if(o, "rtol", fss.rtol);
        set_if(o, "atol", fss.atol);
        set_if(o, "wronskian_tol", fss.wronskian_tol);
        set_if(o, "ladder_tol", fss.ladder_tol);
        set_if(o, "pole_tol", fss.pole_tol);
        set_if(o, "unit_tol", unit_tol);
        set_if(o, "structural", verify.structural);
        set_if(o, "spectral", verify.spectral);
        set_if(o, "scattering", verify.scattering);
        set_if(o, "sensitivity", verify.sensitivity);
    } catch (const json::exception& e) {
        throw StackelError("config", std::string("bad tolerance value: ") + e.what());
    }
}

json Tolerances::to_json() const {
    return {{"newton_tol", spectrum.newton_tol},   {"cluster_radius", spectrum.cluster_radius},
            {"residual_tol", spectrum.residual_tol}, {"shift_tol", spectrum.shift_tol},
            {"offdiag_tol", spectrum.offdiag_tol}, {"monodromy_rtol", spectrum.monodromy_rtol},
            {"table_points", spectrum.table_points}, {"offset_factor", fss.offset_factor},
            {"rtol", fss.rtol},                     {"atol", fss.atol},
            {"wronskian_tol", fss.wronskian_tol},   {"ladder_tol", fss.ladder_tol},
            {"pole_tol", fss.pole_tol},             {"unit_tol", unit_tol},
            {"structural", verify.structural},      {"spectral", verify.spectral},
            {"scattering", verify.scattering},      {"sensitivity", verify.sensitivity}};
}

// ---------------------------------------------------------------------------
// Configs

namespace {

Expr table_entry(const json& e, bool periodic, double period) {
    if (e.is_number()) return Expr(e.get<double>());
    if (e.is_object() && e.contains("knots")) {
        auto knots = e.at("knots").get<std::vector<double>>();
        auto values = e.at("values").get<std::vector<double>>();
        if (knots.size() != values.size() || knots.size() < 4)
            throw StackelError("config", "table entries need at least 4 matching knots and values");
        if (periodic && std::abs(knots.back() - knots.front() - period) > 1e-12 * period)
            throw StackelError("config", "periodic table must span exactly one period");
        return Expr::spline(std::move(knots), std::move(values), periodic);
    }
    return Expr::from_json(e);
}

StackelMatrix matrix_from_source(const json& src) {
    if (src.contains("preset"))
        return make_preset(src.at("preset").get<std::string>(), src.value("params", json::object()));
    if (src.contains("matrix")) return StackelMatrix::from_json(src.at("matrix"));
    if (src.contains("table")) {
        const json& t = src.at("table");
        StackelMatrix S;
        S.A = t.at("A").get<double>();
        S.B = t.value("B", S.B);
        S.C = t.value("C", S.C);
        const json& rows = t.at("rows");
        if (rows.size() != 3) throw StackelError("config", "table needs three rows");
        for (int i = 0; i < 3; ++i) {
            if (rows[i].size() != 3) throw StackelError("config", "table rows need three entries");
            for (int k = 0; k < 3; ++k) S.s[i][k] = table_entry(rows[i][k], i > 0, i > 0 ? S.period(i) : S.A);
        }
        return S;
    }
    throw StackelError("config", "source needs one of preset, matrix, table");
}

}  // namespace

ManifoldConfig parse_config(const json& j) {
    if (!j.is_object()) throw StackelError("config", "config must be a JSON object");
    if (j.contains("schema") && j.at("schema") != kConfigSchema)
        throw StackelError("config", "unsupported schema " + j.at("schema").dump());
    ManifoldConfig cfg;
    cfg.raw = j;
    cfg.raw.erase("report");
    cfg.raw.erase("manifest");
    cfg.hash = sha256_hex(cfg.raw.dump());
    try {
        cfg.lambda = j.value("lambda", 1.0);
        cfg.eps0 = j.value("eps0", 0.5);
        cfg.eps1 = j.value("eps1", 0.5);
        cfg.normalize = j.value("normalize", true);
        if (!j.contains("source")) throw StackelError("config", "missing source");
        cfg.S = matrix_from_source(j.at("source"));
        for (const auto& key : {"A", "B", "C"})
            if (j.contains(key)) {
                double v = j.at(key).get<double>();
                if (std::string(key) == "A") cfg.S.A = v;
                else if (std::string(key) == "B") cfg.S.B = v;
                else cfg.S.C = v;
            }
        for (const auto& t : j.value("transforms", json::array())) cfg.S = apply_transform(cfg.S, t);
        if (j.contains("tolerances")) cfg.tol.apply(j.at("tolerances"));
    } catch (const json::exception& e) {
        throw StackelError("config", e.what());
    }
    if (!(cfg.lambda != 0.0) || !std::isfinite(cfg.lambda)) throw StackelError("config", "lambda must be nonzero");
    if (!(cfg.S.A > 0.0 && cfg.S.B > 0.0 && cfg.S.C > 0.0))
        throw StackelError("config", "domain sizes A, B, C must be positive");
    if (!(cfg.eps0 > 0.0 && cfg.eps1 > 0.0)) throw StackelError("config", "eps0 and eps1 must be positive");
    return cfg;
}

ManifoldConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StackelError("io", "cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw StackelError("config", path + ": " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

json ah_json(const AHEndReport& r) {
    return {{"end", r.end},   {"deviations", r.deviations}, {"eps0", r.eps0}, {"eps1", r.eps1},
            {"bound", r.bound}, {"trend", r.trend},         {"pass", r.pass}, {"reason", r.reason}};
}

}  // namespace

json NormalizedManifold::report() const {
    json ah_j = json::array({ah_json(ah[0]), ah_json(ah[1])});
    return {{"pass", pass},
            {"gauge_steps", gauge.steps},
            {"column_gauge", json::array({json::array({gauge.G[0][0], gauge.G[0][1]}),
                                          json::array({gauge.G[1][0], gauge.G[1][1]})})},
            {"angular_rescaled", angular.rescaled},
            {"angular_resampled", angular.resampled},
            {"angular_residual", angular.residual},
            {"robertson", {{"residual", robertson.residual}, {"factor_consistency", robertson.factor_consistency}}},
            {"ah_ends", ah_j}};
}

NormalizedManifold normalize_manifold(const ManifoldConfig& cfg) {
    NormalizedManifold n;
    if (cfg.normalize) {
        n.gauge = gauge_normalize(cfg.S);
        n.angular = normalize_angular_gauge(n.gauge.S);
        n.S = n.angular.S;
    } else {
        n.gauge.S = cfg.S;
        n.angular.S = cfg.S;
        n.S = cfg.S;
    }
    n.robertson = check_robertson(n.S);
    n.ah = check_ah_ends(n.S, cfg.eps0, cfg.eps1);
    n.pass = n.ah[0].pass && n.ah[1].pass;
    return n;
}

json normalized_config(const ManifoldConfig& cfg, const StackelMatrix& S) {
    for (const auto& row : S.s)
        for (const auto& e : row)
            if (!e.serializable()) throw StackelError("io", "normalized matrix is not serializable");
    json j = {{"schema", kConfigSchema},
              {"source", {{"matrix", S.to_json()}}},
              {"lambda", cfg.lambda},
              {"eps0", cfg.eps0},
              {"eps1", cfg.eps1},
              {"normalize", false}};
    if (cfg.raw.contains("tolerances")) j["tolerances"] = cfg.raw.at("tolerances");
    return j;
}

json RunManifest::to_json() const {
    return {{"command", command},
            {"config_sha256", config_hashes},
            {"tool_version", kToolVersion},
            {"tolerances", tolerances}};
}

}  // namespace stk
