#pragma once

#include <string>

#include <json.hpp>

#include "stackel/angular.hpp"
#include "stackel/inverse.hpp"
#include "stackel/radial.hpp"
#include "stackel/stackel.hpp"

namespace stk {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr const char* kConfigSchema = "stackel-config/1";

struct Tolerances {
    SpectrumOptions spectrum;
    FssOptions fss;
    VerifyTolerances verify;
    double unit_tol = 1e-6;

    // Known keys only; unknown keys are a config error.
    void apply(const nlohmann::json& overrides);
    nlohmann::json to_json() const;
};

struct ManifoldConfig {
    nlohmann::json raw;
    StackelMatrix S;
    double lambda = 1.0;
    double eps0 = 0.5, eps1 = 0.5;
    bool normalize = true;
    Tolerances tol;
    // SHA-256 of the canonical JSON dump of `raw`
    std::string hash;
};

// Sources: {"preset": name, "params": {...}}, {"matrix": <matrix json>} or
// {"table": {"A", "B", "C", "rows": 3x3 of numbers or {"knots", "values"}}}.
ManifoldConfig parse_config(const nlohmann::json& j);
ManifoldConfig load_config(const std::string& path);
// Reads a file when `text` names one, otherwise parses it as JSON.
nlohmann::json read_json_argument(const std::string& text);

std::string sha256_hex(const std::string& data);

struct NormalizedManifold {
    StackelMatrix S;
    NormalizeResult gauge;
    AngularNormalizeResult angular;
    RobertsonFactors robertson;
    std::array<AHEndReport, 2> ah;
    bool pass = false;

    nlohmann::json report() const;
};

NormalizedManifold normalize_manifold(const ManifoldConfig& cfg);
// A config that re-creates the normalized matrix without further processing.
nlohmann::json normalized_config(const ManifoldConfig& cfg, const StackelMatrix& S);

struct RunManifest {
    std::string command;
    std::vector<std::string> config_hashes;
    nlohmann::json tolerances;

    nlohmann::json to_json() const;
};

}  // namespace stk
