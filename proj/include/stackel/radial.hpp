#pragma once

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackel/angular.hpp"
#include "stackel/funcspace.hpp"
#include "stackel/stackel.hpp"

namespace stk {

using cplx = std::complex<double>;

// Spectral parameter of the radial Schrodinger form: mu^2 (q), nu^2 (q_hat)
// or omega^2 = mu^2 + nu^2 (q_check).
enum class Gauge { q, q_hat, q_check };

std::string gauge_name(Gauge g);
Gauge gauge_from_name(const std::string& name);

struct EnergyContext {
    double lambda = 1.0;
    cplx omega_plus, omega_minus;

    // 2 i lambda omega_- / omega_+
    cplx k() const;
};

EnergyContext energy_context(double lambda);
// Gamma function of a complex argument.
cplx complex_gamma(cplx z);

// Row 1 of a normalized matrix together with its Robertson factor f1.
struct RadialModel {
    Expr s11, s12, s13, f1;
    double A = 2.0;

    static RadialModel from_matrix(const StackelMatrix& S);
};

struct RadialPotential {
    Gauge gauge = Gauge::q;
    double lambda = 1.0;
    cplx mu_sq, nu_sq;
    cplx spectral;
    double x_length = 0.0;
    double length = 0.0;
    // null chart: the chart variable is x itself
    std::shared_ptr<const LiouvilleChart> chart;
    // (sqrt(w(x)), P(x)) with U'' = P U in the chart variable; P = q + spectral
    std::function<std::pair<double, cplx>(double)> coeffs;
    // fitted lambda^2 + 1/4 at X -> 0 and X -> length
    std::array<double, 2> singular_strength{};
    // int d |q - singular| over the innermost decades at each end
    std::array<double, 2> regular_moment{};

    cplx q(double x) const { return coeffs(x).second - spectral; }
    double X(double x) const;
    double X_right(double x) const;
    double x_at(double X) const;
};

RadialPotential build_potential(const RadialModel& m, Gauge g, double lambda, cplx mu_sq, cplx nu_sq);
// -(lambda^2 + 1/4) / d^2 + constant on (0, length), d the distance to the nearest end.
RadialPotential model_potential(double lambda, double length, cplx constant);

struct SolutionValue {
    cplx u, du;  // value and derivative in the chart variable
};

struct FssOptions {
    double offset_factor = 1e-6;
    double rtol = 1e-12;
    double atol = 1e-15;
    double wronskian_tol = 1e-8;
    double ladder_tol = 1e-7;
    bool ladder = true;
    double pole_tol = 1e-8;
};

struct FundamentalSystem {
    std::array<double, 5> match_X{};
    std::array<SolutionValue, 5> s10{}, s20{}, s11{}, s21{};
    double start_offset = 0.0;
    // max |W(S1n, S2n) - 1| over 16 points on each half
    double wronskian_drift = 0.0;
};

FundamentalSystem solve_fss(const RadialPotential& pot, const FssOptions& opt = FssOptions(), double offset = 0.0);
// S10 at the given chart points (increasing, inside the interval).
std::vector<SolutionValue> left_solution(const RadialPotential& pot, const std::vector<double>& X,
                                         const FssOptions& opt = FssOptions());

struct CharacteristicData {
    cplx Delta, delta, M;
    bool pole = false;
    double Delta_spread = 0.0;
    double delta_spread = 0.0;
    // |Delta(eps1) - Delta(eps1 / 4)| / (1 + |Delta|)
    double ladder_diff = 0.0;
    double wronskian_drift = 0.0;
    Gauge gauge = Gauge::q;
    cplx mu_sq, nu_sq;

    nlohmann::json to_json() const;
};

CharacteristicData characteristic(const RadialPotential& pot, const FssOptions& opt = FssOptions());

struct PartialScatteringMatrix {
    cplx L, T, R;
    double unitarity_residual = 0.0;
    bool flagged = false;

    nlohmann::json to_json() const;
};

PartialScatteringMatrix scattering_entry(const CharacteristicData& chi, const EnergyContext& energy,
                                         double unit_tol = 1e-6);

struct ModeScattering {
    int m = 0;
    double mu_sq = 0.0, nu_sq = 0.0;
    int multiplicity = 1;
    CharacteristicData chi;
    std::optional<PartialScatteringMatrix> S;

    nlohmann::json to_json() const;
};

std::vector<ModeScattering> scatter_spectrum(const RadialModel& model, const std::vector<CoupledEigenvalue>& modes,
                                             double lambda, Gauge g = Gauge::q,
                                             const FssOptions& opt = FssOptions(), int workers = 1);

// Gamma(1 - i lambda) (omega/2)^{i lambda} sqrt(x) I_{-i lambda}(omega x) by its power series.
SolutionValue bessel_s10(double lambda, cplx omega_sq, double x);

struct AsymptoticsRow {
    double y = 0.0;
    cplx Delta, Delta_pred, delta, delta_pred;
    double Delta_error = 0.0;
    double delta_error = 0.0;
};

struct AsymptoticsReport {
    std::vector<AsymptoticsRow> rows;
    double chart_length = 0.0;
    bool decreasing = false;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// omega = i y along the ray (mu, nu) = i y (cos phi, sin phi), gauge q_check.
AsymptoticsReport asymptotics_check(const RadialModel& model, double lambda, const std::vector<double>& ys,
                                    double phi = 0.7853981633974483, const FssOptions& opt = FssOptions());

struct CamSample {
    cplx mu, nu, psi;
};

struct CamReport {
    std::vector<CamSample> samples;
    double sup_imaginary = 0.0;
    bool bounded = false;
    double fit_A = 0.0, fit_B = 0.0;
    double max_on_spectrum = 0.0;
    int vanishing_on_spectrum = 0;
    int spectrum_points = 0;

    nlohmann::json to_json() const;
};

// psi = Delta~ delta - Delta delta~ for two radial models sharing angular data.
CamReport cam_diagnostics(const RadialModel& a, const RadialModel& b, double lambda,
                          const std::vector<std::pair<cplx, cplx>>& grid,
                          const std::vector<CoupledEigenvalue>& spectrum, double tol = 1e-7, int workers = 1);

// Imaginary samples on three rays plus real offsets for the growth-rate fit.
std::vector<std::pair<cplx, cplx>> cam_default_grid(double radius = 8.0, int per_ray = 6);

}  // namespace stk
