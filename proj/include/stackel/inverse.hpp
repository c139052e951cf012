#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackel/angular.hpp"
#include "stackel/radial.hpp"
#include "stackel/stackel.hpp"

namespace stk {

struct VerifyTolerances {
    double structural = 1e-8;
    double spectral = 1e-6;
    double scattering = 1e-6;
    double sensitivity = 1e-3;
};

// G = [[1 - c, -c], [c, 1 + c]]: the column invariance that keeps s23 - s22 and s32 - s33 fixed.
Mat2 angular_block_gauge(double c);

struct AngularRecovery {
    bool s11_match = false;
    double s11_deviation = 0.0;
    double c = 0.0;
    // spread of s~22 - s22 and s33 - s~33 around c
    double constancy_residual = 0.0;
    Mat2 G = identity2();
    double C1 = 0.0, C2 = 0.0;
    double shift_residual = 0.0;
    // rows 2 and 3 after removing the gauges
    double block_deviation = 0.0;
    bool pass = false;
    std::string reason;

    nlohmann::json to_json() const;
};

// Recovers S~ = G_c(shift_{C1,C2}(S)) on the angular rows.
AngularRecovery angular_recover(const StackelMatrix& S, const StackelMatrix& St,
                                const VerifyTolerances& tol = VerifyTolerances());
// S~ with the recovered gauges removed.
StackelMatrix undo_angular_gauges(const StackelMatrix& St, const AngularRecovery& rec);

// Radial quotients of one manifold in its own chart variable.
class ReconstructionState {
public:
    // (x2, x3) fixes the angular factors entering the Cauchy coefficient.
    ReconstructionState(const StackelMatrix& S, double x2, double x3);

    double length() const { return chart_.length(); }
    double x_at(double X) const { return chart_.inverse(X); }
    // s11 / s12, s12 / f1, s13 / s12 at chart point X
    double f(double X) const;
    double h(double X) const;
    double l(double X) const;
    // d log h / dX
    double dlog_h(double X) const;
    // (l s32 - s33)(s23 - l s22) at the fixed angular point
    double angular_factor(double X) const;

private:
    StackelMatrix S_;
    SmoothFn1D f1_;
    LiouvilleChart chart_;
    std::array<double, 2> row2_{}, row3_{};
};

struct RadialRecovery {
    std::array<double, 2> nu_sq{};
    double potential_deviation = 0.0;
    double potential_deviation_at = 0.0;
    double l_deviation = 0.0;
    double f_deviation = 0.0;
    bool quotient_s13_s12_match = false;
    double min_angular_factor = 0.0;
    double u_deviation = 0.0;
    bool pass = false;
    std::string reason;

    nlohmann::json to_json() const;
};

// Potential comparison at two values of nu^2, then the Cauchy problem
// u'' + (log h~)' u' / 2 - (lambda^2 + 1) h~ (l s32 - s33)(s23 - l s22)(u^5 - u) = 0, u(0) = 1, u'(0) = 0.
RadialRecovery radial_recover(const StackelMatrix& S, const StackelMatrix& St, double lambda,
                              const std::vector<CoupledEigenvalue>& spectrum,
                              const VerifyTolerances& tol = VerifyTolerances());

// Integrates the Cauchy problem with coefficients from `st`; returns max |u - 1| on (0, length).
double cauchy_deviation(const ReconstructionState& st, double lambda, double rtol = 1e-12);

struct PullbackReport {
    double length = 0.0, length_tilde = 0.0;
    bool periods_match = false;
    double max_deviation = 0.0;
    double at_X = 0.0;
    double at_x1 = 0.0;
    bool pass = false;
    std::string reason;

    nlohmann::json to_json() const;
};

PullbackReport pullback_compare(const StackelMatrix& S, const StackelMatrix& St,
                                const VerifyTolerances& tol = VerifyTolerances());

struct ModeDeviation {
    int m = 0;
    double mu_sq = 0.0, nu_sq = 0.0;
    double deviation = 0.0;
};

struct ScatteringComparison {
    int modes = 0, modes_tilde = 0;
    double spectrum_deviation = 0.0;
    // first index (1-based) where the spectra disagree, 0 when they agree
    int first_disagreement = 0;
    std::vector<ModeDeviation> per_mode;
    double max_deviation = 0.0;
    bool pass = false;
    std::string reason;
    std::vector<CoupledEigenvalue> spectrum;

    nlohmann::json to_json() const;
};

ScatteringComparison compare_scattering(const StackelMatrix& S, const StackelMatrix& St, double lambda, double r_max,
                                        int workers = 1, const VerifyTolerances& tol = VerifyTolerances());

struct ComparisonReport {
    AngularRecovery angular;
    std::optional<ScatteringComparison> scattering;
    std::optional<RadialRecovery> radial;
    std::optional<PullbackReport> pullback;
    bool equivalent = false;
    std::string stage;  // first failing stage, empty when equivalent

    std::string verdict() const { return equivalent ? "equivalent" : "distinct"; }
    nlohmann::json to_json() const;
};

// Both matrices normalized. Stages run in order and stop at the first failure.
ComparisonReport verify_pair(const StackelMatrix& S, const StackelMatrix& St, double lambda, double r_max,
                             int workers = 1, const VerifyTolerances& tol = VerifyTolerances());

}  // namespace stk
