#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "stackel/funcspace.hpp"
#include "stackel/stackel.hpp"

namespace stk {

// Periodic Hill equation -y'' + p y = E rho y on [0, length].
struct HillEquation {
    Expr p;
    Expr rho;
    double length = 0.0;
};

struct Monodromy {
    Mat2 m{};
    // derivative of m with respect to the spectral parameter
    Mat2 dm{};
    // max |C S' - S C' - 1| over 16 interior points and the endpoint
    double wronskian_drift = 0.0;

    double trace() const { return m[0][0] + m[1][1]; }
    // |2 - trace| divided by its slope: distance to the nearest periodic eigenvalue
    double root_distance() const;
};

Monodromy monodromy(const HillEquation& eq, double E, double rtol = 1e-12);
// 2 - trace of the monodromy; zero exactly at periodic eigenvalues.
double periodicity_char(const HillEquation& eq, double E, double rtol = 1e-12);

// n-th Dirichlet eigenvalue (n >= 1) by Prufer shooting.
double dirichlet_eigenvalue(const HillEquation& eq, int n);
// The lowest `count` periodic eigenvalues, repeated by multiplicity, by shooting.
std::vector<double> periodic_eigenvalues_shooting(const HillEquation& eq, int count);

// Fourier-Galerkin discretization of -y'' + (p0 + t p1) y = E rho y with
// periodic boundary conditions and 2M+1 real trigonometric basis functions.
class HillGalerkin {
public:
    HillGalerkin(const Expr& p0, const Expr& p1, const Expr& rho, double period, int M);

    struct Spectrum {
        std::vector<double> E;
        std::vector<double> dE;  // dE/dt, empty unless requested
    };
    Spectrum solve(double t, bool derivatives) const;
    int size() const { return static_cast<int>(A0_.rows()); }
    double period() const { return period_; }

private:
    double period_;
    Eigen::MatrixXd A0_, A1_;
};

// Row i (2 or 3) of a normalized matrix at energy lambda.
struct AngularProblem {
    int which = 2;
    std::array<Expr, 3> row;
    double period = 0.0;
    double lambda = 1.0;

    double kappa() const { return lambda * lambda + 1.0; }
    // -s_i2 - theta^2 s_i3
    Expr weight(double theta_sq) const;
    // Hill equation in x with spectral parameter mu^2 at fixed theta^2.
    HillEquation theta_form(double theta_sq) const;
    // Hill equation in x with the other separation constant frozen:
    // row 2 uses nu^2 and returns mu^2, row 3 uses mu^2 and returns nu^2.
    HillEquation frozen_form(double other_sq) const;
};

AngularProblem angular_problem(const StackelMatrix& S, int which, double lambda);

// Open theta^2 interval on which both angular weights are positive.
std::pair<double, double> admissible_window(const StackelMatrix& S);

struct AngularSchrodinger {
    LiouvilleChart chart;
    SmoothFn1D Q;
    double length = 0.0;
};

// -V'' + Q V = mu^2 V on the Liouville chart of the weight at theta^2.
AngularSchrodinger angular_schrodinger(const AngularProblem& pb, double theta_sq);
// Monodromy of the chart-form equation, obtained from the x-form by the
// Liouville similarity at x = 0.
Monodromy monodromy(const AngularProblem& pb, double mu_sq, double theta_sq, double rtol = 1e-12);
double periodicity_char(const AngularProblem& pb, double mu_sq, double theta_sq, double rtol = 1e-12);

struct ConeBounds {
    double C1 = 0.0, C2 = 0.0, D1 = 0.0, D2 = 0.0;

    // C1 mu^2 + D1 <= nu^2 <= C2 mu^2 + D2 for mu^2 >= 0.
    bool contains(double mu_sq, double nu_sq, double tol = 1e-9) const;
    nlohmann::json to_json() const;
};

ConeBounds cone_bounds(const StackelMatrix& S, double lambda);

struct CoupledEigenvalue {
    int index = 0;
    double mu_sq = 0.0;
    double nu_sq = 0.0;
    double theta_sq = 0.0;
    int multiplicity = 1;
    // Floquet provenance: eigenvalue indices of the two periodic problems
    int j = 0;
    int k = 0;
    double delta2 = 0.0;
    double delta3 = 0.0;
    // |Delta / Delta'| of each equation, a backward error in the spectral parameter
    double shift2 = 0.0;
    double shift3 = 0.0;
    bool verified = true;
    // multiplicity implied by the monodromy off-diagonal test
    int floquet_multiplicity = 1;

    nlohmann::json to_json() const;
};

struct SpectrumOptions {
    double newton_tol = 1e-13;
    int max_iter = 40;
    double cluster_radius = 1e-4;
    double residual_tol = 1e-7;
    double shift_tol = 1e-9;
    int table_points = 256;
    double offdiag_tol = 1e-7;
    double monodromy_rtol = 1e-12;
    bool verify = true;
    int workers = 1;
};

struct SpectrumResult {
    std::vector<CoupledEigenvalue> modes;
    ConeBounds cone;
    double lambda = 1.0;
    double r_max = 0.0;
    // modes dropped because min(mu^2, nu^2) < 0
    int dropped_negative = 0;
    // pairs whose fixed-point iteration failed
    int flagged_cells = 0;
    int multiplicity_mismatches = 0;
    double max_residual = 0.0;
    // largest relative backward error among equations failing the raw residual test
    double max_shift = 0.0;
    int unverified = 0;
    int basis_size = 0;

    nlohmann::json to_json() const;
};

// All coupled eigenvalues with sqrt(mu^4 + nu^4) <= r_max, ordered by mu^2 then nu^2.
SpectrumResult coupled_solve(const StackelMatrix& S, double lambda, double r_max,
                             const SpectrumOptions& opt = SpectrumOptions());

struct CountResult {
    int count = 0;
    double ratio = 0.0;
    // vol(p^{-1}(cone and ball)) / (4 pi^2 r^2) by Monte Carlo
    double symbol_ratio = 0.0;
};

double symbol_volume_ratio(const StackelMatrix& S, double theta_lo, double theta_hi, int samples = 200000,
                           unsigned long long seed = 20240917ULL);
CountResult count_in_cone(const std::vector<CoupledEigenvalue>& spectrum, const StackelMatrix& S, double theta_lo,
                          double theta_hi, double r, int samples = 200000);

// Empirical minimal distance between successive curves mu = 2 m pi / B~(theta^2)
// (and the row 3 analogue) in the (mu, nu) plane.
double curve_separation(const StackelMatrix& S, double theta_lo, double theta_hi, int m_lo, int m_hi,
                        int samples = 32);

}  // namespace stk
