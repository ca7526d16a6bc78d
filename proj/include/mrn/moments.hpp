#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrn/network.hpp"
#include "mrn/ode.hpp"

namespace mrn {

enum class Closure { Normal, Lognormal };
Closure closure_from_name(const std::string& s);

struct MomentState {
    double t = 0.0;
    Eigen::VectorXd mu;  // DA means
    Eigen::MatrixXd C;   // DA covariances
};

// h1(m, a), h2(m, a, b), h3(m, a, b, c): derivatives of alpha_m with respect to z at mu.
struct PropensityDerivatives {
    int M = 0;
    Eigen::VectorXd alpha;
    Eigen::MatrixXd h1;
    std::vector<double> h2, h3;
    double d2(int m, int a, int b) const { return h2[(static_cast<std::size_t>(m) * M + a) * M + b]; }
    double d3(int m, int a, int b, int c) const { return h3[((static_cast<std::size_t>(m) * M + a) * M + b) * M + c]; }
};
PropensityDerivatives propensity_derivatives(const Network& net, const Eigen::VectorXd& mu, int order = 3);

// Central third moments c(a,b,c) implied by E[ZaZbZc] = E[ZaZb]E[ZaZc]E[ZbZc] / (E[Za]E[Zb]E[Zc]).
// Throws NumericError when a mean is not strictly positive.
std::vector<double> lognormal_third_moments(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C);
// Raw E[ZaZbZc] under the same relation.
double lognormal_raw_third(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C, int a, int b, int c);

struct MomentOptions {
    Closure closure = Closure::Normal;
    bool jensen = false;
    OdeOptions ode{1e-8, 1e-10};
    double psd_tol = 1e-8;
};

struct MomentRhs {
    Eigen::VectorXd dmu;
    Eigen::MatrixXd dC;
    Eigen::VectorXd correction;  // T_m actually used (after the Jensen clamp when enabled)
};
// Right-hand side of the mean/covariance equations of the DA process under the chosen closure.
MomentRhs moment_rhs(const Network& net, const MomentState& s, const MomentOptions& opt);
// Same with the Jensen correction forced on.
MomentRhs jensen_corrected_rhs(const Network& net, const MomentState& s, Closure closure = Closure::Normal);

struct MomentSeries {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> mu_z, mu_x;
    std::vector<Eigen::MatrixXd> C_z, C_x;
    bool negative_mean_warned = false;
};
MomentSeries integrate_moments(const Network& net, const std::vector<double>& grid, const MomentOptions& opt = {});

void write_moments_csv(const std::string& path, const Network& net, const MomentSeries& s, bool full_covariance = false);

}  // namespace mrn
