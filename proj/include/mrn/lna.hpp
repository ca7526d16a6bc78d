#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrn/network.hpp"
#include "mrn/ode.hpp"

namespace mrn {

// alpha_m(z; Omega) = f(Omega) [ alpha~_m(z / Omega) + alpha~'_m(z / Omega) / Omega ] with f(Omega) = Omega.
// Mass action: alpha~ is the leading monomial k prod x~^nu / nu!, k = kappa Omega^{|nu|-1}, and alpha~'
// collects the falling-factorial remainder. Other kinds: alpha~ = pi(Omega x~) / Omega, alpha~' = 0.
struct ScaledPropensity {
    const Network* net = nullptr;
    double omega = 1.0;

    double f() const { return omega; }
    // Densities x~ are population densities x / Omega.
    Eigen::VectorXd alpha(const Eigen::VectorXd& xt) const;
    Eigen::VectorXd alpha_prime(const Eigen::VectorXd& xt) const;
    // d alpha~_m / d x~_n (M x N).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& xt) const;
};
ScaledPropensity scaled_propensities(const Network& net, double omega);

struct MacroSeries {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> zeta, chi;  // DA densities and population densities
};
MacroSeries integrate_macroscopic(const Network& net, double omega, const std::vector<double>& grid,
                                  const OdeOptions& ode = {}, double blowup = 1e12);

struct LnaSeries {
    double omega = 1.0;
    std::vector<double> t;
    std::vector<Eigen::VectorXd> zeta, chi;
    std::vector<Eigen::MatrixXd> C_xi;                   // noise covariance of the DA densities
    std::vector<Eigen::MatrixXd> G;                      // Jacobian d alpha~ / d zeta
    std::vector<Eigen::MatrixXd> J;                      // population Jacobian S d alpha~ / d x~
    std::vector<Eigen::VectorXd> mean_z, mean_x;         // Omega zeta, x0 + Omega S zeta
    std::vector<Eigen::MatrixXd> cov_z, cov_x;           // Omega C, Omega S C S^T
};
LnaSeries integrate_lna_covariance(const Network& net, double omega, const std::vector<double>& grid,
                                   const OdeOptions& ode = {});

struct LnaValidity {
    double max_re_lambda = 0.0;      // over the grid, on the stoichiometric subspace
    double max_re_lambda_final = 0.0;
    bool unstable = false;           // some Re(lambda) >= 0
    double max_negative_mass = 0.0;  // Gaussian mass below species lower bounds
    double max_upper_mass = 0.0;     // Gaussian mass above species upper bounds
    bool negative_mass = false;      // above 1e-3
    double min_cov_eigenvalue = 0.0;
    bool valid() const { return !unstable && !negative_mass; }
};
LnaValidity check_lna_validity(const Network& net, const LnaSeries& s);

// Eigenvalues of the population Jacobian restricted to the range of S (conservation laws removed).
Eigen::VectorXcd stoichiometric_eigenvalues(const Eigen::MatrixXd& S, const Eigen::MatrixXd& J);

// Gaussian N(mean, var) discretized to the integers lo..hi (cell [k - 1/2, k + 1/2)).
Eigen::VectorXd gaussian_marginal_pmf(double mean, double var, std::int64_t lo, std::int64_t hi);

void write_lna_csv(const std::string& path, const Network& net, const LnaSeries& s);

}  // namespace mrn
