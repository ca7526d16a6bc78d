#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mrn {

// Maximum-entropy pmf on {0, 1, ...} with a given mean, truncated at `max` (default: tail < 1e-16).
Eigen::VectorXd geometric_maxent(double mean, std::int64_t max = -1);

struct MaxEntModel {
    int order = 0;
    std::int64_t lo = 0, hi = 0;
    Eigen::VectorXd lambda;          // p(x) = exp(-sum_k lambda_k x^k) / zeta, in the original variable x
    double log_zeta = 0.0;
    Eigen::VectorXd pmf;             // over lo..hi
    Eigen::VectorXd moments;         // fitted raw moments m_1..m_K
    std::vector<double> objective;   // dual objective after each accepted Newton step
    int iterations = 0;
    double max_rel_error = 0.0;

    double entropy() const;
};

struct MaxEntOptions {
    int max_iter = 500;
    double tol = 1e-10;   // relative moment mismatch
    double cond_limit = 1e12;
};

// Raw moments m_1..m_K of a pmf on lo..hi.
Eigen::VectorXd raw_moments(const Eigen::VectorXd& pmf, std::int64_t lo, int K);

// Necessary conditions for raw moments to come from a distribution on [lo, hi] (K <= 4 checked).
// Returns an empty string when no violation is found.
std::string moment_feasibility(const Eigen::VectorXd& m, std::int64_t lo, std::int64_t hi);

// Solves the dual (minimize log zeta + sum lambda_k m_k) by damped Newton on standardized moments.
// Infeasible moments raise InfeasibleError; hopeless conditioning raises NumericError.
MaxEntModel fit_maxent_distribution(const Eigen::VectorXd& moments, std::int64_t lo, std::int64_t hi,
                                    const MaxEntOptions& opt = {});

// Constraint set of the third-order log-normal Gibbs form for a DA marginal: (mu, c + mu^2, ((c + mu^2) / mu)^3).
Eigen::VectorXd lognormal_da_constraints(double mean, double var);

}  // namespace mrn
