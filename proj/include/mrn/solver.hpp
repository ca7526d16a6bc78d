#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mrn/statespace.hpp"

namespace mrn {

using SpMat = Eigen::SparseMatrix<double>;

struct KsaOptions {
    int krylov_dim = 40;
    double tol = 1e-7;
};

struct KsaStats {
    int steps = 0;
    int rejections = 0;
    double error_estimate = 0.0;
    double clipped_mass = 0.0;
    bool happy_breakdown = false;
};

// w = exp(t A) v with an Arnoldi/Expokit-style adaptive step controller.
Eigen::VectorXd expv(const SpMat& A, const Eigen::VectorXd& v, double t, const KsaOptions& opt = {},
                     KsaStats* stats = nullptr);

// One propagation of a probability vector: expv, then clip negatives and renormalize.
Eigen::VectorXd propagate_ksa(const SpMat& P, const Eigen::VectorXd& p, double tau, const KsaOptions& opt = {},
                              KsaStats* stats = nullptr);

// Solution on a grid of times (grid[0] is the time of p0).
std::vector<Eigen::VectorXd> propagate_ksa_grid(const SpMat& P, const Eigen::VectorXd& p0,
                                                const std::vector<double>& grid, const KsaOptions& opt = {});

// Implicit Euler on a lower-triangular DA generator: (I - tau Q) q_j = q_{j-1} by forward substitution.
Eigen::VectorXd propagate_ie(const SpMat& Q, const Eigen::VectorXd& q, double tau);
Eigen::VectorXd propagate_ie_to(const SpMat& Q, const Eigen::VectorXd& q, double t, double tau);
double default_ie_step(const SpMat& Q);  // max_m alpha_m * tau <= 0.1

// Null vector of an irreducible generator (sparse LU on the normalization-augmented system).
Eigen::VectorXd stationary_distribution(const SpMat& P);

struct EigenSolution {
    Eigen::VectorXcd lambda;
    Eigen::MatrixXcd R;   // right eigenvectors (columns)
    Eigen::VectorXcd c;   // expansion coefficients of p0
    double condition = 0.0;
    Eigen::VectorXd at(double t) const;
};
// p(t) = sum_k c_k r_k exp(lambda_k t); refuses (NumericError) when the eigenvector matrix is
// too ill-conditioned (> 1e8), i.e. numerically defective.
EigenSolution eigen_solution(const SpMat& P, const Eigen::VectorXd& p0, double max_condition = 1e8);

// D[p || q] = sum p ln(p/q) with 0 ln 0 = 0.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct Marginalized {
    StateSpace space;
    Eigen::VectorXd p;
    double lost_mass = 0.0;  // mass on the DA truncation sink
};
// p(x) = sum over z with x = x0 + S z of q(z).
Marginalized marginalize_da_distribution(const Network& net, const StateSpace& da_space, const Eigen::VectorXd& q);

// Project a population distribution onto a (population) state space, returning the vector in
// target ordering. States missing from the target are accumulated in the returned miss mass.
Eigen::VectorXd remap_distribution(const StateSpace& from, const Eigen::VectorXd& p, const StateSpace& to,
                                   double* missing = nullptr);

// Marginal of species n over its bounds [lo, hi] (index 0 = lo).
Eigen::VectorXd marginal(const StateSpace& space, const Eigen::VectorXd& p, int n);

// Exports: CSV with state columns then probability; JSONL {"t":..,"p":[..]}.
void write_distribution_csv(const std::string& path, const Network& net, const StateSpace& space,
                            const Eigen::VectorXd& p);
void write_series_jsonl(const std::string& path, const std::vector<double>& t, const std::vector<Eigen::VectorXd>& p);

}  // namespace mrn
