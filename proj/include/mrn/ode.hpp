#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace mrn {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double h_min = 1e-12;  // relative to the integration span
    long max_steps = 50'000'000;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;
// Called after each accepted step; may project y (e.g. onto a constraint set) or throw.
using OdeHook = std::function<void(double t, Eigen::VectorXd& y)>;

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
};

// Dormand-Prince 5(4) with step-size control; returns y at every grid time (grid[0] = initial time).
std::vector<Eigen::VectorXd> integrate_ode(const OdeRhs& f, const Eigen::VectorXd& y0, const std::vector<double>& grid,
                                           const OdeOptions& opt = {}, const OdeHook& hook = {},
                                           OdeStats* stats = nullptr);

std::vector<double> uniform_grid(double t_end, int points, double t0 = 0.0);

}  // namespace mrn
