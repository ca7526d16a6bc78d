#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrn/network.hpp"
#include "mrn/statespace.hpp"

namespace mrn {

inline constexpr double kThermoEps = 1e-30;

// One state-graph edge per reversible pair (or unpaired reaction) and source state: u -> v = u + s_fwd.
// wf = pi_fwd(u), wr = pi_rev(v); a missing or zero rate is floored at kThermoEps (floored = true).
struct ThermoEdge {
    std::int64_t u = 0, v = 0;
    int fwd = -1, rev = -1;  // rev == -1 for unpaired reactions
    double wf = 0.0, wr = 0.0;
    bool floored = false;
};

// Reversible pairs from the network plus every unpaired reaction as a pair with a negligible reverse.
std::vector<std::pair<int, int>> thermo_pairing(const Network& net);
std::vector<ThermoEdge> build_thermo_edges(const Network& net, const StateSpace& space);

struct Landscape {
    double omega = 1.0;
    Eigen::VectorXd E;  // -ln(p) / omega (+inf where p == 0)
    Eigen::VectorXd V;  // -ln(p / p_max) / omega >= 0
    std::int64_t ground = 0;
};
Landscape state_energy_landscape(const Eigen::VectorXd& pbar, double omega = 1.0);
// Gibbs reconstruction exp(-omega E) / Z.
Eigen::VectorXd gibbs_distribution(const Eigen::VectorXd& E, double omega = 1.0);
// V0 estimate from V on the same scaled points at two sizes, assuming V = V0 + V1 / omega.
Eigen::VectorXd richardson_v0(const Eigen::VectorXd& V1, double omega1, const Eigen::VectorXd& V2, double omega2);

struct ThermoRates {
    double sigma = 0.0, h = 0.0, f = 0.0;
    bool eps_sensitive = false;
};
// sigma, h, f for distribution p with stationary law pbar.
ThermoRates thermo_rates(const std::vector<ThermoEdge>& edges, const Eigen::VectorXd& p, const Eigen::VectorXd& pbar);

struct ThermoReport {
    double omega = 1.0;
    std::vector<double> t, U, S, F, sigma, h, f;
    // Per edge at the last grid point, and stationary affinities.
    std::vector<ThermoEdge> edges;
    Eigen::VectorXd flux, affinity, stationary_affinity;
    Eigen::VectorXd E;
    bool eps_sensitive = false;
    // Central-difference checks of dS/dt = sigma - h and omega dF/dt = f - sigma (interior points).
    double entropy_residual = 0.0, free_energy_residual = 0.0;
    double entropy_tolerance = 0.0, free_energy_tolerance = 0.0;
    bool balance_ok = true;
};
ThermoReport thermo_timeseries(const Network& net, const StateSpace& space, const std::vector<double>& grid,
                               const std::vector<Eigen::VectorXd>& series, const Eigen::VectorXd& pbar,
                               double omega = 1.0);

double shannon_entropy(const Eigen::VectorXd& p);

struct BalanceReport {
    bool balanced = true;
    double max_violation = 0.0;  // distribution mode: max |J+ - J-|; propensity mode: max |ln P(C)|
    std::size_t cycles_checked = 0;
};
BalanceReport detailed_balance_check(const Network& net, const StateSpace& space, const Eigen::VectorXd& pbar,
                                     double tol = 1e-9);
BalanceReport detailed_balance_check(const Network& net, const StateSpace& space, double tol = 1e-9);

// A cycle is a closed walk of oriented edges (edge index, +1 along u -> v, -1 against).
using Cycle = std::vector<std::pair<std::size_t, int>>;

struct CycleGraph {
    std::int64_t nodes = 0;
    std::vector<ThermoEdge> edges;
    std::vector<int> component;   // per node
    int components = 0;
    std::vector<char> in_tree;    // per edge
    std::vector<std::size_t> chords;
    std::vector<Cycle> fundamental;  // fundamental[k] starts with chords[k] oriented +1

    double edge_affinity(std::size_t e) const;  // ln(wf / wr)
    double cycle_affinity(const Cycle& c) const;
    double cycle_product(const Cycle& c) const { return std::exp(cycle_affinity(c)); }
    bool is_closed_walk(const Cycle& c) const;
    // alpha_k(C) = sum over occurrences of chord k in C of its orientation in C times its orientation in C_k.
    std::vector<double> decomposition(const Cycle& c) const;
    double reconstruction_error(const Cycle& c) const;
};

// Spanning forest by BFS (lowest-index roots, edges in index order), or DFS for a second tree.
CycleGraph fundamental_cycle_analysis(std::int64_t nodes, std::vector<ThermoEdge> edges, bool dfs = false);
CycleGraph fundamental_cycle_analysis(const Network& net, const StateSpace& space, bool dfs = false);

// p(x) / p(x0) as products of propensity ratios along spanning-tree paths; refuses (InfeasibleError)
// when the network violates the Kolmogorov cycle conditions or the state graph is disconnected.
Eigen::VectorXd equilibrium_distribution_by_paths(const Network& net, const StateSpace& space, bool dfs = false);

void write_thermo_csv(const std::string& path, const ThermoReport& r);
void write_landscape_csv(const std::string& path, const Network& net, const StateSpace& space, const Landscape& l);
void write_cycle_report_json(const std::string& path, const CycleGraph& g);

}  // namespace mrn
