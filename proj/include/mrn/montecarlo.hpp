#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrn/network.hpp"

namespace mrn {

enum class Method { SSA, Poisson, Langevin, Weighted };
const char* method_name(Method m);
Method method_from_name(const std::string& s);

// Stream for trajectory `index` of an ensemble with master seed `seed`.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index = 0);

struct SimOptions {
    Method method = Method::SSA;
    double t_end = 1.0;
    double tau = 0.0;        // leap/step size; 0 selects the leap-condition bound (Poisson only)
    double epsilon = 0.03;   // leap-condition parameter
    double tau_min = 1e-9;   // abort threshold for reject-and-halve
    std::vector<double> lambda;  // weighted sampling: per-reaction propensity scalings
    bool zero_noise = false;     // Langevin test hook: G == 0
};

// A sampled path. Records are (time, reaction, z, x); reaction is -1 for the initial record and
// for leap/Langevin steps (which may fire several channels). x is real-valued for Langevin.
struct Trajectory {
    Method kind = Method::SSA;
    std::uint64_t seed = 0;
    int M = 0, N = 0;
    std::vector<double> t;
    std::vector<int> reaction;
    std::vector<double> z;  // records x M
    std::vector<double> x;  // records x N
    bool absorbed = false;
    double weight = 1.0;
    double log_weight = 0.0;
    long halvings = 0;

    std::size_t size() const { return t.size(); }
    const double* z_at(std::size_t k) const { return z.data() + k * M; }
    const double* x_at(std::size_t k) const { return x.data() + k * N; }
};

Trajectory simulate_ssa(const Network& net, double t_end, std::uint64_t seed);
Trajectory simulate_poisson_leap(const Network& net, double t_end, double tau, std::uint64_t seed,
                                 double epsilon = 0.03, double tau_min = 1e-9);
Trajectory simulate_langevin(const Network& net, double t_end, double tau, std::uint64_t seed, bool zero_noise = false);
Trajectory simulate_weighted(const Network& net, double t_end, const std::vector<double>& lambda, std::uint64_t seed);
Trajectory simulate(const Network& net, const SimOptions& opt, std::uint64_t seed);

// Leap-condition step at population x: with g_m = max(eps alpha_m, max_i |d pi_m / d x_i|), tau <= g_m / |mean drift of pi_m|
// and tau <= g_m^2 / (variance rate of pi_m), minimized over m.
double leap_bound(const Network& net, const std::vector<double>& x, double epsilon);

// Population path sampled (right-continuously) on a grid.
struct GridPath {
    Eigen::MatrixXd x;  // grid x N
    double weight = 1.0;
    bool absorbed = false;
    long events = 0;
};
GridPath sample_on_grid(const Trajectory& tr, const std::vector<double>& grid);

// Streams the simulation straight onto the grid without storing the event list.
GridPath simulate_on_grid(const Network& net, const SimOptions& opt, std::uint64_t seed, const std::vector<double>& grid);

struct Ensemble {
    std::vector<double> grid;
    std::vector<GridPath> paths;
    std::uint64_t seed = 0;
    bool weighted = false;
};

// Number of worker threads: MRN_THREADS if set (>= 1), else hardware concurrency.
int worker_threads();

// L independent trajectories; trajectory l uses stream (seed, l). Results do not depend on threading.
Ensemble run_ensemble(const Network& net, const SimOptions& opt, const std::vector<double>& grid, int L,
                      std::uint64_t seed);

struct Statistics {
    Eigen::MatrixXd mean;              // grid x N
    std::vector<Eigen::MatrixXd> cov;  // per grid point, N x N (unbiased 1/(L-1); weighted: 1/L)
};
Statistics estimate_statistics(const Ensemble& ens);

// Empirical pmf of species n at grid index g: value -> probability (weighted by w / L).
std::map<std::int64_t, double> empirical_pmf(const Ensemble& ens, std::size_t g, int n);
// Empirical joint pmf at grid index g on a population state space ordering (values rounded to integers).
Eigen::VectorXd empirical_pmf_vector(const Ensemble& ens, std::size_t g, int n, std::int64_t lo, std::int64_t hi);
// Weighted estimate of P[predicate(x(t_g))] and its standard error.
struct EventEstimate {
    double p = 0.0;
    double stderr_ = 0.0;
};
EventEstimate estimate_event(const Ensemble& ens, std::size_t g, const std::function<bool(const double*)>& event);

// Avalanches in a piecewise-constant activity path A (values held from times[k] to times[k+1]).
// Counts maximal positive excursions that start after a zero period at t > times[0] and return to
// zero before the horizon; tau_w > 0 additionally caps the excursion length.
struct AvalancheCount {
    long count = 0;
    double rate = 0.0;  // per unit time
};
AvalancheCount count_avalanches(const std::vector<double>& times, const std::vector<double>& activity, double horizon,
                                double tau_w = 0.0);

// Avalanche statistics over an SSA ensemble of the activity sum of the given species.
struct AvalancheSummary {
    double mean_rate = 0.0;
    double stderr_ = 0.0;
    long total = 0;
};
AvalancheSummary avalanche_rate(const Network& net, const std::vector<int>& species, double t_end, int L,
                                std::uint64_t seed, double tau_w = 0.0);

void write_trajectory_csv(const std::string& path, const Network& net, const Trajectory& tr);
void write_trajectory_jsonl(const std::string& path, const Network& net, const Trajectory& tr);
void write_statistics_csv(const std::string& path, const Network& net, const Ensemble& ens, const Statistics& st);

}  // namespace mrn
