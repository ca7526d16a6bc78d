#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrn/montecarlo.hpp"
#include "mrn/network.hpp"

namespace mrn {

// Conditional law of the fast subsystem given the slow degrees of advancement, summarized by
// the conditional population mean, optionally its covariance, and optionally the exact
// conditional means of the slow propensities.
struct FastConditional {
    Eigen::VectorXd xhat;
    Eigen::MatrixXd cov;        // empty when unavailable
    Eigen::VectorXd alpha;      // per reaction (slow entries used); empty when unavailable
};

class Partition;

class FastClosure {
public:
    virtual ~FastClosure() = default;
    virtual std::string name() const = 0;
    // y: population implied by the slow firings alone (fast degrees of advancement at zero).
    virtual FastConditional condition(const Partition& part, const std::vector<std::int64_t>& y,
                                      std::mt19937_64* rng) const = 0;
};

class Partition {
public:
    Partition(const Network& net, std::vector<int> fast, std::shared_ptr<FastClosure> closure = nullptr);

    const Network& net() const { return *net_; }
    const std::vector<int>& slow() const { return slow_; }
    const std::vector<int>& fast() const { return fast_; }
    bool is_fast(int m) const { return fast_mask_[m]; }
    const FastClosure* closure() const { return closure_.get(); }

    // Population implied by slow DAs alone.
    std::vector<std::int64_t> slow_population(const std::vector<std::int64_t>& z_slow) const;
    // Conditional-mean slow propensities (entries of fast reactions are zero).
    Eigen::VectorXd slow_propensities(const std::vector<std::int64_t>& y, std::mt19937_64* rng = nullptr,
                                      FastConditional* cond = nullptr) const;

private:
    const Network* net_;
    std::vector<int> slow_, fast_;
    std::vector<char> fast_mask_;
    std::shared_ptr<FastClosure> closure_;
};

// mu_Z(f) - mu_Z(r) for the fast dimerization pair 2A <-> B at quasi-equilibrium, given the monomer
// count P and dimer count D implied by the slow reactions: (A - sqrt(A^2 - 4B)) / 2 with
// A = P - 1/2 + kr / (2 kf), B = P (P - 1) / 4 - kr D / (2 kf).
double dimer_equilibrium_difference(double P, double D, double kf, double kr);

// Quasi-equilibrium closure for a fast reversible dimerization 2A <-> B.
class DimerClosure : public FastClosure {
public:
    explicit DimerClosure(const Network& net, const std::vector<int>& fast);
    std::string name() const override { return "dimer"; }
    FastConditional condition(const Partition& part, const std::vector<std::int64_t>& y,
                              std::mt19937_64* rng) const override;

private:
    int forward_ = -1, reverse_ = -1, monomer_ = -1, dimer_ = -1;
    double kf_ = 0.0, kr_ = 0.0;
};

// Stationary law of the fast subnetwork (conditional master equation solved by sparse LU), cached by y.
class StationaryClosure : public FastClosure {
public:
    explicit StationaryClosure(std::int64_t max_states = 10'000) : max_states_(max_states) {}
    std::string name() const override { return "stationary"; }
    FastConditional condition(const Partition& part, const std::vector<std::int64_t>& y,
                              std::mt19937_64* rng) const override;

private:
    std::int64_t max_states_;
    mutable std::mutex mtx_;
    mutable std::map<std::vector<std::int64_t>, FastConditional> cache_;
};

// Time average of a fast-only SSA run started from y (burn-in then averaging, counted in events).
class SsaNestedClosure : public FastClosure {
public:
    SsaNestedClosure(long burn_in = 200, long window = 2000) : burn_in_(burn_in), window_(window) {}
    std::string name() const override { return "ssa-nested"; }
    FastConditional condition(const Partition& part, const std::vector<std::int64_t>& y,
                              std::mt19937_64* rng) const override;

private:
    long burn_in_, window_;
};

std::shared_ptr<FastClosure> make_closure(const std::string& name, const Network& net, const std::vector<int>& fast);

// Reduced network handle (slow SSA with conditional-mean propensities).
Partition reduce_network(const Network& net, const std::vector<int>& fast, const std::string& closure);

// x^ = x0 + sum_slow s z + sum_fast s mu_Z(fast | z_s).
Eigen::VectorXd estimate_population_from_slow(const Partition& part, const std::vector<std::int64_t>& z_slow);

// Reduced SSA: slow reactions fire with conditional-mean propensities that are frozen between slow
// events. The grid path records x^ (real-valued).
GridPath simulate_reduced_on_grid(const Partition& part, double t_end, std::uint64_t seed, std::uint64_t index,
                                  const std::vector<double>& grid);
Ensemble run_reduced_ensemble(const Partition& part, double t_end, const std::vector<double>& grid, int L,
                              std::uint64_t seed);

// Diagnostic: reactions ranked by time-averaged propensity along one SSA path (descending).
std::vector<std::pair<int, double>> rank_reactions_by_activity(const Network& net, double t_end, std::uint64_t seed);

}  // namespace mrn
