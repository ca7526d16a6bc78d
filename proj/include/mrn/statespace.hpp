#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "mrn/network.hpp"

namespace mrn {

// Finite set of lattice points (population states or DA vectors) with an index map.
// Points are stored shifted into the box [lo, hi]; the box is what makes signed ranges work.
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(int dim, std::vector<std::int64_t> lo, std::vector<std::int64_t> hi, bool da);

    int dim() const { return dim_; }
    bool da() const { return da_; }
    std::int64_t size() const { return dim_ ? static_cast<std::int64_t>(data_.size()) / dim_ : 0; }
    const std::int64_t* state(std::int64_t k) const { return data_.data() + k * dim_; }
    std::vector<std::int64_t> state_vec(std::int64_t k) const { return {state(k), state(k) + dim_}; }

    std::int64_t find(const std::int64_t* s) const;  // -1 if absent or outside the box
    std::int64_t push(const std::int64_t* s);          // returns index (existing or new)
    void sort_lexicographic();

    const std::vector<std::int64_t>& lo() const { return lo_; }
    const std::vector<std::int64_t>& hi() const { return hi_; }

private:
    bool code(const std::int64_t* s, std::uint64_t& out) const;
    void reindex();

    int dim_ = 0;
    bool da_ = false;
    std::vector<std::int64_t> lo_, hi_;
    std::vector<std::uint64_t> radix_;
    std::uint64_t volume_ = 0;
    std::vector<std::int64_t> data_;
    std::vector<std::int32_t> dense_;
    std::unordered_map<std::uint64_t, std::int64_t> sparse_;
};

enum class Mode { Population, DA };
enum class Truncation { Strict, Absorbing };

struct EnumerateOptions {
    Mode mode = Mode::Population;
    std::int64_t da_horizon = -1;  // maximal total number of firings (DA mode)
    std::int64_t max_states = 2'000'000;
};

// Population mode: breadth-first closure from x0 under reactions with positive propensity,
// restricted to species bounds, sorted lexicographically. DA mode: all z >= 0 with
// sum(z) <= horizon and x0 + S z inside bounds, in lexicographic order.
StateSpace enumerate_state_space(const Network& net, const EnumerateOptions& opt = {});

struct Generator {
    Eigen::SparseMatrix<double> P;  // column-stochastic rate matrix, column j = outflow of state j
    bool da = false;
    std::int64_t sink = -1;          // index of the absorbing truncation state, -1 if none
    double lost_rate_max = 0.0;      // largest truncated outflow rate seen while building
    std::int64_t states() const { return sink >= 0 ? P.rows() - 1 : P.rows(); }
    double max_exit_rate() const;
};

// DA spaces always route transitions leaving the space (horizon or bounds) to a sink state.
Generator build_generator(const Network& net, const StateSpace& space, Truncation trunc = Truncation::Strict);

double max_abs_column_sum(const Eigen::SparseMatrix<double>& P);
bool is_lower_triangular(const Eigen::SparseMatrix<double>& P);

}  // namespace mrn
