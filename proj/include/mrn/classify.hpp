#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mrn {

// Transient states and persistent (closed, irreducible) classes of a generator.
struct Classification {
    std::vector<int> class_of;                       // -1 for transient states, else persistent class index
    std::vector<std::vector<std::int64_t>> classes;  // persistent classes, each sorted
    std::vector<std::int64_t> transient;             // sorted
    Eigen::MatrixXd mu;                              // |T| x J absorption probabilities
    int components = 0;                              // number of strongly connected components

    bool irreducible() const { return classes.size() == 1 && transient.empty(); }
};

// Strongly connected components (iterative Tarjan) of the transition graph j -> i for P(i,j) > 0.
// Returns component id per state; ids are in reverse topological order of the condensation.
std::vector<int> strongly_connected_components(const Eigen::SparseMatrix<double>& P, int* count = nullptr);

Classification classify_communicating_structure(const Eigen::SparseMatrix<double>& P);

}  // namespace mrn
