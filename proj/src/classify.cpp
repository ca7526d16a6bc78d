#include "mrn/classify.hpp"

#include <algorithm>

#include <Eigen/SparseLU>

#include "mrn/errors.hpp"

namespace mrn {

using SpMat = Eigen::SparseMatrix<double>;

std::vector<int> strongly_connected_components(const SpMat& P, int* count)
{
    const int K = static_cast<int>(P.cols());
    std::vector<int> index(K, -1), low(K, 0), comp(K, -1), stack;
    std::vector<char> on_stack(K, 0);
    // Explicit DFS frames: (node, position in the column's inner iterator as an offset).
    std::vector<std::pair<int, int>> frames;
    const int* outer = P.outerIndexPtr();
    const int* inner = P.innerIndexPtr();
    const double* val = P.valuePtr();
    const int* nnz = P.innerNonZeroPtr();
    auto col_end = [&](int j) { return nnz ? outer[j] + nnz[j] : outer[j + 1]; };
    int counter = 0, ncomp = 0;
    for (int root = 0; root < K; ++root) {
        if (index[root] >= 0) continue;
        frames.emplace_back(root, outer[root]);
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!frames.empty()) {
            auto& [v, pos] = frames.back();
            bool descended = false;
            while (pos < col_end(v)) {
                const int w = inner[pos];
                const double a = val[pos];
                ++pos;
                if (w == v || !(a > 0.0)) continue;
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.emplace_back(w, outer[w]);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            const int node = v;
            if (low[node] == index[node]) {
                while (true) {
                    const int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = ncomp;
                    if (w == node) break;
                }
                ++ncomp;
            }
            frames.pop_back();
            if (!frames.empty()) {
                const int parent = frames.back().first;
                low[parent] = std::min(low[parent], low[node]);
            }
        }
    }
    if (count) *count = ncomp;
    return comp;
}

Classification classify_communicating_structure(const SpMat& P)
{
    const int K = static_cast<int>(P.cols());
    Classification out;
    int ncomp = 0;
    const std::vector<int> comp = strongly_connected_components(P, &ncomp);
    out.components = ncomp;

    std::vector<char> terminal(ncomp, 1);
    for (int j = 0; j < K; ++j)
        for (SpMat::InnerIterator it(P, j); it; ++it)
            if (it.row() != j && it.value() > 0.0 && comp[it.row()] != comp[j]) terminal[comp[j]] = 0;

    std::vector<int> class_id(ncomp, -1);
    // Number classes by their smallest state so the output is independent of DFS order.
    for (int s = 0; s < K; ++s) {
        const int c = comp[s];
        if (!terminal[c]) continue;
        if (class_id[c] < 0) {
            class_id[c] = static_cast<int>(out.classes.size());
            out.classes.emplace_back();
        }
        out.classes[class_id[c]].push_back(s);
    }
    out.class_of.assign(K, -1);
    std::vector<int> tpos(K, -1);
    for (int s = 0; s < K; ++s) {
        out.class_of[s] = class_id[comp[s]];
        if (out.class_of[s] < 0) {
            tpos[s] = static_cast<int>(out.transient.size());
            out.transient.push_back(s);
        }
    }
    const int nT = static_cast<int>(out.transient.size());
    const int J = static_cast<int>(out.classes.size());
    out.mu = Eigen::MatrixXd::Zero(nT, J);
    if (nT == 0) return out;

    // Absorption probabilities h solve P_TT^T h_j = -r_j, r_j(i) = total rate from transient i into class j.
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nT, J);
    for (int j = 0; j < K; ++j) {
        if (tpos[j] < 0) continue;
        for (SpMat::InnerIterator it(P, j); it; ++it) {
            const int i = static_cast<int>(it.row());
            if (tpos[i] >= 0)
                trip.emplace_back(tpos[j], tpos[i], it.value());  // transpose
            else if (it.value() > 0.0)
                R(tpos[j], out.class_of[i]) += it.value();
        }
    }
    SpMat A(nT, nT);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw NumericError("singular transient block: structural inconsistency in the classification");
    Eigen::MatrixXd Y = lu.solve(R);
    if (lu.info() != Eigen::Success || !Y.allFinite())
        throw NumericError("singular transient block: structural inconsistency in the classification");
    out.mu = (-Y).cwiseMax(0.0);
    for (int i = 0; i < nT; ++i) {
        const double s = out.mu.row(i).sum();
        if (s > 0.0) out.mu.row(i) /= s;
    }
    return out;
}

}  // namespace mrn
