#include "mrn/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "mrn/errors.hpp"

namespace mrn {

StateSpace::StateSpace(int dim, std::vector<std::int64_t> lo, std::vector<std::int64_t> hi, bool da)
    : dim_(dim), da_(da), lo_(std::move(lo)), hi_(std::move(hi))
{
    radix_.resize(dim_);
    std::uint64_t vol = 1;
    for (int i = 0; i < dim_; ++i) {
        radix_[i] = vol;
        const std::uint64_t w = static_cast<std::uint64_t>(hi_[i] - lo_[i] + 1);
        if (__builtin_mul_overflow(vol, w, &vol) || vol > (1ull << 62))
            throw ConfigError("state-space bounding box too large to index; tighten species bounds");
    }
    volume_ = vol;
    if (volume_ <= (1ull << 24)) dense_.assign(volume_, -1);
}

bool StateSpace::code(const std::int64_t* s, std::uint64_t& out) const
{
    std::uint64_t c = 0;
    for (int i = 0; i < dim_; ++i) {
        if (s[i] < lo_[i] || s[i] > hi_[i]) return false;
        c += static_cast<std::uint64_t>(s[i] - lo_[i]) * radix_[i];
    }
    out = c;
    return true;
}

std::int64_t StateSpace::find(const std::int64_t* s) const
{
    std::uint64_t c;
    if (!code(s, c)) return -1;
    if (!dense_.empty()) return dense_[c];
    auto it = sparse_.find(c);
    return it == sparse_.end() ? -1 : it->second;
}

std::int64_t StateSpace::push(const std::int64_t* s)
{
    std::uint64_t c;
    if (!code(s, c)) throw ConfigError("state outside the state-space box");
    const std::int64_t k = size();
    if (!dense_.empty()) {
        if (dense_[c] >= 0) return dense_[c];
        if (k >= std::numeric_limits<std::int32_t>::max()) throw ConfigError("too many states");
        dense_[c] = static_cast<std::int32_t>(k);
    } else {
        auto [it, fresh] = sparse_.emplace(c, k);
        if (!fresh) return it->second;
    }
    data_.insert(data_.end(), s, s + dim_);
    return k;
}

void StateSpace::sort_lexicographic()
{
    const std::int64_t K = size();
    std::vector<std::int64_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return std::lexicographical_compare(state(a), state(a) + dim_, state(b), state(b) + dim_);
    });
    std::vector<std::int64_t> nd(data_.size());
    for (std::int64_t k = 0; k < K; ++k) std::copy(state(order[k]), state(order[k]) + dim_, nd.begin() + k * dim_);
    data_.swap(nd);
    reindex();
}

void StateSpace::reindex()
{
    if (!dense_.empty()) std::fill(dense_.begin(), dense_.end(), -1);
    sparse_.clear();
    for (std::int64_t k = 0; k < size(); ++k) {
        std::uint64_t c;
        code(state(k), c);
        if (!dense_.empty())
            dense_[c] = static_cast<std::int32_t>(k);
        else
            sparse_[c] = k;
    }
}

namespace {

StateSpace enumerate_population(const Network& net, std::int64_t cap)
{
    const int N = net.N(), M = net.M();
    std::vector<std::int64_t> lo(N), hi(N);
    for (int i = 0; i < N; ++i) {
        lo[i] = net.species[i].min;
        hi[i] = net.species[i].max;
    }
    StateSpace sp(N, lo, hi, false);
    State x0 = net.x0();
    if (!in_bounds(net, x0.data())) throw ConfigError("initial state outside species bounds");
    sp.push(x0.data());
    std::vector<double> a(M);
    std::vector<std::int64_t> y(N);
    for (std::int64_t head = 0; head < sp.size(); ++head) {
        const std::vector<std::int64_t> x = sp.state_vec(head);
        net.propensities(x.data(), a.data());
        for (int m = 0; m < M; ++m) {
            if (!(a[m] > 0.0)) continue;
            for (int i = 0; i < N; ++i) y[i] = x[i] + net.S(i, m);
            if (!in_bounds(net, y.data())) continue;
            if (sp.find(y.data()) < 0) {
                if (sp.size() >= cap)
                    throw ConfigError("state-space cap of " + std::to_string(cap) +
                                      " states exceeded; tighten species bounds");
                sp.push(y.data());
            }
        }
    }
    sp.sort_lexicographic();
    return sp;
}

StateSpace enumerate_da(const Network& net, std::int64_t H, std::int64_t cap)
{
    if (H < 0) throw ConfigError("DA enumeration needs a finite horizon");
    const int N = net.N(), M = net.M();
    StateSpace sp(M, std::vector<std::int64_t>(M, 0), std::vector<std::int64_t>(M, H), true);
    std::vector<std::int64_t> z(M, 0), x(N);
    const State x0 = net.x0();
    // Odometer over z in lexicographic order with sum(z) <= H.
    std::int64_t total = 0;
    while (true) {
        for (int i = 0; i < N; ++i) {
            x[i] = x0[i];
            for (int m = 0; m < M; ++m) x[i] += net.S(i, m) * z[m];
        }
        if (in_bounds(net, x.data())) {
            if (sp.size() >= cap)
                throw ConfigError("DA state-space cap of " + std::to_string(cap) + " states exceeded");
            sp.push(z.data());
        }
        int pos = M - 1;
        while (pos >= 0) {
            if (total < H) {
                ++z[pos];
                ++total;
                break;
            }
            total -= z[pos];
            z[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return sp;
}

}  // namespace

StateSpace enumerate_state_space(const Network& net, const EnumerateOptions& opt)
{
    if (opt.mode == Mode::Population) return enumerate_population(net, opt.max_states);
    return enumerate_da(net, opt.da_horizon, opt.max_states);
}

double Generator::max_exit_rate() const
{
    double r = 0.0;
    for (int j = 0; j < P.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it)
            if (it.row() == j) r = std::max(r, -it.value());
    return r;
}

Generator build_generator(const Network& net, const StateSpace& space, Truncation trunc)
{
    const int N = net.N(), M = net.M();
    const std::int64_t K = space.size();
    Generator G;
    G.da = space.da();
    const bool sink = G.da || trunc == Truncation::Absorbing;
    const std::int64_t dim = sink ? K + 1 : K;
    if (sink) G.sink = K;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(K) * (M + 1));
    std::vector<double> a(M);
    std::vector<std::int64_t> x(N), tgt(std::max(N, M));
    const State x0 = net.x0();
    std::vector<std::pair<std::int64_t, double>> col;
    for (std::int64_t j = 0; j < K; ++j) {
        const std::int64_t* s = space.state(j);
        if (G.da) {
            for (int i = 0; i < N; ++i) {
                x[i] = x0[i];
                for (int m = 0; m < M; ++m) x[i] += net.S(i, m) * s[m];
            }
        } else {
            std::copy(s, s + N, x.begin());
        }
        net.propensities(x.data(), a.data());
        col.clear();
        double lost = 0.0;
        for (int m = 0; m < M; ++m) {
            if (!(a[m] > 0.0)) continue;
            if (!std::isfinite(a[m]))
                throw NumericError("non-finite propensity for reaction " + net.reactions[m].name);
            std::int64_t i;
            if (G.da) {
                std::copy(s, s + M, tgt.begin());
                ++tgt[m];
                i = space.find(tgt.data());
            } else {
                bool moves = false;
                for (int n = 0; n < N; ++n) {
                    tgt[n] = s[n] + net.S(n, m);
                    moves |= net.S(n, m) != 0;
                }
                if (!moves) continue;  // self-loop leaves the distribution unchanged
                i = space.find(tgt.data());
            }
            if (i < 0) {
                if (!sink)
                    throw ConfigError("state space not closed: reaction " + net.reactions[m].name +
                                      " leaves the enumerated states (use absorbing truncation or wider bounds)");
                lost += a[m];
                continue;
            }
            col.emplace_back(i, a[m]);
        }
        if (lost > 0.0) {
            col.emplace_back(G.sink, lost);
            G.lost_rate_max = std::max(G.lost_rate_max, lost);
        }
        double diag = 0.0;
        for (auto& [i, v] : col) {
            trip.emplace_back(i, j, v);
            diag += v;
        }
        if (diag > 0.0) trip.emplace_back(j, j, -diag);
    }
    G.P.resize(dim, dim);
    G.P.setFromTriplets(trip.begin(), trip.end());
    G.P.makeCompressed();
    return G;
}

double max_abs_column_sum(const Eigen::SparseMatrix<double>& P)
{
    double worst = 0.0;
    for (int j = 0; j < P.outerSize(); ++j) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it) s += it.value();
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

bool is_lower_triangular(const Eigen::SparseMatrix<double>& P)
{
    for (int j = 0; j < P.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, j); it; ++it)
            if (it.row() < j && it.value() != 0.0) return false;
    return true;
}

}  // namespace mrn
