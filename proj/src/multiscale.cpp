#include "mrn/multiscale.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>

#include "mrn/errors.hpp"
#include "mrn/parallel.hpp"
#include "mrn/solver.hpp"

namespace mrn {

namespace {

std::string state_string(const std::vector<std::int64_t>& y)
{
    std::string s = "(";
    for (std::size_t i = 0; i < y.size(); ++i) s += (i ? "," : "") + std::to_string(y[i]);
    return s + ")";
}

Eigen::VectorXd to_vec(const std::vector<std::int64_t>& y)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) v[i] = static_cast<double>(y[i]);
    return v;
}

// Moments of x and of the slow propensities under a discrete law (states, weights summing to 1).
FastConditional summarize(const Partition& part, const std::vector<std::vector<std::int64_t>>& states,
                          const std::vector<double>& w)
{
    const Network& net = part.net();
    const int N = net.N(), M = net.M();
    FastConditional c;
    c.xhat = Eigen::VectorXd::Zero(N);
    c.cov = Eigen::MatrixXd::Zero(N, N);
    c.alpha = Eigen::VectorXd::Zero(M);
    std::vector<double> a(M);
    for (std::size_t k = 0; k < states.size(); ++k) {
        c.xhat += w[k] * to_vec(states[k]);
        net.propensities(states[k].data(), a.data());
        for (int m : part.slow()) c.alpha[m] += w[k] * a[m];
    }
    for (std::size_t k = 0; k < states.size(); ++k) {
        const Eigen::VectorXd d = to_vec(states[k]) - c.xhat;
        c.cov += w[k] * d * d.transpose();
    }
    return c;
}


// The slow firings alone may leave y outside the species bounds (e.g. a slow reaction consumed a
// fast-pool species). The fast law lives on the in-bounds part of the lattice y + span(fast columns);
// start from the nearest such point.
std::vector<std::int64_t> feasible_fast_start(const Partition& part, const std::vector<std::int64_t>& y,
                                              std::int64_t cap)
{
    const Network& net = part.net();
    if (in_bounds(net, y.data())) return y;
    std::map<std::vector<std::int64_t>, char> seen{{y, 1}};
    std::vector<std::vector<std::int64_t>> queue{y};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        for (int m : part.fast())
            for (int dir : {1, -1}) {
                std::vector<std::int64_t> t(queue[head]);
                for (int i = 0; i < net.N(); ++i) t[i] += dir * net.S(i, m);
                if (!seen.emplace(t, 1).second) continue;
                if (in_bounds(net, t.data())) return t;
                if (static_cast<std::int64_t>(queue.size()) >= cap)
                    throw NumericError("no in-bounds fast configuration near " + state_string(y));
                queue.push_back(t);
            }
    }
    throw NumericError("no in-bounds fast configuration for " + state_string(y));
}

}  // namespace

Partition::Partition(const Network& net, std::vector<int> fast, std::shared_ptr<FastClosure> closure)
    : net_(&net), fast_(std::move(fast)), closure_(std::move(closure))
{
    const int M = net.M();
    fast_mask_.assign(M, 0);
    for (int m : fast_) {
        if (m < 0 || m >= M) throw ConfigError("fast reaction index " + std::to_string(m) + " out of range");
        if (fast_mask_[m]) throw ConfigError("fast reaction " + std::to_string(m) + " listed twice");
        fast_mask_[m] = 1;
    }
    std::sort(fast_.begin(), fast_.end());
    for (int m = 0; m < M; ++m)
        if (!fast_mask_[m]) slow_.push_back(m);
    if (!fast_.empty() && !closure_) closure_ = std::make_shared<StationaryClosure>();
}

std::vector<std::int64_t> Partition::slow_population(const std::vector<std::int64_t>& z_slow) const
{
    if (z_slow.size() != slow_.size()) throw ConfigError("expected one slow degree of advancement per slow reaction");
    std::vector<std::int64_t> y = net_->x0();
    for (std::size_t k = 0; k < slow_.size(); ++k)
        for (int i = 0; i < net_->N(); ++i) y[i] += net_->S(i, slow_[k]) * z_slow[k];
    return y;
}

Eigen::VectorXd Partition::slow_propensities(const std::vector<std::int64_t>& y, std::mt19937_64* rng,
                                             FastConditional* cond) const
{
    const int M = net_->M();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(M);
    if (fast_.empty()) {
        std::vector<double> e(M);
        net_->propensities(y.data(), e.data());
        for (int m = 0; m < M; ++m) a[m] = e[m];
        if (cond) {
            cond->xhat = to_vec(y);
            cond->cov = Eigen::MatrixXd::Zero(net_->N(), net_->N());
            cond->alpha = a;
        }
        return a;
    }
    FastConditional c = closure_->condition(*this, y, rng);
    if (c.alpha.size() == M) {
        for (int m : slow_) a[m] = std::max(0.0, c.alpha[m]);
    } else {
        for (int m : slow_) a[m] = std::max(0.0, net_->smooth<double>(m, c.xhat.data()));
    }
    for (int m : slow_)
        if (!std::isfinite(a[m])) throw NumericError("non-finite reduced propensity at " + state_string(y));
    if (cond) *cond = std::move(c);
    return a;
}

double dimer_equilibrium_difference(double P, double D, double kf, double kr)
{
    if (!(kf > 0.0) || !(kr >= 0.0)) throw ConfigError("dimer closure needs kf > 0 and kr >= 0");
    const double r = kr / (2.0 * kf);
    const double A = P - 0.5 + r;
    const double B = 0.25 * P * (P - 1.0) - r * D;
    const double disc = A * A - 4.0 * B;
    if (disc < 0.0)
        throw NumericError("dimer closure has no real root (discriminant " + std::to_string(disc) +
                           ", monomers " + std::to_string(P) + ", dimers " + std::to_string(D) + ")");
    return 0.5 * (A - std::sqrt(disc));
}

DimerClosure::DimerClosure(const Network& net, const std::vector<int>& fast)
{
    if (fast.size() != 2) throw ConfigError("dimer closure needs exactly two fast reactions (2A -> B, B -> 2A)");
    const int N = net.N();
    auto single = [&](const Eigen::MatrixXi& W, int m, int want, int& idx) {
        idx = -1;
        for (int i = 0; i < N; ++i) {
            if (W(i, m) == 0) continue;
            if (W(i, m) != want || idx >= 0) return false;
            idx = i;
        }
        return idx >= 0;
    };
    for (int pass = 0; pass < 2 && forward_ < 0; ++pass) {
        const int f = fast[pass], r = fast[1 - pass];
        int a1, b1, b2, a2;
        if (single(net.V, f, 2, a1) && single(net.Vp, f, 1, b1) && single(net.V, r, 1, b2) && single(net.Vp, r, 2, a2) &&
            a1 == a2 && b1 == b2 && net.reactions[f].prop.kind == Kind::MassAction &&
            net.reactions[r].prop.kind == Kind::MassAction) {
            forward_ = f;
            reverse_ = r;
            monomer_ = a1;
            dimer_ = b1;
            kf_ = net.reactions[f].prop.k;
            kr_ = net.reactions[r].prop.k;
        }
    }
    if (forward_ < 0)
        throw ConfigError("dimer closure: fast reactions are not a mass-action pair 2A -> B, B -> 2A");
}

FastConditional DimerClosure::condition(const Partition&, const std::vector<std::int64_t>& y, std::mt19937_64*) const
{
    const double P = static_cast<double>(y[monomer_]);
    const double D = static_cast<double>(y[dimer_]);
    const double d = dimer_equilibrium_difference(P, D, kf_, kr_);
    FastConditional c;
    c.xhat = to_vec(y);
    c.xhat[monomer_] = P - 2.0 * d;
    c.xhat[dimer_] = D + d;
    return c;
}

FastConditional StationaryClosure::condition(const Partition& part, const std::vector<std::int64_t>& y,
                                             std::mt19937_64*) const
{
    {
        std::lock_guard<std::mutex> lk(mtx_);
        auto it = cache_.find(y);
        if (it != cache_.end()) return it->second;
    }
    const Network& net = part.net();
    const int N = net.N();
    const std::vector<std::int64_t> start = feasible_fast_start(part, y, max_states_);
    std::map<std::vector<std::int64_t>, int> index;
    std::vector<std::vector<std::int64_t>> states{start};
    index[start] = 0;
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t head = 0; head < states.size(); ++head) {
        const std::vector<std::int64_t> x = states[head];
        double out = 0.0;
        for (int m : part.fast()) {
            const double a = net.propensity(m, x.data());
            if (!(a > 0.0)) continue;
            std::vector<std::int64_t> t(x);
            for (int i = 0; i < N; ++i) t[i] += net.S(i, m);
            if (!in_bounds(net, t.data()) || t == x) continue;
            auto [it, fresh] = index.emplace(t, static_cast<int>(states.size()));
            if (fresh) {
                if (static_cast<std::int64_t>(states.size()) >= max_states_)
                    throw ConfigError("fast subnetwork from " + state_string(y) + " exceeds " +
                                      std::to_string(max_states_) + " states");
                states.push_back(t);
            }
            trip.emplace_back(it->second, static_cast<int>(head), a);
            out += a;
        }
        if (out > 0.0) trip.emplace_back(static_cast<int>(head), static_cast<int>(head), -out);
    }
    std::vector<double> w(states.size(), 1.0);
    if (states.size() > 1) {
        SpMat P(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(states.size()));
        P.setFromTriplets(trip.begin(), trip.end());
        Eigen::VectorXd p;
        try {
            p = stationary_distribution(P);
        } catch (const NumericError& e) {
            throw NumericError("fast subnetwork from " + state_string(y) + " has no unique stationary law: " + e.what());
        }
        for (std::size_t k = 0; k < states.size(); ++k) w[k] = std::max(0.0, p[static_cast<Eigen::Index>(k)]);
        double s = 0.0;
        for (double v : w) s += v;
        for (double& v : w) v /= s;
    }
    FastConditional c = summarize(part, states, w);
    std::lock_guard<std::mutex> lk(mtx_);
    cache_.emplace(y, c);
    return c;
}

FastConditional SsaNestedClosure::condition(const Partition& part, const std::vector<std::int64_t>& y,
                                            std::mt19937_64* rng) const
{
    if (!rng) throw ConfigError("ssa-nested closure needs a random stream");
    const Network& net = part.net();
    const int N = net.N();
    const auto& fast = part.fast();
    std::vector<std::int64_t> x = feasible_fast_start(part, y, 10'000);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> a(fast.size());
    std::map<std::vector<std::int64_t>, double> occupancy;
    double total = 0.0;
    for (long ev = 0; ev < burn_in_ + window_; ++ev) {
        double a0 = 0.0;
        for (std::size_t k = 0; k < fast.size(); ++k) a0 += (a[k] = net.propensity(fast[k], x.data()));
        if (!(a0 > 0.0)) {
            occupancy.clear();
            occupancy[x] = 1.0;
            total = 1.0;
            break;
        }
        const double dt = std::exponential_distribution<double>(a0)(*rng);
        if (ev >= burn_in_) {
            occupancy[x] += dt;
            total += dt;
        }
        const double u = unif(*rng) * a0;
        double acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < fast.size(); ++k) {
            acc += a[k];
            if (u < acc && a[k] > 0.0) break;
        }
        while (k > 0 && !(a[k] > 0.0)) --k;
        for (int i = 0; i < N; ++i) x[i] += net.S(i, fast[k]);
    }
    std::vector<std::vector<std::int64_t>> states;
    std::vector<double> w;
    for (auto& [s, d] : occupancy) {
        states.push_back(s);
        w.push_back(d / total);
    }
    return summarize(part, states, w);
}

std::shared_ptr<FastClosure> make_closure(const std::string& name, const Network& net, const std::vector<int>& fast)
{
    if (name == "dimer") return std::make_shared<DimerClosure>(net, fast);
    if (name == "stationary") return std::make_shared<StationaryClosure>();
    if (name == "ssa-nested") return std::make_shared<SsaNestedClosure>();
    throw ConfigError("unknown closure '" + name + "' (dimer|stationary|ssa-nested)");
}

Partition reduce_network(const Network& net, const std::vector<int>& fast, const std::string& closure)
{
    return Partition(net, fast, fast.empty() ? nullptr : make_closure(closure, net, fast));
}

Eigen::VectorXd estimate_population_from_slow(const Partition& part, const std::vector<std::int64_t>& z_slow)
{
    const std::vector<std::int64_t> y = part.slow_population(z_slow);
    if (part.fast().empty()) return to_vec(y);
    auto rng = make_rng(0, 0);
    return part.closure()->condition(part, y, &rng).xhat;
}

namespace {

long run_reduced(const Partition& part, double t_end, std::mt19937_64& rng, const std::vector<double>& grid,
                 Eigen::MatrixXd& out, bool& absorbed)
{
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    const Network& net = part.net();
    const int N = net.N();
    std::vector<std::int64_t> y = net.x0();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& slow = part.slow();
    std::size_t g = 0;
    double t = 0.0;
    long events = 0;
    absorbed = false;
    FastConditional cond;
    while (true) {
        const Eigen::VectorXd a = part.slow_propensities(y, &rng, &cond);
        double a0 = 0.0;
        for (int m : slow) a0 += a[m];
        double t_next = t_end;
        if (!(a0 > 0.0))
            absorbed = true;
        else
            t_next = t + std::exponential_distribution<double>(a0)(rng);
        while (g < grid.size() && grid[g] < std::min(t_next, t_end)) out.row(static_cast<Eigen::Index>(g++)) = cond.xhat;
        if (absorbed || t_next > t_end) break;
        t = t_next;
        const double u = unif(rng) * a0;
        double acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < slow.size(); ++k) {
            acc += a[slow[k]];
            if (u < acc && a[slow[k]] > 0.0) break;
        }
        while (k > 0 && !(a[slow[k]] > 0.0)) --k;
        for (int i = 0; i < N; ++i) y[i] += net.S(i, slow[k]);
        ++events;
    }
    for (; g < grid.size(); ++g) out.row(static_cast<Eigen::Index>(g)) = cond.xhat;
    return events;
}

void check_reduced_grid(const std::vector<double>& grid, double t_end)
{
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] < 0.0 || grid[k] > t_end * (1 + 1e-12))
            throw ConfigError("output grid lies outside the simulated horizon [0, t_end]");
        if (k > 0 && grid[k] < grid[k - 1]) throw ConfigError("output grid must be nondecreasing");
    }
}

}  // namespace

GridPath simulate_reduced_on_grid(const Partition& part, double t_end, std::uint64_t seed, std::uint64_t index,
                                  const std::vector<double>& grid)
{
    check_reduced_grid(grid, t_end);
    GridPath gp;
    gp.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), part.net().N());
    auto rng = make_rng(seed, index);
    gp.events = run_reduced(part, t_end, rng, grid, gp.x, gp.absorbed);
    return gp;
}

Ensemble run_reduced_ensemble(const Partition& part, double t_end, const std::vector<double>& grid, int L,
                              std::uint64_t seed)
{
    if (L < 1) throw ConfigError("number of trajectories must be at least 1");
    check_reduced_grid(grid, t_end);
    Ensemble ens;
    ens.grid = grid;
    ens.seed = seed;
    ens.paths.resize(L);
    parallel_for(L, [&](int l) { ens.paths[l] = simulate_reduced_on_grid(part, t_end, seed, l, grid); });
    return ens;
}

std::vector<std::pair<int, double>> rank_reactions_by_activity(const Network& net, double t_end, std::uint64_t seed)
{
    const Trajectory tr = simulate_ssa(net, t_end, seed);
    const int M = net.M(), N = net.N();
    std::vector<double> acc(M, 0.0), a(M);
    std::vector<std::int64_t> x(N);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double t1 = k + 1 < tr.size() ? tr.t[k + 1] : t_end;
        for (int i = 0; i < N; ++i) x[i] = std::llround(tr.x_at(k)[i]);
        net.propensities(x.data(), a.data());
        for (int m = 0; m < M; ++m) acc[m] += a[m] * (t1 - tr.t[k]);
    }
    std::vector<std::pair<int, double>> rank;
    for (int m = 0; m < M; ++m) rank.emplace_back(m, acc[m] / t_end);
    std::stable_sort(rank.begin(), rank.end(), [](auto& p, auto& q) { return p.second > q.second; });
    return rank;
}

}  // namespace mrn
