#include "mrn/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mrn/errors.hpp"

namespace mrn {

std::vector<std::pair<int, int>> thermo_pairing(const Network& net)
{
    std::vector<std::pair<int, int>> pairs = net.reversible_pairs;
    std::vector<char> used(net.M(), 0);
    for (auto [f, r] : pairs) {
        if (f < 0 || r < 0 || f >= net.M() || r >= net.M() || f == r)
            throw ConfigError("invalid reversible pair (" + std::to_string(f) + ", " + std::to_string(r) + ")");
        for (int i = 0; i < net.N(); ++i)
            if (net.S(i, f) != -net.S(i, r))
                throw ConfigError("reactions " + net.reactions[f].name + " and " + net.reactions[r].name +
                                  " are paired but their net stoichiometries are not opposite");
        if (used[f] || used[r]) throw ConfigError("reaction listed in more than one reversible pair");
        used[f] = used[r] = 1;
    }
    for (int m = 0; m < net.M(); ++m)
        if (!used[m]) pairs.emplace_back(m, -1);
    return pairs;
}

std::vector<ThermoEdge> build_thermo_edges(const Network& net, const StateSpace& space)
{
    if (space.da()) throw ConfigError("thermodynamic analysis needs a population state space");
    const int N = net.N();
    const auto pairs = thermo_pairing(net);
    std::vector<ThermoEdge> edges;
    std::vector<std::int64_t> y(N);
    for (std::int64_t u = 0; u < space.size(); ++u) {
        const std::int64_t* x = space.state(u);
        for (auto [f, r] : pairs) {
            bool moves = false;
            for (int i = 0; i < N; ++i) {
                y[i] = x[i] + net.S(i, f);
                moves |= net.S(i, f) != 0;
            }
            if (!moves) continue;
            const std::int64_t v = space.find(y.data());
            if (v < 0) continue;
            const double wf = net.propensity(f, x);
            const double wr = r >= 0 ? net.propensity(r, y.data()) : 0.0;
            if (!(wf > 0.0) && !(wr > 0.0)) continue;
            ThermoEdge e;
            e.u = u;
            e.v = v;
            e.fwd = f;
            e.rev = r;
            e.floored = !(wf > 0.0) || !(wr > 0.0);
            e.wf = std::max(wf, kThermoEps);
            e.wr = std::max(wr, kThermoEps);
            edges.push_back(e);
        }
    }
    return edges;
}

Landscape state_energy_landscape(const Eigen::VectorXd& pbar, double omega)
{
    if (!(omega > 0.0)) throw ConfigError("size parameter must be positive");
    if (pbar.size() == 0 || (pbar.array() < 0.0).any() || std::abs(pbar.sum() - 1.0) > 1e-8)
        throw ConfigError("energy landscape needs a normalized probability vector");
    Landscape l;
    l.omega = omega;
    pbar.maxCoeff(&l.ground);
    const double pmax = pbar[l.ground];
    l.E.resize(pbar.size());
    l.V.resize(pbar.size());
    for (Eigen::Index k = 0; k < pbar.size(); ++k) {
        if (pbar[k] > 0.0) {
            l.E[k] = -std::log(pbar[k]) / omega;
            l.V[k] = -std::log(pbar[k] / pmax) / omega;
        } else {
            l.E[k] = l.V[k] = std::numeric_limits<double>::infinity();
        }
    }
    return l;
}

Eigen::VectorXd gibbs_distribution(const Eigen::VectorXd& E, double omega)
{
    double emin = std::numeric_limits<double>::infinity();
    for (double e : E) emin = std::min(emin, e);
    Eigen::VectorXd p(E.size());
    for (Eigen::Index k = 0; k < E.size(); ++k)
        p[k] = std::isfinite(E[k]) ? std::exp(-omega * (E[k] - emin)) : 0.0;
    return p / p.sum();
}

Eigen::VectorXd richardson_v0(const Eigen::VectorXd& V1, double omega1, const Eigen::VectorXd& V2, double omega2)
{
    if (V1.size() != V2.size() || omega1 == omega2) throw ConfigError("Richardson estimate needs two sizes on one grid");
    return (omega2 * V2 - omega1 * V1) / (omega2 - omega1);
}

namespace {

// ln(wf p_u / (wr p_v)) with each factor floored separately, so that the split into a rate part and
// a probability part is exact.
double edge_log_ratio(const ThermoEdge& e, double pu, double pv)
{
    return std::log(e.wf / e.wr) + std::log(std::max(pu, kThermoEps) / std::max(pv, kThermoEps));
}

}  // namespace

ThermoRates thermo_rates(const std::vector<ThermoEdge>& edges, const Eigen::VectorXd& p, const Eigen::VectorXd& pbar)
{
    ThermoRates r;
    for (const auto& e : edges) {
        const double jp = e.wf * p[e.u], jm = e.wr * p[e.v];
        const double rho = jp - jm;
        if (rho == 0.0) continue;
        if (e.floored || !(jp > 0.0) || !(jm > 0.0)) r.eps_sensitive = true;
        r.sigma += rho * edge_log_ratio(e, p[e.u], p[e.v]);
        r.h += rho * std::log(e.wf / e.wr);
        r.f += rho * edge_log_ratio(e, pbar[e.u], pbar[e.v]);
    }
    return r;
}

double shannon_entropy(const Eigen::VectorXd& p)
{
    double s = 0.0;
    for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

ThermoReport thermo_timeseries(const Network& net, const StateSpace& space, const std::vector<double>& grid,
                               const std::vector<Eigen::VectorXd>& series, const Eigen::VectorXd& pbar, double omega)
{
    if (grid.size() != series.size()) throw ConfigError("thermo series and grid differ in length");
    if (!(omega > 0.0)) throw ConfigError("size parameter must be positive");
    ThermoReport r;
    r.omega = omega;
    r.edges = build_thermo_edges(net, space);
    const Landscape land = state_energy_landscape(pbar, omega);
    r.E = land.E;
    bool floored_energy = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Eigen::VectorXd& p = series[k];
        if (p.size() != pbar.size()) throw ConfigError("distribution size does not match the state space");
        double U = 0.0;
        for (Eigen::Index x = 0; x < p.size(); ++x) {
            if (!(p[x] > 0.0)) continue;
            if (!(pbar[x] > kThermoEps)) floored_energy = true;
            U += p[x] * (-std::log(std::max(pbar[x], kThermoEps)) / omega);
        }
        const double S = shannon_entropy(p);
        const ThermoRates tr = thermo_rates(r.edges, p, pbar);
        r.t.push_back(grid[k]);
        r.U.push_back(U);
        r.S.push_back(S);
        r.F.push_back(U - S / omega);
        r.sigma.push_back(tr.sigma);
        r.h.push_back(tr.h);
        r.f.push_back(tr.f);
        r.eps_sensitive |= tr.eps_sensitive;
    }
    r.eps_sensitive |= floored_energy;
    for (const auto& e : r.edges) r.eps_sensitive |= e.floored;

    const Eigen::VectorXd& pl = series.back();
    const std::size_t E = r.edges.size();
    r.flux.resize(E);
    r.affinity.resize(E);
    r.stationary_affinity.resize(E);
    for (std::size_t k = 0; k < E; ++k) {
        const auto& e = r.edges[k];
        r.flux[k] = e.wf * pl[e.u] - e.wr * pl[e.v];
        r.affinity[k] = edge_log_ratio(e, pl[e.u], pl[e.v]);
        r.stationary_affinity[k] = edge_log_ratio(e, pbar[e.u], pbar[e.v]);
    }

    // Central differences in integral form: Y(t+) - Y(t-) against Simpson quadrature of the right-hand
    // side over [t-, t+]; twice the gap to the trapezoid rule bounds the quadrature error.
    // The first interval is skipped: sigma is unbounded at t = 0 for a point-mass start.
    auto check = [&](const std::vector<double>& Y, auto&& rhs, double& worst, double& tol_at) {
        double ratio = 0.0;
        for (std::size_t k = 2; k + 1 < grid.size(); ++k) {
            const double h1 = grid[k] - grid[k - 1], h2 = grid[k + 1] - grid[k];
            if (!(h1 > 0.0) || !(h2 > 0.0)) continue;
            const double g0 = rhs(k - 1), g1 = rhs(k), g2 = rhs(k + 1);
            const double H = h1 + h2;
            const double simpson = H / 6.0 * ((2.0 - h2 / h1) * g0 + H * H / (h1 * h2) * g1 + (2.0 - h1 / h2) * g2);
            const double trap = 0.5 * h1 * (g0 + g1) + 0.5 * h2 * (g1 + g2);
            const double res = std::abs(Y[k + 1] - Y[k - 1] - simpson) / H;
            const double tol = 2.0 * std::abs(simpson - trap) / H + 1e-8 * std::max(1.0, std::abs(r.sigma[k]));
            if (res / tol > ratio) {
                ratio = res / tol;
                worst = res;
                tol_at = tol;
            }
        }
        return ratio <= 1.0;
    };
    std::vector<double> OF(r.F.size());
    for (std::size_t k = 0; k < OF.size(); ++k) OF[k] = omega * r.F[k];
    const bool ok1 = check(r.S, [&](std::size_t k) { return r.sigma[k] - r.h[k]; }, r.entropy_residual,
                           r.entropy_tolerance);
    const bool ok2 = check(OF, [&](std::size_t k) { return r.f[k] - r.sigma[k]; }, r.free_energy_residual,
                           r.free_energy_tolerance);
    r.balance_ok = ok1 && ok2;
    if (r.eps_sensitive) spdlog::warn("thermodynamic quantities depend on the {:g} floor for zero rates", kThermoEps);
    return r;
}

namespace {

std::vector<std::pair<std::size_t, int>> tree_path_to_root(const std::vector<std::int64_t>& parent_edge_node,
                                                           const std::vector<std::size_t>& parent_edge,
                                                           const std::vector<int>& parent_sign, std::int64_t x)
{
    // Oriented edges from x up to its root (each traversed from child to parent).
    std::vector<std::pair<std::size_t, int>> path;
    while (parent_edge_node[x] >= 0) {
        path.emplace_back(parent_edge[x], -parent_sign[x]);
        x = parent_edge_node[x];
    }
    return path;
}

}  // namespace

double CycleGraph::edge_affinity(std::size_t e) const { return std::log(edges[e].wf / edges[e].wr); }

double CycleGraph::cycle_affinity(const Cycle& c) const
{
    double a = 0.0;
    for (auto [e, s] : c) a += s * edge_affinity(e);
    return a;
}

bool CycleGraph::is_closed_walk(const Cycle& c) const
{
    if (c.empty()) return false;
    auto tail = [&](std::pair<std::size_t, int> oe) { return oe.second > 0 ? edges[oe.first].u : edges[oe.first].v; };
    auto head = [&](std::pair<std::size_t, int> oe) { return oe.second > 0 ? edges[oe.first].v : edges[oe.first].u; };
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k].first >= edges.size() || (c[k].second != 1 && c[k].second != -1)) return false;
        if (head(c[k]) != tail(c[(k + 1) % c.size()])) return false;
    }
    return true;
}

std::vector<double> CycleGraph::decomposition(const Cycle& c) const
{
    std::vector<long> chord_index(edges.size(), -1);
    for (std::size_t k = 0; k < chords.size(); ++k) chord_index[chords[k]] = static_cast<long>(k);
    std::vector<double> alpha(chords.size(), 0.0);
    for (auto [e, s] : c)
        if (chord_index[e] >= 0) alpha[chord_index[e]] += s * fundamental[chord_index[e]].front().second;
    return alpha;
}

double CycleGraph::reconstruction_error(const Cycle& c) const
{
    const std::vector<double> alpha = decomposition(c);
    double rec = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k)
        if (alpha[k] != 0.0) rec += alpha[k] * cycle_affinity(fundamental[k]);
    return std::abs(cycle_affinity(c) - rec);
}

CycleGraph fundamental_cycle_analysis(std::int64_t nodes, std::vector<ThermoEdge> edges, bool dfs)
{
    CycleGraph g;
    g.nodes = nodes;
    g.edges = std::move(edges);
    const std::size_t E = g.edges.size();
    std::vector<std::vector<std::size_t>> adj(nodes);
    for (std::size_t e = 0; e < E; ++e) {
        const auto& ed = g.edges[e];
        if (ed.u < 0 || ed.v < 0 || ed.u >= nodes || ed.v >= nodes) throw ConfigError("edge endpoint out of range");
        adj[ed.u].push_back(e);
        if (ed.v != ed.u) adj[ed.v].push_back(e);
    }
    g.component.assign(nodes, -1);
    g.in_tree.assign(E, 0);
    std::vector<std::int64_t> parent(nodes, -1), depth(nodes, 0);
    std::vector<std::size_t> pedge(nodes, 0);
    std::vector<int> psign(nodes, 0);
    for (std::int64_t root = 0; root < nodes; ++root) {
        if (g.component[root] >= 0) continue;
        const int c = g.components++;
        g.component[root] = c;
        std::deque<std::int64_t> work{root};
        while (!work.empty()) {
            std::int64_t x;
            if (dfs) {
                x = work.back();
                work.pop_back();
            } else {
                x = work.front();
                work.pop_front();
            }
            for (std::size_t e : adj[x]) {
                const auto& ed = g.edges[e];
                const std::int64_t y = ed.u == x ? ed.v : ed.u;
                if (g.component[y] >= 0) continue;
                g.component[y] = c;
                parent[y] = x;
                depth[y] = depth[x] + 1;
                pedge[y] = e;
                psign[y] = ed.u == x ? 1 : -1;  // orientation of e when walking x -> y
                g.in_tree[e] = 1;
                work.push_back(y);
            }
        }
    }
    for (std::size_t e = 0; e < E; ++e) {
        if (g.in_tree[e]) continue;
        g.chords.push_back(e);
        const auto& ed = g.edges[e];
        // Chord u -> v, then the tree path v -> lca -> u.
        Cycle cyc{{e, 1}};
        auto up_v = tree_path_to_root(parent, pedge, psign, ed.v);
        auto up_u = tree_path_to_root(parent, pedge, psign, ed.u);
        // Strip the common suffix (shared path above the lowest common ancestor).
        while (!up_v.empty() && !up_u.empty() && up_v.back().first == up_u.back().first) {
            up_v.pop_back();
            up_u.pop_back();
        }
        for (auto& oe : up_v) cyc.push_back(oe);
        for (auto it = up_u.rbegin(); it != up_u.rend(); ++it) cyc.emplace_back(it->first, -it->second);
        g.fundamental.push_back(std::move(cyc));
    }
    return g;
}

CycleGraph fundamental_cycle_analysis(const Network& net, const StateSpace& space, bool dfs)
{
    return fundamental_cycle_analysis(space.size(), build_thermo_edges(net, space), dfs);
}

BalanceReport detailed_balance_check(const Network& net, const StateSpace& space, const Eigen::VectorXd& pbar,
                                     double tol)
{
    BalanceReport r;
    for (const auto& e : build_thermo_edges(net, space)) {
        const double wf = e.floored && e.wf <= kThermoEps ? 0.0 : e.wf;
        const double wr = e.floored && e.wr <= kThermoEps ? 0.0 : e.wr;
        r.max_violation = std::max(r.max_violation, std::abs(wf * pbar[e.u] - wr * pbar[e.v]));
    }
    r.balanced = r.max_violation <= tol;
    return r;
}

BalanceReport detailed_balance_check(const Network& net, const StateSpace& space, double tol)
{
    const CycleGraph g = fundamental_cycle_analysis(net, space);
    BalanceReport r;
    for (const auto& e : g.edges)
        if (e.floored) {
            r.balanced = false;
            r.max_violation = std::numeric_limits<double>::infinity();
        }
    for (const auto& c : g.fundamental) {
        const double a = std::abs(g.cycle_affinity(c));
        r.max_violation = std::max(r.max_violation, a);
        ++r.cycles_checked;
    }
    r.balanced = r.balanced && r.max_violation <= tol;
    return r;
}

Eigen::VectorXd equilibrium_distribution_by_paths(const Network& net, const StateSpace& space, bool dfs)
{
    const CycleGraph g = fundamental_cycle_analysis(net, space, dfs);
    if (g.components != 1) throw InfeasibleError("state graph is disconnected; no unique equilibrium law");
    for (const auto& e : g.edges)
        if (e.floored)
            throw InfeasibleError("an irreversible transition breaks detailed balance; no equilibrium law");
    double worst = 0.0;
    for (const auto& c : g.fundamental) worst = std::max(worst, std::abs(g.cycle_affinity(c)));
    if (worst > 1e-9)
        throw InfeasibleError("Kolmogorov cycle condition violated (|ln P(C)| = " + std::to_string(worst) +
                              "); the network is not at equilibrium");
    // log p(v) - log p(u) = ln(wf / wr) along each tree edge, propagated from the root.
    const std::int64_t K = g.nodes;
    std::vector<std::vector<std::size_t>> adj(K);
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        if (g.in_tree[e]) {
            adj[g.edges[e].u].push_back(e);
            adj[g.edges[e].v].push_back(e);
        }
    std::vector<double> lp(K, 0.0);
    std::vector<char> seen(K, 0);
    std::deque<std::int64_t> q{0};
    seen[0] = 1;
    while (!q.empty()) {
        const std::int64_t x = q.front();
        q.pop_front();
        for (std::size_t e : adj[x]) {
            const auto& ed = g.edges[e];
            const std::int64_t y = ed.u == x ? ed.v : ed.u;
            if (seen[y]) continue;
            seen[y] = 1;
            lp[y] = lp[x] + (ed.u == x ? 1.0 : -1.0) * std::log(ed.wf / ed.wr);
            q.push_back(y);
        }
    }
    const double mx = *std::max_element(lp.begin(), lp.end());
    Eigen::VectorXd p(K);
    for (std::int64_t k = 0; k < K; ++k) p[k] = std::exp(lp[k] - mx);
    return p / p.sum();
}

void write_thermo_csv(const std::string& path, const ThermoReport& r)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(17) << "t,U,S,F,sigma,h,f\n";
    for (std::size_t k = 0; k < r.t.size(); ++k)
        out << r.t[k] << ',' << r.U[k] << ',' << r.S[k] << ',' << r.F[k] << ',' << r.sigma[k] << ',' << r.h[k] << ','
            << r.f[k] << '\n';
}

void write_landscape_csv(const std::string& path, const Network& net, const StateSpace& space, const Landscape& l)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(17);
    for (const auto& s : net.species) out << s.name << ',';
    out << "E,V\n";
    for (std::int64_t k = 0; k < space.size(); ++k) {
        const std::int64_t* x = space.state(k);
        for (int i = 0; i < space.dim(); ++i) out << x[i] << ',';
        out << l.E[k] << ',' << l.V[k] << '\n';
    }
}

void write_cycle_report_json(const std::string& path, const CycleGraph& g)
{
    nlohmann::json j;
    j["nodes"] = g.nodes;
    j["edges"] = g.edges.size();
    j["components"] = g.components;
    j["fundamental_cycles"] = g.fundamental.size();
    nlohmann::json cyc = nlohmann::json::array();
    for (const auto& c : g.fundamental) {
        nlohmann::json walk = nlohmann::json::array();
        for (auto [e, s] : c) walk.push_back({{"edge", e}, {"sign", s}});
        const double a = g.cycle_affinity(c);
        cyc.push_back({{"edges", walk}, {"affinity", a}, {"log_product", a}});
    }
    j["cycles"] = cyc;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace mrn
