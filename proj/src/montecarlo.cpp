#include "mrn/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "mrn/errors.hpp"
#include "mrn/parallel.hpp"

namespace mrn {

const char* method_name(Method m)
{
    switch (m) {
    case Method::SSA: return "ssa";
    case Method::Poisson: return "poisson";
    case Method::Langevin: return "langevin";
    case Method::Weighted: return "weighted";
    }
    return "?";
}

Method method_from_name(const std::string& s)
{
    if (s == "ssa") return Method::SSA;
    if (s == "poisson") return Method::Poisson;
    if (s == "langevin") return Method::Langevin;
    if (s == "weighted") return Method::Weighted;
    throw ConfigError("unknown simulation method '" + s + "' (ssa|poisson|langevin|weighted)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct CoreResult {
    bool absorbed = false;
    double log_weight = 0.0;
    long halvings = 0;
    long events = 0;
};

// Calls emit(t, reaction, z, x) for the initial state and after every state change.
template <class Emit>
void run_core(const Network& net, const SimOptions& opt, std::mt19937_64& rng, Emit&& emit, CoreResult& res)
{
    const int N = net.N(), M = net.M();
    if (!(opt.t_end > 0.0)) throw ConfigError("t_end must be positive");
    const State x0 = net.x0();
    std::vector<std::int64_t> xi(x0.begin(), x0.end());
    std::vector<double> x(N), z(M, 0.0), a(M);
    for (int i = 0; i < N; ++i) x[i] = static_cast<double>(xi[i]);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double t = 0.0;
    emit(t, -1, z.data(), x.data());

    switch (opt.method) {
    case Method::SSA:
    case Method::Weighted: {
        const bool weighted = opt.method == Method::Weighted;
        if (weighted) {
            if (static_cast<int>(opt.lambda.size()) != M)
                throw ConfigError("weighted sampling needs one scaling per reaction");
            for (double l : opt.lambda)
                if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("propensity scalings must be positive");
        }
        std::vector<double> b(M);
        while (true) {
            net.propensities(xi.data(), a.data());
            double a0 = 0.0, excess = 0.0;
            for (int m = 0; m < M; ++m) {
                b[m] = weighted ? opt.lambda[m] * a[m] : a[m];
                a0 += b[m];
                if (weighted) excess += b[m] - a[m];
            }
            if (!std::isfinite(a0)) throw NumericError("propensity overflow or NaN during SSA");
            if (!(a0 > 0.0)) {
                res.absorbed = true;
                res.log_weight += (opt.t_end - t) * excess;
                break;
            }
            const double dt = std::exponential_distribution<double>(a0)(rng);
            if (t + dt > opt.t_end) {
                res.log_weight += (opt.t_end - t) * excess;
                break;
            }
            res.log_weight += dt * excess;
            t += dt;
            const double u = unif(rng) * a0;
            double acc = 0.0;
            int m = 0;
            for (; m < M - 1; ++m) {
                acc += b[m];
                if (u < acc && b[m] > 0.0) break;
            }
            while (m > 0 && !(b[m] > 0.0)) --m;
            if (weighted) res.log_weight -= std::log(opt.lambda[m]);
            for (int i = 0; i < N; ++i) {
                xi[i] += net.S(i, m);
                x[i] = static_cast<double>(xi[i]);
            }
            z[m] += 1.0;
            ++res.events;
            emit(t, m, z.data(), x.data());
        }
        break;
    }
    case Method::Poisson: {
        if (opt.tau < 0.0) throw ConfigError("leap size must be positive (or 0 for automatic)");
        std::vector<std::int64_t> k(M), y(N);
        while (t < opt.t_end) {
            net.propensities(xi.data(), a.data());
            bool any = false;
            for (int m = 0; m < M; ++m) {
                if (!std::isfinite(a[m])) throw NumericError("propensity overflow or NaN during leap");
                any |= a[m] > 0.0;
            }
            if (!any) {
                res.absorbed = true;
                break;
            }
            double step = opt.tau > 0.0 ? opt.tau : leap_bound(net, x, opt.epsilon);
            step = std::min(step, opt.t_end - t);
            while (true) {
                for (int m = 0; m < M; ++m) {
                    const double mean = a[m] * step;
                    k[m] = mean > 0.0 ? std::poisson_distribution<std::int64_t>(mean)(rng) : 0;
                }
                for (int i = 0; i < N; ++i) {
                    y[i] = xi[i];
                    for (int m = 0; m < M; ++m) y[i] += net.S(i, m) * k[m];
                }
                if (in_bounds(net, y.data())) break;
                step *= 0.5;
                ++res.halvings;
                if (step < opt.tau_min)
                    throw NumericError("Poisson leap shrank below tau_min at t = " + std::to_string(t) +
                                       ": the network is too stiff for leaping here (use ssa)");
            }
            t += step;
            for (int m = 0; m < M; ++m) {
                z[m] += static_cast<double>(k[m]);
                res.events += k[m];
            }
            xi = y;
            for (int i = 0; i < N; ++i) x[i] = static_cast<double>(xi[i]);
            emit(t, -1, z.data(), x.data());
        }
        if (res.halvings > 0) spdlog::debug("Poisson leap: {} step halvings", res.halvings);
        break;
    }
    case Method::Langevin: {
        if (!(opt.tau > 0.0)) throw ConfigError("Langevin needs a positive step size");
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::VectorXd xv(N);
        const long steps = static_cast<long>(std::ceil(opt.t_end / opt.tau - 1e-12));
        for (long s = 0; s < steps; ++s) {
            const double h = std::min(opt.tau, opt.t_end - t);
            for (int i = 0; i < N; ++i) xv[i] = x[i];
            for (int m = 0; m < M; ++m) a[m] = std::max(0.0, net.smooth<double>(m, xv.data()));
            for (int m = 0; m < M; ++m) {
                const double g = opt.zero_noise ? 0.0 : gauss(rng);
                z[m] += a[m] * h + std::sqrt(a[m] * h) * g;
            }
            for (int i = 0; i < N; ++i) {
                double v = static_cast<double>(x0[i]);
                for (int m = 0; m < M; ++m) v += net.S(i, m) * z[m];
                if (!std::isfinite(v)) throw NumericError("Langevin path became non-finite");
                x[i] = v;
            }
            t = (s + 1 == steps) ? opt.t_end : t + h;
            emit(t, -1, z.data(), x.data());
        }
        break;
    }
    }
    if (!std::isfinite(res.log_weight)) throw NumericError("non-finite importance weight");
}

// Right-continuous sampling of a piecewise-constant path on a sorted grid.
struct GridFiller {
    const std::vector<double>& grid;
    Eigen::MatrixXd& out;
    std::vector<double> prev;
    std::size_t idx = 0;

    void push(double t, const double* x)
    {
        if (!prev.empty())
            while (idx < grid.size() && grid[idx] < t) {
                for (std::size_t i = 0; i < prev.size(); ++i) out(idx, i) = prev[i];
                ++idx;
            }
        prev.assign(x, x + out.cols());
    }
    void finish()
    {
        for (; idx < grid.size(); ++idx)
            for (std::size_t i = 0; i < prev.size(); ++i) out(idx, i) = prev[i];
    }
};

void check_grid(const std::vector<double>& grid, double t_end)
{
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] < 0.0 || grid[k] > t_end * (1 + 1e-12))
            throw ConfigError("output grid lies outside the simulated horizon [0, t_end]");
        if (k > 0 && grid[k] < grid[k - 1]) throw ConfigError("output grid must be nondecreasing");
    }
}

}  // namespace

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(seed)),
                      static_cast<std::uint32_t>(splitmix64(index ^ 0x5851f42d4c957f2dull) >> 32),
                      static_cast<std::uint32_t>(splitmix64(index ^ 0x5851f42d4c957f2dull))};
    return std::mt19937_64(seq);
}

double leap_bound(const Network& net, const std::vector<double>& x, double epsilon)
{
    const int N = net.N(), M = net.M();
    std::vector<Jet> xj;
    xj.reserve(N);
    for (int i = 0; i < N; ++i) xj.push_back(Jet::variable(x[i], i, N, 1));
    std::vector<std::int64_t> xi(N);
    for (int i = 0; i < N; ++i) xi[i] = static_cast<std::int64_t>(std::llround(x[i]));
    std::vector<double> a(M);
    net.propensities(xi.data(), a.data());
    // Drift of the populations, then d alpha_m/dt = grad_x pi_m . (S a).
    std::vector<double> drift(N, 0.0);
    for (int i = 0; i < N; ++i)
        for (int m = 0; m < M; ++m) drift[i] += net.S(i, m) * a[m];
    // Each alpha_m may change by eps * alpha_m, but at least by one molecule's worth (max |d alpha_m / d x_i|),
    // so channels that are currently off still limit the leap. Both the expected change (drift) and its
    // standard deviation are held to that amount.
    double tau = std::numeric_limits<double>::infinity();
    for (int m = 0; m < M; ++m) {
        const Jet pj = net.smooth<Jet>(m, xj.data());
        double d = 0.0, grain = 0.0, var = 0.0;
        for (int i = 0; i < N; ++i) {
            d += pj.g[i] * drift[i];
            grain = std::max(grain, std::abs(pj.g[i]));
        }
        for (int k = 0; k < M; ++k) {
            double c = 0.0;
            for (int i = 0; i < N; ++i) c += pj.g[i] * net.S(i, k);
            var += c * c * a[k];
        }
        const double allowed = std::max(epsilon * a[m], grain);
        if (!(allowed > 0.0)) continue;
        if (std::abs(d) > 0.0) tau = std::min(tau, allowed / std::abs(d));
        if (var > 0.0) tau = std::min(tau, allowed * allowed / var);
    }
    return tau;
}

Trajectory simulate(const Network& net, const SimOptions& opt, std::uint64_t seed)
{
    Trajectory tr;
    tr.kind = opt.method;
    tr.seed = seed;
    tr.M = net.M();
    tr.N = net.N();
    auto rng = make_rng(seed);
    CoreResult res;
    run_core(
        net, opt, rng,
        [&](double t, int m, const double* z, const double* x) {
            tr.t.push_back(t);
            tr.reaction.push_back(m);
            tr.z.insert(tr.z.end(), z, z + tr.M);
            tr.x.insert(tr.x.end(), x, x + tr.N);
        },
        res);
    tr.absorbed = res.absorbed;
    tr.log_weight = res.log_weight;
    tr.weight = std::exp(res.log_weight);
    tr.halvings = res.halvings;
    return tr;
}

Trajectory simulate_ssa(const Network& net, double t_end, std::uint64_t seed)
{
    SimOptions o;
    o.t_end = t_end;
    return simulate(net, o, seed);
}

Trajectory simulate_poisson_leap(const Network& net, double t_end, double tau, std::uint64_t seed, double epsilon,
                                 double tau_min)
{
    SimOptions o;
    o.method = Method::Poisson;
    o.t_end = t_end;
    o.tau = tau;
    o.epsilon = epsilon;
    o.tau_min = tau_min;
    return simulate(net, o, seed);
}

Trajectory simulate_langevin(const Network& net, double t_end, double tau, std::uint64_t seed, bool zero_noise)
{
    SimOptions o;
    o.method = Method::Langevin;
    o.t_end = t_end;
    o.tau = tau;
    o.zero_noise = zero_noise;
    return simulate(net, o, seed);
}

Trajectory simulate_weighted(const Network& net, double t_end, const std::vector<double>& lambda, std::uint64_t seed)
{
    SimOptions o;
    o.method = Method::Weighted;
    o.t_end = t_end;
    o.lambda = lambda;
    return simulate(net, o, seed);
}

GridPath sample_on_grid(const Trajectory& tr, const std::vector<double>& grid)
{
    GridPath gp;
    gp.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), tr.N);
    GridFiller fill{grid, gp.x, {}};
    for (std::size_t k = 0; k < tr.size(); ++k) fill.push(tr.t[k], tr.x_at(k));
    fill.finish();
    gp.weight = tr.weight;
    gp.absorbed = tr.absorbed;
    gp.events = static_cast<long>(tr.size()) - 1;
    return gp;
}

GridPath simulate_on_grid(const Network& net, const SimOptions& opt, std::uint64_t seed, const std::vector<double>& grid)
{
    check_grid(grid, opt.t_end);
    GridPath gp;
    gp.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), net.N());
    GridFiller fill{grid, gp.x, {}};
    auto rng = make_rng(seed);
    CoreResult res;
    run_core(net, opt, rng, [&](double t, int, const double*, const double* x) { fill.push(t, x); }, res);
    fill.finish();
    gp.weight = std::exp(res.log_weight);
    gp.absorbed = res.absorbed;
    gp.events = res.events;
    return gp;
}

int worker_threads()
{
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("MRN_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return hw;
}


Ensemble run_ensemble(const Network& net, const SimOptions& opt, const std::vector<double>& grid, int L,
                      std::uint64_t seed)
{
    if (L < 1) throw ConfigError("number of trajectories must be at least 1");
    check_grid(grid, opt.t_end);
    Ensemble ens;
    ens.grid = grid;
    ens.seed = seed;
    ens.weighted = opt.method == Method::Weighted;
    ens.paths.resize(L);
    parallel_for(L, [&](int l) {
        GridPath gp;
        gp.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), net.N());
        GridFiller fill{grid, gp.x, {}};
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l));
        CoreResult res;
        run_core(net, opt, rng, [&](double t, int, const double*, const double* x) { fill.push(t, x); }, res);
        fill.finish();
        gp.weight = std::exp(res.log_weight);
        gp.absorbed = res.absorbed;
        gp.events = res.events;
        ens.paths[l] = std::move(gp);
    });
    return ens;
}

Statistics estimate_statistics(const Ensemble& ens)
{
    const int L = static_cast<int>(ens.paths.size());
    if (L < 1) throw ConfigError("empty ensemble");
    const Eigen::Index G = static_cast<Eigen::Index>(ens.grid.size());
    const Eigen::Index N = ens.paths[0].x.cols();
    Statistics st;
    st.mean = Eigen::MatrixXd::Zero(G, N);
    for (const auto& p : ens.paths) st.mean += (ens.weighted ? p.weight : 1.0) * p.x;
    st.mean /= L;
    if (L < 2 && !ens.weighted) return st;
    const double denom = ens.weighted ? L : L - 1;
    st.cov.assign(G, Eigen::MatrixXd::Zero(N, N));
    for (Eigen::Index g = 0; g < G; ++g) {
        for (const auto& p : ens.paths) {
            const Eigen::RowVectorXd d = p.x.row(g) - st.mean.row(g);
            st.cov[g] += (ens.weighted ? p.weight : 1.0) * d.transpose() * d;
        }
        st.cov[g] /= denom;
    }
    return st;
}

std::map<std::int64_t, double> empirical_pmf(const Ensemble& ens, std::size_t g, int n)
{
    std::map<std::int64_t, double> pmf;
    const double L = static_cast<double>(ens.paths.size());
    for (const auto& p : ens.paths)
        pmf[std::llround(p.x(static_cast<Eigen::Index>(g), n))] += (ens.weighted ? p.weight : 1.0) / L;
    return pmf;
}

Eigen::VectorXd empirical_pmf_vector(const Ensemble& ens, std::size_t g, int n, std::int64_t lo, std::int64_t hi)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(hi - lo + 1);
    for (const auto& [v, p] : empirical_pmf(ens, g, n))
        if (v >= lo && v <= hi) out[v - lo] += p;
    return out;
}

EventEstimate estimate_event(const Ensemble& ens, std::size_t g, const std::function<bool(const double*)>& event)
{
    const int L = static_cast<int>(ens.paths.size());
    double s = 0.0, s2 = 0.0;
    std::vector<double> row;
    for (const auto& p : ens.paths) {
        row.resize(p.x.cols());
        for (Eigen::Index i = 0; i < p.x.cols(); ++i) row[i] = p.x(static_cast<Eigen::Index>(g), i);
        const double v = event(row.data()) ? (ens.weighted ? p.weight : 1.0) : 0.0;
        s += v;
        s2 += v * v;
    }
    EventEstimate e;
    e.p = s / L;
    if (L > 1) e.stderr_ = std::sqrt(std::max(0.0, (s2 / L - e.p * e.p) / (L - 1)));
    return e;
}

AvalancheCount count_avalanches(const std::vector<double>& times, const std::vector<double>& activity, double horizon,
                                double tau_w)
{
    AvalancheCount out;
    if (times.empty()) return out;
    bool active = activity[0] > 0.0;
    bool eligible = false;  // an excursion in progress that began after a zero period
    double start = times[0];
    for (std::size_t k = 1; k < times.size() && times[k] <= horizon; ++k) {
        const bool now = activity[k] > 0.0;
        if (now == active) continue;
        if (now) {
            start = times[k];
            eligible = times[k] > times[0];
        } else if (eligible && (tau_w <= 0.0 || times[k] - start <= tau_w)) {
            ++out.count;
        }
        active = now;
        if (!now) eligible = false;
    }
    const double span = horizon - times[0];
    out.rate = span > 0.0 ? out.count / span : 0.0;
    return out;
}

AvalancheSummary avalanche_rate(const Network& net, const std::vector<int>& species, double t_end, int L,
                                std::uint64_t seed, double tau_w)
{
    if (L < 1) throw ConfigError("number of trajectories must be at least 1");
    std::vector<double> rates(L);
    std::vector<long> counts(L);
    SimOptions opt;
    opt.t_end = t_end;
    parallel_for(L, [&](int l) {
        std::vector<double> times, act;
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l));
        CoreResult res;
        run_core(
            net, opt, rng,
            [&](double t, int, const double*, const double* x) {
                double A = 0.0;
                for (int n : species) A += x[n];
                times.push_back(t);
                act.push_back(A);
            },
            res);
        const AvalancheCount c = count_avalanches(times, act, t_end, tau_w);
        rates[l] = c.rate;
        counts[l] = c.count;
    });
    AvalancheSummary s;
    double m = 0.0, m2 = 0.0;
    for (int l = 0; l < L; ++l) {
        m += rates[l];
        m2 += rates[l] * rates[l];
        s.total += counts[l];
    }
    s.mean_rate = m / L;
    if (L > 1) s.stderr_ = std::sqrt(std::max(0.0, (m2 / L - s.mean_rate * s.mean_rate) / (L - 1)));
    return s;
}

void write_trajectory_csv(const std::string& path, const Network& net, const Trajectory& tr)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "t[" << net.time_unit << "]";
    for (const auto& s : net.species) out << "," << s.name;
    out << "\n" << std::setprecision(17);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        out << tr.t[k];
        for (int i = 0; i < tr.N; ++i) out << "," << tr.x_at(k)[i];
        out << "\n";
    }
}

void write_trajectory_jsonl(const std::string& path, const Network& net, const Trajectory& tr)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << std::setprecision(17);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        out << "{\"t\":" << tr.t[k] << ",\"m\":" << tr.reaction[k];
        if (tr.reaction[k] >= 0) out << ",\"reaction\":\"" << net.reactions[tr.reaction[k]].name << "\"";
        out << ",\"x\":[";
        for (int i = 0; i < tr.N; ++i) out << (i ? "," : "") << tr.x_at(k)[i];
        out << "]}\n";
    }
}

void write_statistics_csv(const std::string& path, const Network& net, const Ensemble& ens, const Statistics& st)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    const int N = net.N();
    out << "t[" << net.time_unit << "]";
    for (int i = 0; i < N; ++i) out << ",mean_" << net.species[i].name;
    if (!st.cov.empty()) {
        for (int i = 0; i < N; ++i) out << ",var_" << net.species[i].name;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) out << ",cov_" << net.species[i].name << "_" << net.species[j].name;
    }
    out << "\n" << std::setprecision(17);
    for (std::size_t g = 0; g < ens.grid.size(); ++g) {
        out << ens.grid[g];
        for (int i = 0; i < N; ++i) out << "," << st.mean(static_cast<Eigen::Index>(g), i);
        if (!st.cov.empty()) {
            for (int i = 0; i < N; ++i) out << "," << st.cov[g](i, i);
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) out << "," << st.cov[g](i, j);
        }
        out << "\n";
    }
}

}  // namespace mrn
