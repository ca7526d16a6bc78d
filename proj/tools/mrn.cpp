#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mrn/catalog.hpp"
#include "mrn/classify.hpp"
#include "mrn/errors.hpp"
#include "mrn/lna.hpp"
#include "mrn/maxent.hpp"
#include "mrn/model_io.hpp"
#include "mrn/moments.hpp"
#include "mrn/montecarlo.hpp"
#include "mrn/multiscale.hpp"
#include "mrn/ode.hpp"
#include "mrn/solver.hpp"
#include "mrn/statespace.hpp"
#include "mrn/thermo.hpp"

#ifndef MRN_VERSION
#define MRN_VERSION "0.0.0"
#endif

using json = nlohmann::json;
using namespace mrn;

namespace {

struct Common {
    std::string model = "birth-death";
    std::string out;
    double t_end = 10.0;
    int points = 101;
    std::uint64_t seed = 1;
    std::string truncation = "strict";
    std::int64_t max_states = 2'000'000;
};

Network resolve_model(const std::string& ref)
{
    if (std::filesystem::exists(ref)) return load_model_file(ref);
    return builtin_model(ref);
}

std::string preset_of(const std::string& ref)
{
    const auto c = ref.find(':');
    return c == std::string::npos ? "" : ref.substr(c + 1);
}

json base_summary(const std::string& command, const Common& c, const Network& net)
{
    return {{"command", command}, {"model", net.name}, {"model_ref", c.model}, {"preset", preset_of(c.model)},
            {"time_unit", net.time_unit}, {"version", MRN_VERSION}};
}

Truncation truncation_from(const std::string& s)
{
    if (s == "strict") return Truncation::Strict;
    if (s == "absorbing") return Truncation::Absorbing;
    throw ConfigError("unknown truncation '" + s + "' (strict|absorbing)");
}

std::vector<double> grid_of(const Common& c)
{
    if (!(c.t_end > 0.0)) throw ConfigError("--t-end must be positive");
    if (c.points < 2) throw ConfigError("--points must be at least 2");
    return uniform_grid(c.t_end, c.points);
}

Eigen::VectorXd point_mass(const Network& net, const StateSpace& space, std::int64_t dim)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim);
    const State x0 = net.x0();
    const std::int64_t k = space.find(x0.data());
    if (k < 0) throw ConfigError("initial state is not in the state space");
    p[k] = 1.0;
    return p;
}

int species_of(const Network& net, const std::string& name)
{
    int n = net.species_index(name);
    if (n < 0) {
        try {
            std::size_t used = 0;
            n = std::stoi(name, &used);
            if (used != name.size()) n = -1;
        } catch (...) {
            n = -1;
        }
    }
    if (n < 0 || n >= net.N()) throw ConfigError("unknown species '" + name + "'");
    return n;
}

// Reaction list "2,3" (1-based) or reaction names.
std::vector<int> reactions_of(const Network& net, const std::string& list)
{
    std::vector<int> out;
    if (list.empty()) return out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int m = -1;
        for (int r = 0; r < net.M(); ++r)
            if (net.reactions[r].name == item) m = r;
        if (m < 0) {
            try {
                std::size_t used = 0;
                m = std::stoi(item, &used) - 1;
                if (used != item.size()) m = -1;
            } catch (...) {
                m = -1;
            }
        }
        if (m < 0 || m >= net.M()) throw ConfigError("unknown reaction '" + item + "' (1-based index or name)");
        out.push_back(m);
    }
    return out;
}

std::vector<double> lambda_of(const Network& net, const std::string& spec)
{
    std::vector<double> lambda(net.M(), 1.0);
    if (spec.empty()) return lambda;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--lambda expects m=value pairs");
        const int m = reactions_of(net, item.substr(0, eq)).front();
        try {
            lambda[m] = std::stod(item.substr(eq + 1));
        } catch (...) {
            throw ConfigError("bad --lambda value '" + item + "'");
        }
    }
    return lambda;
}

void write_pmf_csv(const std::string& path, std::int64_t lo, const Eigen::VectorXd& p)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(17) << "x,p\n";
    for (Eigen::Index k = 0; k < p.size(); ++k) out << lo + k << ',' << p[k] << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void add_common(CLI::App* sub, Common& c, bool seed = false)
{
    sub->add_option("--model", c.model, "built-in id[:preset] or model JSON file")->capture_default_str();
    sub->add_option("--out", c.out, "output file");
    sub->add_option("--t-end", c.t_end, "time horizon")->capture_default_str();
    sub->add_option("--points", c.points, "output grid points")->capture_default_str();
    if (seed) sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_pattern("[%l] %v");
    spdlog::set_default_logger(spdlog::stderr_color_mt("mrn"));
    CLI::App app{"Markovian reaction network toolkit"};
    app.set_version_flag("--version", MRN_VERSION);
    app.require_subcommand(1);

    Common c;
    json summary;
    std::function<void()> action;
    const auto t_start = std::chrono::steady_clock::now();

    // solve-ksa
    int krylov = 40;
    double ksa_tol = 1e-7;
    std::string series_out;
    bool stationary = false;
    auto* ksa = app.add_subcommand("solve-ksa", "propagate the master equation by Krylov subspace approximation");
    add_common(ksa, c);
    ksa->add_option("--krylov", krylov)->capture_default_str();
    ksa->add_option("--tol", ksa_tol)->capture_default_str();
    ksa->add_option("--truncation", c.truncation)->capture_default_str();
    ksa->add_option("--max-states", c.max_states)->capture_default_str();
    ksa->add_option("--series", series_out, "JSONL time series output");
    ksa->add_flag("--stationary", stationary, "also solve for the stationary law");
    ksa->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const StateSpace space = enumerate_state_space(net, {Mode::Population, -1, c.max_states});
            const Generator G = build_generator(net, space, truncation_from(c.truncation));
            const auto grid = grid_of(c);
            KsaOptions opt{krylov, ksa_tol};
            const auto series = propagate_ksa_grid(G.P, point_mass(net, space, G.P.rows()), grid, opt);
            Eigen::VectorXd p = series.back().head(space.size());
            summary = base_summary("solve-ksa", c, net);
            summary["states"] = space.size();
            summary["t_end"] = c.t_end;
            summary["max_abs_column_sum"] = max_abs_column_sum(G.P);
            summary["lost_mass"] = G.sink >= 0 ? series.back()[G.sink] : 0.0;
            if (stationary) {
                if (G.sink >= 0) throw ConfigError("--stationary needs strict truncation");
                const Eigen::VectorXd pbar = stationary_distribution(G.P);
                summary["kl_to_stationary"] = kl_divergence(p, pbar);
                summary["tv_to_stationary"] = total_variation(p, pbar);
            }
            if (!c.out.empty()) write_distribution_csv(c.out, net, space, p);
            if (!series_out.empty()) write_series_jsonl(series_out, grid, series);
        };
    });

    // solve-ie
    std::int64_t horizon = 40;
    double ie_tau = 0.0;
    auto* ie = app.add_subcommand("solve-ie", "implicit Euler on the degree-of-advancement master equation");
    add_common(ie, c);
    ie->add_option("--horizon", horizon, "maximum total number of firings")->capture_default_str();
    ie->add_option("--tau", ie_tau, "step size (0 = automatic)")->capture_default_str();
    ie->add_option("--max-states", c.max_states)->capture_default_str();
    ie->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const StateSpace space = enumerate_state_space(net, {Mode::DA, horizon, c.max_states});
            const Generator G = build_generator(net, space, Truncation::Absorbing);
            const double tau = ie_tau > 0.0 ? ie_tau : default_ie_step(G.P);
            Eigen::VectorXd q = Eigen::VectorXd::Zero(G.P.rows());
            q[0] = 1.0;
            q = propagate_ie_to(G.P, q, c.t_end, tau);
            const Marginalized marg = marginalize_da_distribution(net, space, q);
            summary = base_summary("solve-ie", c, net);
            summary["da_states"] = space.size();
            summary["population_states"] = marg.space.size();
            summary["tau"] = tau;
            summary["t_end"] = c.t_end;
            summary["lost_mass"] = marg.lost_mass;
            if (!c.out.empty()) write_distribution_csv(c.out, net, marg.space, marg.p);
        };
    });

    // simulate
    std::string method = "ssa", lambda_spec, trajectory_out;
    int trajectories = 1000;
    double tau = 0.0, epsilon = 0.03;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo sampling of trajectories");
    add_common(sim, c, true);
    sim->add_option("--method", method, "ssa|poisson|langevin|weighted")->capture_default_str();
    sim->add_option("--trajectories", trajectories)->capture_default_str();
    sim->add_option("--tau", tau, "leap / step size (poisson: 0 = leap condition)")->capture_default_str();
    sim->add_option("--epsilon", epsilon, "leap-condition parameter")->capture_default_str();
    sim->add_option("--lambda", lambda_spec, "weighted sampling scalings m=value,... (1-based m)");
    sim->add_option("--trajectory-out", trajectory_out, "first trajectory as .csv or .jsonl");
    sim->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            if (trajectories < 1) throw ConfigError("--trajectories must be at least 1");
            SimOptions opt;
            opt.method = method_from_name(method);
            opt.t_end = c.t_end;
            opt.tau = tau;
            opt.epsilon = epsilon;
            if (opt.method == Method::Weighted) opt.lambda = lambda_of(net, lambda_spec);
            const auto grid = grid_of(c);
            const Ensemble ens = run_ensemble(net, opt, grid, trajectories, c.seed);
            const Statistics st = estimate_statistics(ens);
            long events = 0, absorbed = 0;
            for (const auto& p : ens.paths) {
                events += p.events;
                absorbed += p.absorbed;
            }
            summary = base_summary("simulate", c, net);
            summary["method"] = method;
            summary["seed"] = c.seed;
            summary["trajectories"] = trajectories;
            summary["events"] = events;
            summary["absorbed"] = absorbed;
            std::vector<double> final_mean(net.N());
            for (int i = 0; i < net.N(); ++i) final_mean[i] = st.mean(st.mean.rows() - 1, i);
            summary["final_mean"] = final_mean;
            if (!c.out.empty()) write_statistics_csv(c.out, net, ens, st);
            if (!trajectory_out.empty()) {
                const Trajectory tr = simulate(net, opt, c.seed);
                if (trajectory_out.ends_with(".jsonl"))
                    write_trajectory_jsonl(trajectory_out, net, tr);
                else
                    write_trajectory_csv(trajectory_out, net, tr);
            }
        };
    });

    // moments
    std::string closure = "normal", jensen = "off";
    bool full_cov = false;
    auto* mom = app.add_subcommand("moments", "moment-closure approximation of means and covariances");
    add_common(mom, c);
    mom->add_option("--closure", closure, "normal|lognormal")->capture_default_str();
    mom->add_option("--jensen", jensen, "on|off")->capture_default_str();
    mom->add_flag("--full-covariance", full_cov);
    mom->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            if (jensen != "on" && jensen != "off") throw ConfigError("--jensen expects on|off");
            MomentOptions opt;
            opt.closure = closure_from_name(closure);
            opt.jensen = jensen == "on";
            const MomentSeries s = integrate_moments(net, grid_of(c), opt);
            summary = base_summary("moments", c, net);
            summary["closure"] = closure;
            summary["jensen"] = opt.jensen;
            std::vector<double> mean(net.N()), var(net.N());
            for (int i = 0; i < net.N(); ++i) {
                mean[i] = s.mu_x.back()[i];
                var[i] = s.C_x.back()(i, i);
            }
            summary["final_mean"] = mean;
            summary["final_variance"] = var;
            summary["negative_mean_warned"] = s.negative_mean_warned;
            if (!c.out.empty()) write_moments_csv(c.out, net, s, full_cov);
        };
    });

    // lna
    double omega = 1.0;
    auto* lna = app.add_subcommand("lna", "linear noise approximation");
    add_common(lna, c);
    lna->add_option("--omega", omega, "system size")->capture_default_str();
    lna->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const LnaSeries s = integrate_lna_covariance(net, omega, grid_of(c));
            const LnaValidity v = check_lna_validity(net, s);
            summary = base_summary("lna", c, net);
            summary["omega"] = omega;
            summary["valid"] = v.valid();
            summary["unstable"] = v.unstable;
            summary["max_re_lambda"] = v.max_re_lambda;
            summary["negative_mass"] = v.max_negative_mass;
            std::vector<double> mean(net.N());
            for (int i = 0; i < net.N(); ++i) mean[i] = s.mean_x.back()[i];
            summary["final_mean"] = mean;
            if (!c.out.empty()) write_lna_csv(c.out, net, s);
        };
    });

    // maxent
    int order = 2;
    std::string species;
    auto* me = app.add_subcommand("maxent", "maximum-entropy marginal from moments of the master-equation solution");
    add_common(me, c);
    me->add_option("--order", order, "number of moment constraints K")->capture_default_str();
    me->add_option("--species", species, "species name or 0-based index")->required();
    me->add_flag("--stationary", stationary, "use the stationary law instead of p(t_end)");
    me->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const int n = species_of(net, species);
            const StateSpace space = enumerate_state_space(net, {Mode::Population, -1, c.max_states});
            const Generator G = build_generator(net, space, Truncation::Strict);
            Eigen::VectorXd p = stationary ? stationary_distribution(G.P)
                                           : propagate_ksa(G.P, point_mass(net, space, G.P.rows()), c.t_end);
            const Eigen::VectorXd marg = marginal(space, p, n);
            const std::int64_t lo = net.species[n].min, hi = net.species[n].max;
            const MaxEntModel fit = fit_maxent_distribution(raw_moments(marg, lo, order), lo, hi);
            summary = base_summary("maxent", c, net);
            summary["species"] = net.species[n].name;
            summary["order"] = order;
            summary["iterations"] = fit.iterations;
            summary["max_rel_moment_error"] = fit.max_rel_error;
            summary["entropy"] = fit.entropy();
            summary["tv_to_source"] = total_variation(fit.pmf, marg);
            if (!c.out.empty()) write_pmf_csv(c.out, lo, fit.pmf);
        };
    });

    // multiscale
    std::string fast_list, ms_closure = "dimer";
    bool compare = false;
    int ms_traj = 1000;
    auto* ms = app.add_subcommand("multiscale", "reduced SSA over slow reactions with a fast-subsystem closure");
    add_common(ms, c, true);
    ms->add_option("--fast", fast_list, "fast reactions, 1-based indices or names")->required();
    ms->add_option("--closure", ms_closure, "dimer|stationary|ssa-nested")->capture_default_str();
    ms->add_option("--trajectories", ms_traj)->capture_default_str();
    ms->add_flag("--compare", compare, "also run the full SSA and report speedup and mean errors");
    ms->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            if (ms_traj < 1) throw ConfigError("--trajectories must be at least 1");
            const Partition part = reduce_network(net, reactions_of(net, fast_list), ms_closure);
            const auto grid = grid_of(c);
            auto t0 = std::chrono::steady_clock::now();
            const Ensemble red = run_reduced_ensemble(part, c.t_end, grid, ms_traj, c.seed);
            const double t_red = seconds_since(t0);
            const Statistics sr = estimate_statistics(red);
            summary = base_summary("multiscale", c, net);
            summary["closure"] = ms_closure;
            summary["seed"] = c.seed;
            summary["trajectories"] = ms_traj;
            std::vector<int> fast1;
            for (int m : part.fast()) fast1.push_back(m + 1);
            summary["fast"] = fast1;
            summary["reduced_seconds"] = t_red;
            if (compare) {
                SimOptions opt;
                opt.t_end = c.t_end;
                t0 = std::chrono::steady_clock::now();
                const Ensemble full = run_ensemble(net, opt, grid, ms_traj, c.seed);
                const double t_full = seconds_since(t0);
                const Statistics sf = estimate_statistics(full);
                // The reduced model starts at the fast quasi-equilibrium, so t = 0 is not compared.
                std::vector<double> rel(net.N(), 0.0);
                for (int i = 0; i < net.N(); ++i)
                    for (Eigen::Index g = 1; g < sf.mean.rows(); ++g)
                        rel[i] = std::max(rel[i], std::abs(sr.mean(g, i) - sf.mean(g, i)) /
                                                      std::max(std::abs(sf.mean(g, i)), 0.5));
                summary["full_seconds"] = t_full;
                summary["speedup"] = t_full / std::max(t_red, 1e-9);
                summary["max_rel_mean_error"] = rel;
            }
            if (!c.out.empty()) write_statistics_csv(c.out, net, red, sr);
        };
    });

    // thermo
    std::string cycles_out;
    auto* th = app.add_subcommand("thermo", "energy, entropy, free energy and entropy-production time series");
    add_common(th, c);
    th->add_option("--omega", omega, "size parameter")->capture_default_str();
    th->add_option("--cycles", cycles_out, "fundamental-cycle report JSON");
    th->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const StateSpace space = enumerate_state_space(net, {Mode::Population, -1, c.max_states});
            const Generator G = build_generator(net, space, Truncation::Strict);
            const auto grid = grid_of(c);
            const auto series = propagate_ksa_grid(G.P, point_mass(net, space, G.P.rows()), grid);
            const Eigen::VectorXd pbar = stationary_distribution(G.P);
            const ThermoReport r = thermo_timeseries(net, space, grid, series, pbar, omega);
            const ThermoRates ss = thermo_rates(r.edges, pbar, pbar);
            summary = base_summary("thermo", c, net);
            summary["states"] = space.size();
            summary["omega"] = omega;
            summary["sigma_bar"] = ss.sigma;
            summary["h_bar"] = ss.h;
            summary["f_bar"] = ss.f;
            summary["entropy_bar"] = shannon_entropy(pbar);
            summary["final"] = {{"U", r.U.back()}, {"S", r.S.back()}, {"F", r.F.back()},
                                {"sigma", r.sigma.back()}, {"h", r.h.back()}, {"f", r.f.back()}};
            summary["balance_ok"] = r.balance_ok;
            summary["eps_sensitive"] = r.eps_sensitive;
            if (!c.out.empty()) write_thermo_csv(c.out, r);
            if (!cycles_out.empty()) write_cycle_report_json(cycles_out, fundamental_cycle_analysis(net, space));
        };
    });

    // landscape
    auto* la = app.add_subcommand("landscape", "stationary energy landscape E(x) and V(x; omega)");
    add_common(la, c);
    la->add_option("--omega", omega, "size parameter")->capture_default_str();
    la->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const StateSpace space = enumerate_state_space(net, {Mode::Population, -1, c.max_states});
            const Generator G = build_generator(net, space, Truncation::Strict);
            const Eigen::VectorXd pbar = stationary_distribution(G.P);
            const Landscape l = state_energy_landscape(pbar, omega);
            summary = base_summary("landscape", c, net);
            summary["states"] = space.size();
            summary["omega"] = omega;
            summary["ground_state"] = space.state_vec(l.ground);
            summary["gibbs_roundtrip_error"] = (gibbs_distribution(l.E, omega) - pbar).cwiseAbs().maxCoeff();
            if (!c.out.empty()) write_landscape_csv(c.out, net, space, l);
        };
    });

    // classify
    auto* cl = app.add_subcommand("classify", "transient states, persistent classes and absorption probabilities");
    add_common(cl, c);
    cl->callback([&] {
        action = [&] {
            const Network net = resolve_model(c.model);
            const StateSpace space = enumerate_state_space(net, {Mode::Population, -1, c.max_states});
            const Generator G = build_generator(net, space, Truncation::Strict);
            const Classification k = classify_communicating_structure(G.P);
            summary = base_summary("classify", c, net);
            summary["states"] = space.size();
            summary["persistent_classes"] = k.classes.size();
            summary["transient_states"] = k.transient.size();
            summary["irreducible"] = k.irreducible();
            if (!c.out.empty()) {
                std::ofstream out(c.out);
                if (!out) throw ConfigError("cannot write " + c.out);
                out << std::setprecision(17);
                for (const auto& s : net.species) out << s.name << ',';
                for (std::size_t j = 0; j < k.classes.size(); ++j) out << "class" << j << (j + 1 < k.classes.size() ? "," : "");
                out << '\n';
                for (std::size_t r = 0; r < k.transient.size(); ++r) {
                    const std::int64_t* x = space.state(k.transient[r]);
                    for (int i = 0; i < net.N(); ++i) out << x[i] << ',';
                    for (Eigen::Index j = 0; j < k.mu.cols(); ++j) out << k.mu(r, j) << (j + 1 < k.mu.cols() ? "," : "");
                    out << '\n';
                }
            }
        };
    });

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw ConfigError(e.what());
        }
        if (!action) throw ConfigError("no subcommand given");
        action();
        summary["elapsed_s"] = seconds_since(t_start);
        std::cout << summary.dump() << std::endl;
        return 0;
    } catch (const Error& e) {
        const char* kind = e.exit_code() == 2 ? "config" : e.exit_code() == 3 ? "numeric" : e.exit_code() == 4 ? "infeasible" : "error";
        std::cout << json{{"error", {{"type", kind}, {"message", e.what()}}}, {"exit_code", e.exit_code()}}.dump() << std::endl;
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cout << json{{"error", {{"type", "internal"}, {"message", e.what()}}}, {"exit_code", 1}}.dump() << std::endl;
        return 1;
    }
}
