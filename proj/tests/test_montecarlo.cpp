#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "mrn/catalog.hpp"
#include "mrn/errors.hpp"
#include "mrn/montecarlo.hpp"
#include "mrn/ode.hpp"
#include "mrn/solver.hpp"
#include "test_util.hpp"

using namespace mrn;
using namespace testing_util;

namespace {

// Joint empirical pmf at grid index g, indexed like `space`.
Eigen::VectorXd joint_pmf(const Ensemble& ens, std::size_t g, const StateSpace& space)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(space.size());
    State x(space.dim());
    for (const auto& path : ens.paths) {
        for (int n = 0; n < space.dim(); ++n) x[n] = std::llround(path.x(g, n));
        const std::int64_t k = space.find(x.data());
        if (k >= 0) p[k] += path.weight;
    }
    return p / static_cast<double>(ens.paths.size());
}

Eigen::VectorXd ksa_at(const Network& net, const StateSpace& space, double t)
{
    return propagate_ksa(build_generator(net, space).P, delta_at(space, net.x0()), t, {40, 1e-12});
}

}  // namespace

TEST(MonteCarlo, IdenticalSeedsAreBitReproducible)
{
    const Network net = opinion_preset("totalitarian");
    for (Method m : {Method::SSA, Method::Poisson, Method::Langevin}) {
        SimOptions o;
        o.method = m;
        o.t_end = 2.0;
        o.tau = m == Method::SSA ? 0.0 : 0.01;
        const Trajectory a = simulate(net, o, 42), b = simulate(net, o, 42), c = simulate(net, o, 43);
        EXPECT_EQ(a.t, b.t);
        EXPECT_EQ(a.x, b.x);
        EXPECT_EQ(a.z, b.z);
        EXPECT_NE(a.x, c.x);
    }
}

TEST(MonteCarlo, EnsembleIndependentOfThreadCount)
{
    const Network net = sir_model();
    SimOptions o;
    o.t_end = 3.0;
    const auto grid = uniform_grid(3.0, 7);
    setenv("MRN_THREADS", "1", 1);
    const Ensemble a = run_ensemble(net, o, grid, 200, 9);
    setenv("MRN_THREADS", "4", 1);
    const Ensemble b = run_ensemble(net, o, grid, 200, 9);
    unsetenv("MRN_THREADS");
    for (int l = 0; l < 200; ++l) EXPECT_EQ(a.paths[l].x, b.paths[l].x);
    // Trajectory 0 of an ensemble is the single run with the same seed.
    EXPECT_EQ(sample_on_grid(simulate_ssa(net, 3.0, 9), grid).x, a.paths[0].x);
    EXPECT_THROW(run_ensemble(net, o, grid, 0, 9), ConfigError);
}

TEST(MonteCarlo, SsaMatchesKsaOnSmallNetworks)
{
    const Network dimer = make_network({species("A", 0, 12, 12), species("B", 0, 6, 0)},
                                       {mass_action("d", {{"A", 2}}, {{"B", 1}}, 0.3),
                                        mass_action("u", {{"B", 1}}, {{"A", 2}}, 1.1)});
    const Network nets[] = {birth_death_model(5, 1, 40), sir_model(0.3, 1.0, 5, 2, 0), dimer, two_state(1.0, 2.0, 20)};
    for (const Network& net : nets) {
        const StateSpace sp = enumerate_state_space(net);
        ASSERT_LE(sp.size(), 50) << net.name;
        SimOptions o;
        o.t_end = 1.5;
        const std::vector<double> grid{0.0, 0.5, 1.5};
        const Ensemble ens = run_ensemble(net, o, grid, 100000, 2024);
        for (std::size_t g = 1; g < grid.size(); ++g)
            EXPECT_LT(tv(joint_pmf(ens, g, sp), ksa_at(net, sp, grid[g])), 0.02) << net.name << " t=" << grid[g];
    }
}

TEST(MonteCarlo, SirFinalSizeMatchesAbsorptionLaw)
{
    const Network net = sir_model(0.3, 1.0, 5, 2, 0);
    const StateSpace sp = enumerate_state_space(net);
    SimOptions o;
    o.t_end = 60.0;
    const Ensemble ens = run_ensemble(net, o, {0.0, 60.0}, 50000, 5);
    const Eigen::VectorXd p = ksa_at(net, sp, 60.0);
    EXPECT_LT(tv(joint_pmf(ens, 1, sp), p), 0.02);
    for (const auto& path : ens.paths) {
        EXPECT_EQ(path.x(1, 1), 0.0);
        EXPECT_EQ(path.x(1, 0) + path.x(1, 2), 7.0);
    }
}

TEST(MonteCarlo, WeightedUnitScalingGivesUnitWeights)
{
    const Network net = birth_death_model(5, 1, 40);
    SimOptions o;
    o.method = Method::Weighted;
    o.t_end = 2.0;
    o.lambda = {1.0, 1.0};
    const Ensemble ens = run_ensemble(net, o, {0.0, 2.0}, 500, 3);
    for (const auto& p : ens.paths) EXPECT_EQ(p.weight, 1.0);
    // Unit scaling is the SSA itself.
    SimOptions s;
    s.t_end = 2.0;
    const Ensemble ref = run_ensemble(net, s, {0.0, 2.0}, 500, 3);
    for (int l = 0; l < 500; ++l) EXPECT_EQ(ens.paths[l].x, ref.paths[l].x);
}

TEST(MonteCarlo, WeightedEstimatesAreUnbiased)
{
    const Network net = birth_death_model(5, 1, 40);
    const StateSpace sp = enumerate_state_space(net);
    const Eigen::VectorXd p = ksa_at(net, sp, 2.0);
    double exact = 0.0;
    for (std::int64_t k = 0; k < sp.size(); ++k)
        if (sp.state(k)[0] >= 11) exact += p[k];
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 3; ++trial) {
        SimOptions o;
        o.method = Method::Weighted;
        o.t_end = 2.0;
        o.lambda = {std::uniform_real_distribution<>(1.2, 2.5)(rng), std::uniform_real_distribution<>(0.5, 1.0)(rng)};
        const Ensemble ens = run_ensemble(net, o, {0.0, 2.0}, 40000, 100 + trial);
        const EventEstimate e = estimate_event(ens, 1, [](const double* x) { return x[0] >= 11; });
        EXPECT_NEAR(e.p, exact, 4.5 * e.stderr_ + 1e-6) << "lambda " << o.lambda[0] << " " << o.lambda[1];
        EXPECT_GT(e.p, 0.0);
    }
    SimOptions bad;
    bad.method = Method::Weighted;
    bad.lambda = {1.0};
    EXPECT_THROW(simulate(net, bad, 1), ConfigError);
}

TEST(MonteCarlo, PoissonLeapRespectsBounds)
{
    for (const Network& net : {sir_model(), birth_death_model(5, 1, 40), builtin_model("neural:synchronous")}) {
        for (double tau : {0.05, 0.5, 0.0}) {
            SimOptions o;
            o.method = Method::Poisson;
            o.t_end = 5.0;
            o.tau = tau;
            const Ensemble ens = run_ensemble(net, o, uniform_grid(5.0, 11), 300, 8);
            for (const auto& p : ens.paths)
                for (Eigen::Index g = 0; g < p.x.rows(); ++g)
                    for (int n = 0; n < net.N(); ++n) {
                        EXPECT_GE(p.x(g, n), net.species[n].min);
                        EXPECT_LE(p.x(g, n), net.species[n].max);
                    }
        }
    }
}

TEST(MonteCarlo, PoissonLeapWithLeapConditionTracksMean)
{
    const Network net = birth_death_model(5, 1, 40);
    const StateSpace sp = enumerate_state_space(net);
    const Eigen::VectorXd p = ksa_at(net, sp, 3.0);
    double mean = 0;
    for (std::int64_t k = 0; k < sp.size(); ++k) mean += p[k] * sp.state(k)[0];
    SimOptions o;
    o.method = Method::Poisson;
    o.t_end = 3.0;
    const Statistics st = estimate_statistics(run_ensemble(net, o, {0.0, 3.0}, 20000, 4));
    EXPECT_NEAR(st.mean(1, 0), mean, 0.05 * mean);
    EXPECT_GT(leap_bound(net, {0.0}, 0.03), 0.0);
}

TEST(MonteCarlo, LangevinWithoutNoiseFollowsRateEquation)
{
    // 0 -> X (5), X -> 0 (1): x(t) = 5 (1 - exp(-t)) away from the upper bound.
    const Network net = birth_death_model(5, 1, 40);
    const double tau = 1e-3;
    const Trajectory tr = simulate_langevin(net, 4.0, tau, 1, true);
    const GridPath gp = sample_on_grid(tr, {1.0, 2.0, 4.0});
    for (int g = 0; g < 3; ++g) {
        const double t = std::vector<double>{1.0, 2.0, 4.0}[g];
        EXPECT_NEAR(gp.x(g, 0), 5.0 * (1.0 - std::exp(-t)), 0.01);
    }
    const Trajectory a = simulate_langevin(net, 1.0, 0.01, 5, true), b = simulate_langevin(net, 1.0, 0.01, 6, true);
    EXPECT_EQ(a.x, b.x);
}

TEST(MonteCarlo, StatisticsAndPmfHelpers)
{
    const Network net = birth_death_model(5, 1, 40);
    SimOptions o;
    o.t_end = 1.0;
    const Ensemble ens = run_ensemble(net, o, {0.0, 1.0}, 1000, 1);
    const Statistics st = estimate_statistics(ens);
    EXPECT_EQ(st.mean(0, 0), 0.0);
    double m = 0, v = 0;
    for (const auto& p : ens.paths) m += p.x(1, 0);
    m /= 1000;
    for (const auto& p : ens.paths) v += (p.x(1, 0) - m) * (p.x(1, 0) - m);
    v /= 999;
    EXPECT_NEAR(st.mean(1, 0), m, 1e-12);
    EXPECT_NEAR(st.cov[1](0, 0), v, 1e-9);
    double total = 0;
    for (const auto& [x, q] : empirical_pmf(ens, 1, 0)) total += q;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(empirical_pmf_vector(ens, 1, 0, 0, 40).sum(), 1.0, 1e-12);
}

TEST(Avalanche, CountsExcursionsFromZero)
{
    const std::vector<double> t{0, 1, 2, 3, 4, 5, 6};
    const std::vector<double> a{0, 1, 2, 0, 0, 3, 0};
    EXPECT_EQ(count_avalanches(t, a, 7.0).count, 2);
    EXPECT_DOUBLE_EQ(count_avalanches(t, a, 7.0).rate, 2.0 / 7.0);
    // An excursion still running at the horizon is not counted.
    EXPECT_EQ(count_avalanches({0, 1, 2}, {0, 1, 1}, 3.0).count, 0);
    // Activity that is positive from the start has no preceding zero period.
    EXPECT_EQ(count_avalanches({0, 1, 2}, {1, 0, 0}, 3.0).count, 0);
    // An excursion longer than tau_w is not counted.
    EXPECT_EQ(count_avalanches(t, a, 7.0, 1.5).count, 1);
}

TEST(Avalanche, InvariantUnderGridRefinement)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> t{0.0}, a{0.0};
        for (int k = 1; k < 40; ++k) {
            t.push_back(t.back() + std::uniform_real_distribution<>(0.1, 1.0)(rng));
            a.push_back(std::uniform_int_distribution<>(0, 3)(rng) == 0 ? 0.0 : std::uniform_int_distribution<>(1, 5)(rng));
        }
        const double H = t.back() + 1.0;
        // Split every interval in two, repeating the held value.
        std::vector<double> t2, a2;
        for (std::size_t k = 0; k < t.size(); ++k) {
            t2.push_back(t[k]);
            a2.push_back(a[k]);
            const double next = k + 1 < t.size() ? t[k + 1] : H;
            t2.push_back(0.5 * (t[k] + next));
            a2.push_back(a[k]);
        }
        EXPECT_EQ(count_avalanches(t, a, H).count, count_avalanches(t2, a2, H).count);
    }
}
