#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mrn/catalog.hpp"
#include "mrn/classify.hpp"
#include "mrn/errors.hpp"
#include "mrn/solver.hpp"
#include "mrn/statespace.hpp"
#include "test_util.hpp"

using namespace mrn;
using namespace testing_util;

namespace {

// Independent reachability oracle: depth-first search over exact propensities.
std::set<State> reachable(const Network& net)
{
    std::set<State> seen{net.x0()};
    std::vector<State> stack{net.x0()};
    while (!stack.empty()) {
        const State x = stack.back();
        stack.pop_back();
        for (int m = 0; m < net.M(); ++m) {
            if (!(net.propensity(m, x.data()) > 0)) continue;
            State y = x;
            for (int n = 0; n < net.N(); ++n) y[n] += net.S(n, m);
            if (!in_bounds(net, y.data())) continue;
            if (seen.insert(y).second) stack.push_back(y);
        }
    }
    return seen;
}

}  // namespace

TEST(StateSpace, CountsMatchReachabilityOracle)
{
    EXPECT_EQ(enumerate_state_space(opinion_preset("liberal")).size(), 81 * 81);

    const Network ab = make_network({species("A", 0, 2, 2), species("B", 0, 2, 0)},
                                    {mass_action("f", {{"A", 1}}, {{"B", 1}}, 1.0)});
    EXPECT_EQ(enumerate_state_space(ab).size(), 3);

    const Network sir = sir_model(0.3, 1.0, 3, 1, 0);
    const auto oracle = reachable(sir);
    EXPECT_EQ(oracle.size(), 14u);
    const StateSpace sp = enumerate_state_space(sir);
    ASSERT_EQ(sp.size(), static_cast<std::int64_t>(oracle.size()));
    for (const State& x : oracle) EXPECT_GE(sp.find(x.data()), 0);

    for (const char* ref : {"autocatalator", "sir", "neural:asynchronous"}) {
        const Network net = builtin_model(ref);
        EXPECT_EQ(enumerate_state_space(net).size(), static_cast<std::int64_t>(reachable(net).size())) << ref;
    }
}

TEST(StateSpace, LexicographicOrderAndIndexRoundTrip)
{
    const StateSpace sp = enumerate_state_space(sir_model());
    for (std::int64_t k = 0; k + 1 < sp.size(); ++k)
        EXPECT_TRUE(std::lexicographical_compare(sp.state(k), sp.state(k) + 3, sp.state(k + 1), sp.state(k + 1) + 3));
    for (std::int64_t k = 0; k < sp.size(); ++k) EXPECT_EQ(sp.find(sp.state(k)), k);
    const std::int64_t outside[3] = {99, 0, 0};
    EXPECT_EQ(sp.find(outside), -1);
}

TEST(StateSpace, CapAndHorizonErrors)
{
    EXPECT_THROW(enumerate_state_space(opinion_preset("liberal"), {Mode::Population, -1, 100}), ConfigError);
    EXPECT_THROW(enumerate_state_space(sir_model(), {Mode::DA, -1}), ConfigError);
}

TEST(Generator, ColumnSumsVanish)
{
    for (const char* ref : {"opinion:totalitarian", "neural:synchronous", "autocatalator", "sir", "birth-death"}) {
        const Network net = builtin_model(ref);
        const StateSpace sp = enumerate_state_space(net);
        const Generator g = build_generator(net, sp, Truncation::Absorbing);
        EXPECT_LT(max_abs_column_sum(g.P), 1e-12) << ref;
        for (int j = 0; j < g.P.outerSize(); ++j)
            for (Eigen::SparseMatrix<double>::InnerIterator it(g.P, j); it; ++it)
                if (it.row() != j) EXPECT_GE(it.value(), 0.0);
    }
    const Network net = sir_model();
    const Generator da = build_generator(net, enumerate_state_space(net, {Mode::DA, 12}));
    EXPECT_LT(max_abs_column_sum(da.P), 1e-12);
    EXPECT_TRUE(is_lower_triangular(da.P));
    EXPECT_GE(da.sink, 0);
}

TEST(Generator, TwoStateMatrix)
{
    const Network net = two_state(2.0, 3.0);
    const StateSpace sp = enumerate_state_space(net);
    const Eigen::MatrixXd P = dense_generator(net, sp);
    const std::int64_t a = sp.find(State{1, 0}.data()), b = sp.find(State{0, 1}.data());
    EXPECT_DOUBLE_EQ(P(a, a), -2.0);
    EXPECT_DOUBLE_EQ(P(b, a), 2.0);
    EXPECT_DOUBLE_EQ(P(b, b), -3.0);
    EXPECT_DOUBLE_EQ(P(a, b), 3.0);
}

TEST(Generator, StrictTruncationRefusesOpenSpace)
{
    const Network net = make_network({species("X", 0, 5, 0)}, {mass_action("b", nullptr, {{"X", 1}}, 1.0)});
    StateSpace sp = enumerate_state_space(net);
    EXPECT_THROW(build_generator(net, sp, Truncation::Strict), ConfigError);
    const Generator g = build_generator(net, sp, Truncation::Absorbing);
    EXPECT_EQ(g.sink, sp.size());
    EXPECT_DOUBLE_EQ(g.lost_rate_max, 1.0);
}

TEST(Solver, KsaMatchesAnalyticTwoState)
{
    const double kf = 2.0, kb = 1.0;
    const Network net = two_state(kf, kb);
    const StateSpace sp = enumerate_state_space(net);
    const Generator g = build_generator(net, sp);
    const std::int64_t a = sp.find(State{1, 0}.data());
    const Eigen::VectorXd p0 = delta_at(sp, {1, 0});
    for (double t : {0.01, 0.3, 1.0, 5.0}) {
        const Eigen::VectorXd p = propagate_ksa(g.P, p0, t, {30, 1e-12});
        const double exact = kb / (kf + kb) + kf / (kf + kb) * std::exp(-(kf + kb) * t);
        EXPECT_NEAR(p[a], exact, 1e-10) << t;
    }
}

TEST(Solver, KsaMatchesUniformization)
{
    const Network dimer = make_network({species("A", 0, 12, 12), species("B", 0, 6, 0)},
                                       {mass_action("d", {{"A", 2}}, {{"B", 1}}, 0.3),
                                        mass_action("u", {{"B", 1}}, {{"A", 2}}, 1.1)});
    for (const Network& net : {sir_model(), birth_death_model(5, 1, 40), dimer}) {
        const std::string ref = net.name;
        const StateSpace sp = enumerate_state_space(net);
        const Generator g = build_generator(net, sp, Truncation::Absorbing);
        const Eigen::MatrixXd P(g.P);
        Eigen::VectorXd p0 = Eigen::VectorXd::Zero(P.rows());
        p0[sp.find(net.x0().data())] = 1.0;
        const std::vector<double> grid{0.0, 0.5, 2.0};
        const auto series = propagate_ksa_grid(g.P, p0, grid, {40, 1e-12});
        for (std::size_t k = 1; k < grid.size(); ++k) {
            const Eigen::VectorXd ref_p = uniformization(P, p0, grid[k]);
            EXPECT_LT((series[k] - ref_p).cwiseAbs().maxCoeff(), 1e-9) << ref << " t=" << grid[k];
        }
    }
}

TEST(Solver, EigenSolutionMatchesKsa)
{
    const Network net = birth_death_model(5, 1, 20);
    const StateSpace sp = enumerate_state_space(net);
    const Generator g = build_generator(net, sp);
    const Eigen::VectorXd p0 = delta_at(sp, {0});
    const EigenSolution es = eigen_solution(g.P, p0);
    for (double t : {0.2, 1.0, 4.0}) {
        const Eigen::VectorXd a = es.at(t), b = propagate_ksa(g.P, p0, t, {30, 1e-12});
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8) << t;
    }
}

TEST(Solver, StationaryTwoStateAndBirthDeath)
{
    const Network net = two_state(1.0, 2.0);
    const StateSpace sp = enumerate_state_space(net);
    const Eigen::VectorXd p = stationary_distribution(build_generator(net, sp).P);
    EXPECT_NEAR(p[sp.find(State{1, 0}.data())], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(p[sp.find(State{0, 1}.data())], 1.0 / 3.0, 1e-12);

    // Truncated Poisson(5) on 0..30.
    const Network bd = birth_death_model(5, 1, 30);
    const StateSpace sb = enumerate_state_space(bd);
    const Eigen::VectorXd q = stationary_distribution(build_generator(bd, sb).P);
    double z = 0, term = 1;
    std::vector<double> w;
    for (int x = 0; x <= 30; ++x) {
        w.push_back(term);
        z += term;
        term *= 5.0 / (x + 1);
    }
    for (int x = 0; x <= 30; ++x) EXPECT_NEAR(q[sb.find(State{x}.data())], w[x] / z, 1e-12);
}

TEST(Solver, KlDivergenceNonincreasing)
{
    for (const char* ref : {"opinion:liberal", "neural:asynchronous", "birth-death"}) {
        const Network net = builtin_model(ref);
        const StateSpace sp = enumerate_state_space(net);
        const Generator g = build_generator(net, sp);
        const Eigen::VectorXd pbar = stationary_distribution(g.P);
        std::vector<double> grid;
        for (int k = 0; k <= 20; ++k) grid.push_back(0.5 * k);
        const auto series = propagate_ksa_grid(g.P, delta_at(sp, net.x0()), grid);
        double prev = kl_divergence(series[0], pbar);
        for (std::size_t k = 1; k < series.size(); ++k) {
            const double d = kl_divergence(series[k], pbar);
            EXPECT_LE(d, prev + 1e-7) << ref << " k=" << k;
            prev = d;
        }
    }
}

TEST(Solver, ImplicitEulerKeepsProbabilityVector)
{
    const Network net = sir_model();
    const StateSpace sp = enumerate_state_space(net, {Mode::DA, 30});
    const Generator g = build_generator(net, sp);
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(g.P.rows());
    q0[0] = 1.0;
    for (double tau : {0.01, 0.1, 1.0, 10.0}) {
        const Eigen::VectorXd q = propagate_ie_to(g.P, q0, 5.0, tau);
        EXPECT_GE(q.minCoeff(), 0.0) << tau;
        EXPECT_NEAR(q.sum(), 1.0, 1e-12) << tau;
    }
}

TEST(Solver, DaMarginalMatchesPopulationKsa)
{
    // SIR with x0 = (10, 2, 0): at most 10 infections and 12 recoveries, so horizon 22 is exact.
    const Network net = sir_model();
    const StateSpace da = enumerate_state_space(net, {Mode::DA, 22});
    const Generator gq = build_generator(net, da);
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(gq.P.rows());
    q0[da.find(std::vector<std::int64_t>{0, 0}.data())] = 1.0;
    const Eigen::VectorXd q = propagate_ie_to(gq.P, q0, 2.0, 1e-4);
    const Marginalized marg = marginalize_da_distribution(net, da, q);

    const StateSpace sp = enumerate_state_space(net);
    const Eigen::VectorXd p = propagate_ksa(build_generator(net, sp).P, delta_at(sp, net.x0()), 2.0, {40, 1e-12});
    const Eigen::VectorXd mapped = remap_distribution(marg.space, marg.p, sp);
    EXPECT_LT(marg.lost_mass, 1e-12);
    // Implicit Euler is first order; the step above keeps the global error well below 1e-3.
    EXPECT_LT(tv(mapped, p), 1e-3);

    const Eigen::VectorXd q2 = propagate_ksa(gq.P, q0, 2.0, {40, 1e-13});
    const Marginalized m2 = marginalize_da_distribution(net, da, q2);
    EXPECT_LT(tv(remap_distribution(m2.space, m2.p, sp), p), 1e-6);
}

TEST(Solver, MarginalSumsToOne)
{
    const Network net = opinion_preset("liberal");
    const StateSpace sp = enumerate_state_space(net);
    const Eigen::VectorXd p = stationary_distribution(build_generator(net, sp).P);
    for (int n = 0; n < 2; ++n) {
        const Eigen::VectorXd m = marginal(sp, p, n);
        EXPECT_EQ(m.size(), 81);
        EXPECT_NEAR(m.sum(), 1.0, 1e-12);
    }
}

TEST(Classify, SirAbsorbingStructure)
{
    const Network net = sir_model();
    const StateSpace sp = enumerate_state_space(net);
    const Generator g = build_generator(net, sp);
    const Classification c = classify_communicating_structure(g.P);
    // Persistent states are exactly those with I = 0; each is its own class.
    std::int64_t absorbing = 0;
    for (std::int64_t k = 0; k < sp.size(); ++k) {
        const bool dead = sp.state(k)[1] == 0;
        absorbing += dead;
        EXPECT_EQ(c.class_of[k] >= 0, dead) << k;
    }
    EXPECT_EQ(static_cast<std::int64_t>(c.classes.size()), absorbing);
    EXPECT_EQ(static_cast<std::int64_t>(c.transient.size()), sp.size() - absorbing);
    EXPECT_FALSE(c.irreducible());
    ASSERT_EQ(c.mu.rows(), static_cast<Eigen::Index>(c.transient.size()));
    for (Eigen::Index r = 0; r < c.mu.rows(); ++r) {
        EXPECT_NEAR(c.mu.row(r).sum(), 1.0, 1e-10);
        EXPECT_GE(c.mu.row(r).minCoeff(), -1e-14);
    }
    // Absorption probabilities agree with the long-time KSA solution.
    const Eigen::VectorXd p = propagate_ksa(g.P, delta_at(sp, net.x0()), 200.0, {40, 1e-12});
    const auto it = std::find(c.transient.begin(), c.transient.end(), sp.find(net.x0().data()));
    ASSERT_NE(it, c.transient.end());
    const Eigen::Index row = it - c.transient.begin();
    for (std::size_t j = 0; j < c.classes.size(); ++j) EXPECT_NEAR(c.mu(row, j), p[c.classes[j][0]], 1e-8);
}

TEST(Classify, MatchesReachabilityOracleOnRandomGraphs)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = 12;
        std::vector<Eigen::Triplet<double>> trip;
        std::vector<std::vector<char>> reach(K, std::vector<char>(K, 0));
        for (int j = 0; j < K; ++j) {
            reach[j][j] = 1;
            double out = 0;
            for (int i = 0; i < K; ++i)
                if (i != j && std::uniform_real_distribution<>(0, 1)(rng) < 0.12) {
                    trip.emplace_back(i, j, 1.0);
                    reach[j][i] = 1;
                    out += 1;
                }
            if (out > 0) trip.emplace_back(j, j, -out);
        }
        Eigen::SparseMatrix<double> P(K, K);
        P.setFromTriplets(trip.begin(), trip.end());
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < K; ++i)
                for (int j = 0; j < K; ++j)
                    if (reach[i][k] && reach[k][j]) reach[i][j] = 1;
        const Classification c = classify_communicating_structure(P);
        for (int i = 0; i < K; ++i) {
            // i is persistent iff everything reachable from i reaches back.
            bool closed = true;
            for (int j = 0; j < K; ++j)
                if (reach[i][j] && !reach[j][i]) closed = false;
            EXPECT_EQ(c.class_of[i] >= 0, closed) << trial << " " << i;
            for (int j = 0; j < K; ++j)
                if (closed && c.class_of[j] >= 0)
                    EXPECT_EQ(c.class_of[i] == c.class_of[j], reach[i][j] && reach[j][i]);
        }
    }
}
