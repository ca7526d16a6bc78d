#include <gtest/gtest.h>

#include <cmath>

#include "mrn/catalog.hpp"
#include "mrn/lna.hpp"
#include "mrn/ode.hpp"
#include "mrn/solver.hpp"
#include "test_util.hpp"

using namespace mrn;
using namespace testing_util;

TEST(Lna, ExactForLinearBirthDeath)
{
    // For 0 -> X (k1), X -> 0 (k2) the LNA mean and variance coincide with the exact Poisson law.
    const double k1 = 6.0, k2 = 1.5;
    const Network net = make_network({species("X", 0, 1000, 0)},
                                     {mass_action("b", nullptr, {{"X", 1}}, k1), mass_action("d", {{"X", 1}}, nullptr, k2)});
    const LnaSeries s = integrate_lna_covariance(net, 1.0, {0.0, 0.5, 3.0}, {1e-10, 1e-12});
    for (std::size_t g = 1; g < s.t.size(); ++g) {
        const double m = k1 / k2 * (1 - std::exp(-k2 * s.t[g]));
        EXPECT_NEAR(s.mean_x[g][0], m, 1e-7);
        EXPECT_NEAR(s.cov_x[g](0, 0), m, 1e-7);
    }
    const LnaValidity v = check_lna_validity(net, s);
    EXPECT_FALSE(v.unstable);
    EXPECT_NEAR(v.max_re_lambda_final, -k2, 1e-9);
}

TEST(Lna, ScaledPropensitiesRecoverExactRates)
{
    // alpha = Omega (alpha~(z / Omega) + alpha~'(z / Omega) / Omega) reproduces the falling factorials.
    const Network net = make_network({species("A", 0, 100, 40), species("B", 0, 100, 0)},
                                     {mass_action("dim", {{"A", 2}}, {{"B", 1}}, 0.2),
                                      mass_action("dis", {{"B", 1}}, {{"A", 2}}, 1.0)});
    for (double omega : {1.0, 10.0, 40.0}) {
        const ScaledPropensity sp = scaled_propensities(net, omega);
        for (int a = 0; a <= 40; a += 7) {
            Eigen::Vector2d x(a, 3);
            const Eigen::VectorXd rate = sp.f() * (sp.alpha(x / omega) + sp.alpha_prime(x / omega) / omega);
            EXPECT_NEAR(rate[0], 0.2 * a * (a - 1) / 2.0, 1e-10);
            EXPECT_NEAR(rate[1], 3.0, 1e-12);
        }
    }
}

TEST(Lna, StoichiometricEigenvaluesDropConservationLaws)
{
    Eigen::MatrixXd S(2, 2);
    S << -1, 1, 1, -1;
    Eigen::MatrixXd J(2, 2);
    J << -2, 1, 2, -1;  // A <-> B with kf = 2, kb = 1: eigenvalues {0, -3}
    const Eigen::VectorXcd ev = stoichiometric_eigenvalues(S, J);
    ASSERT_EQ(ev.size(), 1);
    EXPECT_NEAR(ev[0].real(), -3.0, 1e-12);
}

TEST(Lna, GaussianMarginalPmf)
{
    const Eigen::VectorXd p = gaussian_marginal_pmf(10.0, 4.0, 0, 40);
    EXPECT_NEAR(p.sum(), 1.0, 1e-6);
    double m = 0, v = 0;
    for (int k = 0; k <= 40; ++k) m += k * p[k];
    for (int k = 0; k <= 40; ++k) v += (k - m) * (k - m) * p[k];
    EXPECT_NEAR(m, 10.0, 1e-6);
    EXPECT_NEAR(v, 4.0 + 1.0 / 12, 1e-3);
}

TEST(Lna, ValidityOnOpinionPresets)
{
    const auto grid = uniform_grid(20.0, 41);
    const LnaSeries lib = integrate_lna_covariance(opinion_preset("liberal"), 40.0, grid);
    const LnaValidity vl = check_lna_validity(opinion_preset("liberal"), lib);
    EXPECT_TRUE(vl.valid());
    EXPECT_LT(vl.max_re_lambda, 0.0);
    const LnaSeries tot = integrate_lna_covariance(opinion_preset("totalitarian"), 40.0, grid);
    EXPECT_FALSE(check_lna_validity(opinion_preset("totalitarian"), tot).valid());
}

TEST(Lna, ConvergesToMasterEquationAsOmegaGrows)
{
    // Dimerization with densities fixed: the LNA variance error shrinks relative to the exact variance.
    double prev = 1e300;
    for (int omega : {10, 40, 160}) {
        const Network net = make_network({species("A", 0, 2 * omega, 2 * omega), species("B", 0, omega, 0)},
                                         {mass_action("dim", {{"A", 2}}, {{"B", 1}}, 1.0 / omega),
                                          mass_action("dis", {{"B", 1}}, {{"A", 2}}, 1.0)});
        const StateSpace sp = enumerate_state_space(net);
        const Eigen::VectorXd p =
            propagate_ksa(build_generator(net, sp).P, delta_at(sp, net.x0()), 1.0, {40, 1e-11});
        double m = 0, v = 0;
        for (std::int64_t k = 0; k < sp.size(); ++k) m += p[k] * sp.state(k)[1];
        for (std::int64_t k = 0; k < sp.size(); ++k) v += p[k] * std::pow(sp.state(k)[1] - m, 2);
        const LnaSeries s = integrate_lna_covariance(net, omega, {0.0, 1.0});
        const double err = std::abs(s.mean_x[1][1] - m) / omega;
        EXPECT_LT(err, prev);
        EXPECT_NEAR(s.cov_x[1](1, 1) / v, 1.0, 0.25);
        prev = err;
    }
}
