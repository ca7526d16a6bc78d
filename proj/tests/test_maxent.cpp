#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrn/errors.hpp"
#include "mrn/maxent.hpp"

using namespace mrn;

namespace {

double tv(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

Eigen::VectorXd binomial_pmf(int n, double q)
{
    Eigen::VectorXd p(n + 1);
    for (int k = 0; k <= n; ++k)
        p[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(q) +
                        (n - k) * std::log1p(-q));
    return p;
}

}  // namespace

TEST(MaxEnt, GeometricClosedForm)
{
    const Eigen::VectorXd p = geometric_maxent(3.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-14);
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[2], 0.25 * 0.75 * 0.75, 1e-15);
    double m = 0;
    for (Eigen::Index k = 0; k < p.size(); ++k) m += k * p[k];
    EXPECT_NEAR(m, 3.0, 1e-12);
}

TEST(MaxEnt, FirstOrderFitIsGeometric)
{
    for (double mean : {0.5, 2.0, 7.5}) {
        const Eigen::VectorXd g = geometric_maxent(mean);
        const std::int64_t hi = g.size() - 1;
        const MaxEntModel fit = fit_maxent_distribution(Eigen::VectorXd::Constant(1, mean), 0, hi);
        EXPECT_LT(tv(fit.pmf, g), 1e-9) << mean;
        EXPECT_NEAR(fit.lambda[0], -std::log(mean / (1 + mean)), 1e-8);
    }
}

TEST(MaxEnt, MatchesMomentsAndKeepsObjectiveDecreasing)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = std::uniform_int_distribution<>(10, 60)(rng);
        const Eigen::VectorXd src = binomial_pmf(n, std::uniform_real_distribution<>(0.2, 0.8)(rng));
        for (int K : {2, 3, 4}) {
            const Eigen::VectorXd m = raw_moments(src, 0, K);
            const MaxEntModel fit = fit_maxent_distribution(m, 0, n);
            EXPECT_NEAR(fit.pmf.sum(), 1.0, 1e-12);
            EXPECT_GE(fit.pmf.minCoeff(), 0.0);
            const Eigen::VectorXd fm = raw_moments(fit.pmf, 0, K);
            for (int k = 0; k < K; ++k) EXPECT_NEAR(fm[k], m[k], 1e-8 * std::abs(m[k])) << n << " K=" << K;
            for (std::size_t i = 1; i < fit.objective.size(); ++i)
                EXPECT_LE(fit.objective[i], fit.objective[i - 1] + 1e-12);
            // MaxEnt has the largest entropy among laws with these moments.
            double h = 0;
            for (Eigen::Index i = 0; i < src.size(); ++i)
                if (src[i] > 0) h -= src[i] * std::log(src[i]);
            EXPECT_GE(fit.entropy(), h - 1e-9);
        }
    }
}

TEST(MaxEnt, SignedSupport)
{
    Eigen::VectorXd src = Eigen::VectorXd::Zero(81);
    for (int x = -40; x <= 40; ++x) src[x + 40] = std::exp(-0.5 * (x - 3) * (x - 3) / 30.0);
    src /= src.sum();
    const MaxEntModel fit = fit_maxent_distribution(raw_moments(src, -40, 2), -40, 40);
    EXPECT_LT(tv(fit.pmf, src), 1e-6);
}

TEST(MaxEnt, InfeasibleMomentsAreRejected)
{
    EXPECT_THROW(fit_maxent_distribution(Eigen::Vector2d(3.0, 5.0), 0, 20), InfeasibleError);     // variance < 0
    EXPECT_THROW(fit_maxent_distribution(Eigen::VectorXd::Constant(1, 30.0), 0, 20), InfeasibleError);
    EXPECT_THROW(fit_maxent_distribution(Eigen::Vector2d(10.0, 250.0), 0, 20), InfeasibleError);  // var 150 > 100
    Eigen::Vector4d bad(2.0, 5.0, 20.0, 10.0);
    EXPECT_FALSE(moment_feasibility(bad, 0, 20).empty());
    EXPECT_TRUE(moment_feasibility(raw_moments(binomial_pmf(20, 0.3), 0, 4), 0, 20).empty());
}

TEST(MaxEnt, LognormalConstraintSet)
{
    const Eigen::VectorXd c = lognormal_da_constraints(4.0, 2.0);
    ASSERT_EQ(c.size(), 3);
    EXPECT_DOUBLE_EQ(c[0], 4.0);
    EXPECT_DOUBLE_EQ(c[1], 18.0);
    EXPECT_DOUBLE_EQ(c[2], std::pow(18.0 / 4.0, 3));
}
