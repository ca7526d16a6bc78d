#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mrn/catalog.hpp"
#include "mrn/errors.hpp"
#include "mrn/moments.hpp"
#include "mrn/ode.hpp"
#include "test_util.hpp"

using namespace mrn;
using namespace testing_util;

namespace {

// 0 -> A (k1), A -> B (k2), B -> 0 (k3): product-Poisson at every time when started empty.
Network linear_chain(double k1, double k2, double k3)
{
    return make_network({species("A", 0, 1000, 0), species("B", 0, 1000, 0)},
                        {mass_action("in", nullptr, {{"A", 1}}, k1), mass_action("conv", {{"A", 1}}, {{"B", 1}}, k2),
                         mass_action("out", {{"B", 1}}, nullptr, k3)});
}

}  // namespace

TEST(Ode, DormandPrinceSolvesLinearSystem)
{
    const OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(2);
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    const auto ys = integrate_ode(f, Eigen::Vector2d(1, 0), {0.0, 1.0, 10.0}, {1e-10, 1e-12});
    EXPECT_NEAR(ys[1][0], std::cos(1.0), 1e-8);
    EXPECT_NEAR(ys[2][1], -std::sin(10.0), 1e-8);
    const auto g = uniform_grid(2.0, 5);
    EXPECT_EQ(g, (std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0}));
}

TEST(Moments, LinearNetworkIsProductPoisson)
{
    const double k1 = 4.0, k2 = 1.5, k3 = 0.5;
    const Network net = linear_chain(k1, k2, k3);
    for (Closure c : {Closure::Normal, Closure::Lognormal}) {
        MomentOptions opt;
        opt.closure = c;
        opt.ode = {1e-10, 1e-12};
        const MomentSeries s = integrate_moments(net, {0.0, 2.0, 60.0}, opt);
        const Eigen::VectorXd& mx = s.mu_x.back();
        const Eigen::MatrixXd& cx = s.C_x.back();
        EXPECT_NEAR(mx[0], k1 / k2, 1e-6);
        EXPECT_NEAR(mx[1], k1 / k3, 1e-6);
        EXPECT_NEAR(cx(0, 0) / mx[0], 1.0, 1e-6);
        EXPECT_NEAR(cx(1, 1) / mx[1], 1.0, 1e-6);
        EXPECT_NEAR(cx(0, 1), 0.0, 1e-6);
        // Transient: mean and variance of A stay equal.
        EXPECT_NEAR(s.mu_x[1][0], k1 / k2 * (1 - std::exp(-k2 * 2.0)), 1e-6);
        EXPECT_NEAR(s.C_x[1](0, 0), s.mu_x[1][0], 1e-6);
    }
}

TEST(Moments, DaCovarianceIsSymmetricPsd)
{
    const Network dimer = make_network({species("A", 0, 400, 200), species("B", 0, 200, 0)},
                                       {mass_action("dim", {{"A", 2}}, {{"B", 1}}, 0.01),
                                        mass_action("dis", {{"B", 1}}, {{"A", 2}}, 1.0)});
    for (const Network& net : {opinion_preset("liberal"), dimer}) {
        for (Closure c : {Closure::Normal, Closure::Lognormal}) {
            MomentOptions opt;
            opt.closure = c;
            const MomentSeries s = integrate_moments(net, uniform_grid(5.0, 11), opt);
            for (const auto& C : s.C_z) {
                EXPECT_LT((C - C.transpose()).cwiseAbs().maxCoeff(), 1e-12);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
                EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()));
            }
        }
    }
}

TEST(Moments, ClosureBreakdownIsReported)
{
    // With P = 0 initially the Gaussian closure drives the 2P -> P + Q firing count negative.
    EXPECT_THROW(integrate_moments(builtin_model("autocatalator"), uniform_grid(5.0, 11)), NumericError);
}

TEST(Moments, LognormalRelationMatchesTrueLognormal)
{
    // Z = exp(Y), Y ~ N(m, Sigma): E[prod Z^e] = exp(e.m + e' Sigma e / 2).
    Eigen::Vector3d m(0.3, -0.2, 0.5);
    Eigen::Matrix3d A;
    A << 0.4, 0.1, 0.0, 0.1, 0.3, -0.05, 0.0, -0.05, 0.2;
    auto raw = [&](Eigen::Vector3d e) { return std::exp(e.dot(m) + 0.5 * e.dot(A * e)); };
    Eigen::Vector3d mu;
    Eigen::Matrix3d C;
    for (int a = 0; a < 3; ++a) mu[a] = raw(Eigen::Vector3d::Unit(a));
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) C(a, b) = raw(Eigen::Vector3d::Unit(a) + Eigen::Vector3d::Unit(b)) - mu[a] * mu[b];
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const Eigen::Vector3d e = Eigen::Vector3d::Unit(a) + Eigen::Vector3d::Unit(b) + Eigen::Vector3d::Unit(c);
                EXPECT_NEAR(lognormal_raw_third(mu, C, a, b, c), raw(e), 1e-12 * raw(e));
            }
    const auto c3 = lognormal_third_moments(mu, C);
    // Third central moment of a scalar lognormal: (e^{s2} + 2) (e^{s2} - 1)^{3/2} mu^3.
    const double s2 = A(0, 0), skew = (std::exp(s2) + 2) * std::sqrt(std::exp(s2) - 1);
    EXPECT_NEAR(c3[0], skew * std::pow(C(0, 0), 1.5), 1e-10);
    Eigen::Vector3d bad = mu;
    bad[1] = 0.0;
    EXPECT_THROW(lognormal_third_moments(bad, C), NumericError);
}

TEST(Moments, JensenCorrectionNonnegativeForConvexPropensities)
{
    const Network net = opinion_preset("liberal");
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        MomentState s;
        s.mu = Eigen::VectorXd::Zero(net.M());
        for (int m = 0; m < net.M(); ++m) s.mu[m] = std::uniform_real_distribution<>(0, 50)(rng);
        Eigen::MatrixXd B = Eigen::MatrixXd::Random(net.M(), net.M());
        s.C = B * B.transpose() * std::uniform_real_distribution<>(0, 20)(rng);
        const MomentRhs r = jensen_corrected_rhs(net, s);
        MomentOptions plain;
        const MomentRhs u = moment_rhs(net, s, plain);
        for (int m = 0; m < net.M(); ++m) {
            ASSERT_TRUE(net.convex(m));
            EXPECT_GE(r.correction[m], 0.0);
            EXPECT_EQ(r.correction[m], std::max(0.0, u.correction[m]));
            // E[alpha(Z)] >= alpha(E[Z]) for convex alpha.
            EXPECT_GE(r.dmu[m], u.dmu[m] - u.correction[m]);
        }
    }
}

TEST(Moments, DerivativesMatchFiniteDifferences)
{
    const Network net = builtin_model("transcription");
    Eigen::VectorXd mu(net.M());
    for (int m = 0; m < net.M(); ++m) mu[m] = 1.0 + 0.3 * m;
    const PropensityDerivatives d = propensity_derivatives(net, mu, 3);
    auto alpha = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd x(net.N());
        for (int n = 0; n < net.N(); ++n) x[n] = static_cast<double>(net.x0()[n]);
        x += net.S.cast<double>() * z;
        return smooth_propensities(net, x);
    };
    const double h = 1e-5;
    for (int a = 0; a < net.M(); ++a) {
        Eigen::VectorXd zp = mu, zm = mu;
        zp[a] += h;
        zm[a] -= h;
        const Eigen::VectorXd fd = (alpha(zp) - alpha(zm)) / (2 * h);
        for (int m = 0; m < net.M(); ++m) EXPECT_NEAR(d.h1(m, a), fd[m], 1e-6 * (1 + std::abs(fd[m])));
        const PropensityDerivatives dp = propensity_derivatives(net, zp, 2), dm = propensity_derivatives(net, zm, 2);
        for (int m = 0; m < net.M(); ++m)
            for (int b = 0; b < net.M(); ++b)
                EXPECT_NEAR(d.d2(m, a, b), (dp.h1(m, b) - dm.h1(m, b)) / (2 * h), 1e-5 * (1 + std::abs(d.d2(m, a, b))));
    }
    EXPECT_LT((d.alpha - alpha(mu)).cwiseAbs().maxCoeff(), 1e-12);
}
