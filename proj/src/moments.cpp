#include "mrn/moments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "mrn/errors.hpp"

namespace mrn {

Closure closure_from_name(const std::string& s)
{
    if (s == "normal") return Closure::Normal;
    if (s == "lognormal") return Closure::Lognormal;
    throw ConfigError("unknown closure '" + s + "' (normal|lognormal)");
}

PropensityDerivatives propensity_derivatives(const Network& net, const Eigen::VectorXd& mu, int order)
{
    const int M = net.M();
    PropensityDerivatives d;
    d.M = M;
    d.alpha.resize(M);
    d.h1 = Eigen::MatrixXd::Zero(M, M);
    d.h2.assign(order >= 2 ? static_cast<std::size_t>(M) * M * M : 0, 0.0);
    d.h3.assign(order >= 3 ? static_cast<std::size_t>(M) * M * M * M : 0, 0.0);
    const std::vector<Jet> jets = da_propensity_jets(net, mu, order);
    for (int m = 0; m < M; ++m) {
        const Jet& j = jets[m];
        d.alpha[m] = j.v;
        for (int a = 0; a < M; ++a) {
            d.h1(m, a) = j.d1(a);
            if (order < 2) continue;
            for (int b = 0; b < M; ++b) {
                d.h2[(static_cast<std::size_t>(m) * M + a) * M + b] = j.d2(a, b);
                if (order < 3) continue;
                for (int c = 0; c < M; ++c) d.h3[((static_cast<std::size_t>(m) * M + a) * M + b) * M + c] = j.d3(a, b, c);
            }
        }
    }
    return d;
}

double lognormal_raw_third(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C, int a, int b, int c)
{
    if (!(mu[a] > 0.0 && mu[b] > 0.0 && mu[c] > 0.0))
        throw NumericError("log-normal closure undefined at a zero mean; use the normal closure");
    auto E2 = [&](int i, int j) { return C(i, j) + mu[i] * mu[j]; };
    return E2(a, b) * E2(a, c) * E2(b, c) / (mu[a] * mu[b] * mu[c]);
}

std::vector<double> lognormal_third_moments(const Eigen::VectorXd& mu, const Eigen::MatrixXd& C)
{
    const int M = static_cast<int>(mu.size());
    std::vector<double> c3(static_cast<std::size_t>(M) * M * M);
    auto E2 = [&](int i, int j) { return C(i, j) + mu[i] * mu[j]; };
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < M; ++c)
                c3[(static_cast<std::size_t>(a) * M + b) * M + c] = lognormal_raw_third(mu, C, a, b, c) -
                                                                   mu[a] * E2(b, c) - mu[b] * E2(a, c) -
                                                                   mu[c] * E2(a, b) + 2.0 * mu[a] * mu[b] * mu[c];
    return c3;
}

MomentRhs moment_rhs(const Network& net, const MomentState& s, const MomentOptions& opt)
{
    const int M = net.M();
    const PropensityDerivatives d = propensity_derivatives(net, s.mu, 2);
    MomentRhs r;
    r.correction.resize(M);
    r.dmu.resize(M);
    for (int m = 0; m < M; ++m) {
        double T = 0.0;
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b) T += d.d2(m, a, b) * s.C(a, b);
        T *= 0.5;
        if (opt.jensen && net.convex(m)) T = std::max(0.0, T);
        r.correction[m] = T;
        r.dmu[m] = d.alpha[m] + T;
    }
    // Third central moments only enter through the second derivatives (third derivatives are
    // dropped for the log-normal relation; they vanish against zero third moments otherwise).
    std::vector<double> c3;
    std::vector<char> have(M, 1);
    if (opt.closure == Closure::Lognormal) {
        c3.assign(static_cast<std::size_t>(M) * M * M, 0.0);
        for (int a = 0; a < M; ++a) have[a] = s.mu[a] > 1e-12;
        auto E2 = [&](int i, int j) { return s.C(i, j) + s.mu[i] * s.mu[j]; };
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b)
                for (int c = 0; c < M; ++c) {
                    if (!(have[a] && have[b] && have[c])) continue;
                    c3[(static_cast<std::size_t>(a) * M + b) * M + c] =
                        lognormal_raw_third(s.mu, s.C, a, b, c) - s.mu[a] * E2(b, c) - s.mu[b] * E2(a, c) -
                        s.mu[c] * E2(a, b) + 2.0 * s.mu[a] * s.mu[b] * s.mu[c];
                }
    }
    r.dC = Eigen::MatrixXd::Zero(M, M);
    const Eigen::MatrixXd HC = d.h1 * s.C;  // (m, k) = sum_a h(m,a) C(a,k)
    for (int m = 0; m < M; ++m)
        for (int k = m; k < M; ++k) {
            double v = HC(k, m) + HC(m, k);
            if (m == k) v += r.dmu[m];
            if (!c3.empty()) {
                double t3 = 0.0;
                for (int a = 0; a < M; ++a)
                    for (int b = 0; b < M; ++b)
                        t3 += d.d2(k, a, b) * c3[(static_cast<std::size_t>(m) * M + a) * M + b] +
                              d.d2(m, a, b) * c3[(static_cast<std::size_t>(k) * M + a) * M + b];
                v += 0.5 * t3;
            }
            r.dC(m, k) = r.dC(k, m) = v;
        }
    return r;
}

MomentRhs jensen_corrected_rhs(const Network& net, const MomentState& s, Closure closure)
{
    MomentOptions o;
    o.closure = closure;
    o.jensen = true;
    return moment_rhs(net, s, o);
}

MomentSeries integrate_moments(const Network& net, const std::vector<double>& grid, const MomentOptions& opt)
{
    const int M = net.M(), N = net.N();
    if (grid.size() < 2 || !(grid.back() > grid.front())) throw ConfigError("moment integration needs t_end > 0");
    const int P = M * (M + 1) / 2;
    auto unpack = [&](const Eigen::VectorXd& y, MomentState& s) {
        s.mu = y.head(M);
        s.C.resize(M, M);
        int k = M;
        for (int a = 0; a < M; ++a)
            for (int b = a; b < M; ++b) s.C(a, b) = s.C(b, a) = y[k++];
    };
    MomentSeries out;
    OdeRhs f = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        MomentState s;
        s.t = t;
        unpack(y, s);
        const MomentRhs r = moment_rhs(net, s, opt);
        dy.resize(M + P);
        dy.head(M) = r.dmu;
        int k = M;
        for (int a = 0; a < M; ++a)
            for (int b = a; b < M; ++b) dy[k++] = r.dC(a, b);
    };
    OdeHook hook = [&](double t, Eigen::VectorXd& y) {
        MomentState s;
        unpack(y, s);
        if (M == 0) return;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.C);
        const double lmin = es.eigenvalues().minCoeff();
        const double tol = opt.psd_tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (lmin < -tol)
            throw NumericError("DA covariance lost positive semidefiniteness at t = " + std::to_string(t) +
                               " (min eigenvalue " + std::to_string(lmin) + "); closure breaks down");
        if (lmin < 0.0) {
            const Eigen::MatrixXd Cp =
                es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
            int k = M;
            for (int a = 0; a < M; ++a)
                for (int b = a; b < M; ++b) y[k++] = Cp(a, b);
        }
        if (!out.negative_mean_warned && s.mu.minCoeff() < -1e-9) {
            out.negative_mean_warned = true;
            spdlog::warn("moment closure produced a negative DA mean at t = {}", t);
        }
    };
    const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(M + P);
    const std::vector<Eigen::VectorXd> ys = integrate_ode(f, y0, grid, opt.ode, hook);
    const Eigen::MatrixXd S = net.S.cast<double>();
    Eigen::VectorXd x0(N);
    for (int i = 0; i < N; ++i) x0[i] = static_cast<double>(net.species[i].init);
    for (std::size_t g = 0; g < ys.size(); ++g) {
        MomentState s;
        unpack(ys[g], s);
        out.t.push_back(grid[g]);
        out.mu_z.push_back(s.mu);
        out.C_z.push_back(s.C);
        out.mu_x.push_back(x0 + S * s.mu);
        out.C_x.push_back(S * s.C * S.transpose());
    }
    return out;
}

void write_moments_csv(const std::string& path, const Network& net, const MomentSeries& s, bool full_covariance)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    const int N = net.N();
    out << "t[" << net.time_unit << "]";
    for (int i = 0; i < N; ++i) out << ",mean_" << net.species[i].name;
    for (int i = 0; i < N; ++i) out << ",var_" << net.species[i].name;
    if (full_covariance)
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) out << ",cov_" << net.species[i].name << "_" << net.species[j].name;
    out << "\n" << std::setprecision(17);
    for (std::size_t g = 0; g < s.t.size(); ++g) {
        out << s.t[g];
        for (int i = 0; i < N; ++i) out << "," << s.mu_x[g][i];
        for (int i = 0; i < N; ++i) out << "," << s.C_x[g](i, i);
        if (full_covariance)
            for (int i = 0; i < N; ++i)
                for (int j = i + 1; j < N; ++j) out << "," << s.C_x[g](i, j);
        out << "\n";
    }
}

}  // namespace mrn
