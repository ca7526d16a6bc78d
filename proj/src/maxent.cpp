#include "mrn/maxent.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "mrn/errors.hpp"

namespace mrn {

Eigen::VectorXd geometric_maxent(double mean, std::int64_t max)
{
    if (!(mean >= 0.0)) throw ConfigError("geometric MaxEnt needs a nonnegative mean");
    if (mean == 0.0) return Eigen::VectorXd::Unit(std::max<std::int64_t>(max, 0) + 1, 0);
    const double r = mean / (1.0 + mean);
    if (max < 0) max = static_cast<std::int64_t>(std::ceil(std::log(1e-16) / std::log(r)));
    Eigen::VectorXd p(max + 1);
    for (std::int64_t x = 0; x <= max; ++x) p[x] = std::exp(x * std::log(r)) / (1.0 + mean);
    return p;
}

double MaxEntModel::entropy() const
{
    double h = 0.0;
    for (Eigen::Index i = 0; i < pmf.size(); ++i)
        if (pmf[i] > 0.0) h -= pmf[i] * std::log(pmf[i]);
    return h;
}

Eigen::VectorXd raw_moments(const Eigen::VectorXd& pmf, std::int64_t lo, int K)
{
    Eigen::VectorXd m = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < pmf.size(); ++i) {
        const double x = static_cast<double>(lo + i);
        double xp = 1.0;
        for (int k = 0; k < K; ++k) {
            xp *= x;
            m[k] += pmf[i] * xp;
        }
    }
    return m;
}

std::string moment_feasibility(const Eigen::VectorXd& m, std::int64_t lo, std::int64_t hi)
{
    const int K = static_cast<int>(m.size());
    if (K == 0) return "no moments given";
    for (int k = 0; k < K; ++k)
        if (!std::isfinite(m[k])) return "non-finite moment";
    const double a = static_cast<double>(lo), b = static_cast<double>(hi);
    if (m[0] < a || m[0] > b) return "mean outside the support";
    if (K >= 2) {
        const double var = m[1] - m[0] * m[0];
        const double scale = std::max(1.0, m[1]);
        if (var < -1e-12 * scale) return "negative variance";
        if (var > (m[0] - a) * (b - m[0]) + 1e-9 * scale) return "variance exceeds the bound for the support";
    }
    if (K >= 4) {
        Eigen::Matrix3d H;
        H << 1, m[0], m[1], m[0], m[1], m[2], m[1], m[2], m[3];
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(H).eigenvalues().minCoeff();
        if (lmin < -1e-10 * std::max(1.0, std::abs(m[3]))) return "Hankel moment matrix not positive semidefinite";
    }
    return {};
}

namespace {

double binom(int n, int k)
{
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

}  // namespace

MaxEntModel fit_maxent_distribution(const Eigen::VectorXd& moments, std::int64_t lo, std::int64_t hi,
                                    const MaxEntOptions& opt)
{
    const int K = static_cast<int>(moments.size());
    if (K < 1) throw ConfigError("MaxEnt order must be at least 1");
    if (hi < lo) throw ConfigError("empty MaxEnt support");
    if (const std::string why = moment_feasibility(moments, lo, hi); !why.empty())
        throw InfeasibleError("moments are infeasible on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              "]: " + why);
    const Eigen::Index n = hi - lo + 1;
    // Standardize x -> s = (x - c) / d.
    const double c = moments[0];
    double d = 1.0;
    if (K >= 2) d = std::sqrt(std::max(moments[1] - c * c, 0.0));
    if (!(d > 1e-12)) throw InfeasibleError("degenerate moments (zero variance): no interior MaxEnt solution");
    if (K == 1) d = std::max(1.0, std::abs(c));
    // Standardized target moments t_k = E[s^k].
    Eigen::VectorXd raw(K + 1);
    raw[0] = 1.0;
    raw.tail(K) = moments;
    Eigen::VectorXd target(K);
    for (int k = 1; k <= K; ++k) {
        double v = 0.0;
        for (int j = 0; j <= k; ++j) v += binom(k, j) * raw[j] * std::pow(-c, k - j);
        target[k - 1] = v / std::pow(d, k);
    }
    Eigen::MatrixXd phi(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = (static_cast<double>(lo + i) - c) / d;
        double sp = 1.0;
        for (int k = 0; k < K; ++k) {
            sp *= s;
            phi(i, k) = sp;
        }
    }
    auto evaluate = [&](const Eigen::VectorXd& lam, Eigen::VectorXd& p, double& logZ) {
        Eigen::VectorXd e = -(phi * lam);
        const double emax = e.maxCoeff();
        p = (e.array() - emax).exp().matrix();
        const double Z = p.sum();
        p /= Z;
        logZ = emax + std::log(Z);
        return logZ + lam.dot(target);
    };

    Eigen::VectorXd lam = Eigen::VectorXd::Zero(K), p(n);
    double logZ = 0.0;
    double obj = evaluate(lam, p, logZ);
    MaxEntModel model;
    model.order = K;
    model.lo = lo;
    model.hi = hi;
    auto mismatch = [&](const Eigen::VectorXd& g) {
        double e = 0.0;
        for (int k = 0; k < K; ++k) e = std::max(e, std::abs(g[k]) / std::max(1.0, std::abs(target[k])));
        return e;
    };
    bool converged = false;
    double last_cond = 1.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        const Eigen::VectorXd mean = phi.transpose() * p;
        const Eigen::VectorXd grad = target - mean;
        if (mismatch(grad) < opt.tol) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd centered = phi.rowwise() - mean.transpose();
        const Eigen::MatrixXd H = centered.transpose() * p.asDiagonal() * centered;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        const double emax = es.eigenvalues().maxCoeff(), emin = es.eigenvalues().minCoeff();
        last_cond = emin > 0 ? emax / emin : std::numeric_limits<double>::infinity();
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-14 * std::max(emax, 1e-300));
        const Eigen::VectorXd step =
            -(es.eigenvectors() * (es.eigenvectors().transpose() * grad).cwiseQuotient(ev));
        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd p_new(n);
        double logZ_new = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::VectorXd trial = lam + alpha * step;
            const double o = evaluate(trial, p_new, logZ_new);
            if (std::isfinite(o) && o <= obj + 1e-4 * alpha * grad.dot(step) + 1e-15 * std::abs(obj)) {
                lam = trial;
                obj = o;
                p = p_new;
                logZ = logZ_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        model.iterations = it + 1;
        if (!accepted) break;
        model.objective.push_back(obj);
        if (!(lam.cwiseAbs().maxCoeff() < 1e8)) break;
    }
    const Eigen::VectorXd grad = target - phi.transpose() * p;
    model.max_rel_error = mismatch(grad);
    if (!converged && model.max_rel_error > 1e-6) {
        if (last_cond > opt.cond_limit)
            throw NumericError("MaxEnt dual is ill-conditioned (condition " + std::to_string(last_cond) +
                               "); lower the order or rescale the moments");
        throw InfeasibleError("MaxEnt dual did not converge: the moments admit no Gibbs solution on the support");
    }
    // Back to the original variable: sum_k lam_k ((x - c)/d)^k = const + sum_j lambda'_j x^j.
    model.lambda = Eigen::VectorXd::Zero(K);
    double constant = 0.0;
    for (int k = 1; k <= K; ++k)
        for (int j = 0; j <= k; ++j) {
            const double coef = lam[k - 1] * binom(k, j) * std::pow(-c, k - j) / std::pow(d, k);
            if (j == 0)
                constant += coef;
            else
                model.lambda[j - 1] += coef;
        }
    model.log_zeta = logZ + constant;
    model.pmf = p;
    model.moments = raw_moments(p, lo, K);
    return model;
}

Eigen::VectorXd lognormal_da_constraints(double mean, double var)
{
    if (!(mean > 0.0)) throw InfeasibleError("log-normal DA constraints need a positive mean");
    Eigen::VectorXd m(3);
    const double e2 = var + mean * mean;
    m << mean, e2, std::pow(e2 / mean, 3);
    return m;
}

}  // namespace mrn
