#include "mrn/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>
#include <spdlog/spdlog.h>

#include "mrn/errors.hpp"

namespace mrn {

namespace {

double inf_norm(const SpMat& A)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
    for (int j = 0; j < A.outerSize(); ++j)
        for (SpMat::InnerIterator it(A, j); it; ++it) rows[it.row()] += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
}

double round_step(double t)
{
    const double s = std::pow(10.0, std::floor(std::log10(t)) - 1.0);
    return std::ceil(t / s) * s;
}

}  // namespace

Eigen::VectorXd expv(const SpMat& A, const Eigen::VectorXd& v, double t, const KsaOptions& opt, KsaStats* stats)
{
    const Eigen::Index n = A.rows();
    const double anorm = inf_norm(A);
    if (t == 0.0 || anorm == 0.0 || v.norm() == 0.0) return v;
    if (opt.krylov_dim < 2) throw ConfigError("Krylov dimension must be at least 2");
    const int m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n));
    const double tol = opt.tol;
    const int mxrej = 10;
    const double btol = 1e-7, gamma = 0.9, delta = 1.2;
    const double rndoff = anorm * std::numeric_limits<double>::epsilon();
    const double t_out = std::abs(t), sgn = t < 0 ? -1.0 : 1.0;

    Eigen::VectorXd w = v;
    double beta = w.norm();
    double xm = 1.0 / m;
    const double fact = std::pow((m + 1) / std::exp(1.0), m + 1) * std::sqrt(2.0 * M_PI * (m + 1));
    double t_new = (1.0 / anorm) * std::pow((fact * tol) / (4.0 * beta * anorm), xm);
    t_new = round_step(t_new);
    double t_now = 0.0, s_error = 0.0;

    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H(m + 2, m + 2);
    Eigen::VectorXd p(n);
    Eigen::MatrixXd F;
    while (t_now < t_out) {
        double t_step = std::min(t_out - t_now, t_new);
        V.setZero();
        H.setZero();
        V.col(0) = w / beta;
        int k1 = 2, mb = m;
        for (int j = 0; j < m; ++j) {
            p.noalias() = A * V.col(j);
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(p);
                p -= H(i, j) * V.col(i);
            }
            const double s = p.norm();
            if (s < btol) {
                k1 = 0;
                mb = j + 1;
                t_step = t_out - t_now;
                if (stats) stats->happy_breakdown = true;
                break;
            }
            H(j + 1, j) = s;
            V.col(j + 1) = p / s;
        }
        double avnorm = 0.0;
        if (k1 != 0) {
            H(m + 1, m) = 1.0;
            p.noalias() = A * V.col(m);
            avnorm = p.norm();
        }
        double err_loc = 0.0;
        int ireject = 0;
        while (true) {
            const int mx = mb + k1;
            F = (sgn * t_step * H.topLeftCorner(mx, mx)).exp();
            if (k1 == 0) {
                err_loc = btol;
                break;
            }
            const double phi1 = std::abs(beta * F(m, 0));
            const double phi2 = std::abs(beta * F(m + 1, 0) * avnorm);
            if (phi1 > 10.0 * phi2) {
                err_loc = phi2;
                xm = 1.0 / m;
            } else if (phi1 > phi2) {
                err_loc = (phi1 * phi2) / (phi1 - phi2);
                xm = 1.0 / m;
            } else {
                err_loc = phi1;
                xm = 1.0 / std::max(m - 1, 1);
            }
            if (err_loc <= delta * t_step * tol) break;
            if (ireject == mxrej) throw NumericError("Krylov propagation: requested tolerance too small");
            t_step = round_step(gamma * t_step * std::pow(t_step * tol / err_loc, xm));
            ++ireject;
            if (stats) ++stats->rejections;
        }
        if (!(t_step > 0.0) || t_now + t_step == t_now)
            throw NumericError("Krylov propagation: step size underflow");
        const int mx = mb + std::max(0, k1 - 1);
        w.noalias() = V.leftCols(mx) * (beta * F.col(0).head(mx));
        beta = w.norm();
        if (!std::isfinite(beta)) throw NumericError("Krylov propagation produced non-finite values");
        if (beta == 0.0) break;
        t_now += t_step;
        if (err_loc > 0.0)
            t_new = round_step(gamma * t_step * std::pow(t_step * tol / err_loc, xm));
        else
            t_new = 2.0 * t_step;
        err_loc = std::max(err_loc, rndoff);
        s_error += err_loc;
        if (stats) ++stats->steps;
    }
    if (stats) stats->error_estimate += s_error;
    return w;
}

Eigen::VectorXd propagate_ksa(const SpMat& P, const Eigen::VectorXd& p, double tau, const KsaOptions& opt,
                              KsaStats* stats)
{
    if (!(tau >= 0.0)) throw ConfigError("propagation time must be nonnegative");
    const double mass = p.sum();
    Eigen::VectorXd w = expv(P, p, tau, opt, stats);
    double clipped = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] < 0.0) {
            clipped -= w[i];
            w[i] = 0.0;
        }
    const double s = w.sum();
    if (!(s > 0.0)) throw NumericError("Krylov propagation lost all probability mass");
    w *= mass / s;
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std::min(w[i], 1.0);
    if (stats) stats->clipped_mass += clipped;
    if (clipped > 1e-6) spdlog::warn("KSA clipped {:.3e} of negative probability mass", clipped);
    return w;
}

std::vector<Eigen::VectorXd> propagate_ksa_grid(const SpMat& P, const Eigen::VectorXd& p0,
                                                const std::vector<double>& grid, const KsaOptions& opt)
{
    std::vector<Eigen::VectorXd> out;
    if (grid.empty()) return out;
    out.push_back(p0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double dt = grid[k] - grid[k - 1];
        if (dt < 0) throw ConfigError("time grid must be nondecreasing");
        out.push_back(propagate_ksa(P, out.back(), dt, opt));
    }
    return out;
}

Eigen::VectorXd propagate_ie(const SpMat& Q, const Eigen::VectorXd& q, double tau)
{
    if (!(tau > 0.0)) throw ConfigError("implicit Euler step must be positive");
    if (!is_lower_triangular(Q)) throw ConfigError("implicit Euler requires a lower-triangular DA generator");
    SpMat A = -tau * Q;
    for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0;
    A.makeCompressed();
    Eigen::VectorXd out = A.triangularView<Eigen::Lower>().solve(q);
    return out;
}

Eigen::VectorXd propagate_ie_to(const SpMat& Q, const Eigen::VectorXd& q, double t, double tau)
{
    if (!(tau > 0.0)) throw ConfigError("implicit Euler step must be positive");
    if (!is_lower_triangular(Q)) throw ConfigError("implicit Euler requires a lower-triangular DA generator");
    if (t <= 0.0) return q;
    const long steps = std::max(1L, static_cast<long>(std::ceil(t / tau - 1e-12)));
    const double h = t / steps;
    SpMat A = -h * Q;
    for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0;
    A.makeCompressed();
    Eigen::VectorXd w = q;
    for (long s = 0; s < steps; ++s) w = A.triangularView<Eigen::Lower>().solve(w);
    return w;
}

double default_ie_step(const SpMat& Q)
{
    double amax = 0.0;
    for (int j = 0; j < Q.outerSize(); ++j)
        for (SpMat::InnerIterator it(Q, j); it; ++it)
            if (it.row() != j) amax = std::max(amax, it.value());
    return amax > 0.0 ? 0.1 / amax : 1.0;
}

Eigen::VectorXd stationary_distribution(const SpMat& P)
{
    const Eigen::Index K = P.rows();
    if (K == 1) return Eigen::VectorXd::Ones(1);
    // Replace the last balance equation by the normalization sum(p) = 1.
    const Eigen::Index r = K - 1;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(P.nonZeros() + K);
    for (int j = 0; j < P.outerSize(); ++j)
        for (SpMat::InnerIterator it(P, j); it; ++it)
            if (it.row() != r) trip.emplace_back(it.row(), j, it.value());
    for (Eigen::Index j = 0; j < K; ++j) trip.emplace_back(r, j, 1.0);
    SpMat B(K, K);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(B);
    if (lu.info() != Eigen::Success)
        throw NumericError("stationary solve failed: generator is numerically reducible (nullity > 1)");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    b[r] = 1.0;
    Eigen::VectorXd p = lu.solve(b);
    if (lu.info() != Eigen::Success || !p.allFinite())
        throw NumericError("stationary solve failed: generator is numerically reducible (nullity > 1)");
    for (int it = 0; it < 2; ++it) {
        Eigen::VectorXd res = b - B * p;
        p += lu.solve(res);
    }
    const double neg = -p.minCoeff();
    if (neg > 1e-8 * p.maxCoeff()) throw NumericError("stationary solve produced negative mass; generator is likely reducible");
    p = p.cwiseMax(0.0);
    p /= p.sum();
    return p;
}

Eigen::VectorXd EigenSolution::at(double t) const
{
    Eigen::VectorXcd e(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) e[k] = c[k] * std::exp(lambda[k] * t);
    return (R * e).real();
}

EigenSolution eigen_solution(const SpMat& P, const Eigen::VectorXd& p0, double max_condition)
{
    if (P.rows() > 4000) throw ConfigError("eigen solution is dense; state space too large (use KSA)");
    Eigen::MatrixXd D(P);
    Eigen::EigenSolver<Eigen::MatrixXd> es(D);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    EigenSolution sol;
    sol.lambda = es.eigenvalues();
    sol.R = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sol.R);
    const auto& sv = svd.singularValues();
    sol.condition = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    if (!(sol.condition <= max_condition))
        throw NumericError("generator is numerically defective (eigenvector condition " +
                           std::to_string(sol.condition) + "); use Krylov propagation instead");
    // c = R^{-1} p0, i.e. c_k = l_k^T p0 / l_k^T r_k with left eigenvectors the rows of R^{-1}.
    sol.c = sol.R.partialPivLu().solve(p0.cast<std::complex<double>>());
    return sol;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q)
{
    double d = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q)
{
    return 0.5 * (p - q).cwiseAbs().sum();
}

Marginalized marginalize_da_distribution(const Network& net, const StateSpace& da_space, const Eigen::VectorXd& q)
{
    const int N = net.N(), M = net.M();
    std::vector<std::int64_t> lo(N), hi(N);
    for (int i = 0; i < N; ++i) {
        lo[i] = net.species[i].min;
        hi[i] = net.species[i].max;
    }
    Marginalized out{StateSpace(N, lo, hi, false), {}, 0.0};
    const State x0 = net.x0();
    std::vector<std::int64_t> x(N);
    std::vector<std::int64_t> target(da_space.size());
    for (std::int64_t k = 0; k < da_space.size(); ++k) {
        const std::int64_t* z = da_space.state(k);
        for (int i = 0; i < N; ++i) {
            x[i] = x0[i];
            for (int m = 0; m < M; ++m) x[i] += net.S(i, m) * z[m];
        }
        target[k] = out.space.push(x.data());
    }
    out.space.sort_lexicographic();
    out.p = Eigen::VectorXd::Zero(out.space.size());
    for (std::int64_t k = 0; k < da_space.size(); ++k) {
        const std::int64_t* z = da_space.state(k);
        for (int i = 0; i < N; ++i) {
            x[i] = x0[i];
            for (int m = 0; m < M; ++m) x[i] += net.S(i, m) * z[m];
        }
        out.p[out.space.find(x.data())] += q[k];
    }
    for (Eigen::Index k = da_space.size(); k < q.size(); ++k) out.lost_mass += q[k];
    return out;
}

Eigen::VectorXd remap_distribution(const StateSpace& from, const Eigen::VectorXd& p, const StateSpace& to,
                                   double* missing)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(to.size());
    double miss = 0.0;
    for (std::int64_t k = 0; k < from.size(); ++k) {
        std::int64_t j = to.find(from.state(k));
        if (j < 0)
            miss += p[k];
        else
            out[j] += p[k];
    }
    if (missing) *missing = miss;
    return out;
}

Eigen::VectorXd marginal(const StateSpace& space, const Eigen::VectorXd& p, int n)
{
    const std::int64_t lo = space.lo()[n], hi = space.hi()[n];
    Eigen::VectorXd out = Eigen::VectorXd::Zero(hi - lo + 1);
    for (std::int64_t k = 0; k < space.size(); ++k) out[space.state(k)[n] - lo] += p[k];
    return out;
}

void write_distribution_csv(const std::string& path, const Network& net, const StateSpace& space,
                            const Eigen::VectorXd& p)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    const int d = space.dim();
    for (int i = 0; i < d; ++i) {
        if (space.da())
            out << "z_" << net.reactions[i].name << ",";
        else
            out << net.species[i].name << ",";
    }
    out << "p\n";
    out << std::setprecision(17);
    for (std::int64_t k = 0; k < space.size(); ++k) {
        const std::int64_t* s = space.state(k);
        for (int i = 0; i < d; ++i) out << s[i] << ",";
        out << p[k] << "\n";
    }
}

void write_series_jsonl(const std::string& path, const std::vector<double>& t, const std::vector<Eigen::VectorXd>& p)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << std::setprecision(17);
    for (std::size_t k = 0; k < t.size(); ++k) {
        out << "{\"t\":" << t[k] << ",\"p\":[";
        for (Eigen::Index i = 0; i < p[k].size(); ++i) out << (i ? "," : "") << p[k][i];
        out << "]}\n";
    }
}

}  // namespace mrn
