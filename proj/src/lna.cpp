#include "mrn/lna.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>

#include "mrn/errors.hpp"

namespace mrn {

namespace {

template <class T>
T scaled_alpha(const Network& net, int m, double omega, const T* xt, std::vector<T>& buf)
{
    const Reaction& r = net.reactions[m];
    if (r.prop.kind == Kind::MassAction) {
        int order = 0;
        double fact = 1.0;
        for (const auto& [n, nu] : r.reactants) {
            order += nu;
            for (int j = 2; j <= nu; ++j) fact *= j;
        }
        T acc = constant_like(xt[0], r.prop.k * std::pow(omega, order - 1) / fact);
        for (const auto& [n, nu] : r.reactants)
            for (int j = 0; j < nu; ++j) acc = acc * xt[n];
        return acc;
    }
    const int N = net.N();
    buf.clear();
    for (int i = 0; i < N; ++i) buf.push_back(omega * xt[i]);
    return net.smooth<T>(m, buf.data()) * (1.0 / omega);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

ScaledPropensity scaled_propensities(const Network& net, double omega)
{
    if (!(omega > 0.0)) throw ConfigError("system size Omega must be positive");
    return ScaledPropensity{&net, omega};
}

Eigen::VectorXd ScaledPropensity::alpha(const Eigen::VectorXd& xt) const
{
    const int M = net->M();
    Eigen::VectorXd a(M);
    std::vector<double> buf;
    for (int m = 0; m < M; ++m) a[m] = scaled_alpha<double>(*net, m, omega, xt.data(), buf);
    return a;
}

Eigen::VectorXd ScaledPropensity::alpha_prime(const Eigen::VectorXd& xt) const
{
    const int M = net->M();
    const Eigen::VectorXd a = alpha(xt);
    const Eigen::VectorXd x = omega * xt;
    Eigen::VectorXd out(M);
    for (int m = 0; m < M; ++m) {
        if (net->reactions[m].prop.kind != Kind::MassAction) {
            out[m] = 0.0;
            continue;
        }
        out[m] = omega * (net->smooth<double>(m, x.data()) / omega - a[m]);
    }
    return out;
}

Eigen::MatrixXd ScaledPropensity::jacobian(const Eigen::VectorXd& xt) const
{
    const int M = net->M(), N = net->N();
    std::vector<Jet> xj;
    for (int i = 0; i < N; ++i) xj.push_back(Jet::variable(xt[i], i, N, 1));
    std::vector<Jet> buf;
    Eigen::MatrixXd Jm(M, N);
    for (int m = 0; m < M; ++m) {
        const Jet a = scaled_alpha<Jet>(*net, m, omega, xj.data(), buf);
        for (int i = 0; i < N; ++i) Jm(m, i) = a.g[i];
    }
    return Jm;
}

MacroSeries integrate_macroscopic(const Network& net, double omega, const std::vector<double>& grid,
                                  const OdeOptions& ode, double blowup)
{
    const ScaledPropensity sp = scaled_propensities(net, omega);
    const int N = net.N();
    const Eigen::MatrixXd S = net.S.cast<double>();
    Eigen::VectorXd x0(N);
    for (int i = 0; i < N; ++i) x0[i] = static_cast<double>(net.species[i].init) / omega;
    OdeRhs f = [&](double, const Eigen::VectorXd& zeta, Eigen::VectorXd& dz) { dz = sp.alpha(x0 + S * zeta); };
    OdeHook hook = [&](double t, Eigen::VectorXd& zeta) {
        if (!(zeta.cwiseAbs().maxCoeff() <= blowup))
            throw NumericError("macroscopic solution blew up at t = " + std::to_string(t));
    };
    const auto zs = integrate_ode(f, Eigen::VectorXd::Zero(net.M()), grid, ode, hook);
    MacroSeries out;
    out.t = grid;
    for (const auto& z : zs) {
        out.zeta.push_back(z);
        out.chi.push_back(x0 + S * z);
    }
    return out;
}

LnaSeries integrate_lna_covariance(const Network& net, double omega, const std::vector<double>& grid,
                                   const OdeOptions& ode)
{
    const ScaledPropensity sp = scaled_propensities(net, omega);
    const int N = net.N(), M = net.M();
    const Eigen::MatrixXd S = net.S.cast<double>();
    Eigen::VectorXd x0t(N);
    for (int i = 0; i < N; ++i) x0t[i] = static_cast<double>(net.species[i].init) / omega;
    const int P = M * (M + 1) / 2;
    auto unpack = [&](const Eigen::VectorXd& y, Eigen::MatrixXd& C) {
        C.resize(M, M);
        int k = M;
        for (int a = 0; a < M; ++a)
            for (int b = a; b < M; ++b) C(a, b) = C(b, a) = y[k++];
    };
    OdeRhs f = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        const Eigen::VectorXd xt = x0t + S * y.head(M);
        const Eigen::VectorXd a = sp.alpha(xt);
        const Eigen::MatrixXd G = sp.jacobian(xt) * S;
        Eigen::MatrixXd C;
        unpack(y, C);
        Eigen::MatrixXd dC = G * C + C * G.transpose();
        dC.diagonal() += a.cwiseMax(0.0);
        dy.resize(M + P);
        dy.head(M) = a;
        int k = M;
        for (int i = 0; i < M; ++i)
            for (int j = i; j < M; ++j) dy[k++] = dC(i, j);
    };
    OdeHook hook = [&](double t, Eigen::VectorXd& y) {
        if (!(y.cwiseAbs().maxCoeff() <= 1e12))
            throw NumericError("LNA covariance blew up at t = " + std::to_string(t) +
                               " (unstable macroscopic dynamics; see the validity check)");
    };
    const auto ys = integrate_ode(f, Eigen::VectorXd::Zero(M + P), grid, ode, hook);
    LnaSeries out;
    out.omega = omega;
    out.t = grid;
    Eigen::VectorXd x0(N);
    for (int i = 0; i < N; ++i) x0[i] = static_cast<double>(net.species[i].init);
    for (const auto& y : ys) {
        const Eigen::VectorXd zeta = y.head(M);
        const Eigen::VectorXd xt = x0t + S * zeta;
        Eigen::MatrixXd C;
        unpack(y, C);
        const Eigen::MatrixXd Jx = sp.jacobian(xt);
        out.zeta.push_back(zeta);
        out.chi.push_back(xt);
        out.C_xi.push_back(C);
        out.G.push_back(Jx * S);
        out.J.push_back(S * Jx);
        out.mean_z.push_back(omega * zeta);
        out.mean_x.push_back(x0 + omega * S * zeta);
        out.cov_z.push_back(omega * C);
        out.cov_x.push_back(omega * S * C * S.transpose());
    }
    return out;
}

Eigen::VectorXcd stoichiometric_eigenvalues(const Eigen::MatrixXd& S, const Eigen::MatrixXd& J)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > 1e-10 * std::max(1.0, sv[0])) ++r;
    if (r == 0) return Eigen::VectorXcd();
    const Eigen::MatrixXd Q = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd R = Q.transpose() * J * Q;
    Eigen::EigenSolver<Eigen::MatrixXd> es(R, false);
    return es.eigenvalues();
}

LnaValidity check_lna_validity(const Network& net, const LnaSeries& s)
{
    LnaValidity v;
    const Eigen::MatrixXd S = net.S.cast<double>();
    bool first = true;
    for (std::size_t g = 0; g < s.t.size(); ++g) {
        const Eigen::VectorXcd ev = stoichiometric_eigenvalues(S, s.J[g]);
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < ev.size(); ++i) mx = std::max(mx, ev[i].real());
        if (ev.size() == 0) mx = 0.0;
        v.max_re_lambda = first ? mx : std::max(v.max_re_lambda, mx);
        first = false;
        if (g + 1 == s.t.size()) v.max_re_lambda_final = mx;
        if (g == 0) continue;  // the covariance vanishes at t = 0
        for (int i = 0; i < net.N(); ++i) {
            const double mu = s.mean_x[g][i], var = s.cov_x[g](i, i);
            if (!(var > 0.0)) continue;
            const double sd = std::sqrt(var);
            const double below = norm_cdf((net.species[i].min - 0.5 - mu) / sd);
            const double above = 1.0 - norm_cdf((net.species[i].max + 0.5 - mu) / sd);
            v.max_negative_mass = std::max(v.max_negative_mass, below);
            v.max_upper_mass = std::max(v.max_upper_mass, above);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.C_xi[g]);
        v.min_cov_eigenvalue = std::min(v.min_cov_eigenvalue, es.eigenvalues().minCoeff());
    }
    v.unstable = v.max_re_lambda >= 0.0;
    v.negative_mass = v.max_negative_mass > 1e-3;
    return v;
}

Eigen::VectorXd gaussian_marginal_pmf(double mean, double var, std::int64_t lo, std::int64_t hi)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(hi - lo + 1);
    if (!(var > 0.0)) {
        const std::int64_t k = std::llround(mean);
        if (k >= lo && k <= hi) p[k - lo] = 1.0;
        return p;
    }
    const double sd = std::sqrt(var);
    for (std::int64_t k = lo; k <= hi; ++k)
        p[k - lo] = norm_cdf((k + 0.5 - mean) / sd) - norm_cdf((k - 0.5 - mean) / sd);
    return p;
}

void write_lna_csv(const std::string& path, const Network& net, const LnaSeries& s)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    const int N = net.N();
    out << "t[" << net.time_unit << "]";
    for (int i = 0; i < N; ++i) out << ",chi_" << net.species[i].name;
    for (int i = 0; i < N; ++i) out << ",mean_" << net.species[i].name;
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) out << ",cov_" << net.species[i].name << "_" << net.species[j].name;
    out << "\n" << std::setprecision(17);
    for (std::size_t g = 0; g < s.t.size(); ++g) {
        out << s.t[g];
        for (int i = 0; i < N; ++i) out << "," << s.chi[g][i];
        for (int i = 0; i < N; ++i) out << "," << s.mean_x[g][i];
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) out << "," << s.cov_x[g](i, j);
        out << "\n";
    }
}

}  // namespace mrn
