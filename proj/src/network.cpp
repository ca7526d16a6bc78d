#include "mrn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mrn/errors.hpp"

namespace mrn {

const char* kind_name(Kind k)
{
    switch (k) {
    case Kind::MassAction: return "MassAction";
    case Kind::Hyperbolic: return "Hyperbolic";
    case Kind::MichaelisMenten: return "MichaelisMenten";
    case Kind::OpinionExp: return "OpinionExp";
    case Kind::NeuralTanh: return "NeuralTanh";
    case Kind::Tabulated: return "TabulatedExpression";
    }
    return "?";
}

Kind kind_from_name(const std::string& s)
{
    for (Kind k : {Kind::MassAction, Kind::Hyperbolic, Kind::MichaelisMenten, Kind::OpinionExp,
                   Kind::NeuralTanh, Kind::Tabulated})
        if (s == kind_name(k)) return k;
    throw ConfigError("unknown propensity kind '" + s + "'");
}

void Network::finalize()
{
    const int n = N(), m = M();
    V = Eigen::MatrixXi::Zero(n, m);
    Vp = Eigen::MatrixXi::Zero(n, m);
    for (int j = 0; j < m; ++j) {
        for (auto [s, c] : reactions[j].reactants)
            if (s >= 0 && s < n) V(s, j) += c;
        for (auto [s, c] : reactions[j].products)
            if (s >= 0 && s < n) Vp(s, j) += c;
    }
    S = Vp - V;
    ma_.assign(m, {});
    for (int j = 0; j < m; ++j)
        for (int s = 0; s < n; ++s)
            if (V(s, j) > 0) ma_[j].push_back({s, V(s, j)});
}

State Network::x0() const
{
    State x(species.size());
    for (std::size_t i = 0; i < species.size(); ++i) x[i] = species[i].init;
    return x;
}

int Network::species_index(const std::string& nm) const
{
    for (int i = 0; i < N(); ++i)
        if (species[i].name == nm) return i;
    return -1;
}

double binomial(std::int64_t x, int k)
{
    if (k < 0 || x < k) return 0.0;
    if (k == 0) return 1.0;
    if (k == 1) return static_cast<double>(x);
    std::uint64_t r = 1;
    bool overflow = false;
    for (int j = 1; j <= k; ++j) {
        std::uint64_t t;
        // r * (x - j + 1) is divisible by j since the running value is C(x, j-1).
        if (__builtin_mul_overflow(r, static_cast<std::uint64_t>(x - j + 1), &t)) {
            overflow = true;
            break;
        }
        r = t / static_cast<std::uint64_t>(j);
    }
    if (!overflow) return static_cast<double>(r);
    const double xd = static_cast<double>(x);
    return std::exp(std::lgamma(xd + 1.0) - std::lgamma(k + 1.0) - std::lgamma(xd - k + 1.0));
}

double Network::propensity(int m, const std::int64_t* x) const
{
    const Propensity& p = reactions[m].prop;
    if (p.kind == Kind::MassAction) {
        double a = p.k;
        for (const MA& t : ma_[m]) {
            if (x[t.n] < t.nu) return 0.0;
            a *= (t.nu == 1) ? static_cast<double>(x[t.n]) : binomial(x[t.n], t.nu);
        }
        return a;
    }
    double buf[16];
    std::vector<double> heap;
    double* xd = buf;
    if (N() > 16) {
        heap.resize(N());
        xd = heap.data();
    }
    for (int i = 0; i < N(); ++i) xd[i] = static_cast<double>(x[i]);
    const double v = smooth<double>(m, xd);
    return v > 0.0 ? v : 0.0;
}

void Network::propensities(const std::int64_t* x, double* out) const
{
    for (int m = 0; m < M(); ++m) out[m] = propensity(m, x);
}

bool Network::convex(int m) const
{
    const Reaction& r = reactions[m];
    if (r.convex) return *r.convex;
    const Propensity& p = r.prop;
    switch (p.kind) {
    case Kind::MassAction: {
        int species_used = 0;
        for (auto [s, c] : r.reactants)
            if (c > 0) ++species_used;
        return species_used <= 1;  // constants, linear terms and single-species falling factorials
    }
    case Kind::OpinionExp: return true;
    case Kind::NeuralTanh: return !p.activation;
    default: return false;
    }
}

Eigen::MatrixXi net_stoichiometry(const Eigen::MatrixXi& V, const Eigen::MatrixXi& Vp)
{
    if (V.rows() != Vp.rows() || V.cols() != Vp.cols())
        throw ConfigError("stoichiometric matrices have different shapes");
    return Vp - V;
}

namespace {

std::vector<int> referenced_species(const Reaction& r)
{
    std::vector<int> out;
    const Propensity& p = r.prop;
    if (p.species >= 0) out.push_back(p.species);
    if (p.cofactor >= 0) out.push_back(p.cofactor);
    return out;
}

}  // namespace

ValidationReport validate_network(const Network& net)
{
    ValidationReport rep;
    auto err = [&](const std::string& s) { rep.errors.push_back(s); };
    const int n = net.N(), m = net.M();
    if (n < 1) err("network has no species");
    if (m < 1) err("network has no reactions");
    for (int i = 0; i < n; ++i) {
        const Species& s = net.species[i];
        if (s.min > s.max) err("species " + s.name + ": min > max");
        if (s.init < s.min || s.init > s.max) err("species " + s.name + ": initial value outside bounds");
    }
    if (net.V.rows() != n || net.V.cols() != m || net.S.rows() != n)
        err("stoichiometric matrices not built (call finalize)");
    for (int j = 0; j < m; ++j) {
        const Reaction& r = net.reactions[j];
        const std::string tag = "reaction " + std::to_string(j) + " (" + r.name + ")";
        for (auto [s, c] : r.reactants) {
            if (s < 0 || s >= n) err(tag + ": reactant species index out of range");
            if (c < 0) err(tag + ": negative reactant coefficient");
        }
        for (auto [s, c] : r.products) {
            if (s < 0 || s >= n) err(tag + ": product species index out of range");
            if (c < 0) err(tag + ": negative product coefficient");
        }
        const Propensity& p = r.prop;
        if (p.k < 0) err(tag + ": negative rate constant");
        switch (p.kind) {
        case Kind::Hyperbolic:
            if (p.theta <= 0) err(tag + ": hyperbolic theta must be positive");
            if (p.cofactor < 0 || p.cofactor >= n) err(tag + ": propensity references out-of-range species");
            break;
        case Kind::MichaelisMenten:
            if (p.Km < 0) err(tag + ": negative Michaelis constant");
            break;
        case Kind::NeuralTanh:
        case Kind::OpinionExp:
            if (p.coeffs.size() > static_cast<std::size_t>(n))
                err(tag + ": coefficient row longer than species list");
            break;
        case Kind::Tabulated:
            for (const Term& t : p.terms)
                if (t.powers.size() > static_cast<std::size_t>(n) || t.guard.size() > static_cast<std::size_t>(n) ||
                    t.affine.size() > static_cast<std::size_t>(n + 1))
                    err(tag + ": tabulated term references out-of-range species");
            break;
        default: break;
        }
        if (p.kind != Kind::MassAction && p.kind != Kind::Tabulated)
            if (p.species < 0 || p.species >= n) err(tag + ": propensity references out-of-range species");
        for (int s : referenced_species(r))
            if (s >= n) err(tag + ": propensity references out-of-range species");
    }
    for (std::size_t q = 0; q < net.reversible_pairs.size(); ++q) {
        auto [f, b] = net.reversible_pairs[q];
        if (f < 0 || f >= m || b < 0 || b >= m || f == b) {
            err("reversible pair " + std::to_string(q) + ": invalid reaction indices");
            continue;
        }
        if (net.S.cols() == m && net.S.col(f) != -net.S.col(b))
            err("reversible pair " + std::to_string(q) + " (" + std::to_string(f) + "," + std::to_string(b) +
                "): net stoichiometry of reverse is not the negative of forward");
    }
    return rep;
}

void require_valid(const Network& net)
{
    auto rep = validate_network(net);
    if (rep.ok()) return;
    std::ostringstream os;
    os << "invalid network:";
    for (const auto& e : rep.errors) os << "\n  - " << e;
    throw ConfigError(os.str());
}

bool in_bounds(const Network& net, const std::int64_t* x)
{
    for (int i = 0; i < net.N(); ++i)
        if (x[i] < net.species[i].min || x[i] > net.species[i].max) return false;
    return true;
}

std::vector<double> eval_propensities(const Network& net, const State& x)
{
    if (static_cast<int>(x.size()) != net.N()) throw ConfigError("state has wrong dimension");
    if (!in_bounds(net, x.data())) throw ConfigError("state outside species bounds");
    for (const auto& r : net.reactions)
        if (r.prop.k < 0 || r.prop.Km < 0) throw ConfigError("negative propensity parameter in " + r.name);
    std::vector<double> a(net.M());
    net.propensities(x.data(), a.data());
    return a;
}

State da_to_population(const Network& net, const std::vector<std::int64_t>& z)
{
    if (static_cast<int>(z.size()) != net.M()) throw ConfigError("DA vector has wrong dimension");
    State x = net.x0();
    for (int m = 0; m < net.M(); ++m) {
        if (z[m] < 0) throw ConfigError("negative degree of advancement");
        for (int n = 0; n < net.N(); ++n) x[n] += net.S(n, m) * z[m];
    }
    if (!in_bounds(net, x.data())) throw ConfigError("DA vector maps outside species bounds");
    return x;
}

std::vector<Jet> da_propensity_jets(const Network& net, const Eigen::VectorXd& z, int order)
{
    const int n = net.N(), m = net.M();
    std::vector<Jet> x;
    x.reserve(n);
    for (int i = 0; i < n; ++i) {
        Jet xi(static_cast<double>(net.species[i].init), m, order);
        for (int j = 0; j < m; ++j) {
            xi.v += net.S(i, j) * z[j];
            if (order >= 1) xi.g[j] = net.S(i, j);
        }
        x.push_back(std::move(xi));
    }
    std::vector<Jet> out;
    out.reserve(m);
    for (int j = 0; j < m; ++j) out.push_back(net.smooth<Jet>(j, x.data()));
    return out;
}

Eigen::VectorXd smooth_propensities(const Network& net, const Eigen::VectorXd& x)
{
    Eigen::VectorXd a(net.M());
    for (int j = 0; j < net.M(); ++j) a[j] = net.smooth<double>(j, x.data());
    return a;
}

}  // namespace mrn
