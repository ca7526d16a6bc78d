#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrn/jet.hpp"

namespace mrn {

using State = std::vector<std::int64_t>;

enum class Kind { MassAction, Hyperbolic, MichaelisMenten, OpinionExp, NeuralTanh, Tabulated };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& s);  // throws ConfigError

enum class TermFn { None, Exp, Tanh, TanhPos };

// coef * prod_n x_n^powers[n] * fn(affine[0] + sum_n affine[n+1] x_n), zero unless x_n >= guard[n]
struct Term {
    double coef = 1.0;
    std::vector<int> powers;
    TermFn fn = TermFn::None;
    std::vector<double> affine;
    std::vector<int> guard;
};

struct Propensity {
    Kind kind = Kind::MassAction;
    double k = 0.0;      // rate constant, V for Michaelis-Menten, gamma for neural decay
    double theta = 0.0;  // hyperbolic
    double Km = 0.0;     // Michaelis constant
    double L = 0.0;      // opinion size / neural pool capacity
    double sign = 1.0;   // opinion direction (+1 raises x_i, -1 lowers it)
    double h = 0.0;      // neural external input
    int species = -1;    // substrate / target species
    int cofactor = -1;   // hyperbolic cofactor
    bool activation = true;
    std::vector<double> coeffs;  // opinion exponent row / neural weight row
    std::vector<Term> terms;
};

struct Species {
    std::string name;
    std::int64_t min = 0;
    std::int64_t max = 0;
    std::int64_t init = 0;
};

struct Reaction {
    std::string name;
    std::vector<std::pair<int, int>> reactants;  // (species, coefficient)
    std::vector<std::pair<int, int>> products;
    Propensity prop;
    std::optional<bool> convex;  // overrides the per-kind default
};

class Network {
public:
    std::string name;
    std::string time_unit = "1";
    std::vector<Species> species;
    std::vector<Reaction> reactions;
    std::vector<std::pair<int, int>> reversible_pairs;  // 0-based (forward, reverse)

    Eigen::MatrixXi V, Vp, S;

    // Rebuild stoichiometric matrices; call after editing species/reactions.
    void finalize();

    int N() const { return static_cast<int>(species.size()); }
    int M() const { return static_cast<int>(reactions.size()); }
    State x0() const;
    int species_index(const std::string& name) const;  // -1 if absent

    // Exact propensity on an integer state (mass action uses exact binomials with an Iverson guard).
    double propensity(int m, const std::int64_t* x) const;
    void propensities(const std::int64_t* x, double* out) const;

    // Smooth real-valued propensity (falling factorials for mass action); differentiable with Jet.
    template <class T>
    T smooth(int m, const T* x) const;

    bool convex(int m) const;

private:
    struct MA {
        int n;
        int nu;
    };
    std::vector<std::vector<MA>> ma_;
};

struct ValidationReport {
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

ValidationReport validate_network(const Network& net);
void require_valid(const Network& net);  // throws ConfigError listing every problem

Eigen::MatrixXi net_stoichiometry(const Eigen::MatrixXi& V, const Eigen::MatrixXi& Vp);

// Checked evaluation: throws on negative parameters or an out-of-bounds state.
std::vector<double> eval_propensities(const Network& net, const State& x);

State da_to_population(const Network& net, const std::vector<std::int64_t>& z);
bool in_bounds(const Network& net, const std::int64_t* x);

// Exact binomial coefficient C(x, k); falls back to log-gamma when 64-bit arithmetic overflows.
double binomial(std::int64_t x, int k);

// ---------------------------------------------------------------------------

template <class T>
T Network::smooth(int m, const T* x) const
{
    using std::exp;
    using std::tanh;
    const Reaction& r = reactions[m];
    const Propensity& p = r.prop;
    const T& like = x[0];
    switch (p.kind) {
    case Kind::MassAction: {
        T acc = constant_like(like, p.k);
        for (const auto& [n, nu] : r.reactants) {
            double fact = 1.0;
            for (int j = 0; j < nu; ++j) {
                acc = acc * (x[n] - static_cast<double>(j));
                fact *= (j + 1);
            }
            acc = acc * (1.0 / fact);
        }
        return acc;
    }
    case Kind::Hyperbolic: {
        const T& s = x[p.species];
        const T& c = x[p.cofactor];
        return (p.k * p.theta) * s * c / (1.0 + p.theta * s);
    }
    case Kind::MichaelisMenten: {
        const T& s = x[p.species];
        return p.k * s / (p.Km + s);
    }
    case Kind::OpinionExp: {
        T arg = constant_like(like, 0.0);
        for (std::size_t n = 0; n < p.coeffs.size(); ++n)
            if (p.coeffs[n] != 0.0) arg = arg + (p.sign * p.coeffs[n]) * x[n];
        return p.k * (p.L - p.sign * x[p.species]) * exp(arg);
    }
    case Kind::NeuralTanh: {
        if (!p.activation) return p.k * x[p.species];
        T phi = constant_like(like, p.h);
        for (std::size_t n = 0; n < p.coeffs.size(); ++n)
            if (p.coeffs[n] != 0.0) phi = phi + p.coeffs[n] * x[n];
        if (!(value_of(phi) > 0.0)) return constant_like(like, 0.0);
        return p.k * (p.L - x[p.species]) * tanh(phi);
    }
    case Kind::Tabulated: {
        T acc = constant_like(like, 0.0);
        for (const Term& t : p.terms) {
            bool pass = true;
            for (std::size_t n = 0; n < t.guard.size(); ++n)
                if (value_of(x[n]) < t.guard[n]) pass = false;
            if (!pass) continue;
            T term = constant_like(like, t.coef);
            for (std::size_t n = 0; n < t.powers.size(); ++n)
                for (int e = 0; e < t.powers[n]; ++e) term = term * x[n];
            if (t.fn != TermFn::None) {
                T a = constant_like(like, t.affine.empty() ? 0.0 : t.affine[0]);
                for (std::size_t n = 1; n < t.affine.size(); ++n)
                    if (t.affine[n] != 0.0) a = a + t.affine[n] * x[n - 1];
                if (t.fn == TermFn::Exp)
                    term = term * exp(a);
                else if (t.fn == TermFn::Tanh)
                    term = term * tanh(a);
                else if (value_of(a) > 0.0)
                    term = term * tanh(a);
                else
                    continue;
            }
            acc = acc + term;
        }
        return acc;
    }
    }
    return constant_like(like, 0.0);
}

// Propensity derivatives with respect to the degrees of advancement z (x = x0 + S z),
// evaluated at a real-valued z. Returns M jets over M variables.
std::vector<Jet> da_propensity_jets(const Network& net, const Eigen::VectorXd& z, int order = 3);

// Smooth propensities at a real-valued population state.
Eigen::VectorXd smooth_propensities(const Network& net, const Eigen::VectorXd& x);

}  // namespace mrn
