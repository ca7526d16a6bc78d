#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "mrn/model_io.hpp"
#include "mrn/network.hpp"
#include "mrn/solver.hpp"
#include "mrn/statespace.hpp"

namespace testing_util {

using nlohmann::json;

inline json species(const std::string& name, std::int64_t min, std::int64_t max, std::int64_t init)
{
    return {{"name", name}, {"min", min}, {"max", max}, {"init", init}};
}

inline json mass_action(const std::string& name, json reactants, json products, double k)
{
    return {{"name", name},
            {"reactants", reactants.is_null() ? json::object() : reactants},
            {"products", products.is_null() ? json::object() : products},
            {"propensity", {{"kind", "MassAction"}, {"params", {{"k", k}}}}}};
}

inline mrn::Network make_network(json species_list, json reactions, json pairs = json::array())
{
    return mrn::network_from_json(
        {{"name", "test"}, {"species", species_list}, {"reactions", reactions}, {"reversible_pairs", pairs}});
}

// A <-> B with kf, kb and a fixed number of molecules.
inline mrn::Network two_state(double kf, double kb, std::int64_t total = 1)
{
    return make_network({species("A", 0, total, total), species("B", 0, total, 0)},
                        {mass_action("f", {{"A", 1}}, {{"B", 1}}, kf), mass_action("b", {{"B", 1}}, {{"A", 1}}, kb)},
                        json::array({json::array({0, 1})}));
}

// 0 -> X (k1), X -> 0 (k2) on [0, max]; the birth channel is cut at max.
inline mrn::Network linear_birth_death(double k1, double k2, std::int64_t max, std::int64_t x0 = 0)
{
    json birth = {{"name", "birth"},
                  {"reactants", json::object()},
                  {"products", {{"X", 1}}},
                  {"propensity",
                   {{"kind", "TabulatedExpression"},
                    {"params",
                     {{"terms", json::array({{{"coef", k1}, {"fn", "none"}, {"powers", {0}}},
                                             {{"coef", -k1}, {"fn", "none"}, {"powers", {0}}, {"guard", {max}}}})}}}}}};
    return make_network({species("X", 0, max, x0)}, {birth, mass_action("death", {{"X", 1}}, nullptr, k2)},
                        json::array({json::array({0, 1})}));
}

// Dense generator of a population space (strict truncation).
inline Eigen::MatrixXd dense_generator(const mrn::Network& net, const mrn::StateSpace& space)
{
    return Eigen::MatrixXd(mrn::build_generator(net, space, mrn::Truncation::Strict).P);
}

// exp(tP) p0 by uniformization: sum_k Poisson(k; Lambda t) (I + P / Lambda)^k p0.
inline Eigen::VectorXd uniformization(const Eigen::MatrixXd& P, const Eigen::VectorXd& p0, double t)
{
    double lambda = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) lambda = std::max(lambda, -P(j, j));
    if (lambda == 0.0) return p0;
    lambda *= 1.05;
    const Eigen::MatrixXd U = Eigen::MatrixXd::Identity(P.rows(), P.cols()) + P / lambda;
    // Split into short substeps to keep the Poisson weights in range.
    const int sub = std::max(1, static_cast<int>(std::ceil(lambda * t / 50.0)));
    const double h = t / sub;
    Eigen::VectorXd p = p0;
    for (int s = 0; s < sub; ++s) {
        Eigen::VectorXd term = p, acc = Eigen::VectorXd::Zero(p.size());
        double w = std::exp(-lambda * h);
        for (int k = 0; k < 400; ++k) {
            acc += w * term;
            term = U * term;
            w *= lambda * h / (k + 1);
            if (k > lambda * h && w < 1e-18) break;
        }
        p = acc;
    }
    return p;
}

inline Eigen::VectorXd delta_at(const mrn::StateSpace& space, const std::vector<std::int64_t>& x, Eigen::Index dim = -1)
{
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim < 0 ? space.size() : dim);
    p[space.find(x.data())] = 1.0;
    return p;
}

inline double tv(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

}  // namespace testing_util
