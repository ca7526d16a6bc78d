#include "mrn/ode.hpp"

#include <algorithm>
#include <cmath>

#include "mrn/errors.hpp"

namespace mrn {

std::vector<double> uniform_grid(double t_end, int points, double t0)
{
    if (points < 2) return {t0, t_end};
    std::vector<double> g(points);
    for (int k = 0; k < points; ++k) g[k] = t0 + (t_end - t0) * k / (points - 1);
    g.back() = t_end;
    return g;
}

std::vector<Eigen::VectorXd> integrate_ode(const OdeRhs& f, const Eigen::VectorXd& y0, const std::vector<double>& grid,
                                           const OdeOptions& opt, const OdeHook& hook, OdeStats* stats)
{
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    std::vector<Eigen::VectorXd> out;
    if (grid.empty()) return out;
    const Eigen::Index n = y0.size();
    Eigen::VectorXd y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yn(n), tmp(n), err(n);
    double t = grid.front();
    if (hook) hook(t, y);
    out.push_back(y);
    if (n == 0) {
        out.resize(grid.size(), y);
        return out;
    }
    const double span = std::max(std::abs(grid.back() - grid.front()), 1e-300);
    f(t, y, k1);
    double h = 0.0;
    {
        const double d0 = (y.cwiseAbs().array() / (opt.atol + opt.rtol * y.cwiseAbs().array())).matrix().norm();
        const double d1 = (k1.cwiseAbs().array() / (opt.atol + opt.rtol * y.cwiseAbs().array())).matrix().norm();
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
        h = std::min(h, span);
    }
    long steps = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double target = grid[g];
        if (target < t) throw ConfigError("ODE output grid must be nondecreasing");
        while (t < target) {
            if (++steps > opt.max_steps) throw NumericError("ODE integration exceeded the step limit");
            bool last = false;
            const double h_try = h;
            if (t + h >= target) {
                h = target - t;
                last = true;
            }
            tmp = y + h * a21 * k1;
            f(t + c2 * h, tmp, k2);
            tmp = y + h * (a31 * k1 + a32 * k2);
            f(t + c3 * h, tmp, k3);
            tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            f(t + c4 * h, tmp, k4);
            tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(t + c5 * h, tmp, k5);
            tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f(t + h, tmp, k6);
            yn = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            f(t + h, yn, k7);
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double en = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(yn[i]));
                en += (err[i] / sc) * (err[i] / sc);
            }
            en = std::sqrt(en / n);
            if (!std::isfinite(en)) en = 1e10;
            if (en <= 1.0) {
                t = last ? target : t + h;
                y = yn;
                if (hook) {
                    hook(t, y);
                    f(t, y, k1);
                } else {
                    k1 = k7;
                }
                if (!y.allFinite()) throw NumericError("ODE solution became non-finite");
                if (stats) ++stats->accepted;
                const double fac = en > 0 ? 0.9 * std::pow(en, -0.2) : 5.0;
                h *= std::clamp(fac, 0.2, 5.0);
                if (last) h = std::max(h, h_try);
            } else {
                if (stats) ++stats->rejected;
                h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
                if (h < opt.h_min * span)
                    throw NumericError("ODE step size underflow at t = " + std::to_string(t) + " (stiff or blowing up)");
            }
        }
        out.push_back(y);
    }
    return out;
}

}  // namespace mrn
