#pragma once

// Forward-mode automatic differentiation truncated at third order.
// A Jet carries the value, gradient, Hessian and third-derivative tensor
// of a scalar function of n independent variables (dense, symmetric storage).

#include <cmath>
#include <vector>

namespace mrn {

class Jet {
public:
    int n = 0;
    int order = 3;
    double v = 0.0;
    std::vector<double> g, H, T;

    Jet() = default;
    Jet(double value, int nvars, int ord = 3) : n(nvars), order(ord), v(value) { alloc(); }

    static Jet variable(double value, int idx, int nvars, int ord = 3)
    {
        Jet j(value, nvars, ord);
        if (ord >= 1) j.g[idx] = 1.0;
        return j;
    }

    double value() const { return v; }
    double d1(int i) const { return g[i]; }
    double d2(int i, int j) const { return H[i * n + j]; }
    double d3(int i, int j, int k) const { return T[(i * n + j) * n + k]; }

    Jet& operator+=(const Jet& o)
    {
        v += o.v;
        add(g, o.g, 1.0);
        add(H, o.H, 1.0);
        add(T, o.T, 1.0);
        return *this;
    }
    Jet& operator-=(const Jet& o)
    {
        v -= o.v;
        add(g, o.g, -1.0);
        add(H, o.H, -1.0);
        add(T, o.T, -1.0);
        return *this;
    }
    Jet& operator+=(double c) { v += c; return *this; }
    Jet& operator-=(double c) { v -= c; return *this; }
    Jet& operator*=(double c)
    {
        v *= c;
        for (auto& a : g) a *= c;
        for (auto& a : H) a *= c;
        for (auto& a : T) a *= c;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double c) { return a += c; }
    friend Jet operator+(double c, Jet a) { return a += c; }
    friend Jet operator-(Jet a, double c) { return a -= c; }
    friend Jet operator-(double c, const Jet& a) { Jet r = a; r *= -1.0; r += c; return r; }
    friend Jet operator-(Jet a) { a *= -1.0; return a; }
    friend Jet operator*(Jet a, double c) { return a *= c; }
    friend Jet operator*(double c, Jet a) { return a *= c; }

    friend Jet operator*(const Jet& a, const Jet& b)
    {
        const int n = a.n;
        Jet r(a.v * b.v, n, a.order);
        if (r.order >= 1)
            for (int i = 0; i < n; ++i) r.g[i] = a.v * b.g[i] + a.g[i] * b.v;
        if (r.order >= 2)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    r.H[i * n + j] = a.v * b.H[i * n + j] + a.g[i] * b.g[j] + a.g[j] * b.g[i] +
                                     a.H[i * n + j] * b.v;
        if (r.order >= 3)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        const int ijk = (i * n + j) * n + k;
                        r.T[ijk] = a.v * b.T[ijk] + a.T[ijk] * b.v +
                                   a.g[i] * b.H[j * n + k] + a.g[j] * b.H[i * n + k] +
                                   a.g[k] * b.H[i * n + j] + a.H[i * n + j] * b.g[k] +
                                   a.H[i * n + k] * b.g[j] + a.H[j * n + k] * b.g[i];
                    }
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) { return a * b.recip(); }
    friend Jet operator/(Jet a, double c) { return a *= 1.0 / c; }
    friend Jet operator/(double c, const Jet& a) { Jet r = a.recip(); r *= c; return r; }

    // y = f(u) given f, f', f'', f''' at u.v
    Jet compose(double f0, double f1, double f2, double f3) const
    {
        Jet r(f0, n, order);
        if (order >= 1)
            for (int i = 0; i < n; ++i) r.g[i] = f1 * g[i];
        if (order >= 2)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) r.H[i * n + j] = f2 * g[i] * g[j] + f1 * H[i * n + j];
        if (order >= 3)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        const int ijk = (i * n + j) * n + k;
                        r.T[ijk] = f3 * g[i] * g[j] * g[k] +
                                   f2 * (H[i * n + j] * g[k] + H[i * n + k] * g[j] + H[j * n + k] * g[i]) +
                                   f1 * T[ijk];
                    }
        return r;
    }

    Jet recip() const
    {
        const double u = v;
        return compose(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u), -6.0 / (u * u * u * u));
    }

private:
    void alloc()
    {
        g.assign(order >= 1 ? n : 0, 0.0);
        H.assign(order >= 2 ? n * n : 0, 0.0);
        T.assign(order >= 3 ? n * n * n : 0, 0.0);
    }
    static void add(std::vector<double>& a, const std::vector<double>& b, double s)
    {
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) a[i] += s * b[i];
    }
};

inline Jet exp(const Jet& u)
{
    const double e = std::exp(u.v);
    return u.compose(e, e, e, e);
}

inline Jet tanh(const Jet& u)
{
    const double t = std::tanh(u.v);
    const double s = 1.0 - t * t;  // sech^2
    return u.compose(t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0));
}

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

// Constant with the same shape as `like`.
inline double constant_like(double, double c) { return c; }
inline Jet constant_like(const Jet& like, double c) { return Jet(c, like.n, like.order); }

}  // namespace mrn
