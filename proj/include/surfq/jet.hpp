#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "surfq/errors.hpp"

namespace surfq {

/// Truncated bivariate Taylor polynomial about a base point (u1, u2).
///
/// Coefficients are stored as c(i, j) = d1^i d2^j f / (i! j!) for i + j <= 3.
/// Every jet carries the total order up to which its coefficients are valid;
/// arithmetic takes the minimum of the operand orders and differentiation
/// lowers it by one, so truncated information is never silently reused.
class Jet {
public:
    static constexpr int kMaxOrder = 3;
    static constexpr std::size_t kSize = 10;

    Jet() = default;

    static Jet constant(double v)
    {
        Jet j;
        j.c_[0] = v;
        return j;
    }

    /// The coordinate u_axis (axis 0 or 1) expanded about `base`.
    static Jet variable(int axis, double base)
    {
        Jet j;
        j.c_[0] = base;
        j.c_[index(axis == 0 ? 1 : 0, axis == 0 ? 0 : 1)] = 1.0;
        return j;
    }

    static constexpr std::size_t index(int i, int j)
    {
        const int n = i + j;
        return static_cast<std::size_t>(n * (n + 1) / 2 + j);
    }

    int order() const { return order_; }
    double value() const { return c_[0]; }

    /// Taylor coefficient d1^i d2^j f / (i! j!).
    double coeff(int i, int j) const { return c_[index(i, j)]; }
    double& coeff(int i, int j) { return c_[index(i, j)]; }

    /// Partial derivative d1^i d2^j f at the base point.
    double derivative(int i, int j) const
    {
        return coeff(i, j) * factorial(i) * factorial(j);
    }

    /// Jet of d f / d u_axis, valid to one order less.
    Jet differentiate(int axis) const
    {
        Jet r;
        r.order_ = std::max(order_ - 1, 0);
        for (int n = 0; n <= r.order_; ++n) {
            for (int j = 0; j <= n; ++j) {
                const int i = n - j;
                if (axis == 0) {
                    r.coeff(i, j) = (i + 1) * coeff(i + 1, j);
                } else {
                    r.coeff(i, j) = (j + 1) * coeff(i, j + 1);
                }
            }
        }
        return r;
    }

    Jet truncated(int order) const
    {
        Jet r = *this;
        r.order_ = std::min(order_, order);
        r.clear_above_order();
        return r;
    }

    Jet operator-() const
    {
        Jet r = *this;
        for (auto& v : r.c_) v = -v;
        return r;
    }

    Jet& operator+=(const Jet& o)
    {
        for (std::size_t k = 0; k < kSize; ++k) c_[k] += o.c_[k];
        order_ = std::min(order_, o.order_);
        clear_above_order();
        return *this;
    }
    Jet& operator-=(const Jet& o) { return *this += -o; }
    Jet& operator*=(const Jet& o) { return *this = *this * o; }
    Jet& operator/=(const Jet& o) { return *this = *this / o; }
    Jet& operator+=(double v) { c_[0] += v; return *this; }
    Jet& operator*=(double v)
    {
        for (auto& x : c_) x *= v;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double b) { return a += b; }
    friend Jet operator+(double a, Jet b) { return b += a; }
    friend Jet operator-(Jet a, double b) { return a += -b; }
    friend Jet operator-(double a, const Jet& b) { return (-b) + a; }
    friend Jet operator*(Jet a, double b) { return a *= b; }
    friend Jet operator*(double a, Jet b) { return b *= a; }
    friend Jet operator/(Jet a, double b) { return a *= 1.0 / b; }

    friend Jet operator*(const Jet& a, const Jet& b)
    {
        Jet r;
        r.order_ = std::min(a.order_, b.order_);
        for (int n = 0; n <= r.order_; ++n) {
            for (int j = 0; j <= n; ++j) {
                const int i = n - j;
                double s = 0.0;
                for (int k = 0; k <= i; ++k) {
                    for (int l = 0; l <= j; ++l) {
                        s += a.coeff(k, l) * b.coeff(i - k, j - l);
                    }
                }
                r.coeff(i, j) = s;
            }
        }
        return r;
    }

    /// Caller guarantees b.value() != 0.
    friend Jet operator/(const Jet& a, const Jet& b)
    {
        Jet r;
        r.order_ = std::min(a.order_, b.order_);
        const double b0 = b.value();
        for (int n = 0; n <= r.order_; ++n) {
            for (int j = 0; j <= n; ++j) {
                const int i = n - j;
                double s = a.coeff(i, j);
                for (int k = 0; k <= i; ++k) {
                    for (int l = 0; l <= j; ++l) {
                        if (k == 0 && l == 0) continue;
                        s -= b.coeff(k, l) * r.coeff(i - k, j - l);
                    }
                }
                r.coeff(i, j) = s / b0;
            }
        }
        return r;
    }

    friend Jet operator/(double a, const Jet& b) { return Jet::constant(a) / b; }

    /// f(this) given f and its first three derivatives at value().
    Jet compose(const std::array<double, 4>& derivs) const
    {
        Jet delta = *this;
        delta.c_[0] = 0.0;
        Jet result = Jet::constant(derivs[0]);
        result.order_ = order_;
        Jet power = Jet::constant(1.0);
        double fact = 1.0;
        for (int k = 1; k <= order_; ++k) {
            power = power * delta;
            fact *= k;
            result += (derivs[static_cast<std::size_t>(k)] / fact) * power;
        }
        return result;
    }

    bool is_constant() const
    {
        for (std::size_t k = 1; k < kSize; ++k)
            if (c_[k] != 0.0) return false;
        return true;
    }

private:
    static double factorial(int n)
    {
        double f = 1.0;
        for (int k = 2; k <= n; ++k) f *= k;
        return f;
    }

    void clear_above_order()
    {
        for (int n = order_ + 1; n <= kMaxOrder; ++n)
            for (int j = 0; j <= n; ++j) coeff(n - j, j) = 0.0;
    }

    std::array<double, kSize> c_{};
    int order_ = kMaxOrder;
};

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

inline Jet sin(const Jet& x)
{
    const double s = std::sin(x.value()), c = std::cos(x.value());
    return x.compose({s, c, -s, -c});
}

inline Jet cos(const Jet& x)
{
    const double s = std::sin(x.value()), c = std::cos(x.value());
    return x.compose({c, -s, -c, s});
}

inline Jet tan(const Jet& x)
{
    const double t = std::tan(x.value());
    const double d1 = 1.0 + t * t;
    return x.compose({t, d1, 2.0 * t * d1, 2.0 * d1 * (1.0 + 3.0 * t * t)});
}

inline Jet sinh(const Jet& x)
{
    const double s = std::sinh(x.value()), c = std::cosh(x.value());
    return x.compose({s, c, s, c});
}

inline Jet cosh(const Jet& x)
{
    const double s = std::sinh(x.value()), c = std::cosh(x.value());
    return x.compose({c, s, c, s});
}

inline Jet tanh(const Jet& x)
{
    const double t = std::tanh(x.value());
    const double d1 = 1.0 - t * t;
    return x.compose({t, d1, -2.0 * t * d1, -2.0 * d1 * (1.0 - 3.0 * t * t)});
}

inline Jet exp(const Jet& x)
{
    const double e = std::exp(x.value());
    return x.compose({e, e, e, e});
}

/// Caller guarantees x.value() > 0.
inline Jet log(const Jet& x)
{
    const double v = x.value();
    return x.compose({std::log(v), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)});
}

/// Caller guarantees x.value() > 0 (or == 0 for a constant jet).
inline Jet sqrt(const Jet& x)
{
    const double v = x.value();
    const double s = std::sqrt(v);
    if (v == 0.0) return Jet::constant(0.0).truncated(x.order());
    return x.compose({s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)});
}

/// x^p for a real constant exponent; caller guarantees x.value() > 0 unless p is a non-negative integer.
inline Jet pow(const Jet& x, double p)
{
    const double v = x.value();
    if (p == std::floor(p) && std::abs(p) <= 64.0) {
        const int n = static_cast<int>(p);
        Jet base = n < 0 ? 1.0 / x : x;
        Jet r = Jet::constant(1.0).truncated(x.order());
        for (int k = 0; k < std::abs(n); ++k) r = r * base;
        return r;
    }
    const double f0 = std::pow(v, p);
    return x.compose({f0, p * f0 / v, p * (p - 1) * f0 / (v * v), p * (p - 1) * (p - 2) * f0 / (v * v * v)});
}

/// atan2(y, x) = theta0 + atan((x0 y - y0 x) / (x0 x + y0 y)); the inner argument vanishes at the base.
inline Jet atan2(const Jet& y, const Jet& x)
{
    const double x0 = x.value(), y0 = y.value();
    const Jet num = x0 * y - y0 * x;
    const Jet den = x0 * x + y0 * y;
    const Jet t = num / den;
    // atan(t) for t with zero constant term: t - t^3 / 3
    Jet r = t - (t * t * t) / 3.0;
    r += std::atan2(y0, x0);
    return r;
}

}  // namespace surfq
