#pragma once

// Forward-mode automatic differentiation with a fixed number of tangent
// directions.  Sufficient for the closed-form wavefunctions and metrics used
// by the built-in models: every model evaluator is a template over the scalar
// type, so the same code yields values (T = double) and exact parameter
// gradients (T = Dual<N>).

#include <array>
#include <cmath>
#include <cstddef>

namespace qgt {

template <std::size_t N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants

    static Dual variable(double value, std::size_t slot) {
        Dual x(value);
        x.d[slot] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }
};

template <std::size_t N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <std::size_t N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator+(double b, Dual<N> a) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N> Dual<N> operator-(double b, const Dual<N>& a) { return Dual<N>(b) - a; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, double b) {
    a.v *= b;
    for (auto& x : a.d) x *= b;
    return a;
}
template <std::size_t N> Dual<N> operator*(double b, Dual<N> a) { return a * b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N> Dual<N> operator/(double b, const Dual<N>& a) { return Dual<N>(b) / a; }

template <std::size_t N>
Dual<N> operator-(Dual<N> a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
}

template <std::size_t N> bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N> bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <std::size_t N> bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <std::size_t N> bool operator>(const Dual<N>& a, double b) { return a.v > b; }

namespace detail {
// Chain rule helper: f(a) with f'(a) = slope.
template <std::size_t N>
Dual<N> chain(const Dual<N>& a, double value, double slope) {
    Dual<N> r(value);
    for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
    return r;
}
}  // namespace detail

template <std::size_t N>
Dual<N> exp(const Dual<N>& a) {
    const double e = std::exp(a.v);
    return detail::chain(a, e, e);
}
template <std::size_t N>
Dual<N> log(const Dual<N>& a) {
    return detail::chain(a, std::log(a.v), 1.0 / a.v);
}
template <std::size_t N>
Dual<N> sqrt(const Dual<N>& a) {
    const double s = std::sqrt(a.v);
    return detail::chain(a, s, 0.5 / s);
}
template <std::size_t N>
Dual<N> pow(const Dual<N>& a, double p) {
    const double r = std::pow(a.v, p);
    return detail::chain(a, r, p * std::pow(a.v, p - 1.0));
}
template <std::size_t N>
Dual<N> atan(const Dual<N>& a) {
    return detail::chain(a, std::atan(a.v), 1.0 / (1.0 + a.v * a.v));
}
template <std::size_t N>
Dual<N> sin(const Dual<N>& a) {
    return detail::chain(a, std::sin(a.v), std::cos(a.v));
}
template <std::size_t N>
Dual<N> cos(const Dual<N>& a) {
    return detail::chain(a, std::cos(a.v), -std::sin(a.v));
}
template <std::size_t N>
Dual<N> abs(const Dual<N>& a) {
    return a.v < 0.0 ? -a : a;
}

// Uniform access so templated evaluators can be written once.
inline double value_of(double x) { return x; }
template <std::size_t N> double value_of(const Dual<N>& x) { return x.v; }

}  // namespace qgt
