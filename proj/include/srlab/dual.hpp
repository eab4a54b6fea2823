#pragma once

#include <cmath>

namespace srlab {

/// Forward-mode dual number. Nesting Dual<Dual<double>> yields exact mixed
/// second derivatives, which is how generic (user supplied, scalar templated)
/// coordinate maps obtain their jets without truncation error.
template <class T>
struct Dual {
    T a{};  // value
    T b{};  // derivative

    Dual() = default;
    Dual(T value) : a(value), b(T{}) {}  // NOLINT: implicit promotion intended
    Dual(T value, T deriv) : a(value), b(deriv) {}

    Dual operator-() const { return {-a, -b}; }

    Dual& operator+=(const Dual& o) {
        a += o.a;
        b += o.b;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        a -= o.a;
        b -= o.b;
        return *this;
    }
};

template <class T>
Dual<T> operator+(Dual<T> x, const Dual<T>& y) { return {x.a + y.a, x.b + y.b}; }
template <class T>
Dual<T> operator-(Dual<T> x, const Dual<T>& y) { return {x.a - y.a, x.b - y.b}; }
template <class T>
Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
    return {x.a * y.a, x.a * y.b + x.b * y.a};
}
template <class T>
Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
    T q = x.a / y.a;
    return {q, (x.b - q * y.b) / y.a};
}

template <class T>
Dual<T> operator+(double s, const Dual<T>& x) { return Dual<T>(T(s)) + x; }
template <class T>
Dual<T> operator+(const Dual<T>& x, double s) { return x + Dual<T>(T(s)); }
template <class T>
Dual<T> operator-(double s, const Dual<T>& x) { return Dual<T>(T(s)) - x; }
template <class T>
Dual<T> operator-(const Dual<T>& x, double s) { return x - Dual<T>(T(s)); }
template <class T>
Dual<T> operator*(double s, const Dual<T>& x) { return Dual<T>(T(s)) * x; }
template <class T>
Dual<T> operator*(const Dual<T>& x, double s) { return x * Dual<T>(T(s)); }
template <class T>
Dual<T> operator/(double s, const Dual<T>& x) { return Dual<T>(T(s)) / x; }
template <class T>
Dual<T> operator/(const Dual<T>& x, double s) { return x / Dual<T>(T(s)); }

using std::atan2;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
    T r = sqrt(x.a);
    return {r, x.b / (2.0 * r)};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
    T e = exp(x.a);
    return {e, e * x.b};
}
template <class T>
Dual<T> log(const Dual<T>& x) { return {log(x.a), x.b / x.a}; }
template <class T>
Dual<T> sin(const Dual<T>& x) { return {sin(x.a), cos(x.a) * x.b}; }
template <class T>
Dual<T> cos(const Dual<T>& x) { return {cos(x.a), T{} - sin(x.a) * x.b}; }
template <class T>
Dual<T> atan2(const Dual<T>& y, const Dual<T>& x) {
    T denom = x.a * x.a + y.a * y.a;
    return {atan2(y.a, x.a), (x.a * y.b - y.a * x.b) / denom};
}

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

inline double value_of(double x) { return x; }
template <class T>
auto value_of(const Dual<T>& x) { return value_of(x.a); }

}  // namespace srlab
