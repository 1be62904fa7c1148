#pragma once

#include <cmath>
#include <concepts>
#include <limits>

#include "parabolica/bigfloat.hpp"

namespace parabolica {

template <class R>
struct real_traits;

template <>
struct real_traits<double> {
    static double epsilon() { return std::numeric_limits<double>::epsilon(); }
    static double from_double(double x) { return x; }
    static double to_double(double x) { return x; }
    static constexpr const char* name() { return "f64"; }
};

template <>
struct real_traits<BigFloat> {
    static BigFloat epsilon() {
        // 2^(1-p) for the current default mantissa width.
        return pow(BigFloat(2.0), 1 - static_cast<long>(BigFloat::default_precision()));
    }
    static BigFloat from_double(double x) { return BigFloat(x); }
    static double to_double(const BigFloat& x) { return x.to_double(); }
    static constexpr const char* name() { return "mpfr"; }
};

template <class R>
concept RealScalar = requires(R a, R b) {
    { a + b } -> std::convertible_to<R>;
    { a - b } -> std::convertible_to<R>;
    { a * b } -> std::convertible_to<R>;
    { a / b } -> std::convertible_to<R>;
    { a < b } -> std::convertible_to<bool>;
    real_traits<R>::epsilon();
};

/// Evaluation is refused this close to a component endpoint: 1e3 ulps of the
/// active scalar type, so the extended-precision mode shrinks the guard.
template <class R>
R endpoint_guard() {
    return R(1000) * real_traits<R>::epsilon();
}

template <class R>
double dbl(const R& x) {
    return real_traits<R>::to_double(x);
}

} // namespace parabolica
