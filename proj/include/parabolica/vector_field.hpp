#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "parabolica/errors.hpp"
#include "parabolica/real.hpp"

namespace parabolica {

template <class R>
struct FieldZero {
    R location;
    int multiplicity = 1;
};

namespace detail {

template <class R>
class FieldImpl {
  public:
    virtual ~FieldImpl() = default;
    virtual R value(const R& x) const = 0;
    virtual R deriv(const R& x) const = 0;
    virtual R deriv2(const R& x) const = 0;
    virtual const std::vector<FieldZero<R>>& zeros() const = 0;
    virtual const char* kind() const = 0;
};

template <class R>
R horner(const std::vector<R>& c, const R& x) {
    R acc(0);
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
    return acc;
}

template <class R>
std::vector<R> poly_derivative(const std::vector<R>& c) {
    std::vector<R> d;
    for (std::size_t i = 1; i < c.size(); ++i) d.push_back(R(static_cast<long>(i)) * c[i]);
    if (d.empty()) d.push_back(R(0));
    return d;
}

template <class R>
class PolyFieldImpl final : public FieldImpl<R> {
  public:
    PolyFieldImpl(std::vector<R> coeffs, std::vector<FieldZero<R>> zeros)
        : c_(std::move(coeffs)), d1_(poly_derivative(c_)), d2_(poly_derivative(d1_)),
          zeros_(std::move(zeros)) {}

    R value(const R& x) const override { return horner(c_, x); }
    R deriv(const R& x) const override { return horner(d1_, x); }
    R deriv2(const R& x) const override { return horner(d2_, x); }
    const std::vector<FieldZero<R>>& zeros() const override { return zeros_; }
    const char* kind() const override { return "poly_field"; }

    const std::vector<R>& coefficients() const { return c_; }

  private:
    std::vector<R> c_, d1_, d2_;
    std::vector<FieldZero<R>> zeros_;
};

/// c * prod (x - r_i)^{m_i}, evaluated in factored form: the monomial
/// expansion cancels catastrophically near the far roots, while the factored
/// product and its product-rule derivatives stay accurate at every root.
template <class R>
class ProductFieldImpl final : public FieldImpl<R> {
  public:
    ProductFieldImpl(R coefficient, std::vector<FieldZero<R>> factors)
        : coefficient_(coefficient), factors_(std::move(factors)) {}

    R value(const R& x) const override {
        R acc = coefficient_;
        for (const auto& f : factors_)
            for (int k = 0; k < f.multiplicity; ++k) acc = acc * (x - f.location);
        return acc;
    }

    R deriv(const R& x) const override {
        // sum over j of m_j (x-r_j)^{m_j - 1} prod_{i != j} (x-r_i)^{m_i}
        R acc(0);
        for (std::size_t j = 0; j < factors_.size(); ++j) {
            R term = coefficient_ * R(factors_[j].multiplicity) *
                     int_pow(x - factors_[j].location, factors_[j].multiplicity - 1);
            for (std::size_t i = 0; i < factors_.size(); ++i)
                if (i != j) term = term * int_pow(x - factors_[i].location, factors_[i].multiplicity);
            acc += term;
        }
        return acc;
    }

    R deriv2(const R& x) const override {
        R acc(0);
        for (std::size_t j = 0; j < factors_.size(); ++j) {
            long mj = factors_[j].multiplicity;
            if (mj >= 2) {
                R term = coefficient_ * R(mj) * R(mj - 1) *
                         int_pow(x - factors_[j].location, mj - 2);
                for (std::size_t i = 0; i < factors_.size(); ++i)
                    if (i != j)
                        term = term * int_pow(x - factors_[i].location, factors_[i].multiplicity);
                acc += term;
            }
            for (std::size_t k = 0; k < factors_.size(); ++k) {
                if (k == j) continue;
                R term = coefficient_ * R(mj) * R(factors_[k].multiplicity) *
                         int_pow(x - factors_[j].location, mj - 1) *
                         int_pow(x - factors_[k].location, factors_[k].multiplicity - 1);
                for (std::size_t i = 0; i < factors_.size(); ++i)
                    if (i != j && i != k)
                        term = term * int_pow(x - factors_[i].location, factors_[i].multiplicity);
                acc += term;
            }
        }
        return acc;
    }

    const std::vector<FieldZero<R>>& zeros() const override { return factors_; }
    const char* kind() const override { return "product_field"; }

    const R& coefficient() const { return coefficient_; }

  private:
    static R int_pow(const R& x, long n) {
        R acc(1);
        for (long i = 0; i < n; ++i) acc = acc * x;
        return acc;
    }

    R coefficient_;
    std::vector<FieldZero<R>> factors_;
};

/// s(x) * (x - q1)(x - q2)(x - q3) inside [support_lo, support_hi], zero
/// outside, with s a C^1 cubic Hermite spline vanishing (with slope 0) at the
/// support edges. Used for locally supported generators; not part of the
/// public field format.
template <class R>
class CompactCubicFieldImpl final : public FieldImpl<R> {
  public:
    CompactCubicFieldImpl(std::vector<R> knots, std::vector<R> values, std::vector<R> slopes,
                          std::array<R, 3> roots)
        : knots_(std::move(knots)), values_(std::move(values)), slopes_(std::move(slopes)) {
        if (knots_.size() < 2 || knots_.size() != values_.size() || knots_.size() != slopes_.size())
            throw ConfigError("compact field: knot/value/slope arrays must match");
        zeros_ = {FieldZero<R>{roots[0], 1}, FieldZero<R>{roots[1], 1}, FieldZero<R>{roots[2], 1}};
    }

    R value(const R& x) const override {
        if (x <= knots_.front() || x >= knots_.back()) return R(0);
        return spline(x, 0) * cubic(x, 0);
    }
    R deriv(const R& x) const override {
        if (x <= knots_.front() || x >= knots_.back()) return R(0);
        return spline(x, 1) * cubic(x, 0) + spline(x, 0) * cubic(x, 1);
    }
    R deriv2(const R& x) const override {
        if (x <= knots_.front() || x >= knots_.back()) return R(0);
        return spline(x, 2) * cubic(x, 0) + R(2) * spline(x, 1) * cubic(x, 1) +
               spline(x, 0) * cubic(x, 2);
    }
    const std::vector<FieldZero<R>>& zeros() const override { return zeros_; }
    const char* kind() const override { return "compact_cubic_field"; }

    const std::vector<R>& knots() const { return knots_; }
    const std::vector<R>& values() const { return values_; }
    const std::vector<R>& slopes() const { return slopes_; }

  private:
    R cubic(const R& x, int order) const {
        const R &a = zeros_[0].location, &b = zeros_[1].location, &c = zeros_[2].location;
        switch (order) {
            case 0: return (x - a) * (x - b) * (x - c);
            case 1: return (x - b) * (x - c) + (x - a) * (x - c) + (x - a) * (x - b);
            default: return R(2) * ((x - a) + (x - b) + (x - c));
        }
    }

    R spline(const R& x, int order) const {
        std::size_t i = 0;
        while (i + 2 < knots_.size() && x > knots_[i + 1]) ++i;
        R h = knots_[i + 1] - knots_[i];
        R u = (x - knots_[i]) / h;
        R v0 = values_[i], v1 = values_[i + 1];
        R m0 = slopes_[i] * h, m1 = slopes_[i + 1] * h;
        R u2 = u * u, u3 = u2 * u;
        switch (order) {
            case 0:
                return (R(2) * u3 - R(3) * u2 + R(1)) * v0 + (u3 - R(2) * u2 + u) * m0 +
                       (R(-2) * u3 + R(3) * u2) * v1 + (u3 - u2) * m1;
            case 1:
                return ((R(6) * u2 - R(6) * u) * v0 + (R(3) * u2 - R(4) * u + R(1)) * m0 +
                        (R(-6) * u2 + R(6) * u) * v1 + (R(3) * u2 - R(2) * u) * m1) /
                       h;
            default:
                return ((R(12) * u - R(6)) * v0 + (R(6) * u - R(4)) * m0 +
                        (R(-12) * u + R(6)) * v1 + (R(6) * u - R(2)) * m1) /
                       (h * h);
        }
    }

    std::vector<R> knots_, values_, slopes_;
    std::vector<FieldZero<R>> zeros_;
};

} // namespace detail

/// A closed-form vector field on [0,1] with a declared zero set. Generator
/// for flow-time maps.
template <class R>
class VectorField {
  public:
    VectorField() = default;

    static VectorField poly(std::vector<R> coeffs, std::vector<FieldZero<R>> zeros = {}) {
        return VectorField(std::make_shared<detail::PolyFieldImpl<R>>(std::move(coeffs), std::move(zeros)));
    }
    static VectorField product(R coefficient, std::vector<FieldZero<R>> factors) {
        return VectorField(
            std::make_shared<detail::ProductFieldImpl<R>>(coefficient, std::move(factors)));
    }
    static VectorField compact_cubic(std::vector<R> knots, std::vector<R> values,
                                     std::vector<R> slopes, std::array<R, 3> roots) {
        return VectorField(std::make_shared<detail::CompactCubicFieldImpl<R>>(
            std::move(knots), std::move(values), std::move(slopes), roots));
    }

    R operator()(const R& x) const { return impl_->value(x); }
    R deriv(const R& x) const { return impl_->deriv(x); }
    R deriv2(const R& x) const { return impl_->deriv2(x); }
    const std::vector<FieldZero<R>>& zeros() const { return impl_->zeros(); }
    const char* kind() const { return impl_->kind(); }
    bool valid() const { return static_cast<bool>(impl_); }

    /// True when every declared zero is of order >= 2 (parabolic time-1 map).
    bool all_zeros_parabolic() const {
        for (const auto& z : impl_->zeros())
            if (z.multiplicity < 2) return false;
        return true;
    }

    const detail::FieldImpl<R>* impl() const { return impl_.get(); }

  private:
    explicit VectorField(std::shared_ptr<const detail::FieldImpl<R>> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const detail::FieldImpl<R>> impl_;
};

} // namespace parabolica
