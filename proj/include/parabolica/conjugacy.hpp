#pragma once

#include <memory>
#include <utility>

#include "parabolica/analysis.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/flow.hpp"

namespace parabolica {

namespace detail {

/// h(x) = A^{-1}(k A(x)), extended by fixing the endpoints: conjugates f to
/// f^k by the Abel cocycle. Not parabolic at the endpoints (Dh -> 1/k at the
/// attracting end), which is fine for a conjugator.
template <class R>
class PowerConjugacyNode final : public DiffeoNode<R> {
  public:
    PowerConjugacyNode(std::shared_ptr<const FatouChart<R>> chart, long k)
        : chart_(std::move(chart)), k_(k) {}

    R value(const R& x) const override {
        if (outside(x)) return clamp_edge(x);
        return chart_->inverse(R(k_) * chart_->eval(x).a);
    }

    Jet2<R> jet(const R& x) const override {
        if (outside(x)) return {clamp_edge(x), R(1), R(0), true};
        ChartEval<R> ax = chart_->eval(x);
        R y = chart_->inverse(R(k_) * ax.a);
        ChartEval<R> ay = chart_->eval(y);
        R d1 = R(k_) * ax.d1 / ay.d1;
        R nl = ax.nonlin - ay.nonlin * d1;
        return {y, d1, nl * d1, true};
    }

    std::optional<R> closed_inverse(const R& y) const override {
        if (outside(y)) return clamp_edge(y);
        return chart_->inverse(chart_->eval(y).a / R(k_));
    }

    const char* kind() const override { return "power_conjugacy"; }
    const FatouChart<R>& chart() const { return *chart_; }
    long exponent() const { return k_; }

  private:
    bool outside(const R& x) const {
        R g = R(4) * endpoint_guard<R>();
        return !(x > chart_->lo() + g) || !(x < chart_->hi() - g);
    }
    R clamp_edge(const R& x) const {
        // endpoints stay fixed; guard-zone points collapse monotonically
        return x;
    }

    std::shared_ptr<const FatouChart<R>> chart_;
    long k_;
};

} // namespace detail

/// Conjugacy h with h o f o h^{-1} = f^k for a flowable single-component f;
/// refuses maps whose lower/upper flows visibly disagree (root defect above
/// the tolerance), since the construction needs a single generating flow.
template <class R>
Diffeo<R> conjugacy_from_flows(const Diffeo<R>& f, long k, R p = R(0.5),
                               R flowable_tol = R(1e-4), ChartOptions<R> opt = {}) {
    if (k < 1) throw DomainError("conjugacy_from_flows: k must be >= 1");
    auto grid = uniform_grid(R(0.1), R(0.9), 16);
    R defect = root_defect(f, 2, grid, opt);
    if (!(defect <= flowable_tol))
        throw DomainError("conjugacy_from_flows: map is not flowable to tolerance (defect " +
                          std::to_string(dbl(defect)) + ")");
    auto chart = chart_for(f, R(0), R(1), ChartSide::lower, p, opt);
    return Diffeo<R>(std::make_shared<detail::PowerConjugacyNode<R>>(std::move(chart), k));
}

/// f_delta: a copy of f squeezed onto [delta, 1] by the affine chart, glued
/// with the prescribed small map on [0, delta]. C^1 continuity at delta is
/// checked (both one-sided derivatives must be 1).
template <class R>
Diffeo<R> insert_scaled(const Diffeo<R>& f, R delta, const Diffeo<R>& h_small,
                        R deriv_tol = R(1e-6)) {
    using std::abs;
    if (!(delta > R(0) && delta < R(1))) throw DomainError("insert_scaled: delta out of range");
    R dh1 = h_small.deriv(R(1));
    R df0 = f.deriv(R(0));
    if (abs(dh1 - R(1)) > deriv_tol || abs(df0 - R(1)) > deriv_tol)
        throw InvalidTreeError("insert_scaled: derivative mismatch at the gluing point");
    return piecewise_glue<R>({R(0), delta, R(1)}, {h_small, f});
}

} // namespace parabolica
