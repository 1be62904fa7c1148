#pragma once

#include <vector>

#include "parabolica/analysis.hpp"
#include "parabolica/bump.hpp"
#include "parabolica/diffeo.hpp"

namespace parabolica {

/// rho*g + (1-rho)*f with monotonicity verified on a refinement grid over
/// the bump support (the construction is only proved valid for small eps;
/// here it is checked, and an invalid blend is rejected).
template <class R>
Diffeo<R> blend(Diffeo<R> f, Diffeo<R> g, BumpFn<R> bump, std::size_t check_n = 1024) {
    auto node = std::make_shared<detail::BlendNode<R>>(std::move(f), std::move(g), bump);
    Diffeo<R> h(node);
    R lo = bump.support_lo() < R(0) ? R(0) : bump.support_lo();
    R hi = bump.support_hi() > R(1) ? R(1) : bump.support_hi();
    for (const R& x : uniform_grid(lo, hi, check_n))
        if (!(h.deriv(x) > R(0)))
            throw InvalidTreeError("rejected blend: derivative <= 0 on check grid");
    return h;
}

enum class GermReplaceMode {
    c1, // families 1/2 with lambda = +-1, chosen by tangency
    c2  // three-case rule with lambda = D2 f(a)/2 when D2 f(a) != 0
};

namespace detail {

template <class R>
Diffeo<R> germ_for_point(const Diffeo<R>& f, const FixedPointInfo<R>& p, GermReplaceMode mode,
                         R d2_zero_tol) {
    using std::abs;
    // The relevant side: right of the point except at x = 1.
    int side_sign = p.sign_right != 0 ? p.sign_right : -1;
    bool above = false;
    if (p.location == R(1)) {
        // one-sided from the left; recompute from a probe
        above = f.displacement(R(1) - R(1e-4)) > R(0);
    } else {
        above = side_sign > 0;
    }
    bool transversal = p.type == Tangency::transversal;

    if (mode == GermReplaceMode::c1) {
        if (transversal) return germ_q(2, above ? R(1) : R(-1), p.location);
        return germ_q(1, above ? R(1) : R(-1), p.location);
    }

    R d2 = p.d2f ? *p.d2f : R(0);
    if (abs(d2) >= d2_zero_tol) return germ_q(1, d2 / R(2), p.location);
    if (transversal) return germ_q(2, above ? R(1) : R(-1), p.location);
    return germ_q(3, above ? R(1) : R(-1), p.location);
}

} // namespace detail

/// Blends f with the matching q-germ near every fixed point; the fixed set
/// never grows (each germ agrees with f's tangency data at the point).
template <class R>
Diffeo<R> germ_replace(const Diffeo<R>& f, R eps, GermReplaceMode mode = GermReplaceMode::c2,
                       BumpOrder order = BumpOrder::C1, R d2_zero_tol = R(1e-9)) {
    using std::abs;
    auto report = fixed_points(f);
    if (report.identity_on_interval)
        throw InvalidTreeError("germ_replace: map is the identity at grid resolution");
    if (!report.unresolved.empty())
        throw InvalidTreeError("germ_replace: unresolved fixed-point cluster");

    for (std::size_t i = 0; i + 1 < report.points.size(); ++i) {
        R gap = report.points[i + 1].location - report.points[i].location;
        if (gap < R(2) * eps)
            throw DomainError("germ_replace: fixed points are not eps-separated");
    }

    Diffeo<R> out = f;
    for (const auto& p : report.points) {
        Diffeo<R> germ = detail::germ_for_point(f, p, mode, d2_zero_tol);
        // Keep the germ singularity clear of the bump support.
        const auto& g = static_cast<const detail::GermQNode<R>&>(germ.node());
        R lam = abs(g.lambda());
        if (lam > R(0)) {
            int fam = g.family();
            R radius = eps; // support radius bound for both variants
            R margin = fam == 1 ? lam * radius
                                : (fam == 2 ? lam * radius * radius : lam * radius * radius * radius);
            if (!(margin < R(0.5)))
                throw DomainError("germ_replace: singularity inside working neighborhood");
        }
        out = blend(out, germ, BumpFn<R>::standard(p.location, eps, order));
    }
    return out;
}

namespace detail {

/// Degree-d Bernstein reconstruction of Df on [eps, 1-eps], integrated from
/// f(eps). The primitive is the degree-(d+1) Bernstein form whose
/// coefficients are the scaled cumulative sums of the derivative samples.
template <class R>
class BernsteinMapNode final : public DiffeoNode<R> {
  public:
    BernsteinMapNode(R eps, R anchor_value, std::vector<R> deriv_samples)
        : eps_(eps), f_eps_(anchor_value), dsamples_(std::move(deriv_samples)) {
        if (dsamples_.size() < 2) throw ConfigError("bernstein map: need degree >= 1");
        R width = R(1) - R(2) * eps_;
        cum_.assign(dsamples_.size() + 1, R(0));
        for (std::size_t i = 0; i < dsamples_.size(); ++i) cum_[i + 1] = cum_[i] + dsamples_[i];
        R scale = width / R(static_cast<long>(dsamples_.size()));
        for (auto& c : cum_) c = c * scale;
    }

    R value(const R& x) const override {
        R s = (x - eps_) / (R(1) - R(2) * eps_);
        return f_eps_ + de_casteljau(cum_, s);
    }

    Jet2<R> jet(const R& x) const override {
        R width = R(1) - R(2) * eps_;
        R s = (x - eps_) / width;
        R d1 = de_casteljau(dsamples_, s);
        std::vector<R> diff(dsamples_.size() - 1);
        for (std::size_t i = 0; i + 1 < dsamples_.size(); ++i)
            diff[i] = (dsamples_[i + 1] - dsamples_[i]) * R(static_cast<long>(dsamples_.size() - 1));
        R d2 = de_casteljau(diff, s) / width;
        return {value(x), d1, d2, true};
    }

    const char* kind() const override { return "bernstein_map"; }
    const R& eps() const { return eps_; }
    const R& anchor_value() const { return f_eps_; }
    const std::vector<R>& deriv_samples() const { return dsamples_; }

  private:
    static R de_casteljau(const std::vector<R>& coef, const R& s) {
        std::vector<R> b = coef;
        R t = R(1) - s;
        for (std::size_t r = 1; r < coef.size(); ++r)
            for (std::size_t i = 0; i + r < coef.size(); ++i) b[i] = t * b[i] + s * b[i + 1];
        return b[0];
    }

    R eps_, f_eps_;
    std::vector<R> dsamples_; // Df at the Bernstein nodes (degree+1 values)
    std::vector<R> cum_;      // primitive coefficients, degree+2 values
};

} // namespace detail

/// Replaces Df on [eps, 1-eps] by its Bernstein polynomial (integrated from
/// f(eps)), bump-interpolated back to f on [eps, 2*eps] and [1-2*eps, 1-eps].
/// Requires f without interior fixed points; a too-low degree is rejected by
/// the blend validity check.
template <class R>
Diffeo<R> bernstein_smooth(const Diffeo<R>& f, R eps, std::size_t degree,
                           BumpOrder order = BumpOrder::C1) {
    auto report = fixed_points(f);
    if (report.points.size() != 2 || !report.unresolved.empty())
        throw DomainError("bernstein_smooth: map must have no interior fixed point");
    if (!(eps > R(0) && eps < R(0.25))) throw DomainError("bernstein_smooth: eps out of range");

    std::vector<R> samples;
    samples.reserve(degree + 1);
    R width = R(1) - R(2) * eps;
    for (std::size_t k = 0; k <= degree; ++k)
        samples.push_back(
            f.deriv(eps + width * R(static_cast<long>(k)) / R(static_cast<long>(degree))));
    Diffeo<R> smooth(std::make_shared<detail::BernsteinMapNode<R>>(eps, f(eps), std::move(samples)));

    BumpFn<R> window = BumpFn<R>::window(eps, R(2) * eps, R(1) - R(2) * eps, R(1) - eps, order);
    return blend(f, smooth, window);
}

} // namespace parabolica
