#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "parabolica/bump.hpp"
#include "parabolica/errors.hpp"
#include "parabolica/real.hpp"

namespace parabolica {

namespace detail {

/// Lift of a circle map: M increasing with M(t+1) = M(t) + 1. Stored via the
/// periodic displacement d(t) = M(t) - t.
template <class R>
class LiftImpl {
  public:
    virtual ~LiftImpl() = default;
    virtual R displacement(const R& t) const = 0; // periodic
    virtual R deriv(const R& t) const = 0;        // M'(t) = 1 + d'(t)
    virtual std::optional<R> deriv2(const R& /*t*/) const { return std::nullopt; } // M''(t)
    virtual const char* kind() const = 0;
};

template <class R>
R wrap_unit(const R& t) {
    using std::floor;
    R w = t - floor(t);
    if (w >= R(1)) w = w - R(1); // floor rounding at the seam
    return w;
}

} // namespace detail

/// Value-semantics handle for a circle-map lift.
template <class R>
class CircleLift {
  public:
    CircleLift() = default;
    explicit CircleLift(std::shared_ptr<const detail::LiftImpl<R>> impl) : impl_(std::move(impl)) {}

    bool valid() const { return static_cast<bool>(impl_); }
    R operator()(const R& t) const { return t + impl_->displacement(t); }
    R displacement(const R& t) const { return impl_->displacement(t); }
    R deriv(const R& t) const { return impl_->deriv(t); }
    std::optional<R> deriv2(const R& t) const { return impl_->deriv2(t); }

    /// Lift inverse by monotone Newton (D M > 0).
    R inverse(const R& y) const {
        using std::abs;
        R t = y - impl_->displacement(y); // first-order guess
        for (int it = 0; it < 80; ++it) {
            R resid = t + impl_->displacement(t) - y;
            if (abs(resid) <= R(64) * real_traits<R>::epsilon() * (R(1) + abs(y))) return t;
            R d = impl_->deriv(t);
            if (!(d > R(0))) throw InvalidTreeError("circle lift: derivative <= 0");
            t = t - resid / d;
        }
        return t;
    }

    const detail::LiftImpl<R>* impl() const { return impl_.get(); }

  private:
    std::shared_ptr<const detail::LiftImpl<R>> impl_;
};

namespace detail {

template <class R>
class TranslationLift final : public LiftImpl<R> {
  public:
    explicit TranslationLift(R c) : c_(c) {}
    R displacement(const R&) const override { return c_; }
    R deriv(const R&) const override { return R(1); }
    std::optional<R> deriv2(const R&) const override { return R(0); }
    const char* kind() const override { return "translation"; }
    const R& amount() const { return c_; }

  private:
    R c_;
};

/// Periodic C^2 cubic spline through uniform samples of the displacement.
template <class R>
class SplineLift final : public LiftImpl<R> {
  public:
    explicit SplineLift(std::vector<R> samples) : d_(std::move(samples)) {
        std::size_t n = d_.size();
        if (n < 3) throw ConfigError("spline lift: need at least 3 samples");
        h_ = R(1) / R(static_cast<long>(n));
        // cyclic tridiagonal solve for second derivatives:
        //   sigma_{i-1} + 4 sigma_i + sigma_{i+1} = 6 (d_{i-1} - 2 d_i + d_{i+1}) / h^2
        // via Sherman-Morrison on the corner entries.
        std::vector<R> rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const R& dm = d_[(i + n - 1) % n];
            const R& dp = d_[(i + 1) % n];
            rhs[i] = R(6) * (dm - R(2) * d_[i] + dp) / (h_ * h_);
        }
        sigma_ = cyclic_tridiag(rhs);
    }

    R displacement(const R& t) const override { return eval(t, 0); }
    R deriv(const R& t) const override { return R(1) + eval(t, 1); }
    std::optional<R> deriv2(const R& t) const override { return eval(t, 2); }
    const char* kind() const override { return "spline"; }
    const std::vector<R>& samples() const { return d_; }

  private:
    std::vector<R> cyclic_tridiag(const std::vector<R>& rhs) const {
        std::size_t n = rhs.size();
        const R a(1), b(4), c(1);
        // Solve (T + u v^T) x = rhs with T tridiagonal (modified corners).
        R gamma = -b;
        std::vector<R> diag(n, b);
        diag[0] = b - gamma;
        diag[n - 1] = b - a * c / gamma;
        auto solve = [&](std::vector<R> r) {
            std::vector<R> cp(n), x(n);
            cp[0] = c / diag[0];
            r[0] = r[0] / diag[0];
            for (std::size_t i = 1; i < n; ++i) {
                R m = diag[i] - a * cp[i - 1];
                cp[i] = c / m;
                r[i] = (r[i] - a * r[i - 1]) / m;
            }
            x[n - 1] = r[n - 1];
            for (std::size_t i = n - 1; i-- > 0;) x[i] = r[i] - cp[i] * x[i + 1];
            return x;
        };
        std::vector<R> u(n, R(0));
        u[0] = gamma;
        u[n - 1] = c;
        std::vector<R> x = solve(rhs);
        std::vector<R> z = solve(u);
        R fact = (x[0] + a * x[n - 1] / gamma) / (R(1) + z[0] + a * z[n - 1] / gamma);
        for (std::size_t i = 0; i < n; ++i) x[i] = x[i] - fact * z[i];
        return x;
    }

    R eval(const R& t, int order) const {
        using std::floor;
        R w = wrap_unit(t);
        R pos = w / h_;
        long i = static_cast<long>(dbl(floor(pos)));
        std::size_t n = d_.size();
        if (i < 0) i = 0;
        if (static_cast<std::size_t>(i) >= n) i = static_cast<long>(n) - 1;
        R u = w - R(i) * h_;
        std::size_t j = (static_cast<std::size_t>(i) + 1) % n;
        const R &da = d_[i], &db = d_[j], &sa = sigma_[i], &sb = sigma_[j];
        R v = h_ - u;
        switch (order) {
            case 0:
                return (sa * v * v * v + sb * u * u * u) / (R(6) * h_) +
                       (da / h_ - sa * h_ / R(6)) * v + (db / h_ - sb * h_ / R(6)) * u;
            case 1:
                return (-sa * v * v + sb * u * u) / (R(2) * h_) - (da / h_ - sa * h_ / R(6)) +
                       (db / h_ - sb * h_ / R(6));
            default:
                return (sa * v + sb * u) / h_;
        }
    }

    std::vector<R> d_;
    std::vector<R> sigma_;
    R h_;
};

/// t + a * bump(t) with the bump supported inside one period window; the
/// window is anchored at [support_lo, support_hi] (length < 1) and extended
/// periodically.
template <class R>
class BumpDisplacementLift final : public LiftImpl<R> {
  public:
    BumpDisplacementLift(R amplitude, R center, R width, BumpOrder order)
        : amp_(amplitude), center_(center),
          bump_(BumpFn<R>::standard(R(0.5), width, order)) {
        using std::abs;
        if (!(width * R(0.96) < R(0.5)))
            throw ConfigError("bump lift: support must fit in one period");
        // D phi = 1 + a * Drho must stay positive
        R sup_slope = (order == BumpOrder::C1 ? R(3) : R(2) / R(0.7)) / width;
        if (!(abs(amplitude) * sup_slope < R(1)))
            throw ConfigError("bump lift: amplitude too large for a diffeomorphism");
    }

    R displacement(const R& t) const override {
        R u = wrap_unit(t - center_ + R(0.5));
        return amp_ * bump_(u);
    }
    R deriv(const R& t) const override {
        R u = wrap_unit(t - center_ + R(0.5));
        return R(1) + amp_ * bump_.deriv(u);
    }
    std::optional<R> deriv2(const R& t) const override {
        R u = wrap_unit(t - center_ + R(0.5));
        return amp_ * bump_.deriv2(u);
    }
    const char* kind() const override { return "bump_displacement"; }
    const R& amplitude() const { return amp_; }
    const R& center() const { return center_; }
    const BumpFn<R>& bump() const { return bump_; }

  private:
    R amp_, center_;
    BumpFn<R> bump_;
};

/// Composition of lifts (first entry applied last, as with Diffeo compose).
template <class R>
class ComposedLift final : public LiftImpl<R> {
  public:
    explicit ComposedLift(std::vector<CircleLift<R>> items) : items_(std::move(items)) {}

    R displacement(const R& t) const override {
        R y = t;
        for (std::size_t i = items_.size(); i-- > 0;) y = items_[i](y);
        return y - t;
    }
    R deriv(const R& t) const override {
        R y = t;
        R d(1);
        for (std::size_t i = items_.size(); i-- > 0;) {
            d = d * items_[i].deriv(y);
            y = items_[i](y);
        }
        return d;
    }
    std::optional<R> deriv2(const R& t) const override {
        // chain: (g o h)'' = g''(h) h'^2 + g'(h) h''
        R y = t;
        R d1(1), d2(0);
        for (std::size_t i = items_.size(); i-- > 0;) {
            auto j2 = items_[i].deriv2(y);
            if (!j2) return std::nullopt;
            R j1 = items_[i].deriv(y);
            d2 = *j2 * d1 * d1 + j1 * d2;
            d1 = j1 * d1;
            y = items_[i](y);
        }
        return d2;
    }
    const char* kind() const override { return "composed"; }
    const std::vector<CircleLift<R>>& items() const { return items_; }

  private:
    std::vector<CircleLift<R>> items_;
};

template <class R>
class InverseLift final : public LiftImpl<R> {
  public:
    explicit InverseLift(CircleLift<R> inner) : inner_(std::move(inner)) {}
    R displacement(const R& t) const override { return inner_.inverse(t) - t; }
    R deriv(const R& t) const override { return R(1) / inner_.deriv(inner_.inverse(t)); }
    std::optional<R> deriv2(const R& t) const override {
        R y = inner_.inverse(t);
        auto d2 = inner_.deriv2(y);
        if (!d2) return std::nullopt;
        R d1 = inner_.deriv(y);
        return -*d2 / (d1 * d1 * d1);
    }
    const char* kind() const override { return "inverse"; }
    const CircleLift<R>& inner() const { return inner_; }

  private:
    CircleLift<R> inner_;
};

/// id + s * (g - id): the linear isotopy from the identity to g; valid for
/// all s in [0,1] because D g > 0 keeps 1 + s (Dg - 1) > 0.
template <class R>
class IsotopyLift final : public LiftImpl<R> {
  public:
    IsotopyLift(CircleLift<R> base, R s) : base_(std::move(base)), s_(s) {}
    R displacement(const R& t) const override { return s_ * base_.displacement(t); }
    R deriv(const R& t) const override { return R(1) + s_ * (base_.deriv(t) - R(1)); }
    std::optional<R> deriv2(const R& t) const override {
        auto d2 = base_.deriv2(t);
        if (!d2) return std::nullopt;
        return s_ * *d2;
    }
    const char* kind() const override { return "isotopy"; }
    const CircleLift<R>& base() const { return base_; }
    const R& stage() const { return s_; }

  private:
    CircleLift<R> base_;
    R s_;
};

/// id + chi * (g - id) with chi a periodic C^2 window vanishing on a
/// neighborhood of `gap_center` (mod 1) and equal to 1 on the opposite side.
template <class R>
class DampedLift final : public LiftImpl<R> {
  public:
    DampedLift(CircleLift<R> inner, R gap_center, R gap_half_width)
        : inner_(std::move(inner)), gap_center_(gap_center), gap_(gap_half_width),
          window_(BumpFn<R>::window(gap_half_width, R(0.5) - gap_half_width,
                                    R(0.5) + gap_half_width, R(1) - gap_half_width, BumpOrder::C2)) {}

    R displacement(const R& t) const override {
        R u = wrap_unit(t - gap_center_);
        return window_(u) * inner_.displacement(t);
    }
    R deriv(const R& t) const override {
        R u = wrap_unit(t - gap_center_);
        return R(1) + window_.deriv(u) * inner_.displacement(t) +
               window_(u) * (inner_.deriv(t) - R(1));
    }
    std::optional<R> deriv2(const R& t) const override {
        auto d2 = inner_.deriv2(t);
        if (!d2) return std::nullopt;
        R u = wrap_unit(t - gap_center_);
        return window_.deriv2(u) * inner_.displacement(t) +
               R(2) * window_.deriv(u) * (inner_.deriv(t) - R(1)) + window_(u) * *d2;
    }
    const char* kind() const override { return "damped"; }
    const CircleLift<R>& inner() const { return inner_; }
    const R& gap_center() const { return gap_center_; }
    const R& gap_half_width() const { return gap_; }

  private:
    CircleLift<R> inner_;
    R gap_center_, gap_;
    BumpFn<R> window_;
};

} // namespace detail

template <class R>
CircleLift<R> translation_lift(R c) {
    return CircleLift<R>(std::make_shared<detail::TranslationLift<R>>(c));
}

template <class R>
CircleLift<R> spline_lift(std::vector<R> displacement_samples) {
    return CircleLift<R>(std::make_shared<detail::SplineLift<R>>(std::move(displacement_samples)));
}

template <class R>
CircleLift<R> bump_lift(R amplitude, R center, R width, BumpOrder order = BumpOrder::C2) {
    return CircleLift<R>(
        std::make_shared<detail::BumpDisplacementLift<R>>(amplitude, center, width, order));
}

template <class R>
CircleLift<R> compose_lifts(std::vector<CircleLift<R>> items) {
    return CircleLift<R>(std::make_shared<detail::ComposedLift<R>>(std::move(items)));
}

template <class R>
CircleLift<R> inverse_lift(CircleLift<R> inner) {
    return CircleLift<R>(std::make_shared<detail::InverseLift<R>>(std::move(inner)));
}

template <class R>
CircleLift<R> isotopy_lift(CircleLift<R> base, R s) {
    return CircleLift<R>(std::make_shared<detail::IsotopyLift<R>>(std::move(base), s));
}

template <class R>
CircleLift<R> damped_lift(CircleLift<R> inner, R gap_center, R gap_half_width = R(1) / R(16)) {
    return CircleLift<R>(
        std::make_shared<detail::DampedLift<R>>(std::move(inner), gap_center, gap_half_width));
}

/// C^1 size on the circle metric: sup|M - id| + sup|DM - 1| over a grid.
template <class R>
R lift_c1_size(const CircleLift<R>& m, std::size_t grid_n = 512) {
    using std::abs;
    R d0(0), d1(0);
    for (std::size_t i = 0; i < grid_n; ++i) {
        R t = R(static_cast<long>(i)) / R(static_cast<long>(grid_n));
        R a = abs(m.displacement(t));
        R b = abs(m.deriv(t) - R(1));
        if (a > d0) d0 = a;
        if (b > d1) d1 = b;
    }
    return d0 + d1;
}

/// Sampled monotone circle-map lift on a uniform grid of [0,1): the carrier
/// for the Mather invariant.
template <class R>
class CircleMap {
  public:
    CircleMap() = default;
    CircleMap(std::vector<R> values, R seam_defect)
        : values_(std::move(values)), seam_defect_(seam_defect) {
        std::vector<R> disp(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i)
            disp[i] = values_[i] - grid_point(i);
        interp_ = spline_lift(std::move(disp));
        for (std::size_t i = 0; i + 1 < values_.size(); ++i)
            if (!(values_[i] < values_[i + 1]))
                throw InvalidTreeError("circle map: samples not strictly increasing");
    }

    std::size_t grid_size() const { return values_.size(); }
    R grid_point(std::size_t i) const {
        return R(static_cast<long>(i)) / R(static_cast<long>(values_.size()));
    }
    const std::vector<R>& values() const { return values_; }
    const R& seam_defect() const { return seam_defect_; }
    const CircleLift<R>& lift() const { return interp_; }
    R operator()(const R& t) const { return interp_(t); }

    /// Distance to the nearest translation: (max - min)/2 of M - id over the
    /// grid. Invariant under pre/post translation.
    R triviality_defect() const {
        R lo = values_[0] - grid_point(0), hi = lo;
        for (std::size_t i = 1; i < values_.size(); ++i) {
            R d = values_[i] - grid_point(i);
            if (d < lo) lo = d;
            if (d > hi) hi = d;
        }
        return (hi - lo) / R(2);
    }

    /// sup over the grid of |M(t + 1/k) - M(t) - 1/k|; near zero is the
    /// k-th-root existence criterion.
    R translation_commutation_defect(long k) const {
        using std::abs;
        if (k < 1) throw DomainError("commutation defect: k must be >= 1");
        R best(0);
        R shift = R(1) / R(k);
        for (std::size_t i = 0; i < values_.size(); ++i) {
            R t = grid_point(i);
            R d = abs(interp_(t + shift) - values_[i] - shift);
            if (d > best) best = d;
        }
        return best;
    }

  private:
    std::vector<R> values_;
    R seam_defect_ = R(0);
    CircleLift<R> interp_;
};

/// sup-distance between two lifts over a grid after subtracting the constant
/// minimizing the sup (the midrange of the difference).
template <class R, class F, class G>
R aligned_sup_distance(const F& f, const G& g, std::size_t grid_n = 256, R pre_shift = R(0)) {
    using std::abs;
    R lo(0), hi(0);
    bool first = true;
    for (std::size_t i = 0; i < grid_n; ++i) {
        R t = R(static_cast<long>(i)) / R(static_cast<long>(grid_n));
        R d = f(t + pre_shift) - g(t);
        if (first) { lo = hi = d; first = false; }
        if (d < lo) lo = d;
        if (d > hi) hi = d;
    }
    return (hi - lo) / R(2);
}

/// Golden-section refinement of the pre-translation minimizing the aligned
/// sup distance, seeded at tau0.
template <class R, class F, class G>
std::pair<R, R> best_pre_shift(const F& f, const G& g, R tau0, R radius = R(0.5),
                               std::size_t grid_n = 256) {
    const R phi = R(0.6180339887498949);
    R a = tau0 - radius, b = tau0 + radius;
    R x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    R f1 = aligned_sup_distance<R>(f, g, grid_n, x1);
    R f2 = aligned_sup_distance<R>(f, g, grid_n, x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a);
            f1 = aligned_sup_distance<R>(f, g, grid_n, x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a);
            f2 = aligned_sup_distance<R>(f, g, grid_n, x2);
        }
    }
    return f1 < f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

} // namespace parabolica
