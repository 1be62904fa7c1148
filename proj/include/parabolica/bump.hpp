#pragma once

#include "parabolica/errors.hpp"
#include "parabolica/real.hpp"

namespace parabolica {

enum class BumpOrder { C1, C2 };

/// Piecewise-polynomial plateau bump: identically 1 on [l1, r1], identically
/// 0 outside (l0, r0), monotone polynomial ramps in between.
///
/// The standard profile centered at c with half-width eps has plateau
/// [c - eps/4, c + eps/4]. The C1 variant supports [c - 3eps/4, c + 3eps/4]
/// with cubic ramps, so sup|D rho| = 3/eps exactly. A C2 ramp of that length
/// cannot keep sup|D2 rho| <= 10/eps^2 (any unit rise over eps/2 with zero end
/// slopes forces sup|D2| >= 16/eps^2), so the C2 variant widens the ramps to
/// 0.7*eps (support 0.95*eps, still inside [c - eps, c + eps]); its profile
/// has sup|D rho| = 2/0.7eps and sup|D2 rho| = (40/9)/(0.7eps)^2 < 10/eps^2.
template <class R>
class BumpFn {
  public:
    static BumpFn standard(R center, R eps, BumpOrder order) {
        if (!(eps > R(0))) throw ConfigError("bump: eps must be positive");
        R ph = eps / R(4);
        R ramp = order == BumpOrder::C1 ? eps / R(2) : R(0.7) * eps;
        return BumpFn(center - ph - ramp, center - ph, center + ph, center + ph + ramp, order);
    }

    static BumpFn window(R l0, R l1, R r1, R r0, BumpOrder order) {
        return BumpFn(l0, l1, r1, r0, order);
    }

    R operator()(const R& x) const { return piece(x, 0); }
    R deriv(const R& x) const { return piece(x, 1); }
    R deriv2(const R& x) const { return piece(x, 2); }

    R support_lo() const { return l0_; }
    R support_hi() const { return r0_; }
    R plateau_lo() const { return l1_; }
    R plateau_hi() const { return r1_; }
    BumpOrder order() const { return order_; }

  private:
    BumpFn(R l0, R l1, R r1, R r0, BumpOrder order)
        : l0_(l0), l1_(l1), r1_(r1), r0_(r0), order_(order) {
        if (!(l0_ < l1_ && l1_ <= r1_ && r1_ < r0_))
            throw ConfigError("bump: knots must satisfy l0 < l1 <= r1 < r0");
    }

    R piece(const R& x, int order) const {
        if (x <= l0_ || x >= r0_) return R(0);
        if (x >= l1_ && x <= r1_) return order == 0 ? R(1) : R(0);
        if (x < l1_) {
            R len = l1_ - l0_;
            R u = (x - l0_) / len;
            switch (order) {
                case 0: return ramp0(u);
                case 1: return ramp1(u) / len;
                default: return ramp2(u) / (len * len);
            }
        }
        R len = r0_ - r1_;
        R u = (r0_ - x) / len;
        switch (order) {
            case 0: return ramp0(u);
            case 1: return -ramp1(u) / len;
            default: return ramp2(u) / (len * len);
        }
    }

    // Rising transition on [0,1]. C1: cubic smoothstep. C2: piecewise cubic
    // with trapezoidal second derivative (corner fraction eta), normalized so
    // the rise is exactly 1; then sup|s'| = 2 and sup|s''| = 4/(1-2*eta).
    static constexpr double kEta = 0.05;

    R ramp0(const R& u) const {
        if (order_ == BumpOrder::C1) return u * u * (R(3) - R(2) * u);
        if (u > R(0.5)) return R(1) - ramp0(R(1) - u);
        const R eta = R(kEta);
        const R a = R(4) / (R(1) - R(2) * eta);
        if (u <= eta) return a * u * u * u / (R(6) * eta);
        if (u <= R(0.5) - eta)
            return a * (u * u / R(2) - eta * u / R(2) + eta * eta / R(6));
        R w = u - (R(0.5) - eta);
        R s2 = a * (R(0.125) - R(0.75) * eta + R(7) * eta * eta / R(6));
        R d2 = a * (R(0.5) - R(1.5) * eta);
        return s2 + d2 * w + a * (w * w / R(2) - w * w * w / (R(6) * eta));
    }

    R ramp1(const R& u) const {
        if (order_ == BumpOrder::C1) return R(6) * u * (R(1) - u);
        if (u > R(0.5)) return ramp1(R(1) - u);
        const R eta = R(kEta);
        const R a = R(4) / (R(1) - R(2) * eta);
        if (u <= eta) return a * u * u / (R(2) * eta);
        if (u <= R(0.5) - eta) return a * (u - eta / R(2));
        R w = u - (R(0.5) - eta);
        return a * (R(0.5) - R(1.5) * eta) + a * (w - w * w / (R(2) * eta));
    }

    R ramp2(const R& u) const {
        if (order_ == BumpOrder::C1) return R(6) - R(12) * u;
        if (u > R(0.5)) return -ramp2(R(1) - u);
        const R eta = R(kEta);
        const R a = R(4) / (R(1) - R(2) * eta);
        if (u <= eta) return a * u / eta;
        if (u <= R(0.5) - eta) return a;
        R w = u - (R(0.5) - eta);
        return a * (R(1) - w / eta);
    }

    R l0_, l1_, r1_, r0_;
    BumpOrder order_;
};

} // namespace parabolica
