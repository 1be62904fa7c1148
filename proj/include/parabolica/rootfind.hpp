#pragma once

#include <functional>
#include <utility>

#include "parabolica/errors.hpp"
#include "parabolica/real.hpp"

namespace parabolica {

/// Root of a strictly increasing function on [lo, hi] with g(lo) <= 0 <= g(hi).
/// Bisection with monotone bracket maintenance, Newton steps accepted only
/// while they stay inside the bracket. Converges to a bracket of width
/// ~1e4 ulps of the local scale.
template <class R, class G, class DG>
R solve_increasing(G g, DG dg, R lo, R hi, bool have_deriv) {
    using std::abs;
    R glo = g(lo);
    R ghi = g(hi);
    if (glo > R(0) || ghi < R(0))
        throw ConvergenceError("root bracket failure: function values do not straddle zero");
    const R eps = real_traits<R>::epsilon();
    R x = (lo + hi) / R(2);
    for (int it = 0; it < 400; ++it) {
        R gx = g(x);
        if (gx == R(0)) return x;
        if (gx > R(0)) hi = x; else lo = x;
        R width = hi - lo;
        R scale = fmax(abs(lo), abs(hi)) + R(1);
        if (width <= R(8) * eps * scale) break;
        R next = (lo + hi) / R(2);
        if (have_deriv) {
            R d = dg(x);
            if (d > R(0)) {
                R newton = x - gx / d;
                if (newton > lo && newton < hi) next = newton;
            }
        }
        x = next;
    }
    return (lo + hi) / R(2);
}

template <class R, class G>
R solve_increasing(G g, R lo, R hi) {
    return solve_increasing<R>(g, [](R) { return R(0); }, lo, hi, false);
}

} // namespace parabolica
