#pragma once

#include <array>
#include <cstdint>

#include "parabolica/errors.hpp"
#include "parabolica/real.hpp"
#include "parabolica/vector_field.hpp"

namespace parabolica {

template <class R>
struct OdeOptions {
    R abs_tol = R(1e-14);
    R rel_tol = R(1e-13);
    long max_steps = 2'000'000;
};

template <class R>
struct FlowResult {
    R x;            // endpoint of the trajectory
    R displacement; // x - x0, accumulated from step increments (compensated)
    long steps = 0;
};

/// Integrates dx/ds = X(x) from x0 over time span t (either sign) with the
/// Dormand-Prince 5(4) pair. The local error is controlled relative to the
/// step increment so the accumulated displacement keeps relative accuracy
/// even when it is many orders below |x|. Near field zeros the step is also
/// capped by the 1/|X'| rate heuristic.
template <class R>
FlowResult<R> flow_advance(const VectorField<R>& field, R x0, R t, const OdeOptions<R>& opt = {}) {
    using std::abs;
    using std::fmax;
    using std::fmin;
    using std::isfinite;
    using std::pow;
    static constexpr double A21 = 1.0 / 5;
    static constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
    static constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
    static constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                            A54 = -212.0 / 729;
    static constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                            A64 = 49.0 / 176, A65 = -5103.0 / 18656;
    static constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                            B5 = -2187.0 / 6784, B6 = 11.0 / 84;
    static constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                            E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

    FlowResult<R> out{x0, R(0), 0};
    if (t == R(0)) return out;

    R dir = t > R(0) ? R(1) : R(-1);
    R remaining = abs(t);
    R x = x0;
    R disp = R(0), disp_c = R(0); // Kahan pair
    R k1 = field(x);

    R h = fmin(remaining, R(1));
    {
        R rate = abs(field.deriv(x));
        if (rate > R(0)) h = fmin(h, R(0.8) / rate);
        if (h <= R(0)) h = R(1e-4);
    }

    long steps = 0;
    while (remaining > R(0)) {
        if (++steps > opt.max_steps)
            throw ConvergenceError("flow integration exceeded step limit (degenerate zero?)");
        if (h > remaining) h = remaining;
        R hs = h * dir;

        R k2 = field(x + hs * (R(A21) * k1));
        R k3 = field(x + hs * (R(A31) * k1 + R(A32) * k2));
        R k4 = field(x + hs * (R(A41) * k1 + R(A42) * k2 + R(A43) * k3));
        R k5 = field(x + hs * (R(A51) * k1 + R(A52) * k2 + R(A53) * k3 + R(A54) * k4));
        R k6 = field(x + hs * (R(A61) * k1 + R(A62) * k2 + R(A63) * k3 + R(A64) * k4 + R(A65) * k5));
        R incr = hs * (R(B1) * k1 + R(B3) * k3 + R(B4) * k4 + R(B5) * k5 + R(B6) * k6);
        R x_new = x + incr;
        R k7 = field(x_new);
        R err = abs(hs * (R(E1) * k1 + R(E3) * k3 + R(E4) * k4 + R(E5) * k5 + R(E6) * k6 + R(E7) * k7));
        R tol = opt.abs_tol + opt.rel_tol * fmax(abs(incr), abs(x) * real_traits<R>::epsilon() * R(16));

        if (!(isfinite(x_new) && isfinite(err))) {
            // trial step left the field's range; halve hard and retry
            h = h * R(0.1);
            if (!(h > R(0)))
                throw ConvergenceError("flow integration: step-size underflow (overflow range)");
            continue;
        }

        if (err <= tol) {
            x = x_new;
            // Kahan update of the displacement.
            R y = incr - disp_c;
            R s = disp + y;
            disp_c = (s - disp) - y;
            disp = s;
            remaining = remaining - h;
            k1 = k7;
        }

        R shrink = err > R(0) ? pow(tol / err, R(0.2)) : R(5);
        R factor = fmin(R(5), fmax(R(0.2), R(0.9) * shrink));
        h = h * factor;
        R rate = abs(field.deriv(x));
        if (rate > R(0)) h = fmin(h, R(0.8) / rate);
        R min_h = fmax(remaining, R(1)) * real_traits<R>::epsilon() * R(16);
        if (h <= min_h) {
            if (err > tol) throw ConvergenceError("flow integration: step-size underflow");
            h = min_h;
        }
    }
    out.x = x;
    out.displacement = disp;
    out.steps = steps;
    return out;
}

} // namespace parabolica
