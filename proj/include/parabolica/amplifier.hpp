#pragma once

#include <array>
#include <utility>
#include <vector>

#include "parabolica/analysis.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/invariants.hpp"
#include "parabolica/vector_field.hpp"

namespace parabolica {

/// Data for the distortion-amplifier construction: a local diffeomorphism h
/// of f^m(Delta) with interior fixed points p2 < p3 < p4, contracting toward
/// p2 and p4 with derivative gap mu1 < mu2, copied along the orbit of f.
template <class R>
struct AmplifierSpec {
    R delta_lo, delta_hi; // displaced interval Delta, f(Delta) disjoint from Delta
    R j1_lo, j1_hi;       // J1 subset of Delta
    R j2_lo, j2_hi;       // J2 subset of Delta, to the right of J1
    R mu1, mu2;           // 0 < Dh(p2) < mu1 < mu2 < Dh(p4) < 1
    R dh_p2, dh_p4;       // chosen multipliers at p2 and p4
    long m = 0;           // warm-up exponent with f^m(Delta) inside U
    long depth = 0;       // n: number of copied windows
    R eps = R(1);         // C^1 budget; requires sup|log Dh| < eps/4
};

template <class R>
struct AmplifierBuild {
    AmplifierSpec<R> spec;
    Diffeo<R> h;             // local map of f^m(Delta)
    std::array<R, 5> p;      // p1 < p2 < p3 < p4 < p5 in f^m(Delta)
    R sup_log_dh;
    R variation_U;           // V(f; U) for the right neighborhood used
    R u_left;                // U = [u_left, 1)
    R distortion_constant;   // C with Df^m ratios on Delta <= C and e^{V(f;U)} <= C
};

namespace detail {

template <class R>
Jet2<R> iterate_jet(const Diffeo<R>& f, long n, const R& x) {
    using std::exp;
    OrbitCursor<R> cur{x};
    cur.want_log = cur.want_nonlin = true;
    f.advance_orbit(cur, n);
    R d1 = exp(cur.log_d1);
    return {cur.x, d1, cur.nonlin * d1, true};
}

/// f_n: equal to f o (f^j h f^{-j}) on f^{j+m}(Delta) for j = 0..n and to f
/// elsewhere. The windows are disjoint images of a displaced interval, so
/// the fixed set of f_n is exactly Fix(f).
template <class R>
class AmplifierNode final : public DiffeoNode<R> {
  public:
    AmplifierNode(Diffeo<R> base, Diffeo<R> h, AmplifierSpec<R> spec)
        : base_(std::move(base)), h_(std::move(h)), spec_(std::move(spec)), m_(spec_.m),
          depth_(spec_.depth) {
        R delta_lo = spec_.delta_lo, delta_hi = spec_.delta_hi;
        windows_.reserve(depth_ + 1);
        R lo = base_.iterate(m_, delta_lo);
        R hi = base_.iterate(m_, delta_hi);
        for (long j = 0; j <= depth_; ++j) {
            windows_.push_back({lo, hi});
            lo = base_(lo);
            hi = base_(hi);
        }
    }

    R value(const R& x) const override {
        long j = window_of(x);
        if (j < 0) return base_(x);
        R y = base_.iterate(-j, x);
        y = h_(y);
        y = base_.iterate(j, y);
        return base_(y);
    }

    Jet2<R> jet(const R& x) const override {
        long j = window_of(x);
        if (j < 0) return base_.jet(x);
        Jet2<R> back = iterate_jet(base_, -j, x);
        Jet2<R> hj = h_.jet(back.v);
        Jet2<R> fwd = iterate_jet(base_, j, hj.v);
        Jet2<R> fin = base_.jet(fwd.v);
        // chain all four stages
        Jet2<R> acc = back;
        auto chain = [&acc](const Jet2<R>& g) {
            acc.d2 = g.d2 * acc.d1 * acc.d1 + g.d1 * acc.d2;
            acc.d1 = g.d1 * acc.d1;
            acc.v = g.v;
            acc.has_d2 = acc.has_d2 && g.has_d2;
        };
        chain(hj);
        chain(fwd);
        chain(fin);
        return acc;
    }

    std::optional<R> closed_inverse(const R& y) const override {
        R x = base_.inverse(y);
        long j = window_of(x);
        if (j < 0) return x;
        R u = base_.iterate(-j, x);
        u = h_.inverse(u);
        return base_.iterate(j, u);
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        using std::log;
        long remaining = n;
        int push = base_.displacement(windows_.front().first) > R(0) ? 1 : -1;
        while (remaining > 0) {
            int motion = dir * push;
            bool past = motion > 0 ? !(cur.x < windows_.back().second)
                                   : !(cur.x > windows_.front().first);
            if (past && window_of(cur.x) < 0 &&
                (dir > 0 || window_of(base_.inverse(cur.x)) < 0)) {
                base_.advance_orbit(cur, dir > 0 ? remaining : -remaining);
                return true;
            }
            if (dir > 0) {
                Jet2<R> j = jet(cur.x);
                if (cur.want_nonlin) cur.nonlin += (j.d2 / j.d1) * exp(cur.log_d1);
                if (cur.want_log || cur.want_nonlin) cur.log_d1 += log(j.d1);
                cur.x = j.v;
            } else {
                R xn = *closed_inverse(cur.x);
                Jet2<R> j = jet(xn);
                if (cur.want_nonlin) cur.nonlin += (-(j.d2 / j.d1) / j.d1) * exp(cur.log_d1);
                if (cur.want_log || cur.want_nonlin) cur.log_d1 -= log(j.d1);
                cur.x = xn;
            }
            --remaining;
        }
        return true;
    }

    const char* kind() const override { return "amplifier"; }
    const Diffeo<R>& base() const { return base_; }
    const Diffeo<R>& local_map() const { return h_; }
    const AmplifierSpec<R>& spec() const { return spec_; }
    long warmup() const { return m_; }
    long depth() const { return depth_; }

  private:
    long window_of(const R& x) const {
        for (std::size_t j = 0; j < windows_.size(); ++j)
            if (x > windows_[j].first && x < windows_[j].second) return static_cast<long>(j);
        return -1;
    }

    Diffeo<R> base_;
    Diffeo<R> h_;
    AmplifierSpec<R> spec_;
    long m_, depth_;
    std::vector<std::pair<R, R>> windows_;
};

} // namespace detail

/// Builds the local map h and the bookkeeping for the amplifier: finds a
/// right neighborhood U with V(f; U) < eps/4, the warm-up exponent m pushing
/// Delta into U, the points p1..p5, and h as the time-1 map of a compactly
/// supported field with prescribed multipliers at p2 and p4.
template <class R>
AmplifierBuild<R> make_amplifier(const Diffeo<R>& f, AmplifierSpec<R> spec) {
    using std::abs;
    using std::exp;
    using std::log;
    if (!(spec.delta_lo < spec.delta_hi) || !(spec.j1_lo < spec.j1_hi) ||
        !(spec.j2_lo < spec.j2_hi) || !(spec.j1_hi < spec.j2_lo) ||
        !(spec.delta_lo <= spec.j1_lo) || !(spec.j2_hi <= spec.delta_hi))
        throw ConfigError("amplifier: need J1 < J2 inside Delta");
    if (!(R(0) < spec.dh_p2 && spec.dh_p2 < spec.mu1 && spec.mu1 < spec.mu2 &&
          spec.mu2 < spec.dh_p4 && spec.dh_p4 < R(1)))
        throw ConfigError("amplifier: need 0 < Dh(p2) < mu1 < mu2 < Dh(p4) < 1");
    if (!(f(spec.delta_lo) > spec.delta_hi || f(spec.delta_hi) < spec.delta_lo))
        throw DomainError("amplifier: f(Delta) meets Delta");

    AmplifierBuild<R> out;

    // right neighborhood with small variation
    R u = R(0.9);
    for (int it = 0; it < 40; ++it) {
        out.variation_U = variation(f, u, R(1) - R(1e-9));
        if (out.variation_U < spec.eps / R(4)) break;
        u = (u + R(1)) / R(2);
    }
    out.u_left = u;

    // warm-up exponent
    long m = 0;
    R lo = spec.delta_lo;
    while (lo < u && m < 100000) {
        lo = f(lo);
        ++m;
    }
    spec.m = m;

    R A = f.iterate(m, spec.delta_lo), B = f.iterate(m, spec.delta_hi);
    R a1 = f.iterate(m, spec.j1_lo), a2 = f.iterate(m, spec.j1_hi);
    R b1 = f.iterate(m, spec.j2_lo), b2 = f.iterate(m, spec.j2_hi);
    (void)b1;
    std::array<R, 5>& p = out.p;
    p[0] = A + (a1 - A) * R(0.15);
    p[1] = A + (a1 - A) * R(0.6);   // p2: attracts J1's images
    p[2] = (a2 + b1) / R(2);        // p3: repelling separator
    p[3] = b2 + (B - b2) * R(0.5);  // p4: attracts J2's images
    p[4] = b2 + (B - b2) * R(0.85); // p5

    // field W = sigma(x) (x-p2)(x-p3)(x-p4) with Hermite sigma, so that
    // Dh(p_i) = exp(W'(p_i)) exactly for the time-1 map.
    R s2 = log(spec.dh_p2) / ((p[1] - p[2]) * (p[1] - p[3]));
    R s4 = log(spec.dh_p4) / ((p[3] - p[1]) * (p[3] - p[2]));
    R w3 = -(log(spec.dh_p2) + log(spec.dh_p4)) / R(2); // W'(p3) > 0: repelling
    R s3 = w3 / ((p[2] - p[1]) * (p[2] - p[3]));
    auto W = VectorField<R>::compact_cubic({p[0], p[1], p[2], p[3], p[4]},
                                           {R(0), s2, s3, s4, R(0)},
                                           {R(0), R(0), R(0), R(0), R(0)},
                                           {p[1], p[2], p[3]});
    out.h = flow_from_field(W, R(1));

    out.sup_log_dh = R(0);
    for (const R& x : uniform_grid(p[0], p[4], 512)) {
        R v = abs(log(out.h.deriv(x)));
        if (v > out.sup_log_dh) out.sup_log_dh = v;
    }
    if (!(out.sup_log_dh < spec.eps / R(4)))
        throw DomainError("amplifier: sup|log Dh| exceeds eps/4 budget");

    // distortion constant: Df^m ratios over Delta and e^{V(f;U)}
    R dmin(0), dmax(0);
    bool first = true;
    for (const R& x : uniform_grid(spec.delta_lo, spec.delta_hi, 128)) {
        R ld = f.log_deriv_cocycle(m, x);
        if (first || ld < dmin) dmin = ld;
        if (first || ld > dmax) dmax = ld;
        first = false;
    }
    R c1 = exp(dmax - dmin);
    R c2 = exp(out.variation_U);
    out.distortion_constant = c1 > c2 ? c1 : c2;
    out.spec = spec;
    return out;
}

/// The amplified map f_n for the given depth.
template <class R>
Diffeo<R> distortion_amplifier(const Diffeo<R>& f, const AmplifierBuild<R>& build, long depth) {
    AmplifierSpec<R> spec = build.spec;
    spec.depth = depth;
    return Diffeo<R>(std::make_shared<detail::AmplifierNode<R>>(f, build.h, std::move(spec)));
}

/// |log D(f_n)^{n+m}(x2) - log D(f_n)^{n+m}(x1)| by orbit sums.
template <class R>
R distortion_gap(const Diffeo<R>& f_n, long n_plus_m, R x1, R x2) {
    using std::abs;
    R l1 = f_n.log_deriv_cocycle(n_plus_m, x1);
    R l2 = f_n.log_deriv_cocycle(n_plus_m, x2);
    return abs(l2 - l1);
}

} // namespace parabolica
