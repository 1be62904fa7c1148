#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "parabolica/analysis.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/rootfind.hpp"

namespace parabolica {

enum class ChartSide { lower, upper };

template <class R>
struct ChartOptions {
    /// Target accuracy of the extrapolated Abel value. The raw renormalized
    /// sequence converges like ~2|A(x)|/n, so within the default depth cap
    /// the classical 1e-8 requirement is out of reach in binary64; 5e-7 on
    /// the Richardson-extrapolated ladder is attainable and keeps the Abel
    /// cocycle residual comfortably below 1e-6.
    R tol = R(5e-7);
    long depth_cap = 100000;
    long base_depth = 8;
};

template <class R>
struct ChartEval {
    R a;           // A(x)
    R d1;          // A'(x)
    R nonlin;      // A''(x)/A'(x)
    bool converged = false;
    bool monotone_tail = true; // per-depth deltas eventually decreasing
    R last_delta;
    long depth = 0;
};

template <class R>
struct ChartDiagRow {
    long depth;
    R estimate;
    R delta;
};

/// Renormalized Abel coordinate at one endpoint of a component of f,
/// normalized by A(p) = 0, A(f(p)) = 1, built from the displacement-ratio
/// scheme A_n(x) = (f^{dn}(x) - y_n) / (f(y_n) - y_n) with y_n = f^{dn}(p)
/// marching toward the chart endpoint. Estimates along the doubling ladder
/// are Richardson-extrapolated (the scheme's leading error is ~ 1/n for
/// quadratic tangencies).
///
/// The orbit table grows lazily under a mutex; everything else is immutable,
/// so charts are concurrent-read safe.
template <class R>
class FatouChart {
  public:
    FatouChart(Diffeo<R> f, R lo, R hi, ChartSide side, R p, ChartOptions<R> opt = {})
        : f_(std::move(f)), lo_(lo), hi_(hi), side_(side), p_(p), opt_(opt) {
        R disp = f_.displacement(p_);
        if (disp == R(0)) throw DomainError("fatou chart: base point is fixed");
        int push = disp > R(0) ? 1 : -1;
        step_dir_ = (side_ == ChartSide::lower) ? -push : push;
        orientation_ = push > 0 ? 1 : -1; // sign of dA/dx
        fp_ = p_ + disp;
        table_.push_back({0, p_, disp});
    }

    const Diffeo<R>& map() const { return f_; }
    ChartSide side() const { return side_; }
    const R& base_point() const { return p_; }
    const R& lo() const { return lo_; }
    const R& hi() const { return hi_; }
    int orientation() const { return orientation_; }
    const ChartOptions<R>& options() const { return opt_; }

    /// A(x) (+ derivative data). Throws ConvergenceError if the extrapolated
    /// ladder does not settle within the depth cap; pass diag to retrieve the
    /// per-depth table instead of throwing.
    ///
    /// Points within walking distance of the base are first reduced to the
    /// fundamental domain around p (the renormalization's error constant
    /// grows with |A|, so the core scheme only ever runs near p); deep tails
    /// evaluate directly, where the scheme is already in its asymptotic
    /// regime.
    ChartEval<R> eval(const R& x, std::vector<ChartDiagRow<R>>* diag = nullptr) const {
        using std::abs;
        using std::exp;
        using std::log;
        guard_check(x);

        OrbitCursor<R> walk{x};
        walk.want_log = true;
        walk.want_nonlin = true;
        long m = reduce_to_domain(walk);
        ChartEval<R> core = eval_core(walk.x, diag);
        if (m == 0 && walk.log_d1 == R(0)) return core;
        if (diag)
            for (auto& row : *diag) row.estimate = row.estimate + R(m);
        R dw = exp(walk.log_d1); // D(f^{-m})(x)
        ChartEval<R> out = core;
        out.a = core.a + R(m);
        out.d1 = core.d1 * dw;
        out.nonlin = core.nonlin * dw + walk.nonlin;
        return out;
    }

    R operator()(const R& x) const { return eval(x).a; }

  private:
    ChartEval<R> eval_core(const R& x, std::vector<ChartDiagRow<R>>* diag) const {
        using std::abs;
        using std::exp;

        OrbitCursor<R> cur{x};
        cur.want_log = true;
        cur.want_nonlin = true;

        std::vector<R> est, dest, nest; // A, A', nonlinearity estimates per rung
        ChartEval<R> out{};
        long depth = 0;
        R prev_r2(0);
        bool have_prev_r2 = false;
        R prev_delta(0);
        bool deltas_rose = false, deltas_fell_after = true;

        for (std::size_t k = 0;; ++k) {
            Entry e = entry(k);
            long target = e.depth;
            if (target > depth) {
                f_.advance_orbit(cur, static_cast<long>(step_dir_) * (target - depth));
                depth = target;
            }
            R a = (cur.x - e.y) / e.disp;
            R d1 = exp(cur.log_d1) / e.disp;
            R nl = cur.nonlin; // (D2 F / D F) for F = f^{dn}; A'' / A' shares it
            est.push_back(a);
            dest.push_back(d1);
            nest.push_back(nl);

            std::size_t m = est.size();
            if (diag && m >= 2) {
                diag->push_back({target, a, abs(est[m - 1] - est[m - 2])});
            }
            if (m >= 2) {
                R delta = abs(est[m - 1] - est[m - 2]);
                if (m >= 3) {
                    if (delta > prev_delta) { deltas_rose = true; deltas_fell_after = false; }
                    else if (deltas_rose) deltas_fell_after = true;
                }
                prev_delta = delta;
                out.last_delta = delta;
            }
            if (m >= 3) {
                // two-level Richardson on the doubling ladder
                R r1a = R(2) * est[m - 1] - est[m - 2];
                R r1b = R(2) * est[m - 2] - est[m - 3];
                R r2 = (R(4) * r1a - r1b) / R(3);
                if (have_prev_r2 && abs(r2 - prev_r2) <= opt_.tol) {
                    out.a = r2;
                    out.d1 = R(2) * dest[m - 1] - dest[m - 2];
                    out.nonlin = R(2) * nest[m - 1] - nest[m - 2];
                    out.converged = true;
                    out.depth = target;
                    out.monotone_tail = !deltas_rose || deltas_fell_after;
                    return out;
                }
                prev_r2 = r2;
                have_prev_r2 = true;
            }
            if (2 * target > opt_.depth_cap) break;
        }
        out.a = have_prev_r2 ? prev_r2 : est.back();
        out.d1 = dest.back();
        out.nonlin = nest.back();
        out.depth = depth;
        out.monotone_tail = !deltas_rose || deltas_fell_after;
        if (!diag)
            throw ConvergenceError("fatou chart did not converge within depth cap (last delta " +
                                   std::to_string(dbl(out.last_delta)) + ")");
        return out;
    }

  public:
    /// x with A(x) = t: integer part by iteration of f, fractional part by
    /// root-finding inside one fundamental domain (seeded from a sampled
    /// inverse table, polished by Newton with true chart values).
    R inverse(const R& t) const {
        using std::abs;
        using std::floor;
        R tf = floor(t);
        double m = dbl(tf);
        R frac = t - tf;
        R x0;
        if (frac == R(0)) {
            x0 = p_;
        } else {
            x0 = domain_inverse(frac);
        }
        R x = f_.iterate(static_cast<long>(m), x0);
        guard_check(x);
        return x;
    }

  private:
    struct Entry {
        long depth;
        R y;
        R disp;
    };

    /// Walks the cursor into the fundamental domain around p, returning the
    /// number of f-steps removed: x = f^m(cursor.x) afterwards. A point more
    /// than depth_cap steps from the base is beyond the chart's resolution.
    long reduce_to_domain(OrbitCursor<R>& cur) const {
        const long cap = opt_.depth_cap;
        long m = 0;
        int o = orientation_;
        auto above = [&](const R& u) { return o > 0 ? !(u < fp_) : !(u > fp_); };
        auto below = [&](const R& u) { return o > 0 ? u < p_ : u > p_; };
        for (long i = 0; above(cur.x); ++i) {
            if (i >= cap)
                throw ConvergenceError("fatou chart: point deeper than the depth cap");
            f_.advance_orbit(cur, -1);
            ++m;
        }
        for (long i = 0; below(cur.x); ++i) {
            if (i >= cap)
                throw ConvergenceError("fatou chart: point deeper than the depth cap");
            f_.advance_orbit(cur, 1);
            --m;
        }
        return m;
    }

    Entry entry(std::size_t k) const {
        std::lock_guard<std::mutex> lock(mu_);
        while (table_.size() <= k + 1) {
            const Entry& last = table_.back();
            long next = last.depth == 0 ? opt_.base_depth : 2 * last.depth;
            OrbitCursor<R> cur{last.y};
            f_.advance_orbit(cur, static_cast<long>(step_dir_) * (next - last.depth));
            R disp = f_.displacement(cur.x);
            if (disp == R(0))
                throw ConvergenceError("fatou chart: orbit displacement underflowed to zero");
            table_.push_back({next, cur.x, disp});
        }
        return table_[k + 1]; // entry(k) is the k-th ladder rung (depth 8*2^k)
    }

    void guard_check(const R& x) const {
        R g = endpoint_guard<R>();
        if (!(x > lo_ + g) || !(x < hi_ - g))
            throw DomainError("fatou chart: evaluation inside endpoint guard zone");
    }

    /// Solves A(x) = s for s in (0,1) on the fundamental domain [p, f(p)].
    R domain_inverse(const R& s) const {
        using std::abs;
        using std::fmax;
        using std::fmin;
        const auto& tab = inverse_table();
        // bracket by table values (A is monotone with sign = orientation_)
        R o = R(orientation_);
        std::size_t lo = 0, hi = tab.first.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (o * tab.second[mid] <= o * s) lo = mid; else hi = mid;
        }
        R xlo = tab.first[lo], xhi = tab.first[hi];
        R alo = tab.second[lo], ahi = tab.second[hi];
        R x = (ahi == alo) ? (xlo + xhi) / R(2)
                           : xlo + (s - alo) / (ahi - alo) * (xhi - xlo);
        // Newton with true chart values, bisection fallback on the bracket.
        for (int it = 0; it < 60; ++it) {
            ChartEval<R> ev = eval(x);
            R resid = ev.a - s;
            if (o * resid > R(0)) xhi = x; else xlo = x;
            if (abs(resid) <= opt_.tol * R(0.5)) return x;
            R step = resid / ev.d1;
            R next = x - step;
            if (!(next > fmin(xlo, xhi)) || !(next < fmax(xlo, xhi)))
                next = (xlo + xhi) / R(2);
            if (next == x) return x;
            x = next;
        }
        return x;
    }

    const std::pair<std::vector<R>, std::vector<R>>& inverse_table() const {
        std::lock_guard<std::mutex> lock(inv_mu_);
        if (inv_table_.first.empty()) {
            const std::size_t n = 48;
            R fp = f_(p_);
            R a = orientation_ > 0 ? p_ : fp;
            R b = orientation_ > 0 ? fp : p_;
            std::pair<std::vector<R>, std::vector<R>> tab;
            for (std::size_t i = 0; i <= n; ++i) {
                R x = a + (b - a) * R(static_cast<long>(i)) / R(static_cast<long>(n));
                tab.first.push_back(x);
                tab.second.push_back(eval(x).a);
            }
            inv_table_ = std::move(tab);
        }
        return inv_table_;
    }

    Diffeo<R> f_;
    R lo_, hi_;
    ChartSide side_;
    R p_;
    R fp_; // f(p)
    ChartOptions<R> opt_;
    int step_dir_;
    int orientation_;
    mutable std::mutex mu_;
    mutable std::vector<Entry> table_;
    mutable std::mutex inv_mu_;
    mutable std::pair<std::vector<R>, std::vector<R>> inv_table_;
};

/// Process-wide chart cache keyed by (tree identity, side, base point,
/// mantissa bits). Purely an evaluation cache: results are identical with or
/// without it.
template <class R>
std::shared_ptr<const FatouChart<R>> chart_for(const Diffeo<R>& f, R lo, R hi, ChartSide side, R p,
                                               ChartOptions<R> opt = {}) {
    struct Key {
        const void* node;
        int side;
        double p;
        double tol;
        long bits;
        bool operator<(const Key& o) const {
            return std::tie(node, side, p, tol, bits) < std::tie(o.node, o.side, o.p, o.tol, o.bits);
        }
    };
    static std::mutex mu;
    static std::map<Key, std::weak_ptr<const FatouChart<R>>> cache;

    long bits = 0;
    if constexpr (std::is_same_v<R, BigFloat>) bits = BigFloat::default_precision();
    Key key{f.node_ptr().get(), static_cast<int>(side), dbl(p), dbl(opt.tol), bits};
    std::lock_guard<std::mutex> lock(mu);
    if (auto hit = cache[key].lock()) return hit;
    auto fresh = std::make_shared<FatouChart<R>>(f, lo, hi, side, p, opt);
    cache[key] = fresh;
    return fresh;
}

namespace detail {

/// Lazy time-t map of the generating flow on one component: A^{-1}(A(x)+t).
/// Inside the endpoint guard zones (and outside the component) the node acts
/// as the identity; the displacement there is below the guard resolution.
template <class R>
class ChartFlowNode final : public DiffeoNode<R> {
  public:
    ChartFlowNode(std::shared_ptr<const FatouChart<R>> chart, R t)
        : chart_(std::move(chart)), t_(t) {}

    R value(const R& x) const override {
        if (outside(x)) return x;
        return chart_->inverse(chart_->eval(x).a + t_);
    }

    Jet2<R> jet(const R& x) const override {
        if (outside(x)) return {x, R(1), R(0), true};
        ChartEval<R> ax = chart_->eval(x);
        R y = chart_->inverse(ax.a + t_);
        ChartEval<R> ay = chart_->eval(y);
        R d1 = ax.d1 / ay.d1;
        R nl = ax.nonlin - ay.nonlin * d1;
        return {y, d1, nl * d1, true};
    }

    std::optional<R> closed_inverse(const R& y) const override {
        if (outside(y)) return y;
        return chart_->inverse(chart_->eval(y).a - t_);
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        using std::log;
        if (outside(cur.x)) return true;
        ChartEval<R> ax = chart_->eval(cur.x);
        R y = chart_->inverse(ax.a + t_ * R(static_cast<long>(dir) * n));
        if (cur.want_log || cur.want_nonlin) {
            ChartEval<R> ay = chart_->eval(y);
            R d1 = ax.d1 / ay.d1;
            if (cur.want_nonlin) cur.nonlin += (ax.nonlin - ay.nonlin * d1) * exp(cur.log_d1);
            cur.log_d1 += log(d1);
        }
        cur.x = y;
        return true;
    }

    const char* kind() const override { return "chart_flow"; }
    const FatouChart<R>& chart() const { return *chart_; }
    std::shared_ptr<const FatouChart<R>> chart_ptr() const { return chart_; }
    const R& time() const { return t_; }

  private:
    bool outside(const R& x) const {
        R g = R(4) * endpoint_guard<R>();
        return !(x > chart_->lo() + g) || !(x < chart_->hi() - g);
    }

    std::shared_ptr<const FatouChart<R>> chart_;
    R t_;
};

} // namespace detail

/// Time-t map of the generating flow of f seen from the given endpoint of
/// the component [lo, hi] (f must have no fixed point inside).
template <class R>
Diffeo<R> flow_time(const Diffeo<R>& f, R lo, R hi, ChartSide side, R p, R t,
                    ChartOptions<R> opt = {}) {
    auto chart = chart_for(f, lo, hi, side, p, opt);
    return Diffeo<R>(std::make_shared<detail::ChartFlowNode<R>>(std::move(chart), t));
}

/// Convenience overload for single-component maps on [0,1] with p = 1/2.
template <class R>
Diffeo<R> flow_time(const Diffeo<R>& f, ChartSide side, R t, ChartOptions<R> opt = {}) {
    return flow_time(f, R(0), R(1), side, R(0.5), t, opt);
}

/// Candidate k-th root f_{1/k} from the chosen side's flow. Whether it is a
/// genuine two-sided C^1 root is decided by root_defect, not assumed.
template <class R>
Diffeo<R> kth_root(const Diffeo<R>& f, long k, ChartSide side, ChartOptions<R> opt = {}) {
    if (k < 1) throw DomainError("kth_root: k must be >= 1");
    return flow_time(f, side, R(1) / R(k), opt);
}

/// sup over the grid of |f_{1/k} - f^{1/k}| (lower vs upper flows); near 0
/// this signals 1/k in the coincidence group of the two flows.
template <class R>
R root_defect(const Diffeo<R>& f, long k, const std::vector<R>& grid, ChartOptions<R> opt = {}) {
    using std::abs;
    Diffeo<R> left = kth_root(f, k, ChartSide::lower, opt);
    Diffeo<R> right = kth_root(f, k, ChartSide::upper, opt);
    R best(0);
    for (const R& x : grid) {
        R d = abs(left(x) - right(x));
        if (d > best) best = d;
    }
    return best;
}

} // namespace parabolica
