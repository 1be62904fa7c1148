#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "parabolica/bump.hpp"
#include "parabolica/errors.hpp"
#include "parabolica/ode.hpp"
#include "parabolica/real.hpp"
#include "parabolica/rootfind.hpp"
#include "parabolica/vector_field.hpp"

namespace parabolica {

template <class R>
struct Jet2 {
    R v;
    R d1;
    R d2;
    bool has_d2 = true;
};

/// State threaded through orbit iteration. log_d1 accumulates
/// log D(f^k)(x0) as a sum of per-step terms (never by differencing the
/// composite); nonlin accumulates the nonlinearity D2(f^k)/D(f^k) when
/// requested.
template <class R>
struct OrbitCursor {
    R x;
    R log_d1 = R(0);
    R nonlin = R(0);
    bool want_log = false;
    bool want_nonlin = false;
};

template <class R>
class Diffeo;

namespace detail {

template <class R>
class DiffeoNode {
  public:
    virtual ~DiffeoNode() = default;
    virtual R value(const R& x) const = 0;
    virtual R displacement(const R& x) const { return value(x) - x; }
    virtual Jet2<R> jet(const R& x) const = 0;
    virtual std::optional<R> closed_inverse(const R& /*y*/) const { return std::nullopt; }
    /// Fast orbit advance by n applications of f^dir; false means "no
    /// acceleration here", and the caller falls back to stepping.
    virtual bool advance(OrbitCursor<R>& /*cur*/, long /*n*/, int /*dir*/) const { return false; }
    virtual const char* kind() const = 0;
};

} // namespace detail

/// Immutable expression tree denoting an orientation-preserving interval
/// map. Value semantics: copies share the node.
template <class R>
class Diffeo {
  public:
    using Node = detail::DiffeoNode<R>;

    Diffeo() = default;
    explicit Diffeo(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    bool valid() const { return static_cast<bool>(node_); }
    const Node& node() const { return *node_; }
    std::shared_ptr<const Node> node_ptr() const { return node_; }

    R operator()(const R& x) const { return node_->value(x); }
    R displacement(const R& x) const { return node_->displacement(x); }

    Jet2<R> jet(const R& x) const { return node_->jet(x); }

    R deriv(const R& x, int order = 1) const {
        Jet2<R> j = node_->jet(x);
        if (order == 1) return j.d1;
        if (order != 2) throw DomainError("deriv: order must be 1 or 2");
        if (!j.has_d2)
            throw DomainError("deriv: a node on the evaluation path has no second derivative");
        return j.d2;
    }

    /// Inverse evaluation: closed form when the node has one, otherwise a
    /// monotone bracketed search on [0,1] with Newton refinement.
    R inverse(const R& y) const {
        if (auto inv = node_->closed_inverse(y)) return *inv;
        const auto* n = node_.get();
        return solve_increasing<R>(
            [n, &y](R x) { return n->value(x) - y; },
            [n](R x) { return n->jet(x).d1; }, R(0), R(1), true);
    }

    R iterate(long n, const R& x) const {
        OrbitCursor<R> cur{x};
        advance_orbit(cur, n);
        return cur.x;
    }

    /// log D(f^n)(x) for n >= 0, by orbit summation.
    R log_deriv_cocycle(long n, const R& x) const {
        if (n < 0) throw DomainError("log_deriv_cocycle: n must be nonnegative");
        OrbitCursor<R> cur{x};
        cur.want_log = true;
        advance_orbit(cur, n);
        return cur.log_d1;
    }

    /// Advance by n applications of f (n < 0 means f^{-1}), respecting the
    /// cursor's accumulation flags.
    void advance_orbit(OrbitCursor<R>& cur, long n) const {
        int dir = n >= 0 ? 1 : -1;
        long count = n >= 0 ? n : -n;
        if (count == 0) return;
        if (node_->advance(cur, count, dir)) return;
        for (long i = 0; i < count; ++i) step(cur, dir);
    }

    void step(OrbitCursor<R>& cur, int dir) const {
        using std::exp;
        using std::log;
        if (dir > 0) {
            if (cur.want_nonlin) {
                Jet2<R> j = node_->jet(cur.x);
                check_positive(j.d1);
                cur.nonlin += (j.d2 / j.d1) * exp(cur.log_d1);
                cur.log_d1 += log(j.d1);
                cur.x = j.v;
            } else if (cur.want_log) {
                Jet2<R> j = node_->jet(cur.x);
                check_positive(j.d1);
                cur.log_d1 += log(j.d1);
                cur.x = j.v;
            } else {
                cur.x = node_->value(cur.x);
            }
        } else {
            R xn = inverse(cur.x);
            if (cur.want_nonlin) {
                Jet2<R> j = node_->jet(xn);
                check_positive(j.d1);
                cur.nonlin += (-(j.d2 / j.d1) / j.d1) * exp(cur.log_d1);
                cur.log_d1 -= log(j.d1);
            } else if (cur.want_log) {
                Jet2<R> j = node_->jet(xn);
                check_positive(j.d1);
                cur.log_d1 -= log(j.d1);
            }
            cur.x = xn;
        }
    }

    friend bool same_node(const Diffeo& a, const Diffeo& b) { return a.node_ == b.node_; }

  private:
    static void check_positive(const R& d) {
        if (!(d > R(0))) throw InvalidTreeError("derivative <= 0 along orbit: invalid tree");
    }

    std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Core node kinds
// ---------------------------------------------------------------------------

namespace detail {

template <class R>
class IdentityNode final : public DiffeoNode<R> {
  public:
    R value(const R& x) const override { return x; }
    R displacement(const R&) const override { return R(0); }
    Jet2<R> jet(const R& x) const override { return {x, R(1), R(0), true}; }
    std::optional<R> closed_inverse(const R& y) const override { return y; }
    bool advance(OrbitCursor<R>&, long, int) const override { return true; }
    const char* kind() const override { return "identity"; }
};

/// Germ families q_i^lambda of Eq-type closed forms, conjugated to the
/// anchor a by a translation:
///   family 1: x / (1 - lambda x)
///   family 2: x / sqrt(1 - lambda x^2)
///   family 3: x / cbrt(1 - lambda x^3)
/// direction "inverse" denotes (q_i^lambda)^{-1} = q_i^{-lambda}.
template <class R>
class GermQNode final : public DiffeoNode<R> {
  public:
    GermQNode(int family, R lambda, R anchor, bool inverse_direction)
        : family_(family), lambda_(lambda), anchor_(anchor), inverse_(inverse_direction) {
        if (family < 1 || family > 3) throw ConfigError("germ family must be 1, 2 or 3");
    }

    R value(const R& x) const override {
        R u = x - anchor_;
        return anchor_ + u / root_den(u, mu());
    }

    R displacement(const R& x) const override {
        using std::sqrt;
        R u = x - anchor_;
        R m = mu();
        R z = m * powk(u);
        R den = root_den(u, m);
        switch (family_) {
            case 1: return u * z / den;
            case 2: {
                // u*(1/sqrt(1-z) - 1), written cancellation-free
                R s = den; // s = sqrt(1-z)
                return u * z / (s * (R(1) + s));
            }
            default: {
                R s = den; // s = cbrt(1-z)
                return u * z / (s * (R(1) + s + s * s));
            }
        }
    }

    Jet2<R> jet(const R& x) const override {
        R u = x - anchor_;
        R m = mu();
        R den = root_den(u, m);
        switch (family_) {
            case 1: {
                R d = den; // 1 - m u
                return {anchor_ + u / d, R(1) / (d * d), R(2) * m / (d * d * d), true};
            }
            case 2: {
                R w = R(1) - m * u * u;
                R s = den;
                return {anchor_ + u / s, R(1) / (w * s), R(3) * m * u / (w * w * s), true};
            }
            default: {
                R w = R(1) - m * u * u * u;
                R s = den;
                return {anchor_ + u / s, R(1) / (w * s), R(4) * m * u * u / (w * w * s), true};
            }
        }
    }

    std::optional<R> closed_inverse(const R& y) const override {
        R u = y - anchor_;
        return anchor_ + u / root_den(u, -mu());
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::log;
        R m = mu() * R(static_cast<long>(dir) * n);
        R u = cur.x - anchor_;
        R den = root_den(u, m);
        if (cur.want_log || cur.want_nonlin) {
            R w = R(1) - m * powk(u);
            R log_d1;
            switch (family_) {
                case 1: log_d1 = R(-2) * log(w); break;
                case 2: log_d1 = R(-1.5) * log(w); break;
                default: log_d1 = -R(4) / R(3) * log(w); break;
            }
            if (cur.want_nonlin) {
                using std::exp;
                // N(q^m) from the same closed forms as jet().
                R nl;
                switch (family_) {
                    case 1: nl = R(2) * m / w; break;
                    case 2: nl = R(3) * m * u / w; break;
                    default: nl = R(4) * m * u * u / w; break;
                }
                cur.nonlin += nl * exp(cur.log_d1);
            }
            cur.log_d1 += log_d1;
        }
        cur.x = anchor_ + u / den;
        return true;
    }

    const char* kind() const override { return "germ_q"; }

    int family() const { return family_; }
    const R& lambda() const { return lambda_; }
    const R& anchor() const { return anchor_; }
    bool inverse_direction() const { return inverse_; }

  private:
    R mu() const { return inverse_ ? -lambda_ : lambda_; }

    R powk(const R& u) const {
        if (family_ == 1) return u;
        if (family_ == 2) return u * u;
        return u * u * u;
    }

    /// Denominator (1 - m u^k)^{1/k}; throws past the singularity.
    R root_den(const R& u, const R& m) const {
        using std::cbrt;
        using std::sqrt;
        R w = R(1) - m * powk(u);
        if (!(w > R(0))) throw DomainError("germ singularity inside evaluation range");
        if (family_ == 1) return w;
        if (family_ == 2) return sqrt(w);
        return cbrt(w);
    }

    int family_;
    R lambda_, anchor_;
    bool inverse_;
};

/// x + lambda x^2 (germ at 0). Unlike the q families it is not conjugate to
/// its powers by homotheties.
template <class R>
class HatGermQ1Node final : public DiffeoNode<R> {
  public:
    explicit HatGermQ1Node(R lambda) : lambda_(lambda) {}

    R value(const R& x) const override { return x + lambda_ * x * x; }
    R displacement(const R& x) const override { return lambda_ * x * x; }
    Jet2<R> jet(const R& x) const override {
        return {x + lambda_ * x * x, R(1) + R(2) * lambda_ * x, R(2) * lambda_, true};
    }
    std::optional<R> closed_inverse(const R& y) const override {
        using std::sqrt;
        if (lambda_ == R(0)) return y;
        R disc = R(1) + R(4) * lambda_ * y;
        if (!(disc > R(0))) throw DomainError("hat germ inverse: negative discriminant");
        // root continuous at lambda -> 0: 2y / (1 + sqrt(1+4*lambda*y))
        return R(2) * y / (R(1) + sqrt(disc));
    }
    const char* kind() const override { return "hat_germ_q1"; }
    const R& lambda() const { return lambda_; }

  private:
    R lambda_;
};

template <class R>
class PolyMapNode final : public DiffeoNode<R> {
  public:
    explicit PolyMapNode(std::vector<R> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.push_back(R(0));
        d1_ = poly_derivative(c_);
        d2_ = poly_derivative(d1_);
        disp_ = c_;
        if (disp_.size() < 2) disp_.resize(2, R(0));
        disp_[1] -= R(1);
    }

    R value(const R& x) const override { return horner(c_, x); }
    R displacement(const R& x) const override { return horner(disp_, x); }
    Jet2<R> jet(const R& x) const override {
        return {horner(c_, x), horner(d1_, x), horner(d2_, x), true};
    }
    const char* kind() const override { return "poly_map"; }
    const std::vector<R>& coefficients() const { return c_; }

  private:
    std::vector<R> c_, d1_, d2_, disp_;
};

/// Time-t map of the flow of a closed-form vector field. Derivatives come
/// from the generating-field identity D f_t(x) = X(f_t(x)) / X(x) instead of
/// numeric differencing; at a field zero the limits exp(t X') and t X''
/// apply.
template <class R>
class FlowTimeNode final : public DiffeoNode<R> {
  public:
    FlowTimeNode(VectorField<R> field, R t, OdeOptions<R> opt = {})
        : field_(std::move(field)), t_(t), opt_(opt) {}

    R value(const R& x) const override {
        if (at_zero(x)) return x;
        return flow_advance(field_, x, t_, opt_).x;
    }

    R displacement(const R& x) const override {
        if (at_zero(x)) return R(0);
        return flow_advance(field_, x, t_, opt_).displacement;
    }

    Jet2<R> jet(const R& x) const override { return jet_for_time(x, t_); }

    std::optional<R> closed_inverse(const R& y) const override {
        if (at_zero(y)) return y;
        return flow_advance(field_, y, -t_, opt_).x;
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        using std::log;
        R span = t_ * R(static_cast<long>(dir) * n);
        if (at_zero(cur.x)) {
            if (cur.want_log || cur.want_nonlin) {
                R rate = field_.deriv(cur.x);
                if (cur.want_nonlin)
                    cur.nonlin += nonlin_at_zero(cur.x, span) * exp(cur.log_d1);
                cur.log_d1 += span * rate;
            }
            return true;
        }
        R x0 = cur.x;
        R x1 = flow_advance(field_, x0, span, opt_).x;
        if (cur.want_log || cur.want_nonlin) {
            R X0 = field_(x0), X1 = field_(x1);
            if (!(X0 * X1 > R(0)))
                throw ConvergenceError("flow orbit crossed a field zero");
            if (cur.want_nonlin) {
                R d = X1 / X0;
                R nl = field_.deriv(x1) * d / X1 - field_.deriv(x0) / X0;
                cur.nonlin += nl * exp(cur.log_d1);
            }
            cur.log_d1 += log(X1 / X0);
        }
        cur.x = x1;
        return true;
    }

    const char* kind() const override { return "flow_time"; }
    const VectorField<R>& field() const { return field_; }
    const R& time() const { return t_; }

  private:
    Jet2<R> jet_for_time(const R& x, const R& t) const {
        using std::exp;
        if (at_zero(x)) {
            R rate = field_.deriv(x);
            R d1 = exp(t * rate);
            return {x, d1, nonlin_at_zero(x, t) * d1, true};
        }
        R y = flow_advance(field_, x, t, opt_).x;
        R X0 = field_(x), X1 = field_(y);
        R d1 = X1 / X0;
        R d2 = d1 * (field_.deriv(y) * d1 / X1 - field_.deriv(x) / X0);
        return {y, d1, d2, true};
    }

    /// D2 f_t / D f_t at a fixed point of the flow. Exact for parabolic
    /// zeros (t X''); for a simple zero the standard closed form applies.
    R nonlin_at_zero(const R& x, const R& t) const {
        using std::abs;
        using std::exp;
        R a = field_.deriv(x);
        R b = field_.deriv2(x);
        if (abs(a) < R(1e-12)) return t * b;
        return b / a * (exp(t * a) - R(1));
    }

    bool at_zero(const R& x) const {
        using std::abs;
        R tol = R(64) * real_traits<R>::epsilon();
        for (const auto& z : field_.zeros())
            if (abs(x - z.location) <= tol) return true;
        return false;
    }

    VectorField<R> field_;
    R t_;
    OdeOptions<R> opt_;
};

/// Compose[f, g, ...] is the mathematical composition: the last entry is
/// applied first.
template <class R>
class ComposeNode final : public DiffeoNode<R> {
  public:
    explicit ComposeNode(std::vector<Diffeo<R>> items) : items_(std::move(items)) {
        if (items_.empty()) throw ConfigError("compose: needs at least one entry");
    }

    R value(const R& x) const override {
        R y = x;
        for (std::size_t i = items_.size(); i-- > 0;) y = items_[i](y);
        return y;
    }

    R displacement(const R& x) const override {
        R y = x;
        R acc(0);
        for (std::size_t i = items_.size(); i-- > 0;) {
            acc += items_[i].displacement(y);
            y = items_[i](y);
        }
        return acc;
    }

    Jet2<R> jet(const R& x) const override {
        Jet2<R> acc{x, R(1), R(0), true};
        for (std::size_t i = items_.size(); i-- > 0;) {
            Jet2<R> j = items_[i].jet(acc.v);
            acc.d2 = j.d2 * acc.d1 * acc.d1 + j.d1 * acc.d2;
            acc.d1 = j.d1 * acc.d1;
            acc.v = j.v;
            acc.has_d2 = acc.has_d2 && j.has_d2;
        }
        return acc;
    }

    std::optional<R> closed_inverse(const R& y) const override {
        R x = y;
        for (const auto& item : items_) {
            auto inv = item.node().closed_inverse(x);
            if (!inv) return std::nullopt;
            x = *inv;
        }
        return x;
    }

    const char* kind() const override { return "compose"; }
    const std::vector<Diffeo<R>>& items() const { return items_; }

  private:
    std::vector<Diffeo<R>> items_;
};

template <class R>
class InverseNode final : public DiffeoNode<R> {
  public:
    explicit InverseNode(Diffeo<R> inner) : inner_(std::move(inner)) {}

    R value(const R& x) const override { return inner_.inverse(x); }
    R displacement(const R& x) const override { return -inner_.displacement(value(x)); }

    Jet2<R> jet(const R& x) const override {
        R y = value(x);
        Jet2<R> j = inner_.jet(y);
        R d1 = R(1) / j.d1;
        return {y, d1, -j.d2 * d1 * d1 * d1, j.has_d2};
    }

    std::optional<R> closed_inverse(const R& y) const override { return inner_(y); }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        inner_.advance_orbit(cur, dir > 0 ? -n : n);
        return true;
    }

    const char* kind() const override { return "inverse"; }
    const Diffeo<R>& inner() const { return inner_; }

  private:
    Diffeo<R> inner_;
};

template <class R>
class IntPowerNode final : public DiffeoNode<R> {
  public:
    IntPowerNode(Diffeo<R> inner, long exponent) : inner_(std::move(inner)), n_(exponent) {}

    R value(const R& x) const override { return inner_.iterate(n_, x); }

    R displacement(const R& x) const override {
        long count = n_ >= 0 ? n_ : -n_;
        int dir = n_ >= 0 ? 1 : -1;
        R y = x;
        R acc(0);
        for (long i = 0; i < count; ++i) {
            R ynext = dir > 0 ? inner_(y) : inner_.inverse(y);
            acc += dir > 0 ? inner_.displacement(y) : -inner_.displacement(ynext);
            y = ynext;
        }
        return acc;
    }

    Jet2<R> jet(const R& x) const override {
        using std::exp;
        OrbitCursor<R> cur{x};
        cur.want_log = cur.want_nonlin = true;
        inner_.advance_orbit(cur, n_);
        R d1 = exp(cur.log_d1);
        return {cur.x, d1, cur.nonlin * d1, true};
    }

    std::optional<R> closed_inverse(const R& y) const override { return inner_.iterate(-n_, y); }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        long total = n_ * n;
        inner_.advance_orbit(cur, dir > 0 ? total : -total);
        return true;
    }

    const char* kind() const override { return "int_power"; }
    const Diffeo<R>& inner() const { return inner_; }
    long exponent() const { return n_; }

  private:
    Diffeo<R> inner_;
    long n_;
};

/// rho*g + (1-rho)*f. Monotonicity is checked by the blend() factory, not
/// assumed here.
///
/// Orbit advance exploits the bump geometry: outside the support the node is
/// exactly f, on the plateau exactly g, and orbits are monotone, so long
/// stretches delegate to the child's fast path and only the ramp bands are
/// stepped through a point at a time.
template <class R>
class BlendNode final : public DiffeoNode<R> {
  public:
    BlendNode(Diffeo<R> f, Diffeo<R> g, BumpFn<R> bump)
        : f_(std::move(f)), g_(std::move(g)), bump_(std::move(bump)) {}

    R value(const R& x) const override {
        if (x <= bump_.support_lo() || x >= bump_.support_hi()) return f_(x);
        R r = bump_(x);
        return r * g_(x) + (R(1) - r) * f_(x);
    }

    R displacement(const R& x) const override {
        if (x <= bump_.support_lo() || x >= bump_.support_hi()) return f_.displacement(x);
        R r = bump_(x);
        return f_.displacement(x) + r * (g_.displacement(x) - f_.displacement(x));
    }

    Jet2<R> jet(const R& x) const override {
        if (x <= bump_.support_lo() || x >= bump_.support_hi()) return f_.jet(x);
        Jet2<R> jf = f_.jet(x);
        Jet2<R> jg = g_.jet(x);
        R r = bump_(x), r1 = bump_.deriv(x), r2 = bump_.deriv2(x);
        R diff = jg.v - jf.v;
        R diff1 = jg.d1 - jf.d1;
        R diff2 = jg.d2 - jf.d2;
        return {jf.v + r * diff, jf.d1 + r * diff1 + r1 * diff,
                jf.d2 + r * diff2 + R(2) * r1 * diff1 + r2 * diff, jf.has_d2 && jg.has_d2};
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        using std::log;
        long remaining = n;
        while (remaining > 0) {
            const Diffeo<R>* child = nullptr;
            bool has_boundary = false;
            R boundary(0);
            bool below_support = !(cur.x > bump_.support_lo());
            bool above_support = !(cur.x < bump_.support_hi());
            bool on_plateau = cur.x >= bump_.plateau_lo() && cur.x <= bump_.plateau_hi();
            if (below_support || above_support)
                child = &f_;
            else if (on_plateau)
                child = &g_;
            if (!child) {
                // ramp band: one composite step
                single_step(cur, dir);
                --remaining;
                continue;
            }
            R disp = child->displacement(cur.x);
            if (disp == R(0)) {
                // fixed inside the region: nothing moves
                return true;
            }
            bool moving_up = (disp > R(0)) == (dir > 0);
            if (below_support) {
                has_boundary = moving_up;
                boundary = bump_.support_lo();
            } else if (above_support) {
                has_boundary = !moving_up;
                boundary = bump_.support_hi();
            } else {
                has_boundary = true;
                boundary = moving_up ? bump_.plateau_hi() : bump_.plateau_lo();
            }
            if (!has_boundary) {
                child->advance_orbit(cur, dir > 0 ? remaining : -remaining);
                return true;
            }
            // largest k with all intermediate points short of the boundary
            auto probe_ok = [&](long k) {
                try {
                    R probe = child->iterate(static_cast<long>(dir) * k, cur.x);
                    return moving_up ? probe < boundary : probe > boundary;
                } catch (const Error&) {
                    return false; // iterated past the child's domain
                }
            };
            long k_hi = remaining, k_safe = 0;
            if (probe_ok(k_hi - 1)) {
                k_safe = k_hi;
            } else {
                long lo = 0, hi = k_hi - 1;
                while (lo < hi) {
                    long mid = (lo + hi + 1) / 2;
                    if (probe_ok(mid))
                        lo = mid;
                    else
                        hi = mid - 1;
                }
                k_safe = lo; // intermediate points are x .. child^{k_safe - 1}(x)
            }
            if (k_safe == 0) {
                single_step(cur, dir);
                --remaining;
                continue;
            }
            child->advance_orbit(cur, static_cast<long>(dir) * k_safe);
            remaining -= k_safe;
        }
        return true;
    }

    const char* kind() const override { return "blend"; }
    const Diffeo<R>& base() const { return f_; }
    const Diffeo<R>& graft() const { return g_; }
    const BumpFn<R>& bump() const { return bump_; }

  private:
    void single_step(OrbitCursor<R>& cur, int dir) const {
        using std::exp;
        using std::log;
        if (dir > 0) {
            Jet2<R> j = jet(cur.x);
            if (cur.want_nonlin) cur.nonlin += (j.d2 / j.d1) * exp(cur.log_d1);
            if (cur.want_log || cur.want_nonlin) cur.log_d1 += log(j.d1);
            cur.x = j.v;
        } else {
            const BlendNode* self = this;
            R xn = solve_increasing<R>(
                [self, &cur](R u) { return self->value(u) - cur.x; },
                [self](R u) { return self->jet(u).d1; }, R(0), R(1), true);
            Jet2<R> j = jet(xn);
            if (cur.want_nonlin) cur.nonlin += (-(j.d2 / j.d1) / j.d1) * exp(cur.log_d1);
            if (cur.want_log || cur.want_nonlin) cur.log_d1 -= log(j.d1);
            cur.x = xn;
        }
    }

    Diffeo<R> f_, g_;
    BumpFn<R> bump_;
};

/// H o f o H^{-1} with the homothety H(x) = a + s (x - a).
template <class R>
class HomothetyConjNode final : public DiffeoNode<R> {
  public:
    HomothetyConjNode(Diffeo<R> inner, R scale, R anchor)
        : inner_(std::move(inner)), s_(scale), a_(anchor) {
        if (!(s_ > R(0))) throw ConfigError("homothety scale must be positive");
    }

    R value(const R& x) const override { return x + s_ * inner_.displacement(pre(x)); }

    R displacement(const R& x) const override { return s_ * inner_.displacement(pre(x)); }

    Jet2<R> jet(const R& x) const override {
        Jet2<R> j = inner_.jet(pre(x));
        return {a_ + s_ * (j.v - a_), j.d1, j.d2 / s_, j.has_d2};
    }

    std::optional<R> closed_inverse(const R& y) const override {
        R u = inner_.inverse(pre(y));
        return a_ + s_ * (u - a_);
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        OrbitCursor<R> sub{pre(cur.x)};
        sub.want_log = cur.want_log;
        sub.want_nonlin = cur.want_nonlin;
        inner_.advance_orbit(sub, dir > 0 ? n : -n);
        if (cur.want_nonlin) cur.nonlin += (sub.nonlin / s_) * exp(cur.log_d1);
        cur.log_d1 += sub.log_d1;
        cur.x = a_ + s_ * (sub.x - a_);
        return true;
    }

    const char* kind() const override { return "homothety_conj"; }
    const Diffeo<R>& inner() const { return inner_; }
    const R& scale() const { return s_; }
    const R& anchor() const { return a_; }

  private:
    R pre(const R& x) const { return a_ + (x - a_) / s_; }

    Diffeo<R> inner_;
    R s_, a_;
};

/// Gluing of unit-interval pieces along breakpoints: piece i acts on
/// [b_i, b_{i+1}] conjugated by the affine chart onto [0,1]. Breakpoints are
/// fixed points of the glued map.
template <class R>
class PiecewiseGlueNode final : public DiffeoNode<R> {
  public:
    PiecewiseGlueNode(std::vector<R> breakpoints, std::vector<Diffeo<R>> pieces)
        : b_(std::move(breakpoints)), pieces_(std::move(pieces)) {
        if (b_.size() != pieces_.size() + 1)
            throw ConfigError("piecewise glue: need one more breakpoint than pieces");
        for (std::size_t i = 0; i + 1 < b_.size(); ++i)
            if (!(b_[i] < b_[i + 1])) throw ConfigError("piecewise glue: breakpoints must increase");
    }

    R value(const R& x) const override {
        std::size_t i = segment(x);
        R w = b_[i + 1] - b_[i];
        return b_[i] + w * pieces_[i]((x - b_[i]) / w);
    }

    R displacement(const R& x) const override {
        std::size_t i = segment(x);
        R w = b_[i + 1] - b_[i];
        return w * pieces_[i].displacement((x - b_[i]) / w);
    }

    Jet2<R> jet(const R& x) const override {
        std::size_t i = segment(x);
        R w = b_[i + 1] - b_[i];
        Jet2<R> j = pieces_[i].jet((x - b_[i]) / w);
        return {b_[i] + w * j.v, j.d1, j.d2 / w, j.has_d2};
    }

    std::optional<R> closed_inverse(const R& y) const override {
        std::size_t i = segment(y);
        R w = b_[i + 1] - b_[i];
        return b_[i] + w * pieces_[i].inverse((y - b_[i]) / w);
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        using std::exp;
        std::size_t i = segment(cur.x);
        R w = b_[i + 1] - b_[i];
        OrbitCursor<R> sub{(cur.x - b_[i]) / w};
        sub.want_log = cur.want_log;
        sub.want_nonlin = cur.want_nonlin;
        pieces_[i].advance_orbit(sub, dir > 0 ? n : -n);
        if (cur.want_nonlin) cur.nonlin += (sub.nonlin / w) * exp(cur.log_d1);
        cur.log_d1 += sub.log_d1;
        cur.x = b_[i] + w * sub.x;
        return true;
    }

    const char* kind() const override { return "piecewise_glue"; }
    const std::vector<R>& breakpoints() const { return b_; }
    const std::vector<Diffeo<R>>& pieces() const { return pieces_; }

  private:
    std::size_t segment(const R& x) const {
        std::size_t i = 0;
        while (i + 2 < b_.size() && x > b_[i + 1]) ++i;
        return i;
    }

    std::vector<R> b_;
    std::vector<Diffeo<R>> pieces_;
};

} // namespace detail

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

template <class R>
Diffeo<R> identity() {
    return Diffeo<R>(std::make_shared<detail::IdentityNode<R>>());
}

enum class GermDirection { forward, inverse };

/// Closed-form germ q_family^lambda anchored at a.
template <class R>
Diffeo<R> germ_q(int family, R lambda, R anchor = R(0),
                 GermDirection dir = GermDirection::forward) {
    return Diffeo<R>(std::make_shared<detail::GermQNode<R>>(family, lambda, anchor,
                                                            dir == GermDirection::inverse));
}

template <class R>
Diffeo<R> hat_germ_q1(R lambda) {
    return Diffeo<R>(std::make_shared<detail::HatGermQ1Node<R>>(lambda));
}

template <class R>
Diffeo<R> poly_map(std::vector<R> coeffs) {
    return Diffeo<R>(std::make_shared<detail::PolyMapNode<R>>(std::move(coeffs)));
}

template <class R>
Diffeo<R> flow_from_field(VectorField<R> field, R t, OdeOptions<R> opt = {}) {
    return Diffeo<R>(std::make_shared<detail::FlowTimeNode<R>>(std::move(field), t, opt));
}

template <class R>
Diffeo<R> compose(std::vector<Diffeo<R>> items) {
    return Diffeo<R>(std::make_shared<detail::ComposeNode<R>>(std::move(items)));
}

template <class R>
Diffeo<R> compose(Diffeo<R> f, Diffeo<R> g) {
    return compose(std::vector<Diffeo<R>>{std::move(f), std::move(g)});
}

template <class R>
Diffeo<R> inverse_of(Diffeo<R> f) {
    return Diffeo<R>(std::make_shared<detail::InverseNode<R>>(std::move(f)));
}

template <class R>
Diffeo<R> int_power(Diffeo<R> f, long n) {
    return Diffeo<R>(std::make_shared<detail::IntPowerNode<R>>(std::move(f), n));
}

template <class R>
Diffeo<R> homothety_conj(Diffeo<R> f, R scale, R anchor = R(0)) {
    return Diffeo<R>(std::make_shared<detail::HomothetyConjNode<R>>(std::move(f), scale, anchor));
}

template <class R>
Diffeo<R> piecewise_glue(std::vector<R> breakpoints, std::vector<Diffeo<R>> pieces) {
    return Diffeo<R>(
        std::make_shared<detail::PiecewiseGlueNode<R>>(std::move(breakpoints), std::move(pieces)));
}

} // namespace parabolica
