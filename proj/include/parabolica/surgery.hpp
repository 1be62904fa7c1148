#pragma once

#include <utility>
#include <vector>

#include "parabolica/circle_map.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/flow.hpp"
#include "parabolica/invariants.hpp"

namespace parabolica {

/// Serializable description of a surgery piece.
template <class R>
struct PhiSpec {
    enum class Kind { bump, sampled } kind = Kind::bump;
    // bump
    R amplitude{}, center{}, width{};
    BumpOrder order = BumpOrder::C2;
    // sampled
    std::vector<R> samples;
    R gap_center{}, gap_half_width{};
};

/// A circle diffeomorphism (as a commuting lift) that is the identity on a
/// certified interval of the circle: the building block of Mather surgery.
template <class R>
struct SupportedCircleDiffeo {
    CircleLift<R> lift;
    R gap_center;     // identity-gap center (mod 1)
    R gap_half_width; // lift == id on (gap_center - w, gap_center + w) mod 1
    R c1_size;        // measured sup|phi - id| + sup|Dphi - 1|
    PhiSpec<R> spec;  // rebuild recipe for serialization
};

/// Bump-displacement piece phi(t) = t + amplitude * bump(t - center): the
/// closed-form prototype with identity gap opposite the bump.
template <class R>
SupportedCircleDiffeo<R> bump_piece(R amplitude, R center = R(0.5), R width = R(0.45),
                                    BumpOrder order = BumpOrder::C2) {
    SupportedCircleDiffeo<R> piece;
    piece.lift = bump_lift(amplitude, center, width, order);
    piece.gap_center = detail::wrap_unit(center + R(0.5));
    R support_half = (order == BumpOrder::C1 ? R(0.75) : R(0.95)) * width;
    piece.gap_half_width = R(0.5) - support_half;
    piece.c1_size = lift_c1_size(piece.lift);
    if (!(piece.gap_half_width > R(0))) throw ConfigError("bump piece: support covers the circle");
    piece.spec.kind = PhiSpec<R>::Kind::bump;
    piece.spec.amplitude = amplitude;
    piece.spec.center = center;
    piece.spec.width = width;
    piece.spec.order = order;
    return piece;
}

/// Wraps an arbitrary lift with a known identity gap, measuring its size.
template <class R>
SupportedCircleDiffeo<R> make_piece(CircleLift<R> lift, R gap_center,
                                    R gap_half_width = R(1) / R(16),
                                    std::size_t sample_n = 1024) {
    SupportedCircleDiffeo<R> piece;
    piece.lift = std::move(lift);
    piece.gap_center = detail::wrap_unit(gap_center);
    piece.gap_half_width = gap_half_width;
    piece.c1_size = lift_c1_size(piece.lift);
    piece.spec.kind = PhiSpec<R>::Kind::sampled;
    piece.spec.gap_center = piece.gap_center;
    piece.spec.gap_half_width = gap_half_width;
    piece.spec.samples.reserve(sample_n);
    for (std::size_t i = 0; i < sample_n; ++i)
        piece.spec.samples.push_back(
            piece.lift.displacement(R(static_cast<long>(i)) / R(static_cast<long>(sample_n))));
    return piece;
}

/// Rebuilds a piece from its serialized description.
template <class R>
SupportedCircleDiffeo<R> piece_from_spec(const PhiSpec<R>& spec) {
    if (spec.kind == PhiSpec<R>::Kind::bump)
        return bump_piece(spec.amplitude, spec.center, spec.width, spec.order);
    SupportedCircleDiffeo<R> piece;
    piece.lift = spline_lift(spec.samples);
    piece.gap_center = spec.gap_center;
    piece.gap_half_width = spec.gap_half_width;
    piece.c1_size = lift_c1_size(piece.lift);
    piece.spec = spec;
    return piece;
}

template <class R>
struct PlacedPiece {
    SupportedCircleDiffeo<R> piece;
    R alpha;  // window is [alpha - 1, alpha] in upper-chart time, alpha <= 0
    R x_lo;   // window endpoints mapped through the chart
    R x_hi;
};

namespace detail {

/// g = f o h_l o ... o h_1 with h_i = psi_Y phi_i psi_Y^{-1}: each phi_i acts
/// on one fundamental-domain window of the upper chart; windows are pairwise
/// disjoint, so at most one h_i moves any given point.
template <class R>
class MatherSurgeryNode final : public DiffeoNode<R> {
  public:
    MatherSurgeryNode(Diffeo<R> base, std::shared_ptr<const FatouChart<R>> chart,
                      std::vector<PlacedPiece<R>> pieces)
        : base_(std::move(base)), chart_(std::move(chart)), pieces_(std::move(pieces)) {
        x_span_lo_ = pieces_.front().x_lo;
        x_span_hi_ = pieces_.front().x_hi;
        for (const auto& p : pieces_) {
            if (p.x_lo < x_span_lo_) x_span_lo_ = p.x_lo;
            if (p.x_hi > x_span_hi_) x_span_hi_ = p.x_hi;
        }
        push_ = base_.displacement(chart_->base_point()) > R(0) ? 1 : -1;
    }

    R value(const R& x) const override { return base_(h_value(x)); }

    R displacement(const R& x) const override {
        R hx = h_value(x);
        return (hx - x) + base_.displacement(hx);
    }

    Jet2<R> jet(const R& x) const override {
        Jet2<R> hj = h_jet(x);
        Jet2<R> fj = base_.jet(hj.v);
        bool has2 = hj.has_d2 && fj.has_d2;
        return {fj.v, fj.d1 * hj.d1, has2 ? fj.d2 * hj.d1 * hj.d1 + fj.d1 * hj.d2 : R(0), has2};
    }

    std::optional<R> closed_inverse(const R& y) const override {
        return h_inverse(base_.inverse(y));
    }

    bool advance(OrbitCursor<R>& cur, long n, int dir) const override {
        long remaining = n;
        while (remaining > 0) {
            int motion = dir * push_; // +1 toward the upper endpoint
            bool past = motion > 0 ? !(cur.x < x_span_hi_) : !(cur.x > x_span_lo_);
            if (past && !in_window(cur.x)) {
                base_.advance_orbit(cur, dir > 0 ? remaining : -remaining);
                return true;
            }
            step_once(cur, dir);
            --remaining;
        }
        return true;
    }

    const char* kind() const override { return "mather_surgery"; }
    const Diffeo<R>& base() const { return base_; }
    const std::vector<PlacedPiece<R>>& pieces() const { return pieces_; }
    const FatouChart<R>& chart() const { return *chart_; }

    /// The inner perturbation h (compose of all windowed pieces).
    R h_value(const R& x) const {
        const PlacedPiece<R>* w = find_window(x);
        if (!w) return x;
        R t = chart_->eval(x).a;
        if (!(t >= w->alpha - R(1) && t <= w->alpha)) return x;
        R u = w->piece.lift(t);
        if (u == t) return x; // identity piece (or identity gap)
        return chart_->inverse(u);
    }

    R h_inverse(const R& y) const {
        const PlacedPiece<R>* w = find_window(y);
        if (!w) return y;
        R t = chart_->eval(y).a;
        if (!(t >= w->alpha - R(1) && t <= w->alpha)) return y;
        R u = w->piece.lift.inverse(t);
        if (u == t) return y;
        return chart_->inverse(u);
    }

    Jet2<R> h_jet(const R& x) const {
        const PlacedPiece<R>* w = find_window(x);
        if (!w) return {x, R(1), R(0), true};
        ChartEval<R> bx = chart_->eval(x);
        if (!(bx.a >= w->alpha - R(1) && bx.a <= w->alpha)) return {x, R(1), R(0), true};
        R u = w->piece.lift(bx.a);
        R du = w->piece.lift.deriv(bx.a);
        R y = chart_->inverse(u);
        ChartEval<R> by = chart_->eval(y);
        R d1 = du * bx.d1 / by.d1;
        auto d2u = w->piece.lift.deriv2(bx.a);
        if (!d2u) return {y, d1, R(0), false};
        // nonlinearity composition for h = B^{-1} o phi o B
        R n_phi = *d2u / du;
        R n_w = n_phi * bx.d1 + bx.nonlin;          // N(phi o B)
        R n_h = n_w - by.nonlin * d1;               // N(B^{-1} o w)
        return {y, d1, n_h * d1, true};
    }

  private:
    const PlacedPiece<R>* find_window(const R& x) const {
        for (const auto& p : pieces_)
            if (x > p.x_lo && x < p.x_hi) return &p;
        return nullptr;
    }

    bool in_window(const R& x) const { return find_window(x) != nullptr; }

    void step_once(OrbitCursor<R>& cur, int dir) const {
        using std::exp;
        using std::log;
        if (dir > 0) {
            Jet2<R> j = jet(cur.x);
            if (cur.want_nonlin) {
                if (!j.has_d2)
                    throw DomainError("surgery orbit: second derivative unavailable for a piece");
                cur.nonlin += (j.d2 / j.d1) * exp(cur.log_d1);
            }
            if (cur.want_log || cur.want_nonlin) cur.log_d1 += log(j.d1);
            cur.x = j.v;
        } else {
            R xn = *closed_inverse(cur.x);
            Jet2<R> j = jet(xn);
            if (cur.want_nonlin) {
                if (!j.has_d2)
                    throw DomainError("surgery orbit: second derivative unavailable for a piece");
                cur.nonlin += (-(j.d2 / j.d1) / j.d1) * exp(cur.log_d1);
            }
            if (cur.want_log || cur.want_nonlin) cur.log_d1 -= log(j.d1);
            cur.x = xn;
        }
    }

    Diffeo<R> base_;
    std::shared_ptr<const FatouChart<R>> chart_;
    std::vector<PlacedPiece<R>> pieces_;
    R x_span_lo_, x_span_hi_;
    int push_;
};

} // namespace detail

/// Places a piece's window at the deepest admissible alpha <= target with
/// window ends inside the identity gap.
template <class R>
R snap_alpha(const SupportedCircleDiffeo<R>& piece, R target) {
    using std::floor;
    return piece.gap_center + floor(target - piece.gap_center);
}

/// g = f o h_l o ... o h_1 where h_i realizes phi_i on the fundamental
/// domain [f^{-1}(q_i), q_i], q_i = psi_Y(alpha_i). Requires alpha_1 <= 0 and
/// alpha_{i+1} <= alpha_i - 1 (disjoint supports marching toward the lower
/// endpoint).
template <class R>
Diffeo<R> multi_surgery(const Diffeo<R>& f, std::vector<std::pair<SupportedCircleDiffeo<R>, R>> list,
                        R p = R(0.5), R lo = R(0), R hi = R(1), ChartOptions<R> opt = {}) {
    if (list.empty()) throw ConfigError("multi_surgery: empty piece list");
    auto chart = chart_for(f, lo, hi, ChartSide::upper, p, opt);
    std::vector<PlacedPiece<R>> placed;
    R prev_alpha(1);
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& piece = list[i].first;
        R alpha = snap_alpha(piece, list[i].second);
        if (!(alpha <= R(0))) throw DomainError("surgery: alpha must be <= 0");
        if (i > 0 && !(alpha < prev_alpha - R(1)))
            throw DomainError("surgery: piece supports overlap (alpha spacing < 1)");
        prev_alpha = alpha;
        PlacedPiece<R> pp{piece, alpha, R(0), R(0)};
        R q = chart->inverse(alpha);
        R q_prev = chart->inverse(alpha - R(1));
        pp.x_lo = q_prev < q ? q_prev : q;
        pp.x_hi = q_prev < q ? q : q_prev;
        R guard = R(100) * endpoint_guard<R>();
        if (!(pp.x_lo > lo + guard) || !(pp.x_hi < hi - guard))
            throw DomainError("surgery: support escapes the component");
        placed.push_back(std::move(pp));
    }
    return Diffeo<R>(
        std::make_shared<detail::MatherSurgeryNode<R>>(f, std::move(chart), std::move(placed)));
}

template <class R>
Diffeo<R> mather_surgery(const Diffeo<R>& f, const SupportedCircleDiffeo<R>& piece, R alpha,
                         R p = R(0.5), ChartOptions<R> opt = {}) {
    return multi_surgery<R>(f, {{piece, alpha}}, p, R(0), R(1), opt);
}

/// The shift tau with M_g o T_tau = phi~ o M_f: the difference of the two
/// lower-chart times of the common support point q.
template <class R>
R surgery_shift(const Diffeo<R>& f, const Diffeo<R>& g, R q, R p = R(0.5),
                ChartOptions<R> opt = {}) {
    auto Af = chart_for(f, R(0), R(1), ChartSide::lower, p, opt);
    auto Ag = chart_for(g, R(0), R(1), ChartSide::lower, p, opt);
    return Ag->eval(q).a - Af->eval(q).a;
}

/// Writes a circle diffeomorphism fixing 0 as a composition of pieces that
/// are each the identity on an interval and C^1-small. The isotopy
/// psi_s = id + s (phi - id) is cut into l stages (always a diffeotopy since
/// D phi > 0), and every stage is split into a piece vanishing near 0 and one
/// vanishing near 1/2. Returns pieces in application order:
/// phi = out[m-1] o ... o out[0]. two_piece forces l = 1 (the variant used
/// for the C^2 pipeline).
template <class R>
std::vector<SupportedCircleDiffeo<R>> fragment(const CircleLift<R>& phi, R eps_target,
                                               bool two_piece = false) {
    using std::abs;
    R size = lift_c1_size(phi);
    std::vector<SupportedCircleDiffeo<R>> out;
    if (size < R(1e-13)) return out;

    long l = two_piece ? 1 : std::max<long>(1, static_cast<long>(dbl(size / eps_target)) + 1);
    for (int attempt = 0; attempt < 12; ++attempt) {
        out.clear();
        bool ok = true;
        for (long i = 1; i <= l && ok; ++i) {
            R s_hi = R(i) / R(l);
            R s_lo = R(i - 1) / R(l);
            CircleLift<R> stage =
                i == 1 && l == 1
                    ? phi
                    : compose_lifts<R>({isotopy_lift(phi, s_hi), inverse_lift(isotopy_lift(phi, s_lo))});
            CircleLift<R> u = damped_lift(stage, R(0));
            CircleLift<R> v = compose_lifts<R>({stage, inverse_lift(u)});
            R su = lift_c1_size(u), sv = lift_c1_size(v);
            // validity: both damped pieces must stay diffeomorphisms
            for (std::size_t k = 0; k < 257 && ok; ++k) {
                R t = R(static_cast<long>(k)) / R(257);
                if (!(u.deriv(t) > R(0)) || !(v.deriv(t) > R(0))) ok = false;
            }
            if (!two_piece && (su > eps_target || sv > eps_target)) ok = false;
            if (ok) {
                out.push_back(make_piece(u, R(0)));
                out.push_back(make_piece(v, R(0.5)));
            }
        }
        if (ok) return out;
        if (two_piece) throw InvalidTreeError("fragment: two-piece damping failed (map too large)");
        l *= 2;
    }
    throw ConvergenceError("fragment: could not reach the target piece size");
}

template <class R>
struct TrivializationReport {
    Diffeo<R> result;
    R defect_before;
    R defect_after;
    R beta;               // support placement bound from the variation scan
    std::size_t pieces;
};

/// Cancels the Mather invariant: fragments the normalized inverse of
/// M_f^{p,p} and applies the pieces on disjoint fundamental domains deep
/// enough that V(f; [0, q]) is below the smallness budget.
template <class R>
TrivializationReport<R> trivialize_mather(const Diffeo<R>& f, R p, R eps_target,
                                          std::size_t grid_n = 256, bool two_piece = false,
                                          ChartOptions<R> opt = {}) {
    CircleMap<R> M = mather(f, p, p, grid_n, R(0), R(1), opt);
    TrivializationReport<R> rep;
    rep.defect_before = M.triviality_defect();

    // normalized inverse fixing 0
    CircleLift<R> minv = inverse_lift(M.lift());
    R c = minv(R(0));
    CircleLift<R> target = compose_lifts<R>({translation_lift(-c), minv});

    auto pieces = fragment(target, eps_target, two_piece);
    rep.pieces = pieces.size();
    if (pieces.empty()) {
        rep.result = f;
        rep.defect_after = rep.defect_before;
        rep.beta = R(0);
        return rep;
    }

    // Lemma-style support placement: push the windows deep enough that the
    // variation of f over [0, q] is below half the C^1 budget.
    auto B = chart_for(f, R(0), R(1), ChartSide::upper, p, opt);
    R delta = eps_target;
    R beta(-2);
    for (int it = 0; it < 60; ++it) {
        R q = B->inverse(beta);
        if (variation(f, R(0), q) < delta / R(2)) break;
        beta = beta - R(2);
    }
    rep.beta = beta;

    // The Mather invariant composes with phi~_1 outermost; apply the last
    // fragment shallowest so the recomposition reproduces the target.
    std::vector<std::pair<SupportedCircleDiffeo<R>, R>> list;
    R alpha = beta;
    for (std::size_t i = pieces.size(); i-- > 0;) {
        list.emplace_back(pieces[i], alpha);
        alpha = alpha - R(2);
    }
    rep.result = multi_surgery(f, std::move(list), p, R(0), R(1), opt);
    rep.defect_after = mather(rep.result, p, p, grid_n, R(0), R(1), opt).triviality_defect();
    return rep;
}

} // namespace parabolica
