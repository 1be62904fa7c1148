#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "parabolica/analysis.hpp"
#include "parabolica/circle_map.hpp"
#include "parabolica/diffeo.hpp"
#include "parabolica/flow.hpp"
#include "parabolica/parallel.hpp"

namespace parabolica {

/// Total variation of log Df over [a,b], estimated on a refinement grid
/// (doubled until the relative change drops below rel_tol). A grid sum is a
/// lower bound of the true variation and never decreases under refinement.
template <class R>
R variation(const Diffeo<R>& f, R a, R b, std::size_t grid_n = 256, R rel_tol = R(1e-4),
            std::size_t grid_cap = 65536) {
    using std::abs;
    using std::log;
    R prev(-1);
    for (std::size_t n = grid_n; n <= grid_cap; n *= 2) {
        R sum(0);
        R last(0);
        bool first = true;
        for (std::size_t i = 0; i <= n; ++i) {
            R x = a + (b - a) * R(static_cast<long>(i)) / R(static_cast<long>(n));
            R d = f.deriv(x);
            if (!(d > R(0))) throw InvalidTreeError("variation: derivative <= 0");
            R cur = log(d);
            if (!first) sum += abs(cur - last);
            last = cur;
            first = false;
        }
        if (prev >= R(0) && abs(sum - prev) <= rel_tol * (sum + R(1e-30))) return sum;
        prev = sum;
    }
    return prev;
}

/// Orbit-adapted partition of one component: a fundamental domain around the
/// base point is subdivided into `subdiv` cells and spread by the orbit over
/// sheets j in [-sheets, sheets]. Cumulative log-derivative tables along each
/// base orbit make V(f^n) at every partition point an exact orbit sum:
///   log D f^n(f^j t_i) = C_i(j+n) - C_i(j).
/// A uniform grid cannot resolve the fundamental domains piling up at the
/// parabolic endpoints, which silently caps the detectable variation; the
/// orbit partition is the honest carrier for the V(f^n)/n estimator.
template <class R>
class OrbitPartition {
  public:
    /// Push-left components are handled by building the partition for the
    /// inverse map: V(f^n) = V((f^{-1})^n) by the image-partition identity.
    OrbitPartition(const Diffeo<R>& f, R base, std::size_t subdiv, long sheets, long max_row) {
        Diffeo<R> g = f.displacement(base) > R(0) ? f : inverse_of(f);
        subdiv_ = subdiv;
        sheets_ = sheets;
        max_row_ = max_row;
        R top = g(base);
        fwd_depth_ = sheets + max_row;
        // cumulative tables: C[i][j + sheets] for j in [-sheets, sheets+max_row]
        table_.assign(subdiv, {});
        std::vector<R> lo_slot(subdiv), hi_slot(subdiv);
        parallel_for(subdiv, [&](std::size_t i) {
            R t = base + (top - base) * R(static_cast<long>(i)) / R(static_cast<long>(subdiv));
            std::vector<R>& col = table_[i];
            col.assign(static_cast<std::size_t>(sheets_ + fwd_depth_) + 1, R(0));
            OrbitCursor<R> fwd{t};
            fwd.want_log = true;
            for (long j = 1; j <= fwd_depth_; ++j) {
                g.advance_orbit(fwd, 1);
                col[static_cast<std::size_t>(sheets_ + j)] = fwd.log_d1;
                if (j == sheets_) hi_slot[i] = fwd.x;
            }
            OrbitCursor<R> bwd{t};
            bwd.want_log = true;
            for (long j = 1; j <= sheets_; ++j) {
                g.advance_orbit(bwd, -1);
                col[static_cast<std::size_t>(sheets_ - j)] = bwd.log_d1;
            }
            lo_slot[i] = bwd.x;
        });
        lo_point_ = lo_slot[0];
        hi_point_ = hi_slot[0];
        if (hi_point_ < lo_point_) std::swap(lo_point_, hi_point_);
    }

    /// Grid variation of log D f^n over the partition (exact orbit sums).
    R grid_variation(long n) const {
        using std::abs;
        if (n > max_row_) throw DomainError("orbit partition: row exceeds table depth");
        R sum(0);
        bool first = true;
        R prev(0);
        for (long j = -sheets_; j <= sheets_; ++j) {
            for (std::size_t i = 0; i < subdiv_; ++i) {
                if (j == sheets_ && i > 0) break; // last sheet contributes its first point only
                std::size_t row = static_cast<std::size_t>(j + sheets_);
                R s = table_[i][row + static_cast<std::size_t>(n)] - table_[i][row];
                if (!first) sum += abs(s - prev);
                prev = s;
                first = false;
            }
        }
        return sum;
    }

    /// Spatial extremes of the partition (for junction terms when partitions
    /// of adjacent components are united).
    const R& lo_point() const { return lo_point_; }
    const R& hi_point() const { return hi_point_; }

    std::size_t subdiv() const { return subdiv_; }
    long sheets() const { return sheets_; }

  private:
    std::size_t subdiv_;
    long sheets_;
    long max_row_;
    long fwd_depth_;
    R lo_point_{}, hi_point_{};
    std::vector<std::vector<R>> table_;
};

template <class R>
struct VariationSeries {
    std::vector<std::array<R, 3>> rows; // (n, V_grid(f^n), V_grid(f^n)/n)
    R lo = R(0), hi = R(1);             // component
    std::size_t subdiv = 0;             // partition descriptor
    long sheets = 0;
};

/// Geometric row schedule up to N, with a dense tail on [N/2, N] for the
/// slope fit.
inline std::vector<long> default_row_schedule(long N) {
    std::vector<long> rows;
    for (long n = 1; n < N / 2; n = n < 8 ? n + 1 : (n * 5) / 4 + 1)
        rows.push_back(n);
    for (int k = 0; k <= 8; ++k) {
        long n = std::max<long>(1, N / 2 + (N - N / 2) * k / 8);
        if (rows.empty() || n > rows.back()) rows.push_back(n);
    }
    return rows;
}

template <class R>
VariationSeries<R> variation_series(const Diffeo<R>& f, long N, R lo, R hi, R base,
                                    std::size_t subdiv = 24, long extra_sheets = 16) {
    if (N < 1) throw DomainError("variation series: N must be >= 1");
    VariationSeries<R> out;
    out.lo = lo;
    out.hi = hi;
    out.subdiv = subdiv;
    out.sheets = N + extra_sheets;
    OrbitPartition<R> part(f, base, subdiv, out.sheets, N);
    for (long n : default_row_schedule(N)) {
        R v = part.grid_variation(n);
        out.rows.push_back({R(n), v, v / R(n)});
    }
    return out;
}

enum class VariationVerdict { vanishing, positive, inconclusive };

inline const char* to_string(VariationVerdict v) {
    switch (v) {
        case VariationVerdict::vanishing: return "vanishing";
        case VariationVerdict::positive: return "positive";
        default: return "inconclusive";
    }
}

template <class R>
struct AsymptoticVariation {
    VariationSeries<R> series;
    R est;        // Fekete: inf over computed n of V/n (the limit is inf V(f^n)/n)
    R last;       // last row V/n
    R tail_slope; // least-squares slope of n -> V(f^n) over rows n >= N/2
    R tail_inf;   // inf of V/n over rows n in [N/2, N]
    long N = 0;
};

template <class R>
AsymptoticVariation<R> asymptotic_variation(const Diffeo<R>& f, long N, R lo = R(0), R hi = R(1),
                                            R base = R(0.5), std::size_t subdiv = 24) {
    AsymptoticVariation<R> out;
    out.N = N;
    out.series = variation_series(f, N, lo, hi, base, subdiv);
    const auto& rows = out.series.rows;
    out.est = rows.front()[2];
    out.tail_inf = rows.back()[2];
    for (const auto& r : rows) {
        if (r[2] < out.est) out.est = r[2];
        if (r[0] >= R(N) / R(2) && r[2] < out.tail_inf) out.tail_inf = r[2];
    }
    out.last = rows.back()[2];
    // slope fit over the tail
    R sx(0), sy(0), sxx(0), sxy(0), cnt(0);
    for (const auto& r : rows) {
        if (r[0] < R(N) / R(2)) continue;
        sx += r[0];
        sy += r[1];
        sxx += r[0] * r[0];
        sxy += r[0] * r[1];
        cnt += R(1);
    }
    R denom = cnt * sxx - sx * sx;
    out.tail_slope = denom > R(0) ? (cnt * sxy - sx * sy) / denom : out.last;
    return out;
}

/// Verdict rule: positive when the tail inf exceeds 3x the calibration noise
/// of the matched flow-generated control; vanishing when the estimate is
/// below the vanishing threshold; inconclusive otherwise (or with too little
/// data). The paper gives no quantitative gap, so the control calibration is
/// the reference point.
template <class R>
VariationVerdict variation_verdict(const AsymptoticVariation<R>& av, R control_noise,
                                   R vanish_threshold = R(1e-2)) {
    if (av.N < 2 || av.series.rows.size() < 3) return VariationVerdict::inconclusive;
    if (av.tail_inf > R(3) * control_noise && av.tail_inf > vanish_threshold)
        return VariationVerdict::positive;
    if (av.est <= vanish_threshold) return VariationVerdict::vanishing;
    return VariationVerdict::inconclusive;
}

template <class R>
struct LocalizedVariation {
    std::vector<std::pair<Component<R>, R>> per_component; // (component, estimate)
    R sum_of_components;
    R global; // union-partition estimate
};

/// Per-component estimates plus the union-partition global estimate
/// (component rows add exactly; junction terms across interior fixed points
/// are included in the global rows).
template <class R>
LocalizedVariation<R> localize(const Diffeo<R>& f, long N, std::size_t subdiv = 24) {
    using std::abs;
    auto comps = components(fixed_points(f));
    if (comps.empty()) throw DomainError("localize: map has no moving component");

    LocalizedVariation<R> out;
    std::vector<OrbitPartition<R>> parts;
    long sheets = 3 * N + 16; // deep edges keep the junction terms O(log)/N-small
    parts.reserve(comps.size());
    for (const auto& c : comps) {
        R base = (c.lo + c.hi) / R(2);
        parts.emplace_back(f, base, subdiv, sheets, N);
    }

    auto schedule = default_row_schedule(N);
    R global_est(0);
    bool first_row = true;
    std::vector<R> comp_est(comps.size(), R(0));
    std::vector<bool> comp_first(comps.size(), true);

    for (long n : schedule) {
        R global_v(0);
        for (std::size_t ci = 0; ci < comps.size(); ++ci) {
            R v = parts[ci].grid_variation(n);
            global_v += v;
            R ratio = v / R(n);
            if (comp_first[ci] || ratio < comp_est[ci]) comp_est[ci] = ratio;
            comp_first[ci] = false;
            if (ci + 1 < comps.size()) {
                // union-partition junction term across the shared fixed point
                R left = f.log_deriv_cocycle(n, parts[ci].hi_point());
                R right = f.log_deriv_cocycle(n, parts[ci + 1].lo_point());
                global_v += abs(right - left);
            }
        }
        R ratio = global_v / R(n);
        if (first_row || ratio < global_est) global_est = ratio;
        first_row = false;
    }
    for (std::size_t ci = 0; ci < comps.size(); ++ci)
        out.per_component.emplace_back(comps[ci], comp_est[ci]);
    out.sum_of_components = R(0);
    for (const auto& pc : out.per_component) out.sum_of_components += pc.second;
    out.global = global_est;
    return out;
}

/// Mather invariant as a sampled circle-map lift: M(t) = B(A^{-1}(t)) with A
/// the lower chart (A(p) = 0) and B the upper chart (B(q) = 0).
template <class R>
CircleMap<R> mather(const Diffeo<R>& f, R p, R q, std::size_t grid_n = 256, R lo = R(0),
                    R hi = R(1), ChartOptions<R> opt = {}) {
    using std::abs;
    auto A = chart_for(f, lo, hi, ChartSide::lower, p, opt);
    auto B = chart_for(f, lo, hi, ChartSide::upper, q, opt);
    std::vector<R> values(grid_n);
    parallel_for(grid_n, [&](std::size_t i) {
        R t = R(static_cast<long>(i)) / R(static_cast<long>(grid_n));
        values[i] = B->eval(A->inverse(t)).a;
    });
    // periodicity at the seam: M(1) should equal M(0) + 1
    R m1 = B->eval(f(A->inverse(R(0)))).a;
    R seam = abs(m1 - values[0] - R(1));
    return CircleMap<R>(std::move(values), seam);
}

template <class R>
CircleMap<R> mather(const Diffeo<R>& f, std::size_t grid_n = 256, ChartOptions<R> opt = {}) {
    return mather(f, R(0.5), R(0.5), grid_n, R(0), R(1), opt);
}

/// max over n <= N of |log Df^n(x) - log Df^n(g(x))|. When g commutes with f
/// on the component this never exceeds 2 sup|log Dg| (chain-rule identity);
/// for unrelated g it can grow without bound.
template <class R>
R centralizer_distortion_gap(const Diffeo<R>& f, const Diffeo<R>& g, R x, long N) {
    using std::abs;
    OrbitCursor<R> a{x};
    OrbitCursor<R> b{g(x)};
    a.want_log = b.want_log = true;
    R best(0);
    for (long n = 1; n <= N; ++n) {
        f.advance_orbit(a, 1);
        f.advance_orbit(b, 1);
        R gap = abs(a.log_d1 - b.log_d1);
        if (gap > best) best = gap;
    }
    return best;
}

} // namespace parabolica
