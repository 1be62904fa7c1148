#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "parabolica/diffeo.hpp"
#include "parabolica/real.hpp"

namespace parabolica {

template <class R>
std::vector<R> uniform_grid(R a, R b, std::size_t n) {
    std::vector<R> g;
    g.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        g.push_back(a + (b - a) * R(static_cast<long>(i)) / R(static_cast<long>(n)));
    return g;
}

enum class Tangency { transversal, one_sided, endpoint };

template <class R>
struct FixedPointInfo {
    R location;
    Tangency type;
    R df;
    std::optional<R> d2f;
    /// Sign of f - id just right of the point (+1, -1, or 0 at x = 1).
    int sign_right = 0;
};

template <class R>
struct FixedPointReport {
    std::vector<FixedPointInfo<R>> points; // sorted; 0 and 1 always present
    bool identity_on_interval = false;     // f = id on the whole of [0,1] at grid resolution
    /// Maximal grid runs where |f - id| <= tol but which are not isolated
    /// roots: reported as-is, not guessed.
    std::vector<std::pair<R, R>> unresolved;
    R tolerance;
    std::size_t grid_size = 0;
};

namespace detail {

template <class R>
int disp_sign(const R& d, const R& tol) {
    if (d > tol) return 1;
    if (d < -tol) return -1;
    return 0;
}

template <class R>
FixedPointInfo<R> classify_point(const Diffeo<R>& f, const R& x, int sign_left, int sign_right) {
    FixedPointInfo<R> info;
    info.location = x;
    info.sign_right = sign_right;
    if (sign_left == 0 || sign_right == 0)
        info.type = Tangency::endpoint;
    else
        info.type = sign_left != sign_right ? Tangency::transversal : Tangency::one_sided;
    Jet2<R> j = f.jet(x);
    info.df = j.d1;
    if (j.has_d2) info.d2f = j.d2;
    return info;
}

} // namespace detail

/// Sign-change scan of f - id on a refinement grid, roots bisected to tol.
/// Tangency is classified from the displacement sign on both sides; grid
/// runs where the displacement stays below tol are reported unresolved.
template <class R>
FixedPointReport<R> fixed_points(const Diffeo<R>& f, R tol = R(1e-12), std::size_t grid_n = 4096) {
    using std::abs;
    FixedPointReport<R> report;
    report.tolerance = tol;

    // Refine until the sign-change count stabilizes.
    std::size_t n = grid_n;
    std::vector<R> xs;
    std::vector<int> sg;
    auto scan = [&](std::size_t count) {
        xs = uniform_grid(R(0), R(1), count);
        sg.assign(xs.size(), 0);
        std::size_t changes = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sg[i] = detail::disp_sign(f.displacement(xs[i]), tol);
            if (i > 0 && sg[i] != 0 && sg[i - 1] != 0 && sg[i] != sg[i - 1]) ++changes;
        }
        return changes;
    };
    std::size_t changes = scan(n);
    for (int pass = 0; pass < 3; ++pass) {
        std::size_t more = scan(2 * n);
        if (more == changes) break;
        changes = more;
        n *= 2;
    }
    report.grid_size = xs.size();

    bool all_zero = true;
    for (int s : sg)
        if (s != 0) { all_zero = false; break; }
    if (all_zero) {
        report.identity_on_interval = true;
        report.points.push_back(detail::classify_point(f, R(0), 0, 0));
        report.points.push_back(detail::classify_point(f, R(1), 0, 0));
        return report;
    }

    std::vector<R> roots;
    std::vector<std::pair<int, int>> root_signs; // (left, right) displacement signs

    // Zero runs: short runs flanked by nonzero signs resolve to a single
    // point at the run's center; long runs are reported as-is.
    std::size_t i = 0;
    while (i < sg.size()) {
        if (sg[i] != 0) { ++i; continue; }
        std::size_t j = i;
        while (j + 1 < sg.size() && sg[j + 1] == 0) ++j;
        bool touches_0 = (i == 0), touches_1 = (j + 1 == sg.size());
        int left = touches_0 ? 0 : sg[i - 1];
        int right = touches_1 ? 0 : sg[j + 1];
        if (j - i > 4 && !(touches_0 && j <= 4) && !(touches_1 && sg.size() - i <= 5)) {
            report.unresolved.emplace_back(xs[i], xs[j]);
        } else if (!touches_0 && !touches_1) {
            roots.push_back((xs[i] + xs[j]) / R(2));
            root_signs.emplace_back(left, right);
        }
        i = j + 1;
    }

    // Strict sign changes between adjacent nonzero grid points.
    for (std::size_t k = 0; k + 1 < sg.size(); ++k) {
        if (sg[k] == 0 || sg[k + 1] == 0 || sg[k] == sg[k + 1]) continue;
        R lo = xs[k], hi = xs[k + 1];
        int slo = sg[k];
        for (int it = 0; it < 200 && hi - lo > tol; ++it) {
            R mid = (lo + hi) / R(2);
            int sm = detail::disp_sign(f.displacement(mid), R(0));
            if (sm == slo) lo = mid; else hi = mid;
        }
        roots.push_back((lo + hi) / R(2));
        root_signs.emplace_back(sg[k], sg[k + 1]);
    }

    // Assemble sorted report with the endpoints always present.
    std::vector<std::size_t> order(roots.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return roots[a] < roots[b]; });

    int first_sign = 0;
    for (int s : sg)
        if (s != 0) { first_sign = s; break; }
    report.points.push_back(detail::classify_point(f, R(0), 0, first_sign));
    for (std::size_t k : order)
        report.points.push_back(
            detail::classify_point(f, roots[k], root_signs[k].first, root_signs[k].second));
    int last_sign = 0;
    for (std::size_t k = sg.size(); k-- > 0;)
        if (sg[k] != 0) { last_sign = sg[k]; break; }
    report.points.push_back(detail::classify_point(f, R(1), last_sign, 0));
    return report;
}

/// Closures of the connected components of [0,1] minus the fixed set,
/// with the displacement sign inside each.
template <class R>
struct Component {
    R lo, hi;
    int sign; // +1 push right, -1 push left
};

template <class R>
std::vector<Component<R>> components(const FixedPointReport<R>& report) {
    std::vector<Component<R>> out;
    if (report.identity_on_interval) return out;
    for (std::size_t i = 0; i + 1 < report.points.size(); ++i) {
        int s = report.points[i].sign_right;
        if (s != 0) out.push_back({report.points[i].location, report.points[i + 1].location, s});
    }
    return out;
}

/// Grid-sup seminorm max |D^l f - D^l g| over the given grid (l = 0, 1, 2).
template <class R>
R cl_distance(const Diffeo<R>& f, const Diffeo<R>& g, int ell, const std::vector<R>& grid) {
    using std::abs;
    R best(0);
    for (const R& x : grid) {
        R d;
        if (ell == 0)
            d = abs(f.displacement(x) - g.displacement(x));
        else
            d = abs(f.deriv(x, ell) - g.deriv(x, ell));
        if (d > best) best = d;
    }
    return best;
}

/// The combined C^1 metric max(||f-g||_0, ||Df-Dg||_0).
template <class R>
R c1_distance(const Diffeo<R>& f, const Diffeo<R>& g, const std::vector<R>& grid) {
    R d0 = cl_distance(f, g, 0, grid);
    R d1 = cl_distance(f, g, 1, grid);
    return d0 > d1 ? d0 : d1;
}

template <class R>
struct ValidationReport {
    bool ok = true;
    std::vector<std::string> issues;
};

/// Structural checks for membership in the representable class: fixes the
/// endpoints, strictly increasing with positive derivative on a grid, and
/// (optionally) |Df - 1| <= tol at every detected fixed point.
template <class R>
ValidationReport<R> validate(const Diffeo<R>& f, bool require_parabolic = true,
                             R parabolic_tol = R(1e-6), std::size_t grid_n = 2048) {
    using std::abs;
    ValidationReport<R> rep;
    auto fail = [&rep](std::string msg) {
        rep.ok = false;
        rep.issues.push_back(std::move(msg));
    };

    if (abs(f(R(0))) > R(1e-12)) fail("does not fix 0");
    if (abs(f(R(1)) - R(1)) > R(1e-12)) fail("does not fix 1");

    auto grid = uniform_grid(R(0), R(1), grid_n);
    R prev = f(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        R cur = f(grid[i]);
        if (!(cur > prev)) {
            fail("not strictly increasing near x = " + std::to_string(dbl(grid[i])));
            break;
        }
        prev = cur;
    }
    for (std::size_t i = 1; i + 1 < grid.size(); i += 7) {
        if (!(f.deriv(grid[i]) > R(0))) {
            fail("derivative <= 0 at a sampled interior point");
            break;
        }
    }

    if (require_parabolic && rep.ok) {
        auto report = fixed_points(f);
        for (const auto& p : report.points) {
            if (abs(p.df - R(1)) > parabolic_tol) {
                fail("non-parabolic fixed point at x = " + std::to_string(dbl(p.location)) +
                     " (Df = " + std::to_string(dbl(p.df)) + ")");
            }
        }
    }
    return rep;
}

template <class R>
void require_valid(const Diffeo<R>& f, bool require_parabolic = true) {
    auto rep = validate(f, require_parabolic);
    if (!rep.ok) throw InvalidTreeError("invalid tree: " + rep.issues.front());
}

} // namespace parabolica
