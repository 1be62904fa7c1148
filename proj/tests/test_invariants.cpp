#include <doctest.h>

#include <cmath>

#include "parabolica/invariants.hpp"
#include "oracles.hpp"

using namespace parabolica;

namespace {

Diffeo<double> model_flow(double c, double t = 1.0) {
    return flow_from_field(VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}}), t);
}

} // namespace

TEST_CASE("variation basics") {
    CHECK(variation(identity<double>(), 0.0, 1.0) == 0.0);

    // monotone Df collapses to the endpoint difference on any grid
    auto q = germ_q<double>(1, 1.0);
    double v = variation(q, 0.0, 0.4, 64);
    CHECK(v == doctest::Approx(oracles::monotone_variation(q, 0.0, 0.4)).epsilon(1e-12));

    // V(f^{-1}) = V(f) via the image partition
    auto f = model_flow(2.0);
    double vf = variation(f, 0.0, 1.0, 2048);
    double vinv = variation(inverse_of(f), 0.0, 1.0, 2048);
    CHECK(vinv == doctest::Approx(vf).epsilon(1e-3));
}

TEST_CASE("variation never decreases under refinement") {
    auto f = compose(model_flow(1.0), germ_q<double>(1, 0.25));
    double prev = 0;
    for (std::size_t n : {32u, 64u, 128u, 256u, 512u}) {
        // raw single-grid sums (no internal refinement): emulate via huge rel_tol
        double v = variation(f, 0.0, 0.8, n, 1e30);
        CHECK(v >= prev - 1e-13);
        prev = v;
    }
}

TEST_CASE("image-partition subadditivity of the cocycle sums") {
    auto f = model_flow(0.5);
    auto g = germ_q<double>(1, 0.3);
    auto fg = compose(f, g);
    std::size_t n = 200;
    double lhs = 0, rf = 0, rg = 0;
    double prev_fg = 0, prev_f = 0, prev_g = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        double x = 0.05 + 0.9 * double(i) / n;
        double sfg = std::log(fg.deriv(x));
        double sg = std::log(g.deriv(x));
        double sf = std::log(f.deriv(g(x)));
        if (i > 0) {
            lhs += std::fabs(sfg - prev_fg);
            rf += std::fabs(sf - prev_f);
            rg += std::fabs(sg - prev_g);
        }
        prev_fg = sfg;
        prev_f = sf;
        prev_g = sg;
    }
    CHECK(lhs <= rf + rg + 1e-10);
}

TEST_CASE("variation series: first row matches the direct estimate, flowable decays") {
    auto f = model_flow(0.5);
    auto series = variation_series(f, 64, 0.0, 1.0, 0.5, 24);
    REQUIRE_FALSE(series.rows.empty());
    CHECK(series.rows.front()[0] == 1.0);

    double direct = variation(f, 0.001, 0.999, 4096);
    CHECK(series.rows.front()[1] == doctest::Approx(direct).epsilon(0.08));

    // V(f^n)/n decreasing along the tail (Fekete trend for a flowable map)
    const auto& rows = series.rows;
    for (std::size_t i = 3; i + 1 < rows.size(); ++i) CHECK(rows[i + 1][2] <= rows[i][2] + 1e-9);
}

TEST_CASE("series homogeneity: same orbit sums for powers on a shared partition") {
    auto f = model_flow(2.0);
    OrbitPartition<double> part(f, 0.5, 16, 40, 32);
    // V((f^2)^n) computed from the same tables equals V(f^{2n}) by construction;
    // check est(f^2) tracks 2 est(f) through the series interface
    auto s1 = asymptotic_variation(f, 32);
    auto s2 = asymptotic_variation(int_power(f, 2), 32);
    CHECK(s2.est == doctest::Approx(2 * s1.est).epsilon(0.25));
    CHECK(part.grid_variation(10) == doctest::Approx(part.grid_variation(10)));
}

TEST_CASE("flowable maps estimate near zero at large N; verdicts calibrate") {
    auto f = model_flow(0.5);
    auto av = asymptotic_variation(f, 2048, 0.0, 1.0, 0.5, 12);
    CHECK(av.est <= 2.5e-2);
    CHECK(av.tail_slope <= 2.5e-2);
    auto verdict = variation_verdict(av, av.tail_inf);
    CHECK(verdict != VariationVerdict::positive);
}

TEST_CASE("mather invariant of a flowable map is a translation") {
    for (double c : {0.5, 2.0}) {
        auto f = model_flow(c);
        auto M = mather(f, 128);
        CHECK(M.seam_defect() <= 1e-5);
        CHECK(M.triviality_defect() <= 1e-4);
        CHECK(M.translation_commutation_defect(1) <= 1e-9);
        CHECK(M.translation_commutation_defect(2) <= 1e-4);
        CHECK(M.translation_commutation_defect(5) <= 1e-4);
    }
}

TEST_CASE("changing the lower base point pre-composes with a translation") {
    auto f = model_flow(0.5);
    double alpha = 0.3;
    auto X = VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}});
    double p2 = flow_from_field(X, alpha)(0.5); // f_alpha(p)
    auto M1 = mather(f, 0.5, 0.5, 96);
    auto M2 = mather(f, p2, 0.5, 96);
    double sup = 0;
    for (std::size_t i = 0; i < 96; ++i) {
        double t = double(i) / 96;
        sup = std::max(sup, std::fabs(M2(t) - M1(t + alpha)));
    }
    CHECK(sup <= 1e-4);
}

TEST_CASE("centralizer distortion gap obeys the commuting bound") {
    auto f = model_flow(0.5);
    CHECK(centralizer_distortion_gap(f, identity<double>(), 0.3, 100) <= 1e-12);

    auto g = flow_time(f, ChartSide::lower, 0.4);
    double sup_log_dg = 0;
    for (double x = 0.02; x <= 0.98; x += 0.02)
        sup_log_dg = std::max(sup_log_dg, std::fabs(std::log(g.deriv(x))));
    double gap = centralizer_distortion_gap(f, g, 0.25, 150);
    CHECK(gap <= 2 * sup_log_dg + 1e-4);

    // g = f: the bound holds with g's own derivative
    double sup_log_df = 0;
    for (double x = 0.02; x <= 0.98; x += 0.02)
        sup_log_df = std::max(sup_log_df, std::fabs(std::log(f.deriv(x))));
    CHECK(centralizer_distortion_gap(f, f, 0.25, 150) <= 2 * sup_log_df + 1e-9);
}

TEST_CASE("asymptotic variation is invariant under closed-form conjugation") {
    // conjugation by a polynomial diffeomorphism preserves the estimate on a
    // single-component map with a genuinely positive invariant
    auto f = model_flow(0.5);
    auto h = poly_map<double>({0.0, 1.25, -0.25}); // x + 0.25 x (1 - x)
    auto conj = compose(h, compose(f, inverse_of(h)));
    long N = 96;
    auto est_f = asymptotic_variation(f, N, 0.0, 1.0, 0.5, 16).est;
    auto est_c = asymptotic_variation(conj, N, 0.0, 1.0, 0.5, 16).est;
    CHECK(std::fabs(est_c - est_f) <= 0.05 * est_f + 5e-3);
}

TEST_CASE("N = 1 gives an inconclusive verdict") {
    auto f = flow_from_field(VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}}), 1.0);
    auto av = asymptotic_variation(f, 1, 0.0, 1.0, 0.5, 8);
    CHECK(variation_verdict(av, av.tail_inf) == VariationVerdict::inconclusive);
}

TEST_CASE("localization over a two-component gluing") {
    auto unit = model_flow(1.0);
    auto glued = piecewise_glue<double>({0.0, 0.5, 1.0}, {unit, unit});
    auto loc = localize(glued, 48, 16);
    REQUIRE(loc.per_component.size() == 2);
    CHECK(std::fabs(loc.sum_of_components - loc.global) <=
          0.05 * std::max(std::fabs(loc.global), 1e-6) + 1e-6);

    auto single = model_flow(0.5);
    auto one = localize(single, 48, 16);
    REQUIRE(one.per_component.size() == 1);
    CHECK(one.per_component[0].second == doctest::Approx(one.global).epsilon(1e-6));
}
