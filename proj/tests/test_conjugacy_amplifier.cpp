#include <doctest.h>

#include <cmath>

#include "parabolica/amplifier.hpp"
#include "parabolica/conjugacy.hpp"
#include "parabolica/construct.hpp"
#include "parabolica/invariants.hpp"
#include "parabolica/surgery.hpp"
#include "oracles.hpp"

using namespace parabolica;

namespace {

Diffeo<double> model_flow(double c) {
    return flow_from_field(VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}}), 1.0);
}

} // namespace

TEST_CASE("conjugacy to powers via the chart") {
    auto f = model_flow(0.5);
    long k = 2;
    auto h = conjugacy_from_flows(f, k);
    auto fk = int_power(f, k);
    double worst = 0;
    for (double x = 0.05; x <= 0.951; x += 0.02) {
        double lhs = h(f(h.inverse(x)));
        worst = std::max(worst, std::fabs(lhs - fk(x)));
    }
    CHECK(worst <= 1e-5);

    // interior multiplier at the conjugacy's fixed point
    CHECK(h(0.5) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(h.deriv(0.5) == doctest::Approx(double(k)).epsilon(1e-3 / k));

    // near the quadratic-tangency endpoint, h(x)/x -> 1/k
    CHECK(h(1e-3) / 1e-3 == doctest::Approx(1.0 / k).epsilon(0.05));

    // non-flowable maps are refused
    auto g = mather_surgery(f, bump_piece(0.1), -1.0);
    CHECK_THROWS_AS((void)conjugacy_from_flows(g, 2), DomainError);
}

TEST_CASE("insert_scaled: affine conjugation formula and fixed set") {
    auto f = model_flow(1.0);
    // a unit map with a parabolic, topologically transversal interior point
    auto hX = VectorField<double>::product(-64.0, {{0.0, 2}, {0.5, 3}, {1.0, 2}});
    auto h_small = flow_from_field(hX, 1.0);
    double delta = 0.2;
    auto fd = insert_scaled(f, delta, h_small);

    for (double x : {0.3, 0.6, 0.95})
        CHECK(fd(x) == doctest::Approx(delta + (1 - delta) * f((x - delta) / (1 - delta)))
                           .epsilon(1e-12));

    auto rep = fixed_points(fd);
    REQUIRE(rep.points.size() == 4); // 0, interior point of h, delta, 1
    CHECK(rep.points[1].location == doctest::Approx(delta / 2).epsilon(1e-6));
    CHECK(rep.points[1].type == Tangency::transversal);
    CHECK(rep.points[2].location == doctest::Approx(delta).epsilon(1e-9));

    // shrinking delta shrinks the C1 distance to f
    auto grid = uniform_grid<double>(0.0, 1.0, 300);
    double d1 = c1_distance(f, fd, grid);
    double d2 = c1_distance(f, insert_scaled(f, 0.05, h_small), grid);
    CHECK(d2 < d1);

    // derivative mismatch at the seam is rejected
    auto bad = poly_map<double>({0.0, 0.8, 0.2});
    CHECK_THROWS_AS((void)insert_scaled(f, 0.2, bad), InvalidTreeError);
}

TEST_CASE("amplifier build: multipliers, budget, fixed points preserved") {
    auto f = model_flow(0.5);
    AmplifierSpec<double> spec;
    spec.delta_lo = 0.300;
    spec.delta_hi = 0.320;
    spec.j1_lo = 0.302;
    spec.j1_hi = 0.306;
    spec.j2_lo = 0.312;
    spec.j2_hi = 0.318;
    spec.mu1 = 0.5;
    spec.mu2 = 0.8;
    spec.dh_p2 = 0.497;
    spec.dh_p4 = 0.803;
    spec.eps = 3.0;

    auto build = make_amplifier(f, spec);
    CHECK(build.h.deriv(build.p[1]) == doctest::Approx(spec.dh_p2).epsilon(1e-9));
    CHECK(build.h.deriv(build.p[3]) == doctest::Approx(spec.dh_p4).epsilon(1e-9));
    CHECK(build.h(build.p[2]) == doctest::Approx(build.p[2]).epsilon(1e-12));
    CHECK(build.sup_log_dh < spec.eps / 4);
    CHECK(build.distortion_constant >= 1.0);

    long n = 16;
    auto fn = distortion_amplifier(f, build, n);

    // away from the copied windows, f_n == f
    for (double x : {0.05, 0.2, 0.31})
        CHECK(fn(x) == doctest::Approx(f(x)).epsilon(1e-10));

    // same fixed set
    auto rep = fixed_points(fn);
    CHECK(rep.points.size() == 2);

    // C1 budget
    double sup = 0;
    for (double x = 0.01; x < 0.999; x += 0.002)
        sup = std::max(sup, std::fabs(std::log(fn.deriv(x)) - std::log(f.deriv(x))));
    CHECK(sup < spec.eps);

    // log-derivative gap grows linearly with slope ~ log(dh_p4 / dh_p2)
    double x1 = 0.304, x2 = 0.315;
    auto gap_at = [&](long depth) {
        auto g = distortion_amplifier(f, build, depth);
        return distortion_gap(g, depth + build.spec.m, x1, x2);
    };
    double g8 = gap_at(8), g16 = gap_at(16);
    double slope = (g16 - g8) / 8.0;
    double expect = std::log(spec.dh_p4 / spec.dh_p2);
    CHECK(slope == doctest::Approx(expect).epsilon(0.25));

    // depth-0 gap stays within the warm-up distortion bound
    auto f0 = distortion_amplifier(f, build, 0);
    CHECK(distortion_gap(f0, build.spec.m, x1, x2) <=
          2 * std::log(build.distortion_constant) + 0.2);
}

TEST_CASE("amplifier with identity local map is the base map") {
    auto f = model_flow(0.5);
    AmplifierSpec<double> spec;
    spec.delta_lo = 0.300;
    spec.delta_hi = 0.320;
    spec.m = 5;
    spec.depth = 6;
    auto fn = Diffeo<double>(
        std::make_shared<detail::AmplifierNode<double>>(f, identity<double>(), spec));
    for (double x = 0.02; x < 0.99; x += 0.015)
        CHECK(fn(x) == doctest::Approx(f(x)).epsilon(1e-11));
}

TEST_CASE("an unrelated perturbation defeats the centralizer bound") {
    auto f = model_flow(0.5);
    AmplifierSpec<double> spec;
    spec.delta_lo = 0.300;
    spec.delta_hi = 0.320;
    spec.j1_lo = 0.302;
    spec.j1_hi = 0.306;
    spec.j2_lo = 0.312;
    spec.j2_hi = 0.318;
    spec.mu1 = 0.5;
    spec.mu2 = 0.8;
    spec.dh_p2 = 0.45;
    spec.dh_p4 = 0.85;
    spec.eps = 4.0;
    auto build = make_amplifier(f, spec);
    auto fn = distortion_amplifier(f, build, 60);

    // an unrelated bump perturbation never commutes with f_n: pick one that
    // carries x1 into J2's orbit class, so the log-derivative gap along the
    // two orbits grows linearly while the commuting bound stays fixed
    double x1 = 0.304;
    Diffeo<double> g;
    bool placed = false;
    for (double c = 8.0; c <= 40.0 && !placed; c *= 1.3) {
        auto strong = flow_from_field(VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}}), 1.0);
        auto candidate =
            piecewise_glue<double>({0.0, 0.296, 0.35, 1.0},
                                   {identity<double>(), strong, identity<double>()});
        double z2 = f.inverse(candidate(x1));
        if (z2 > spec.j2_lo && z2 < spec.j2_hi) {
            g = candidate;
            placed = true;
        }
    }
    REQUIRE(placed);
    double sup_log_dg = 0;
    for (double x = 0.01; x < 0.99; x += 0.005)
        sup_log_dg = std::max(sup_log_dg, std::fabs(std::log(g.deriv(x))));
    double bound = 2 * sup_log_dg;
    double gap = centralizer_distortion_gap(fn, g, x1, 60 + build.spec.m);
    CHECK(gap > 3 * bound);
}
