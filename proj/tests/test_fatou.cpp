#include <doctest.h>

#include <cmath>

#include "parabolica/analysis.hpp"
#include "parabolica/flow.hpp"
#include "oracles.hpp"

using namespace parabolica;

namespace {

Diffeo<double> model_flow(double c) {
    return flow_from_field(VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}}), 1.0);
}

} // namespace

TEST_CASE("chart normalization and cocycle") {
    for (double c : {0.5, 2.0}) {
        auto f = model_flow(c);
        auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
        CHECK(chart->eval(0.5).a == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(chart->eval(f(0.5)).a == doctest::Approx(1.0).epsilon(1e-7));
        auto gen = oracles::rng(7);
        for (int i = 0; i < 10; ++i) {
            double x = oracles::uniform(gen, 0.02, 0.95);
            double defect = chart->eval(f(x)).a - chart->eval(x).a - 1.0;
            CHECK(std::fabs(defect) <= 1e-6);
        }
    }
}

TEST_CASE("chart equals flow time for flow-generated maps") {
    auto X = VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
    for (double t : {0.25, 1.75, -2.5}) {
        double xt = flow_from_field(X, t)(0.5);
        CHECK(chart->eval(xt).a == doctest::Approx(t).epsilon(5e-7));
    }
}

TEST_CASE("chart derivative matches finite differences of the chart") {
    auto f = model_flow(0.5);
    auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
    for (double x : {0.2, 0.6}) {
        double h = 1e-5;
        double fd = (chart->eval(x + h).a - chart->eval(x - h).a) / (2 * h);
        CHECK(chart->eval(x).d1 == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("fatou inverse: normalization, integer translates, round trip") {
    auto f = model_flow(2.0);
    auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
    CHECK(chart->inverse(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(chart->inverse(3.0) == doctest::Approx(f.iterate(3, 0.5)).epsilon(1e-9));
    for (double t : {-4.3, -0.4, 0.7, 5.2}) {
        double x = chart->inverse(t);
        CHECK(chart->eval(x).a == doctest::Approx(t).epsilon(1e-6));
    }
    // the chart conjugates the unit translation to f
    for (double t = -5.0; t <= 4.0; t += 1.5) {
        CHECK(f(chart->inverse(t)) == doctest::Approx(chart->inverse(t + 1.0)).epsilon(1e-8));
    }
}

TEST_CASE("eval refuses the endpoint guard zone") {
    auto f = model_flow(0.5);
    auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
    CHECK_THROWS_AS((void)chart->eval(1e-14), DomainError);
}

TEST_CASE("non-convergence within a tiny depth cap is reported with the last delta") {
    auto f = model_flow(0.5);
    ChartOptions<double> opt;
    opt.depth_cap = 32;
    FatouChart<double> chart(f, 0.0, 1.0, ChartSide::lower, 0.5, opt);
    CHECK_THROWS_AS((void)chart.eval(0.3), ConvergenceError);
    std::vector<ChartDiagRow<double>> diag;
    auto ev = chart.eval(0.3, &diag); // diagnostic mode returns the best estimate
    CHECK_FALSE(ev.converged);
    CHECK(ev.last_delta > 0);
    CHECK_FALSE(diag.empty());
}

TEST_CASE("per-depth deltas are eventually decreasing on the model family") {
    auto f = model_flow(2.0);
    FatouChart<double> chart(f, 0.0, 1.0, ChartSide::lower, 0.5);
    std::vector<ChartDiagRow<double>> diag;
    auto ev = chart.eval(0.7, &diag);
    CHECK(ev.monotone_tail);
    REQUIRE(diag.size() >= 3);
    CHECK(diag.back().delta < diag.front().delta);
}

TEST_CASE("lazy flow time: t=1 reproduces f, group law holds") {
    auto f = model_flow(0.5);
    auto one = flow_time(f, ChartSide::lower, 1.0);
    for (double x : {0.1, 0.45, 0.8})
        CHECK(one(x) == doctest::Approx(f(x)).epsilon(1e-8));

    auto a = flow_time(f, ChartSide::lower, 0.3);
    auto b = flow_time(f, ChartSide::lower, 0.45);
    auto ab = flow_time(f, ChartSide::lower, 0.75);
    for (double x : {0.2, 0.6})
        CHECK(a(b(x)) == doctest::Approx(ab(x)).epsilon(1e-7));

    // flowable: lower and upper flows coincide
    auto up = flow_time(f, ChartSide::upper, 0.5);
    auto lo = flow_time(f, ChartSide::lower, 0.5);
    for (double x : {0.2, 0.5, 0.85})
        CHECK(up(x) == doctest::Approx(lo(x)).epsilon(1e-6));

    // flow_time of a flow map equals the integrator's time-t map
    auto X = VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}});
    auto direct = flow_from_field(X, 0.5);
    for (double x : {0.25, 0.7})
        CHECK(lo(x) == doctest::Approx(direct(x)).epsilon(1e-7));
}

TEST_CASE("flow-time nodes iterate in chart time") {
    auto f = model_flow(2.0);
    auto half = flow_time(f, ChartSide::lower, 0.5);
    double x = 0.3;
    CHECK(half.iterate(4, x) == doctest::Approx(f.iterate(2, x)).epsilon(1e-7));
    CHECK(half.deriv(x) ==
          doctest::Approx(oracles::fd_deriv([&](double u) { return half(u); }, x)).epsilon(1e-5));
}

TEST_CASE("kth roots and the root defect") {
    auto f = model_flow(0.5);
    auto r2 = kth_root(f, 2, ChartSide::lower);
    auto r3 = kth_root(f, 3, ChartSide::lower);
    for (double x : {0.1, 0.5, 0.9}) {
        CHECK(r2(r2(x)) == doctest::Approx(f(x)).epsilon(1e-6));
        CHECK(r3(r3(r3(x))) == doctest::Approx(f(x)).epsilon(1e-6));
    }
    CHECK(kth_root(f, 1, ChartSide::lower)(0.4) == doctest::Approx(f(0.4)).epsilon(1e-7));

    auto grid = uniform_grid<double>(0.05, 0.95, 40);
    CHECK(root_defect(f, 2, grid) <= 1e-6);
    CHECK(root_defect(f, 1, grid) <= 1e-6);
}

TEST_CASE("push-left components get a decreasing chart with the same cocycle") {
    // time-(-1) map pushes left
    auto f = flow_from_field(VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}}), -1.0);
    auto chart = chart_for(f, 0.0, 1.0, ChartSide::lower, 0.5);
    CHECK(chart->orientation() == -1);
    for (double x : {0.3, 0.7}) {
        double defect = chart->eval(f(x)).a - chart->eval(x).a - 1.0;
        CHECK(std::fabs(defect) <= 1e-6);
    }
    CHECK(chart->inverse(1.5) == doctest::Approx(f(chart->inverse(0.5))).epsilon(1e-8));
}
