#include <doctest.h>

#include <cmath>

#include "parabolica/diffeo.hpp"
#include "parabolica/ode.hpp"
#include "oracles.hpp"

using namespace parabolica;

TEST_CASE("time-0 flow is the identity") {
    auto X = VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 0.0);
    for (double x : {0.0, 0.3, 0.99}) CHECK(f(x) == doctest::Approx(x).epsilon(1e-15));
}

TEST_CASE("quadratic field integrates to the q1 germ") {
    // dx/ds = lam x^2 solves to x/(1 - lam s x)
    double lam = 0.5;
    auto X = VectorField<double>::poly({0.0, 0.0, lam}, {{0.0, 2}});
    auto f = flow_from_field(X, 1.0);
    for (double x : {0.05, 0.2, 0.4}) {
        double closed = x / (1 - lam * x);
        CHECK(f(x) == doctest::Approx(closed).epsilon(1e-12));
        CHECK(f.displacement(x) == doctest::Approx(closed - x).epsilon(1e-11));
    }
    CHECK(f(0.0) == 0.0);
}

TEST_CASE("flow composition law and independent RK4 oracle") {
    auto X = VectorField<double>::product(2.0, {{0.0, 2}, {1.0, 2}});
    auto f_s = flow_from_field(X, 0.4);
    auto f_t = flow_from_field(X, 0.6);
    auto f_st = flow_from_field(X, 1.0);
    for (double x : {0.15, 0.5, 0.86}) {
        CHECK(f_s(f_t(x)) == doctest::Approx(f_st(x)).epsilon(1e-11));
        CHECK(f_st(x) == doctest::Approx(oracles::rk4_flow(X, x, 1.0)).epsilon(1e-9));
    }
}

TEST_CASE("flow derivatives via the generating-field identity") {
    auto X = VectorField<double>::product(1.5, {{0.0, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    for (double x : {0.2, 0.55, 0.8}) {
        CHECK(f.deriv(x) ==
              doctest::Approx(oracles::fd_deriv([&](double u) { return f(u); }, x)).epsilon(1e-7));
        CHECK(f.deriv(x, 2) ==
              doctest::Approx(oracles::fd_deriv2([&](double u) { return f(u); }, x)).epsilon(1e-5));
    }
    // parabolic endpoint: Df = 1 and D2 f = t X''(0)
    CHECK(f.deriv(0.0) == 1.0);
    CHECK(f.deriv(0.0, 2) == doctest::Approx(X.deriv2(0.0)).epsilon(1e-12));
}

TEST_CASE("flow inverse is the reversed flow") {
    auto X = VectorField<double>::product(0.7, {{0.0, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    for (double x : {0.1, 0.48, 0.9})
        CHECK(f.inverse(f(x)) == doctest::Approx(x).epsilon(1e-11));
}

TEST_CASE("long orbit advance matches stepped iteration") {
    auto X = VectorField<double>::product(0.5, {{0.0, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    double x = 0.3;
    OrbitCursor<double> cur{x};
    cur.want_log = true;
    f.advance_orbit(cur, 40);
    double stepped = x;
    double logsum = 0;
    for (int i = 0; i < 40; ++i) {
        logsum += std::log(f.deriv(stepped));
        stepped = f(stepped);
    }
    CHECK(cur.x == doctest::Approx(stepped).epsilon(1e-9));
    CHECK(cur.log_d1 == doctest::Approx(logsum).epsilon(1e-7));
}

TEST_CASE("integration failure surfaces as an error") {
    auto X = VectorField<double>::poly({0.0, 0.0, 1.0}, {{0.0, 2}});
    OdeOptions<double> opt;
    opt.max_steps = 3;
    CHECK_THROWS_AS((void)flow_advance(X, 0.4, 1.0, opt), ConvergenceError);
}
