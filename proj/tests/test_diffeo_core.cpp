#include <doctest.h>

#include <cmath>

#include "parabolica/analysis.hpp"
#include "parabolica/construct.hpp"
#include "parabolica/diffeo.hpp"
#include "oracles.hpp"

using namespace parabolica;
using D = Diffeo<double>;

namespace {

D model_flow(double c = 0.5, double t = 1.0) {
    auto X = VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}});
    return flow_from_field(X, t);
}

D gentle_poly() {
    // x + 0.1 x (1-x): fixes 0 and 1, Df = 1 + 0.1 - 0.2 x > 0
    return poly_map<double>({0.0, 1.1, -0.1});
}

} // namespace

TEST_CASE("eval basics") {
    CHECK(model_flow(0.5, 0.0)(0.37) == doctest::Approx(0.37).epsilon(1e-12));
    auto f = gentle_poly();
    CHECK(f(0.0) == 0.0);
    CHECK(f(1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("monotonicity on valid trees") {
    auto trees = {gentle_poly(), model_flow(), compose(gentle_poly(), model_flow(2.0))};
    for (const auto& f : trees) {
        double prev = f(0.0);
        for (int i = 1; i <= 257; ++i) {
            double x = double(i) / 257;
            double cur = f(x);
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("chain rule is exact for closed-form nodes") {
    auto f = gentle_poly();
    auto g = germ_q<double>(1, 0.5);
    auto fg = compose(f, g);
    for (double x : {0.1, 0.35, 0.6}) {
        double expect = f.deriv(g(x)) * g.deriv(x);
        CHECK(fg.deriv(x) == doctest::Approx(expect).epsilon(1e-15));
        double expect2 = f.deriv(g(x), 2) * g.deriv(x) * g.deriv(x) + f.deriv(g(x)) * g.deriv(x, 2);
        CHECK(fg.deriv(x, 2) == doctest::Approx(expect2).epsilon(1e-14));
    }
}

TEST_CASE("inverse evaluation round trips and flags invalid trees") {
    auto f = compose(gentle_poly(), model_flow(1.3));
    auto gen = oracles::rng();
    for (int i = 0; i < 25; ++i) {
        double x = oracles::uniform(gen, 0.01, 0.99);
        CHECK(f.inverse(f(x)) == doctest::Approx(x).epsilon(1e-10));
    }
    CHECK(identity<double>().inverse(0.3) == 0.3);

    auto bad = poly_map<double>({0.0, -1.0}); // decreasing: not a diffeomorphism
    CHECK_THROWS_AS((void)bad.inverse(0.25), ConvergenceError);
}

TEST_CASE("iterate round trips") {
    auto f = model_flow(2.0);
    CHECK(f.iterate(0, 0.42) == 0.42);
    double x = 0.2;
    double y = f.iterate(7, x);
    CHECK(f.iterate(-7, y) == doctest::Approx(x).epsilon(1e-10));
    // fast path agrees with brute evaluation
    CHECK(f.iterate(6, x) == doctest::Approx(oracles::brute_iterate(f, 6, x)).epsilon(1e-10));
}

TEST_CASE("log-derivative cocycle: base cases and additivity") {
    auto f = compose(gentle_poly(), model_flow(1.3));
    CHECK(f.log_deriv_cocycle(0, 0.3) == 0.0);
    CHECK(f.log_deriv_cocycle(1, 0.3) == doctest::Approx(std::log(f.deriv(0.3))).epsilon(1e-14));
    for (double x : {0.05, 0.2}) {
        long n = 5, m = 8;
        double lhs = f.log_deriv_cocycle(n + m, x);
        double rhs = f.log_deriv_cocycle(n, x) + f.log_deriv_cocycle(m, f.iterate(n, x));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
    }
    // flow fast path must agree with the stepped sum
    auto fl = model_flow(0.7);
    for (double x : {0.1, 0.6}) {
        double fast = fl.log_deriv_cocycle(32, x);
        double slow = 0;
        double y = x;
        for (int i = 0; i < 32; ++i) {
            slow += std::log(fl.deriv(y));
            y = fl(y);
        }
        CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
    }
}

TEST_CASE("displacement matches value - x and stays accurate near the endpoint") {
    auto f = model_flow(0.5);
    for (double x : {0.3, 0.7}) {
        CHECK(f.displacement(x) == doctest::Approx(f(x) - x).epsilon(1e-12));
    }
    // near zero the displacement scales like c x^2
    double x = 1e-5;
    CHECK(f.displacement(x) == doctest::Approx(0.5 * x * x).epsilon(1e-3));
    auto q = germ_q<double>(1, 0.8);
    CHECK(q.displacement(1e-8) == doctest::Approx(0.8e-16).epsilon(1e-7));
}

TEST_CASE("cl distance") {
    auto grid = uniform_grid<double>(0.0, 0.5, 100);
    auto q = germ_q<double>(1, 1.0);
    auto id = identity<double>();
    CHECK(cl_distance(q, q, 0, grid) == 0.0);
    CHECK(cl_distance(id, q, 0, grid) == doctest::Approx(0.5).epsilon(1e-12)); // sup x^2/(1-x)
    CHECK(cl_distance(id, q, 0, grid) == cl_distance(q, id, 0, grid));
    CHECK(c1_distance(id, q, grid) >= cl_distance(id, q, 1, grid));
}

TEST_CASE("piecewise glue conjugates pieces affinely") {
    auto piece = gentle_poly();
    auto glued = piecewise_glue<double>({0.0, 0.4, 1.0}, {piece, piece});
    CHECK(glued(0.4) == doctest::Approx(0.4).epsilon(1e-14));
    double x = 0.2;
    CHECK(glued(x) == doctest::Approx(0.4 * piece(x / 0.4)).epsilon(1e-14));
    double y = 0.7;
    CHECK(glued(y) == doctest::Approx(0.4 + 0.6 * piece((y - 0.4) / 0.6)).epsilon(1e-14));
    CHECK(glued.deriv(x) == doctest::Approx(piece.deriv(x / 0.4)).epsilon(1e-13));
    CHECK(glued.inverse(glued(0.83)) == doctest::Approx(0.83).epsilon(1e-11));
    CHECK(glued.iterate(5, 0.2) == doctest::Approx(oracles::brute_iterate(glued, 5, 0.2)).epsilon(1e-11));
}

TEST_CASE("validation catches broken trees") {
    CHECK(validate(model_flow(0.5)).ok);
    auto skew = poly_map<double>({0.0, 0.7, 0.3}); // fixes 0,1 but Df(0) = 0.7: hyperbolic
    auto rep = validate(skew, true);
    CHECK_FALSE(rep.ok);
    CHECK(validate(skew, false).ok);
}
