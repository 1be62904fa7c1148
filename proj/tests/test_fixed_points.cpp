#include <doctest.h>

#include "parabolica/analysis.hpp"
#include "parabolica/diffeo.hpp"

using namespace parabolica;

TEST_CASE("identity is flagged, not enumerated") {
    auto rep = fixed_points(identity<double>());
    CHECK(rep.identity_on_interval);
    REQUIRE(rep.points.size() == 2);
    CHECK(rep.points.front().location == 0.0);
    CHECK(rep.points.back().location == 1.0);
}

TEST_CASE("flow of a two-zero field fixes exactly the endpoints") {
    for (double c : {0.5, 2.0}) {
        auto f = flow_from_field(VectorField<double>::product(c, {{0.0, 2}, {1.0, 2}}), 1.0);
        auto rep = fixed_points(f);
        REQUIRE(rep.points.size() == 2);
        CHECK(rep.unresolved.empty());
        CHECK(rep.points[0].df == doctest::Approx(1.0).epsilon(1e-9));
        auto comps = components(rep);
        REQUIRE(comps.size() == 1);
        CHECK(comps[0].sign == 1);
    }
}

TEST_CASE("interior zero of the field appears as a transversal fixed point") {
    // X = c x^2 (x - 1/2) (1-x)^2 changes sign at 1/2
    auto X = VectorField<double>::product(1.0, {{0.0, 2}, {0.5, 1}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    auto rep = fixed_points(f);
    REQUIRE(rep.points.size() == 3);
    CHECK(rep.points[1].location == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep.points[1].type == Tangency::transversal);
    // displacement signs alternate across the transversal point
    CHECK(rep.points[0].sign_right == -1);
    CHECK(rep.points[1].sign_right == 1);
    auto comps = components(rep);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].sign == -1);
    CHECK(comps[1].sign == 1);
}

TEST_CASE("one-sided tangency is classified") {
    // X = c x^2 (x-1/2)^2 (1-x)^2 >= 0: graph touches the diagonal at 1/2
    auto X = VectorField<double>::product(4.0, {{0.0, 2}, {0.5, 2}, {1.0, 2}});
    auto f = flow_from_field(X, 1.0);
    auto rep = fixed_points(f);
    REQUIRE(rep.points.size() == 3);
    CHECK(rep.points[1].type == Tangency::one_sided);
    CHECK(rep.points[1].sign_right == 1);
}

TEST_CASE("identity stretches are reported, not guessed") {
    auto unit = flow_from_field(VectorField<double>::product(1.0, {{0.0, 2}, {1.0, 2}}), 1.0);
    auto glued =
        piecewise_glue<double>({0.0, 0.35, 0.65, 1.0}, {unit, identity<double>(), unit});
    auto rep = fixed_points(glued);
    REQUIRE_FALSE(rep.unresolved.empty());
    CHECK(rep.unresolved.front().first >= 0.3);
    CHECK(rep.unresolved.front().second <= 0.7);
}
