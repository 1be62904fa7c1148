#include <doctest.h>

#include <cmath>

#include "parabolica/analysis.hpp"
#include "parabolica/diffeo.hpp"
#include "oracles.hpp"

using namespace parabolica;
using D = Diffeo<double>;

namespace {

double sup_diff(const D& f, const D& g, double lo, double hi, int n = 100) {
    double best = 0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + (hi - lo) * i / n;
        best = std::max(best, std::fabs(f(x) - g(x)));
    }
    return best;
}

} // namespace

TEST_CASE("germ q1 closed-form values") {
    auto q1 = germ_q<double>(1, 1.0);
    CHECK(q1(0.0) == 0.0);
    CHECK(q1(0.5) == doctest::Approx(1.0).epsilon(1e-15)); // x/(1-x) at 1/2
    CHECK(q1.inverse(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(identity<double>()(0.3) == 0.3);
    CHECK(identity<double>().inverse(0.3) == 0.3);
}

TEST_CASE("germ derivatives match symbolic forms and finite differences") {
    for (double lam : {0.7, -0.4, 1.0}) {
        auto q1 = germ_q<double>(1, lam);
        CHECK(q1.deriv(0.0) == doctest::Approx(1.0).epsilon(1e-14));
        for (double x : {-0.2, 0.1, 0.3}) {
            double expect = 1.0 / ((1 - lam * x) * (1 - lam * x));
            CHECK(q1.deriv(x) == doctest::Approx(expect).epsilon(1e-13));
            CHECK(q1.deriv(x) ==
                  doctest::Approx(oracles::fd_deriv([&](double u) { return q1(u); }, x))
                      .epsilon(1e-8));
            CHECK(q1.deriv(x, 2) ==
                  doctest::Approx(oracles::fd_deriv2([&](double u) { return q1(u); }, x))
                      .epsilon(1e-6));
        }
        auto hat = hat_germ_q1<double>(lam);
        CHECK(hat.deriv(0.0, 2) == doctest::Approx(2 * lam).epsilon(1e-14));
        CHECK(hat.inverse(hat(0.27)) == doctest::Approx(0.27).epsilon(1e-13));
    }
    for (int family : {2, 3}) {
        auto q = germ_q<double>(family, 1.0);
        CHECK(q(0.0) == 0.0);
        for (double x : {-0.3, 0.2, 0.45}) {
            CHECK(q.deriv(x) ==
                  doctest::Approx(oracles::fd_deriv([&](double u) { return q(u); }, x))
                      .epsilon(1e-8));
            CHECK(q.deriv(x, 2) ==
                  doctest::Approx(oracles::fd_deriv2([&](double u) { return q(u); }, x))
                      .epsilon(1e-5));
        }
    }
    auto q2 = germ_q<double>(2, 1.0);
    CHECK(q2(0.5) == doctest::Approx(0.5 / std::sqrt(0.75)).epsilon(1e-15));
}

TEST_CASE("iterates agree with the closed form and with brute evaluation") {
    double lam = 0.6;
    auto q1 = germ_q<double>(1, lam);
    for (long k : {2L, 5L, 9L}) {
        for (double x : {0.02, 0.08, 0.15}) {
            double closed = x / (1 - k * lam * x);
            CHECK(q1.iterate(k, x) == doctest::Approx(closed).epsilon(1e-13));
            CHECK(oracles::brute_iterate(q1, k, x) == doctest::Approx(closed).epsilon(1e-12));
        }
    }
    auto f = germ_q<double>(2, 0.8);
    CHECK(f.iterate(0, 0.3) == 0.3);
    CHECK(f.iterate(-3, f.iterate(3, 0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("germ algebra: powers, inverses, homothety conjugation at 1e-12") {
    struct Case {
        int family;
        double lam;
        long k;
        double lo, hi;
    };
    for (const Case& c : {Case{1, 0.9, 3, -0.25, 0.3}, Case{2, 1.0, 3, -0.5, 0.5},
                          Case{3, 1.0, 3, -0.5, 0.55}, Case{1, -0.7, 2, -0.3, 0.3}}) {
        auto q = germ_q<double>(c.family, c.lam);
        auto q_pow = int_power(q, c.k);
        auto q_scaled = germ_q<double>(c.family, c.k * c.lam);
        CHECK(sup_diff(q_pow, q_scaled, c.lo, c.hi) <= 1e-12);

        auto q_inv = inverse_of(q);
        auto q_neg = germ_q<double>(c.family, -c.lam);
        CHECK(sup_diff(q_inv, q_neg, c.lo, c.hi) <= 1e-12);

        // direction flag denotes the same inverse
        auto q_dir = germ_q<double>(c.family, c.lam, 0.0, GermDirection::inverse);
        CHECK(sup_diff(q_dir, q_neg, c.lo, c.hi) <= 1e-12);

        double scale = c.family == 1   ? 1.0 / c.k
                       : c.family == 2 ? 1.0 / std::sqrt(double(c.k))
                                       : 1.0 / std::cbrt(double(c.k));
        auto q_conj = homothety_conj(q, scale);
        CHECK(sup_diff(q_conj, q_pow, c.lo, c.hi) <= 1e-12);
    }
}

TEST_CASE("anchored germs act at the anchor") {
    auto q = germ_q<double>(1, 0.8, 0.4);
    CHECK(q(0.4) == 0.4);
    CHECK(q.deriv(0.4) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q(0.5) == doctest::Approx(0.4 + 0.1 / (1 - 0.08)).epsilon(1e-14));
}

TEST_CASE("hat germ squares are not homothety conjugates of the family") {
    double lam = 1.0;
    auto hat = hat_germ_q1<double>(lam);
    auto hat_sq = compose(hat, hat);
    double best = 1e9;
    for (double s = 0.05; s <= 20.0; s *= 1.17) {
        auto conj = homothety_conj(hat, s);
        best = std::min(best, sup_diff(hat_sq, conj, 0.0, 0.3, 200));
    }
    CHECK(best >= 1e-3);
}

TEST_CASE("germ singularity raises a domain error") {
    auto q = germ_q<double>(1, 2.0);
    CHECK_THROWS_AS((void)q(0.6), DomainError);
}
