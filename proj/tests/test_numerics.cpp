#include "doctest.h"
#include "fpk/numerics.hpp"

#include <cmath>
#include <random>

using namespace fpk;

TEST_CASE("adaptive Simpson on smooth integrands") {
    auto I1 = num::adaptiveSimpson([](double x) { return std::exp(x); }, 0.0, 1.0);
    CHECK(I1 == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));

    auto I2 = num::adaptiveSimpson([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0,
                                   num::QuadratureOptions{1e-12, 1e-300, 60});
    CHECK(I2 == doctest::Approx(M_PI / 4.0).epsilon(1e-12));

    // integrable endpoint behaviour
    auto I3 = num::adaptiveSimpson([](double x) { return std::sqrt(x); }, 0.0, 1.0,
                                   num::QuadratureOptions{1e-10, 1e-300, 60});
    CHECK(I3 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("adaptive Simpson rejects non-finite integrands") {
    CHECK_THROWS_AS(num::adaptiveSimpson([](double x) { return 1.0 / x; }, -1.0, 1.0),
                    num::QuadratureError);
}

TEST_CASE("tail integral with doubling chunks") {
    // integral over [0, inf) of e^{-v} dv = 1
    double v = num::tailIntegral([](double x) { return std::exp(-x); }, 0.0);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-11));

    // 1/(1+v)^2 from 0: = 1
    double w = num::tailIntegral([](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)); }, 0.0);
    CHECK(w == doctest::Approx(1.0).epsilon(1e-10));

    // divergent: 1/(1+v)
    CHECK_THROWS_AS(num::tailIntegral([](double x) { return 1.0 / (1.0 + x); }, 0.0),
                    num::DivergenceError);
}

TEST_CASE("monotone solve recovers known roots") {
    auto f = [](double w) { return std::exp(-w); };   // decreasing
    double w = num::solveMonotone(f, 0.125, 0.0);
    CHECK(w == doctest::Approx(std::log(8.0)).epsilon(1e-11));

    auto g = [](double w) { return w * w * w + w; };  // increasing
    double r = num::solveMonotone(g, 10.0, 0.0);
    CHECK(g(r) == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("least squares line on exact data") {
    std::vector<double> x, y;
    for (int i = 0; i < 7; ++i) {
        x.push_back(0.5 * i);
        y.push_back(3.0 - 1.5 * 0.5 * i);
    }
    auto fit = num::leastSquaresLine(x, y);
    CHECK(fit.slope == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.slopeStderr == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("Chebyshev majorant line") {
    SUBCASE("exactly linear data is matched with zero slack") {
        std::vector<double> x, y;
        for (int i = 0; i <= 20; ++i) {
            double u = 0.01 + i * 0.3;
            x.push_back(u);
            y.push_back(2.0 - 2.0 * u);
        }
        auto line = num::chebyshevMajorantLine(x, y, -1e18, 0.0);
        CHECK(line.slope == doctest::Approx(-2.0).epsilon(1e-9));
        CHECK(line.intercept == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(line.maxSlack <= 1e-9);
    }
    SUBCASE("majorization holds on curved data") {
        std::vector<double> x, y;
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(0.0, 4.0);
        for (int i = 0; i < 60; ++i) {
            double xi = u(rng);
            x.push_back(xi);
            y.push_back(std::sin(3.0 * xi) - 0.5 * xi * xi);
        }
        auto line = num::chebyshevMajorantLine(x, y, -1e18, 1e18);
        for (size_t i = 0; i < x.size(); ++i)
            CHECK(line.intercept + line.slope * x[i] >= y[i] - 1e-10);
    }
    SUBCASE("slope constraint binds for increasing data") {
        std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
        std::vector<double> y = {0.0, 1.0, 2.0, 3.0};
        auto line = num::chebyshevMajorantLine(x, y, -1e18, 0.0);
        CHECK(line.slope == 0.0);
        CHECK(line.slopeAtBound);
        CHECK(line.intercept == doctest::Approx(3.0));
    }
}

TEST_CASE("cumulative trapezoid") {
    std::vector<double> t = {0.0, 0.5, 1.0, 2.0};
    std::vector<double> v = {0.0, 1.0, 2.0, 4.0};   // v = 2t
    auto c = num::cumulativeTrapezoid(t, v);
    CHECK(c[3] == doctest::Approx(4.0).epsilon(1e-14));  // t^2
    CHECK(c[1] == doctest::Approx(0.25).epsilon(1e-14));
}
