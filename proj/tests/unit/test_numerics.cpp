#include <doctest.h>

#include <cmath>
#include <vector>

#include "bundleflow/errors.hpp"
#include "bundleflow/numerics.hpp"

using namespace bundleflow;

TEST_CASE("Hermite quadrature integrates sin on a nonuniform grid") {
    std::vector<double> x, f, df;
    for (int k = 0; k <= 200; ++k) {
        const double t = 3.0 * (k / 200.0) * (k / 200.0);
        x.push_back(t);
        f.push_back(std::sin(t));
        df.push_back(std::cos(t));
    }
    const auto c = cumulative_hermite(x, f, df);
    CHECK(c[0] == 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(c[k] - (1.0 - std::cos(x[k]))) < 1e-8);
}

TEST_CASE("five-point derivative is exact on quartics") {
    std::vector<double> x, y;
    for (int k = 0; k < 12; ++k) {
        const double t = 0.3 * k + 0.01 * k * k;
        x.push_back(t);
        y.push_back(t * t * t * t - 2.0 * t);
    }
    const auto d = lagrange_derivative(x, y);
    for (std::size_t k = 0; k < x.size(); ++k)
        CHECK(d[k] == doctest::Approx(4.0 * x[k] * x[k] * x[k] - 2.0).epsilon(1e-9));
}

TEST_CASE("bisection and trisection") {
    const double r = bisect_root([](double t) { return t * t - 2.0; }, 0.0, 2.0, 1e-14);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
    CHECK_THROWS_AS(bisect_root([](double t) { return t * t + 1.0; }, 0.0, 2.0, 1e-12), SolverError);
    const double m = trisect_minimum([](double t) { return (t - 0.3) * (t - 0.3); }, -1.0, 1.0, 1e-10);
    CHECK(m == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("Halton points in base 2 and 3") {
    const std::vector<int> bases{2, 3};
    CHECK(halton(1, bases) == std::vector<double>{0.5, 1.0 / 3.0});
    CHECK(halton(2, bases) == std::vector<double>{0.25, 2.0 / 3.0});
    CHECK(halton(3, bases)[0] == 0.75);
    CHECK(halton(4, bases)[1] == doctest::Approx(4.0 / 9.0));
}

TEST_CASE("linear fit recovers a line") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double t : x) y.push_back(1.5 - 0.25 * t);
    const auto [c0, c1] = linear_fit(x, y);
    CHECK(c0 == doctest::Approx(1.5));
    CHECK(c1 == doctest::Approx(-0.25));
}
