#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bundleflow/errors.hpp"
#include "bundleflow/integrator.hpp"

using namespace bundleflow;

TEST_CASE("exponential decay") {
    const OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -2.0 * y[0]; };
    const auto s = dopri45(f, 0.0, {1.0}, 3.0, {});
    CHECK(s.t.back() == doctest::Approx(3.0));
    CHECK(std::abs(s.y.back()[0] - std::exp(-6.0)) < 1e-10);
    CHECK(std::abs(s.at(1.234)[0] - std::exp(-2.468)) < 1e-8);
}

TEST_CASE("harmonic oscillator returns after one period") {
    const OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    IntegratorOptions o;
    o.rtol = o.atol = 1e-12;
    const auto s = dopri45(f, 0.0, {1.0, 0.0}, 2.0 * std::numbers::pi, o);
    CHECK(std::abs(s.y.back()[0] - 1.0) < 1e-10);
    CHECK(std::abs(s.y.back()[1]) < 1e-10);
}

TEST_CASE("backward integration") {
    const OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0]; };
    const auto s = dopri45(f, 0.0, {1.0}, -2.0, {});
    CHECK(s.t.back() == doctest::Approx(-2.0));
    CHECK(std::abs(s.y.back()[0] - std::exp(-2.0)) < 1e-10);
}

TEST_CASE("stop condition and projection") {
    const OdeRhs f = [](double, std::span<const double>, std::span<double> dy) { dy[0] = 1.0; };
    int projected = 0;
    const auto s = dopri45(
        f, 0.0, {0.0}, 10.0, {}, [&](std::span<double>) { ++projected; },
        [](double, std::span<const double> y) { return y[0] > 1.0; });
    CHECK(s.stopped);
    CHECK(s.y.back()[0] > 1.0);
    CHECK(s.y.back()[0] < 1.1);
    CHECK(projected > 0);
}

TEST_CASE("step budget exhaustion carries the last state") {
    const OdeRhs f = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };
    IntegratorOptions o;
    o.max_steps = 5;
    try {
        dopri45(f, 0.0, {1.0}, 100.0, o);
        FAIL("expected IntegratorError");
    } catch (const IntegratorError& e) {
        CHECK(e.last_u > 0.0);
        CHECK(e.last_state.size() == 1);
    }
}

TEST_CASE("non-finite right-hand side is an integrator error") {
    const OdeRhs f = [](double t, std::span<const double>, std::span<double> dy) { dy[0] = t > 0.5 ? NAN : 1.0; };
    CHECK_THROWS_AS(dopri45(f, 0.0, {0.0}, 1.0, {}), IntegratorError);
}
