#include <doctest.h>

#include <cmath>

#include "bundleflow/errors.hpp"
#include "bundleflow/flow_m2.hpp"
#include "bundleflow/linalg.hpp"
#include "bundleflow/scenarios.hpp"

using namespace bundleflow;

namespace {

// Field written out longhand for the oracle.
std::vector<double> field_oracle(std::span<const double> y, int n1, int n2, double q1, double q2) {
    const double e = 0.5 + 4 * n1 * q1 * q1 * y[0] * y[0] + 4 * n2 * q2 * q2 * y[1] * y[1];
    const double f1 = 2 * (n1 + 2) * q1 * y[0] - 6 * q1 * q1 * y[0] * y[0] - e;
    const double f2 = 2 * (n2 + 2) * q2 * y[1] - 6 * q2 * q2 * y[1] * y[1] - e;
    return {-y[0] * f1, -y[1] * f2};
}

// Roots of (8n+6)Y² − 2(n+2)Y + 1/2 = 0, smaller first.
std::pair<double, double> symmetric_roots(int n) {
    const long double a = 8.0L * n + 6.0L, b = -2.0L * (n + 2), c = 0.5L;
    const long double s = std::sqrt(b * b - 4 * a * c);
    return {static_cast<double>((-b - s) / (2 * a)), static_cast<double>((-b + s) / (2 * a))};
}

}  // namespace

TEST_CASE("params validation") {
    CHECK_THROWS_AS(normalized_params2(0, 1), ConfigError);
    CHECK_THROWS_AS(make_params2(1, 1, -1.0, 3.0), ConfigError);
    const auto p = make_params2(2, 3, 8.0, 10.0);
    CHECK(p.q(0) == doctest::Approx(2.0));
    CHECK(p.q(1) == doctest::Approx(2.0));
}

TEST_CASE("vector field matches the longhand oracle") {
    const auto p = make_params2(2, 5, 3.0, 11.0);
    const StateY y{0.13, 0.27};
    const auto v = vector_field(y, p);
    const auto w = field_oracle(std::vector<double>{y.y1, y.y2}, 2, 5, p.q(0), p.q(1));
    CHECK(v[0] == doctest::Approx(w[0]).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(w[1]).epsilon(1e-14));
}

TEST_CASE("analytic Jacobian agrees with finite differences of the oracle") {
    for (auto [n1, n2] : {std::pair{1, 1}, {2, 3}, {7, 4}}) {
        const auto p = normalized_params2(n1, n2);
        const StateY y{0.21, 0.09};
        const VectorField f = [&](std::span<const double> z) { return field_oracle(z, n1, n2, 1.0, 1.0); };
        const auto fd = fd_jacobian(f, std::vector<double>{y.y1, y.y2}, 1e-6);
        const auto j = jacobian(y, p);
        CHECK((j - fd).norm() < 1e-8 * (1.0 + j.norm()));
    }
}

TEST_CASE("symmetric Einstein points match the quadratic oracle") {
    for (int n = 1; n <= 12; ++n) {
        const auto e = einstein_points(normalized_params2(n, n));
        const auto [lo, hi] = symmetric_roots(n);
        CHECK(std::abs(e.eta.location.y1 - lo) < 1e-12);
        CHECK(std::abs(e.eta.location.y2 - lo) < 1e-12);
        CHECK(std::abs(e.xi.location.y1 - hi) < 1e-12);
    }
    const auto e11 = einstein_points(normalized_params2(1, 1));
    CHECK(std::abs(e11.eta.location.y1 - (3.0 - std::sqrt(2.0)) / 14.0) < 1e-12);
}

TEST_CASE("asymmetric Einstein points are zeros with equal Einstein constants") {
    const auto p = make_params2(3, 1, 2.0, 9.0);
    const auto e = einstein_points(p);
    for (const auto* fp : {&e.xi, &e.eta}) {
        const auto f = f_of(fp->location, p);
        CHECK(std::hypot(f[0], f[1]) < 1e-9);
        CHECK(einstein_constant(fp->location, p, 0) ==
              doctest::Approx(einstein_constant(fp->location, p, 1)).epsilon(1e-9));
    }
    CHECK(e.detail.swapped);
    CHECK(e.eta.location.y1 < e.xi.location.y1);
    CHECK(e.eta.location.y2 < e.xi.location.y2);
}

TEST_CASE("closed-form spectra at the axis fixed points") {
    for (auto [n1, n2] : {std::pair{1, 1}, {2, 5}, {9, 3}}) {
        const auto p = make_params2(n1, n2, 1.7 * (n1 + 2), 0.6 * (n2 + 2));
        const auto fps = fixed_points(p);
        REQUIRE(fps.size() == 7);
        CHECK(fps[0].kind == FixedPointKind::Origin);
        for (double re : fps[0].spectrum.real_parts()) CHECK(re == doctest::Approx(0.5).epsilon(1e-12));
        const double s = 1.0 / (4.0 * n1 + 6.0);
        const auto v1 = fps[1].spectrum.real_parts();
        CHECK(fps[1].location.y1 == doctest::Approx(s / p.q(0)).epsilon(1e-14));
        CHECK(v1[0] == doctest::Approx(-(n1 + 1.0) / (2.0 * n1 + 3.0)).epsilon(1e-12));
        CHECK(v1[1] == doctest::Approx(0.5 + 4.0 * n1 * s * s).epsilon(1e-12));
        const auto vt2 = fps[4].spectrum.real_parts();
        CHECK(fps[4].location.y2 == doctest::Approx(0.5 / p.q(1)).epsilon(1e-14));
        CHECK(vt2[0] == doctest::Approx(n2 + 0.5).epsilon(1e-12));
        CHECK(vt2[1] == doctest::Approx(n2 + 1.0).epsilon(1e-12));
        const Classification want[] = {Classification::Source,     Classification::Hyperbolic,
                                       Classification::Hyperbolic, Classification::Source,
                                       Classification::Source,     Classification::Hyperbolic,
                                       Classification::Sink};
        for (int k = 0; k < 7; ++k) CHECK(fps[k].classification == want[k]);
    }
}

TEST_CASE("equal-factor bound (2,2): intermediate constant 1.0732 is slightly too small") {
    // y(y0) on the negative branch, evaluated directly in long double.
    const long double y0 = (3.0L + std::sqrt(2.0L)) / 6.0L;
    const long double k = 16.0L;
    const long double y = (2.0L * k * y0 / 3.0L) * (1.0L - std::sqrt(1.0L - 3.0L / (y0 * k)));
    CHECK(std::abs(static_cast<double>(y) - 1.0734129843) < 1e-9);
    CHECK(y > 1.0732L);
    CHECK(y_of_y0(static_cast<double>(y0), 2) == doctest::Approx(static_cast<double>(y)).epsilon(1e-13));
    // The bound the constant was used for still holds.
    const auto e = einstein_points(normalized_params2(2, 2));
    CHECK(e.eta.location.y1 < 0.0912);
}

TEST_CASE("y_of_y0 rejects arguments below its domain") {
    CHECK_THROWS_AS(y_of_y0(0.01, 1), DomainError);
}

TEST_CASE("region membership") {
    const auto p = normalized_params2(1, 1);
    CHECK(region_of({0.2, 0.2}, p) == Region::Omega1);
    CHECK(region_of({0.05, 0.05}, p) == Region::Omega2);
    CHECK(region_of({0.45, 0.02}, p) == Region::Other);
    const auto cmp = compare_omega2_with_flood_fill(p, 200);
    CHECK(cmp.agreement() >= 0.999);
    CHECK(cmp.interior_disagree == 0);
}

TEST_CASE("nullcline points satisfy F_i = 0") {
    const auto p = normalized_params2(2, 3);
    for (int i = 0; i < 2; ++i)
        for (const auto& y : nullcline_ellipse(i, p, 64)) CHECK(std::abs(f_of(y, p)[i]) < 1e-12);
}

TEST_CASE("reconstruction at a fixed point is linear growth") {
    const auto p = normalized_params2(1, 1);
    const auto eta = einstein_points(p).eta.location;
    TrajectoryM2 t;
    for (int k = 0; k <= 400; ++k) {
        t.u_grid.push_back(0.01 * k);
        t.states.push_back(eta);
    }
    const auto path = reconstruct(t, 2.0, p);
    const double e = e_of(eta, p);
    for (std::size_t k = 0; k < path.tau.size(); k += 50) {
        const double u = t.u_grid[k];
        CHECK(path.psi[k] == doctest::Approx(2.0 * std::exp(e * u)).epsilon(1e-10));
        CHECK(path.tau[k] == doctest::Approx(2.0 * (std::exp(e * u) - 1.0) / e).epsilon(1e-9));
        CHECK(path.b1[k] == doctest::Approx(path.psi[k] / eta.y1).epsilon(1e-12));
    }
}

TEST_CASE("Omega1 start converges to eta with E nonincreasing") {
    const auto p = normalized_params2(1, 1);
    const auto r = run_region({0.2, 0.2}, Region::Omega1, p);
    CHECK(r.terminal.fixed_point == FixedPointKind::Eta);
    CHECK(r.distance_to_eta < 1e-8);
    CHECK(r.invariance_margin >= -1e-8);
    CHECK(r.e_monotone_defect < 1e-9);
}

TEST_CASE("start outside the quadrant is rejected") {
    CHECK_THROWS_AS(integrate({-0.1, 0.2}, normalized_params2(1, 1), 1.0), ConfigError);
}

TEST_CASE("Ricci signature thresholds") {
    const auto p = normalized_params2(1, 1);
    const auto r = ricci_signature({0.9, 0.3}, p);
    CHECK(r.base_exact[0]);
    CHECK(!r.base_conservative[0]);
    CHECK(r.base_conservative[1]);
}
