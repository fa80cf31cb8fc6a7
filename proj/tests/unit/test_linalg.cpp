#include <doctest.h>

#include <cmath>

#include "bundleflow/errors.hpp"
#include "bundleflow/linalg.hpp"

using namespace bundleflow;

TEST_CASE("symmetric matrix has real sorted eigenvalues") {
    const SmallMatrix m{{2.0, 1.0}, {1.0, 2.0}};
    const auto s = eigen_small(m);
    REQUIRE(s.size() == 2);
    CHECK(s.eigenvalues[0].real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.eigenvalues[1].real() == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(s.eigenvalues[0].imag() == 0.0);
    CHECK(max_residual(m, s) < 1e-13);
}

TEST_CASE("rotation generator has eigenvalues plus and minus i") {
    const SmallMatrix m{{0.0, -1.0}, {1.0, 0.0}};
    const auto s = eigen_small(m);
    CHECK(std::abs(s.eigenvalues[0].real()) < 1e-14);
    CHECK(std::abs(std::abs(s.eigenvalues[0].imag()) - 1.0) < 1e-14);
    CHECK(s.any_degenerate());
}

TEST_CASE("triangular matrix eigenvalues are its diagonal") {
    const SmallMatrix m{{-3.0, 5.0, 7.0}, {0.0, 0.5, 2.0}, {0.0, 0.0, 4.0}};
    const auto s = eigen_small(m);
    CHECK(s.real_parts()[0] == doctest::Approx(-3.0));
    CHECK(s.real_parts()[1] == doctest::Approx(0.5));
    CHECK(s.real_parts()[2] == doctest::Approx(4.0));
    CHECK(s.count_positive() == 2);
    CHECK(s.count_negative() == 1);
    CHECK(max_residual(m, s) < 1e-12);
}

TEST_CASE("non-finite input is rejected") {
    SmallMatrix m(2);
    m(0, 0) = NAN;
    CHECK_THROWS_AS(eigen_small(m), ConfigError);
}

TEST_CASE("central-difference Jacobian of a polynomial field") {
    const VectorField f = [](std::span<const double> x) {
        return std::vector<double>{x[0] * x[0] * x[1], std::sin(x[0]) + x[1] * x[1] * x[1]};
    };
    const std::vector<double> p{0.7, -1.3};
    const auto j = fd_jacobian(f, p, 1e-5);
    CHECK(j(0, 0) == doctest::Approx(2 * 0.7 * -1.3).epsilon(1e-8));
    CHECK(j(0, 1) == doctest::Approx(0.49).epsilon(1e-8));
    CHECK(j(1, 0) == doctest::Approx(std::cos(0.7)).epsilon(1e-8));
    CHECK(j(1, 1) == doctest::Approx(3 * 1.69).epsilon(1e-8));
}

TEST_CASE("orthonormal complement and restriction") {
    const std::vector<double> normal{1.0, 1.0, 1.0};
    const auto basis = orthonormal_complement(normal);
    REQUIRE(basis.size() == 2);
    for (std::size_t a = 0; a < basis.size(); ++a) {
        double dn = 0.0;
        for (int k = 0; k < 3; ++k) dn += basis[a][k] * normal[k];
        CHECK(std::abs(dn) < 1e-14);
        for (std::size_t b = 0; b < basis.size(); ++b) {
            double d = 0.0;
            for (int k = 0; k < 3; ++k) d += basis[a][k] * basis[b][k];
            CHECK(d == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-14));
        }
    }
    // Identity minus the averaging projector acts as the identity on the complement.
    SmallMatrix m = SmallMatrix::identity(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) -= 1.0 / 3.0;
    const auto r = restrict_to(m, basis);
    CHECK((r - SmallMatrix::identity(2)).norm() < 1e-14);
}
