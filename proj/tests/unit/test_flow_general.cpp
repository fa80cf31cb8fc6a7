#include <doctest.h>

#include <cmath>

#include "bundleflow/errors.hpp"
#include "bundleflow/flow_general.hpp"
#include "bundleflow/scenarios.hpp"

using namespace bundleflow;

namespace {

std::vector<double> field_oracle(std::span<const double> z, int m, int d) {
    double e = m / 2.0 + 1.0;
    for (int k = 0; k < m; ++k) e += 4.0 * d * z[k] * z[k] * z[m + k] * z[m + k];
    std::vector<double> out(2 * m);
    for (int k = 0; k < m; ++k) {
        const double x = z[k], y = z[m + k];
        out[k] = 0.5 + x + 4.0 * d * x * x * y * y - x * e;
        out[m + k] = -y * (2.0 * (d + 2) * y - 6.0 * x * (1.0 - x) * y * y - e);
    }
    return out;
}

}  // namespace

TEST_CASE("general params validation") {
    CHECK_THROWS_AS(make_general_params(2, 1), ConfigError);
    CHECK_THROWS_AS(make_general_params(3, 0), ConfigError);
}

TEST_CASE("beta at m = 3, d = 1 is (9 ± sqrt 21)/24") {
    const auto p = make_general_params(3, 1);
    CHECK(beta(p, EinsteinSign::Plus) == doctest::Approx((9.0 + std::sqrt(21.0)) / 24.0).epsilon(1e-14));
    CHECK(beta(p, EinsteinSign::Minus) == doctest::Approx((9.0 - std::sqrt(21.0)) / 24.0).epsilon(1e-14));
}

TEST_CASE("Einstein states are zeros of the field") {
    for (int m = 3; m <= 6; ++m)
        for (int d = 1; d <= 4; ++d) {
            const auto p = make_general_params(m, d);
            for (auto s : {EinsteinSign::Plus, EinsteinSign::Minus}) {
                const auto z = einstein_state(p, s).packed();
                for (double v : field_oracle(z, m, d)) CHECK(std::abs(v) < 1e-12);
            }
        }
}

TEST_CASE("analytic Jacobian agrees with finite differences") {
    const auto p = make_general_params(4, 2);
    StateXY s;
    s.x = {0.1, 0.2, 0.3, 0.4};
    s.y = {0.5, 0.6, 0.4, 0.7};
    const VectorField f = [&](std::span<const double> z) { return field_oracle(z, 4, 2); };
    const auto fd = fd_jacobian(f, s.packed(), 1e-6);
    const auto j = jacobian_general(s, p);
    CHECK((j - fd).norm() < 1e-8 * (1.0 + j.norm()));
}

TEST_CASE("field off the simplex is rejected") {
    StateXY s;
    s.x = {0.5, 0.5, 0.5};
    s.y = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(vf_general(s, make_general_params(3, 1)), ConfigError);
}

TEST_CASE("C-matrix sign pattern, both (1,1)-entry forms") {
    for (auto form : {CForm::Reference, CForm::Linearized})
        for (int m = 3; m <= 8; ++m)
            for (int d = 1; d <= 6; ++d) {
                const auto p = make_general_params(m, d);
                const auto cp = c_matrices(p, EinsteinSign::Plus, form);
                CHECK(cp.lambda1 < 0.0);
                CHECK(cp.lambda2 > 0.0);
                const auto cm = c_matrices(p, EinsteinSign::Minus, form);
                CHECK(cm.lambda2 < 0.0);
                CHECK(cm.trace < 0.0);
                CHECK(cm.det > 0.0);
            }
}

TEST_CASE("linearized C reproduces the Jacobian spectrum on V2") {
    const auto p = make_general_params(3, 1);
    for (auto s : {EinsteinSign::Plus, EinsteinSign::Minus}) {
        auto a = l_spectrum_v2(p, s, CForm::Linearized).real_parts();
        auto b = eigen_small(restrict_to(jacobian_general(einstein_state(p, s), p), v2_basis(3))).real_parts();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-8));
    }
    // The reference entry exceeds the linearized one by 4(m−1)β².
    const double bp = beta(p, EinsteinSign::Plus);
    const auto reference = c_matrices(p, EinsteinSign::Plus, CForm::Reference).c;
    const auto derived = c_matrices(p, EinsteinSign::Plus, CForm::Linearized).c;
    CHECK(reference(0, 0) - derived(0, 0) == doctest::Approx(8.0 * bp * bp).epsilon(1e-12));
}

TEST_CASE("L spectra on V2 have the expected counts") {
    for (int m = 3; m <= 6; ++m) {
        const auto p = make_general_params(m, 2);
        const auto sp = l_spectrum_v2(p, EinsteinSign::Plus);
        CHECK(sp.count_positive() == m);
        CHECK(sp.count_negative() == m - 1);
        CHECK(l_spectrum_v2(p, EinsteinSign::Minus).count_negative() == 2 * m - 1);
    }
}

TEST_CASE("integration keeps the simplex") {
    const auto p = make_general_params(3, 1);
    StateXY s;
    s.x = {0.2, 0.3, 0.5};
    s.y = {0.4, 0.5, 0.6};
    const auto t = integrate_general(s, p, 5.0);
    CHECK(t.max_simplex_drift < 1e-10);
    for (const auto& st : t.states) CHECK(simplex_defect(st) < 1e-12);
}

TEST_CASE("stable perturbation of the minus point returns") {
    const auto r = run_general_return(make_general_params(3, 1), EinsteinSign::Minus, 0);
    CHECK(r.final_distance < 1e-8);
    CHECK(r.max_simplex_drift < 1e-10);
}
