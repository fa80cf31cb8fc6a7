#include <doctest.h>

#include "bundleflow/errors.hpp"
#include "bundleflow/verify.hpp"

using namespace bundleflow;

namespace {

VerifyOptions small_options() {
    VerifyOptions o = VerifyOptions::defaults();
    o.m2_grid = {{1, 1}, {1, 2}, {2, 2}, {2, 3}, {4, 7}};
    o.m2_spot = {{1, 50}};
    o.general_grid = {{3, 1}, {5, 4}};
    o.omega2_sets = {{1, 1}};
    o.omega2_cells = 120;
    o.jacobian_samples = 10;
    return o;
}

}  // namespace

TEST_CASE("margin and pass rules") {
    auto c = make_check("x.strict", {}, "", 1.0, Relation::Less, 1.0);
    CHECK(!c.pass);
    c = make_check("x.nonstrict", {}, "", 1.0, Relation::LessEq, 1.0);
    CHECK(c.pass);
    c = make_check("x.greater", {}, "", 3.0, Relation::Greater, 2.0);
    CHECK(c.margin == 1.0);
    CHECK(c.scale == 3.0);
    CHECK(c.pass);
    c = make_check("x.tiny", {}, "", 1.0 + 1e-12, Relation::Greater, 1.0);
    CHECK(!c.pass);
    CHECK(make_flag("x.flag", {}, "", true).pass);
    CHECK(!make_flag("x.flag", {}, "", false).pass);
}

TEST_CASE("eta bound for (1,1) has the expected margin") {
    auto o = small_options();
    o.family_prefix = "eta-bounds.case-v";
    const auto r = run_verify(o);
    REQUIRE(!r.records.empty());
    for (const auto& c : r.records) {
        CHECK(c.pass);
        CHECK(c.margin == doctest::Approx(0.1303 - 0.11327).epsilon(1e-3));
    }
}

TEST_CASE("every family is populated and passes on a small grid") {
    auto o = small_options();
    const auto r = run_verify(o);
    const auto summary = r.summary();
    for (const auto& f : verify_families()) {
        REQUIRE(summary.count(f));
        CHECK(summary.at(f).total > 0);
        CHECK(summary.at(f).failed == 0);
    }
    CHECK(r.all_pass());
}

TEST_CASE("reports are byte-stable") {
    auto o = small_options();
    o.family_prefix = "general";
    const auto a = run_verify(o), b = run_verify(o);
    CHECK(report_json(a, o) == report_json(b, o));
    CHECK(report_text(a) == report_text(b));
}

TEST_CASE("unknown family prefix is a config error") {
    auto o = small_options();
    o.family_prefix = "no-such-family";
    CHECK_THROWS_AS(run_verify(o), ConfigError);
}
