#include "bundleflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "bundleflow/errors.hpp"
#include "bundleflow/flow_general.hpp"
#include "bundleflow/flow_m2.hpp"
#include "bundleflow/numerics.hpp"
#include "bundleflow/scenarios.hpp"

namespace bundleflow {

using Params = std::vector<std::pair<std::string, double>>;

std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::Less: return "<";
        case Relation::LessEq: return "<=";
        case Relation::Greater: return ">";
        case Relation::GreaterEq: return ">=";
    }
    return "?";
}

CheckRecord make_check(std::string id, Params params, std::string claim, double lhs, Relation rel, double rhs) {
    CheckRecord c;
    c.check_id = std::move(id);
    c.params = std::move(params);
    c.claim = std::move(claim);
    c.lhs = lhs;
    c.rhs = rhs;
    c.relation = rel;
    c.margin = (rel == Relation::Less || rel == Relation::LessEq) ? rhs - lhs : lhs - rhs;
    c.scale = std::max(std::abs(lhs), std::abs(rhs));
    const bool strict = rel == Relation::Less || rel == Relation::Greater;
    c.pass = std::isfinite(c.margin) &&
             (strict ? c.margin > kMarginRelTol * c.scale : c.margin >= -kMarginRelTol * c.scale);
    return c;
}

CheckRecord make_flag(std::string id, Params params, std::string claim, bool holds) {
    return make_check(std::move(id), std::move(params), std::move(claim), holds ? 1.0 : 0.0, Relation::Greater, 0.5);
}

std::map<std::string, FamilySummary> VerificationReport::summary() const {
    std::map<std::string, FamilySummary> out;
    for (const auto& r : records) {
        auto& f = out[r.check_id.substr(0, r.check_id.find('.'))];
        ++f.total;
        ++(r.pass ? f.passed : f.failed);
    }
    return out;
}

int VerificationReport::failures() const {
    return static_cast<int>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.pass; }));
}

VerifyOptions VerifyOptions::defaults() {
    VerifyOptions o;
    for (int a = 1; a <= 12; ++a)
        for (int b = 1; b <= 12; ++b) o.m2_grid.emplace_back(a, b);
    for (int a : {1, 2, 3, 5, 12}) o.m2_spot.emplace_back(a, 50);
    for (int m = 3; m <= 12; ++m)
        for (int d = 1; d <= 12; ++d) o.general_grid.emplace_back(m, d);
    o.omega2_sets = {{1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 5}};
    return o;
}

const std::vector<std::string>& verify_families() {
    static const std::vector<std::string> f = {"einstein-m2",     "eta-bounds",        "classify",
                                               "xi-estimates",    "general",           "general-field",
                                               "jacobian-oracle", "omega2-membership", "dynamics"};
    return f;
}

namespace {

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Params m2_params(int n1, int n2) { return {{"n1", n1}, {"n2", n2}}; }
Params general_params(int m, int d) { return {{"m", m}, {"d", d}}; }

std::vector<std::pair<int, int>> m2_pairs(const VerifyOptions& o) {
    auto all = o.m2_grid;
    all.insert(all.end(), o.m2_spot.begin(), o.m2_spot.end());
    return all;
}

void add(VerificationReport& r, CheckRecord c) { r.records.push_back(std::move(c)); }

// Closed-form spectra at the coordinate-axis fixed points (independent of q).
std::array<double, 2> origin_eigs() { return {0.5, 0.5}; }
std::array<double, 2> v_eigs(int n) {
    const double s = 1.0 / (4.0 * n + 6.0);
    return {-(n + 1.0) / (2.0 * n + 3.0), 0.5 + 4.0 * n * s * s};
}
std::array<double, 2> v_tilde_eigs(int n) { return {n + 0.5, n + 1.0}; }

double max_sorted_diff(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

// ── m = 2 ────────────────────────────────────────────────────────────────

VerificationReport verify_einstein_m2(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [n1, n2] : m2_pairs(o)) {
        const auto p = normalized_params2(n1, n2);
        const auto ps = m2_params(n1, n2);
        const auto e = einstein_points(p);
        for (const auto* fp : {&e.xi, &e.eta}) {
            const std::string tag = fp == &e.xi ? "xi" : "eta";
            const auto f = f_of(fp->location, p);
            add(r, make_check("einstein-m2.residual-" + tag, ps, "|F(" + tag + ")| < 1e-9", std::hypot(f[0], f[1]),
                              Relation::Less, 1e-9));
            const double l1 = einstein_constant(fp->location, p, 0), l2 = einstein_constant(fp->location, p, 1);
            add(r, make_check("einstein-m2.constant-agreement-" + tag, ps,
                              "|Lambda_1 - Lambda_2| at " + tag + " < 1e-9", std::abs(l1 - l2), Relation::Less, 1e-9));
            add(r, make_check("einstein-m2.constant-half-e-" + tag, ps,
                              "|Lambda_1 - E/2| at " + tag + " < 1e-9", std::abs(l1 - 0.5 * e_of(fp->location, p)),
                              Relation::Less, 1e-9));
        }
        add(r, make_check("einstein-m2.phi-residual-xi", ps, "|phi(y0_lo)| < 1e-10", std::abs(phi(e.detail.y0_lo, p)),
                          Relation::Less, 1e-10));
        add(r, make_check("einstein-m2.phi-residual-eta", ps, "|phi(y0_hi)| < 1e-10", std::abs(phi(e.detail.y0_hi, p)),
                          Relation::Less, 1e-10));
        add(r, make_check("einstein-m2.domain", ps, "y0_lo > 3/(min n + 2)^2", e.detail.y0_lo, Relation::Greater,
                          e.detail.domain_lo));
        add(r, make_check("einstein-m2.roots-distinct", ps, "y0_lo < y0_hi", e.detail.y0_lo, Relation::Less,
                          e.detail.y0_hi));
        add(r, make_check("einstein-m2.order-1", ps, "eta_1 < xi_1", e.eta.location.y1, Relation::Less,
                          e.xi.location.y1));
        add(r, make_check("einstein-m2.order-2", ps, "eta_2 < xi_2", e.eta.location.y2, Relation::Less,
                          e.xi.location.y2));
        if (n1 == n2) {
            // Symmetric points solve (8n+6)Y² − 2(n+2)Y + 1/2 = 0.
            const double a = 8.0 * n1 + 6.0, b = 2.0 * (n1 + 2.0);
            const double root = std::sqrt(b * b - 2.0 * a);
            const double lo = (b - root) / (2.0 * a), hi = (b + root) / (2.0 * a);
            const double d = std::max({std::abs(e.eta.location.y1 - lo), std::abs(e.eta.location.y2 - lo),
                                       std::abs(e.xi.location.y1 - hi), std::abs(e.xi.location.y2 - hi)});
            add(r, make_check("einstein-m2.symmetric-oracle", ps, "max |Y - symmetric quadratic root| < 1e-12", d,
                              Relation::Less, 1e-12));
        }
    }
    return r;
}

VerificationReport verify_eta_bounds(const VerifyOptions& o) {
    VerificationReport r;
    const double ystar_generic = (6.0 + std::numbers::sqrt2) / 12.0;
    const double ystar_equal_small = (3.0 + std::numbers::sqrt2) / 6.0;
    const double ystar_23 = (10.0 + std::numbers::sqrt2) / 20.0;
    for (auto [n1, n2] : m2_pairs(o)) {
        const auto p = normalized_params2(n1, n2);
        const auto ps = m2_params(n1, n2);
        const auto e = einstein_points(p);
        const int lo = std::min(n1, n2), hi = std::max(n1, n2);
        const std::array<int, 2> n{n1, n2};
        const std::array<double, 2> qeta{p.q(0) * e.eta.location.y1, p.q(1) * e.eta.location.y2};

        auto bound = [&](const std::string& id, int i, double b, const std::string& label) {
            add(r, make_check(id, ps, "q" + std::to_string(i + 1) + " eta" + std::to_string(i + 1) + " < " + label,
                              qeta[i], Relation::Less, b));
        };

        double ystar = ystar_generic;
        if (lo == 1 && hi == 1) {
            for (int i = 0; i < 2; ++i) bound("eta-bounds.case-v", i, 0.1303, "0.1303");
            ystar = ystar_equal_small;
            const double y1 = y_of_y0(ystar, 1);
            add(r, make_check("eta-bounds.y1-at-ystar", ps, "y1(y0*) < 1.1498", y1, Relation::Less, 1.1498));
            add(r, make_check("eta-bounds.phi-at-ystar", ps, "phi(y0*) < -0.1936", phi(ystar, p), Relation::Less,
                              -0.1936));
        } else if (lo == 1) {
            for (int i = 0; i < 2; ++i) {
                if (n[i] == 1)
                    bound("eta-bounds.case-ii", i, 0.1608, "0.1608");
                else
                    bound("eta-bounds.case-ii", i, 0.4661 / (n[i] + 2.0), fmt("0.4661/%g", n[i] + 2.0));
            }
        } else if (lo == 2 && hi == 2) {
            for (int i = 0; i < 2; ++i) bound("eta-bounds.case-iii", i, 0.0912, "0.0912");
            ystar = ystar_equal_small;
        } else if (lo == 2 && hi == 3) {
            for (int i = 0; i < 2; ++i)
                bound("eta-bounds.case-iv", i, n[i] == 2 ? 0.1204 : 0.0928, n[i] == 2 ? "0.1204" : "0.0928");
            ystar = ystar_23;
        } else {
            for (int i = 0; i < 2; ++i)
                bound("eta-bounds.case-i", i, 0.4661 / (n[i] + 2.0), fmt("0.4661/%g", n[i] + 2.0));
        }
        add(r, make_check("eta-bounds.y02-above-ystar", ps, fmt("y0_hi > y0* = %.12g", ystar), e.detail.y0_hi,
                          Relation::Greater, ystar));
    }
    return r;
}

VerificationReport verify_classifications(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [n1, n2] : o.m2_grid) {
        const auto p = normalized_params2(n1, n2);
        const auto ps = m2_params(n1, n2);
        const auto fps = fixed_points(p);
        for (const auto& fp : fps) {
            const std::string k(to_string(fp.kind));
            const auto re = fp.spectrum.real_parts();
            const double lo = *std::min_element(re.begin(), re.end());
            const double hi = *std::max_element(re.begin(), re.end());
            const bool source = fp.kind == FixedPointKind::Origin || fp.kind == FixedPointKind::V1Tilde ||
                                fp.kind == FixedPointKind::V2Tilde;
            if (source) {
                add(r, make_check("classify." + k + ".source", ps, "min Re lambda > 0", lo, Relation::Greater, 0.0));
            } else if (fp.kind == FixedPointKind::Eta) {
                add(r, make_check("classify." + k + ".sink", ps, "max Re lambda < 0", hi, Relation::Less, 0.0));
            } else {
                add(r, make_check("classify." + k + ".saddle-negative", ps, "min Re lambda < 0", lo, Relation::Less,
                                  0.0));
                add(r, make_check("classify." + k + ".saddle-positive", ps, "max Re lambda > 0", hi,
                                  Relation::Greater, 0.0));
            }
            std::optional<std::array<double, 2>> closed;
            switch (fp.kind) {
                case FixedPointKind::Origin: closed = origin_eigs(); break;
                case FixedPointKind::V1: closed = v_eigs(n1); break;
                case FixedPointKind::V2: closed = v_eigs(n2); break;
                case FixedPointKind::V1Tilde: closed = v_tilde_eigs(n1); break;
                case FixedPointKind::V2Tilde: closed = v_tilde_eigs(n2); break;
                default: break;
            }
            if (closed) {
                const double d = max_sorted_diff(re, {(*closed)[0], (*closed)[1]});
                add(r, make_check("classify." + k + ".closed-form", ps, "max |lambda - closed form| < 1e-12", d,
                                  Relation::Less, 1e-12));
            }
        }
        const auto& eta = fps[6];
        const auto rb = rho_bound_check(eta, p);
        add(r, make_check("classify.eta.minus-e-plus-rho1", ps, "-E(eta) + rho1(eta) < 0", rb.minus_e_plus_rho1,
                          Relation::Less, 0.0));
        add(r, make_check("classify.eta.rho-closed-form", ps, "|(-E + rho1) - (3x + 3y - 1/2 + sqrt A)| < 1e-12",
                          std::abs(rb.minus_e_plus_rho1 - rb.minus_e_plus_rho1_closed), Relation::Less, 1e-12));
    }
    return r;
}

VerificationReport verify_xi_claims(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [n1, n2] : o.m2_grid) {
        const auto p = normalized_params2(n1, n2);
        const auto ps = m2_params(n1, n2);
        const auto fps = fixed_points(p);
        const auto& xi = fps[5];
        const auto& eta = fps[6];
        const std::array<int, 2> n{n1, n2};
        const std::array<double, 2> q{p.q(0), p.q(1)};
        const std::array<double, 2> c{xi.location.y1, xi.location.y2};

        double ratio_sum = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double a = 2.0 * (n[i] + 2) * q[i] - 2.0 * (4.0 * n[i] + 6.0) * q[i] * q[i] * c[i];
            const double b = 8.0 * n[i] * q[i] * q[i] * c[i];
            ratio_sum += b / (a + b);
            add(r, make_check("xi-estimates.a-plus-b-" + std::to_string(i + 1), ps, "a_i + b_i > 0", a + b,
                              Relation::Greater, 0.0));
        }
        add(r, make_check("xi-estimates.ratio-sum", ps, "sum b_i/(a_i + b_i) > 1", ratio_sum, Relation::Greater, 1.0));

        const double x = q[0] * q[0] * c[0] * c[0];
        const double y = q[1] * q[1] * c[1] * c[1];
        const double e = e_of(xi.location, p);
        const double g = -e * e + ((8.0 * n1 + 6.0) * x + (8.0 * n2 + 6.0) * y) * e - (48.0 * n1 + 48.0 * n2 + 36.0) * x * y;
        add(r, make_check("xi-estimates.g-positive", ps, "G(xi, E(xi)) > 0", g, Relation::Greater, 0.0));
        add(r, make_check("xi-estimates.e-minus-6x-1", ps, "E(xi) - 6 q1^2 xi1^2 > 0", e - 6.0 * x, Relation::Greater,
                          0.0));
        add(r, make_check("xi-estimates.e-minus-6x-2", ps, "E(xi) - 6 q2^2 xi2^2 > 0", e - 6.0 * y, Relation::Greater,
                          0.0));

        const auto rb = rho_bound_check(xi, p);
        // The bound is stated with the smaller dimension first.
        const double perron = n1 <= n2 ? rb.perron_lower_bound : 8.0 * n2 * y + (8.0 * n1 + 6.0) * x;
        add(r, make_check("xi-estimates.perron", ps, "rho1(xi) >= 8 n_lo x_lo + (8 n_hi + 6) x_hi", rb.rho1,
                          Relation::GreaterEq, perron));
        add(r, make_check("xi-estimates.minus-e-plus-rho1", ps, "-E(xi) + rho1(xi) > 0", rb.minus_e_plus_rho1,
                          Relation::Greater, 0.0));
        add(r, make_check("xi-estimates.a-lower", ps, "A(xi) > (3x + 3y)^2", rb.a_value, Relation::Greater,
                          (3.0 * x + 3.0 * y) * (3.0 * x + 3.0 * y)));

        const auto rbe = rho_bound_check(eta, p);
        const double xe = q[0] * q[0] * eta.location.y1 * eta.location.y1;
        const double ye = q[1] * q[1] * eta.location.y2 * eta.location.y2;
        const double ub = (4.0 * n1 + 3.0) * xe + (4.0 * n2 + 3.0) * ye;
        add(r, make_check("xi-estimates.a-upper-eta", ps, "A(eta) < ((4n1+3)x + (4n2+3)y)^2", rbe.a_value,
                          Relation::Less, ub * ub));
    }
    return r;
}

// ── m >= 3 ───────────────────────────────────────────────────────────────

namespace {

void spectral_checks(VerificationReport& r, const std::string& fam, const GeneralParams& gp, const Params& ps,
                     CForm form) {
    const auto cp = c_matrices(gp, EinsteinSign::Plus, form);
    const auto cm = c_matrices(gp, EinsteinSign::Minus, form);
    add(r, make_check(fam + ".c-plus-lambda1", ps, "lambda1+ < 0", cp.lambda1, Relation::Less, 0.0));
    add(r, make_check(fam + ".c-plus-lambda2", ps, "lambda2+ > 0", cp.lambda2, Relation::Greater, 0.0));
    add(r, make_check(fam + ".c-minus-order", ps, "lambda1- <= lambda2-", cm.lambda1, Relation::LessEq, cm.lambda2));
    add(r, make_check(fam + ".c-minus-lambda2", ps, "lambda2- < 0", cm.lambda2, Relation::Less, 0.0));
    add(r, make_check(fam + ".c-minus-trace", ps, "tr C- < 0", cm.trace, Relation::Less, 0.0));
    add(r, make_check(fam + ".c-minus-det", ps, "det C- > 0", cm.det, Relation::Greater, 0.0));
    for (const auto* c : {&cp, &cm}) {
        const std::string s = c == &cp ? "plus" : "minus";
        add(r, make_check(fam + ".c-" + s + "-discriminant", ps, "(tr C)^2 - 4 det C > 0",
                          c->trace * c->trace - 4.0 * c->det, Relation::Greater, 0.0));
    }

    const int m = gp.m;
    for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus}) {
        const std::string s(to_string(sign));
        const auto& c = sign == EinsteinSign::Plus ? cp : cm;
        const auto sp = l_spectrum_v2(gp, sign, form);
        const auto re = sp.real_parts();
        std::vector<double> sorted = re;
        std::sort(sorted.begin(), sorted.end());
        double max_im = 0.0;
        for (const auto& l : sp.eigenvalues) max_im = std::max(max_im, std::abs(l.imag()));
        add(r, make_check(fam + ".v2-" + s + "-imaginary", ps, "max |Im lambda| on V2 < 1e-9", max_im, Relation::Less,
                          1e-9));
        if (sign == EinsteinSign::Plus) {
            add(r, make_check(fam + ".v2-plus-negative-count", ps, "m-1 negative: sorted[m-2] < 0",
                              sorted[static_cast<std::size_t>(m - 2)], Relation::Less, 0.0));
            add(r, make_check(fam + ".v2-plus-positive-count", ps, "m positive: sorted[m-1] > 0",
                              sorted[static_cast<std::size_t>(m - 1)], Relation::Greater, 0.0));
        } else {
            add(r, make_check(fam + ".v2-minus-negative", ps, "max Re lambda on V2 < 0", sorted.back(), Relation::Less,
                              0.0));
        }
        std::vector<double> expected;
        for (int k = 0; k < m - 1; ++k) {
            expected.push_back(c.lambda1);
            expected.push_back(c.lambda2);
        }
        expected.push_back(lambda3(gp, beta(gp, sign)));
        add(r, make_check(fam + ".v2-" + s + "-multiset", ps, "spectrum on V2 = {l1^(m-1), l2^(m-1), l3} to 1e-9",
                          max_sorted_diff(re, expected), Relation::Less, 1e-9));
    }
}

}  // namespace

VerificationReport verify_general_algebra(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [m, d] : o.general_grid) {
        const auto gp = make_general_params(m, d);
        const auto ps = general_params(m, d);
        const auto bq = beta_quadratic(gp);
        add(r, make_check("general.discriminant", ps, "beta quadratic discriminant > 0", bq.discriminant,
                          Relation::Greater, 0.0));
        const double sd = std::sqrt(static_cast<double>(d));
        const double bp = beta(gp, EinsteinSign::Plus), bm = beta(gp, EinsteinSign::Minus);
        add(r, make_check("general.beta-residual-plus", ps, "|Q(beta+)| < 1e-12", std::abs(beta_residual(gp, bp)),
                          Relation::Less, 1e-12));
        add(r, make_check("general.beta-residual-minus", ps, "|Q(beta-)| < 1e-12", std::abs(beta_residual(gp, bm)),
                          Relation::Less, 1e-12));
        add(r, make_check("general.beta-plus-lower", ps, "beta+ > sqrt(d)(d+2)/(2(2d+3))", bp, Relation::Greater,
                          sd * (d + 2.0) / (2.0 * (2.0 * d + 3.0))));
        add(r, make_check("general.beta-plus-upper", ps, "beta+ < sqrt(d)(d+2)/(2(d+1))", bp, Relation::Less,
                          sd * (d + 2.0) / (2.0 * (d + 1.0))));
        add(r, make_check("general.beta-minus-lower", ps, "beta- > sqrt(d)/(4(d+2))", bm, Relation::Greater,
                          sd / (4.0 * (d + 2.0))));
        add(r, make_check("general.beta-minus-upper", ps, "beta- < 5 sqrt(d)/(6(d+2))", bm, Relation::Less,
                          5.0 * sd / (6.0 * (d + 2.0))));
        if (d == 1) {
            const double den = 2.0 * (5.0 * m - 3.0);
            add(r, make_check("general.beta-plus-d1-lower", ps, "beta+ > (5m-2)/(2(5m-3))", bp, Relation::Greater,
                              (5.0 * m - 2.0) / den));
            add(r, make_check("general.beta-plus-d1-upper", ps, "beta+ < (5m-1)/(2(5m-3))", bp, Relation::Less,
                              (5.0 * m - 1.0) / den));
            add(r, make_check("general.beta-minus-d1-lower", ps, "beta- > (m+1)/(2(5m-3))", bm, Relation::Greater,
                              (m + 1.0) / den));
            add(r, make_check("general.beta-minus-d1-upper", ps, "beta- < (m+2)/(2(5m-3))", bm, Relation::Less,
                              (m + 2.0) / den));
        }
        add(r, make_check("general.lambda3-plus", ps, "lambda3+ > 0", lambda3(gp, bp), Relation::Greater, 0.0));
        add(r, make_check("general.lambda3-minus", ps, "lambda3- < 0", lambda3(gp, bm), Relation::Less, 0.0));
        add(r, make_check("general.db-dtau-plus", ps, "2(d+2) - 6(m-1)beta+/(m sqrt d) > 0",
                          2.0 * (d + 2.0) - 6.0 * (m - 1.0) * bp / (m * sd), Relation::Greater, 0.0));
        for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus}) {
            const auto v = vf_general(einstein_state(gp, sign), gp);
            double mx = 0.0;
            for (double x : v.x) mx = std::max(mx, std::abs(x));
            for (double y : v.y) mx = std::max(mx, std::abs(y));
            add(r, make_check("general.field-zero-" + std::string(to_string(sign)), ps,
                              "|field| at Einstein point < 1e-10", mx, Relation::Less, 1e-10));
        }
        spectral_checks(r, "general", gp, ps, CForm::Reference);
    }
    return r;
}

VerificationReport verify_general_field(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [m, d] : o.general_grid) {
        const auto gp = make_general_params(m, d);
        const auto ps = general_params(m, d);
        for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus}) {
            const auto j = jacobian_general(einstein_state(gp, sign), gp);
            const double diff = (l_matrix(gp, sign, CForm::Linearized) - j).norm();
            add(r, make_check("general-field.jacobian-match-" + std::string(to_string(sign)), ps,
                              "|L(linearized) - Jacobian| < 1e-9", diff, Relation::Less, 1e-9));
        }
        spectral_checks(r, "general-field", gp, ps, CForm::Linearized);
    }
    return r;
}

VerificationReport verify_jacobian_oracle(const VerifyOptions& o) {
    VerificationReport r;
    static constexpr int kBases2[] = {2, 3};
    auto rel_error = [](const SmallMatrix& a, const SmallMatrix& b) {
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < a.entries().size(); ++k) {
            diff = std::max(diff, std::abs(a.entries()[k] - b.entries()[k]));
            scale = std::max(scale, std::abs(a.entries()[k]));
        }
        return diff / std::max(scale, 1.0);
    };

    for (auto [n1, n2] : o.m2_grid) {
        const auto p = normalized_params2(n1, n2);
        double worst = 0.0;
        for (int k = 1; k <= o.jacobian_samples; ++k) {
            const auto h = halton(k, kBases2);
            const StateY s{h[0] / p.q(0), h[1] / p.q(1)};
            const VectorField f = [&p](std::span<const double> z) {
                const auto v = vector_field({z[0], z[1]}, p);
                return std::vector<double>{v[0], v[1]};
            };
            const std::vector<double> z{s.y1, s.y2};
            worst = std::max(worst, rel_error(jacobian(s, p), fd_jacobian(f, z, o.jacobian_step)));
        }
        add(r, make_check("jacobian-oracle.m2", m2_params(n1, n2), "max rel |J - J_fd| over samples < 1e-6", worst,
                          Relation::Less, 1e-6));
    }

    static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    for (auto [m, d] : o.general_grid) {
        const auto gp = make_general_params(m, d);
        const double ymax = 2.0 * m * beta(gp, EinsteinSign::Plus) / std::sqrt(static_cast<double>(d));
        double worst = 0.0;
        for (int k = 1; k <= o.jacobian_samples; ++k) {
            const auto h = halton(k, std::span<const int>(kPrimes, static_cast<std::size_t>(2 * m)));
            StateXY s;
            double total = 0.0;
            for (int i = 0; i < m; ++i) {
                s.x.push_back(0.05 + h[static_cast<std::size_t>(i)]);
                total += s.x.back();
            }
            for (double& x : s.x) x /= total;
            for (int i = 0; i < m; ++i) s.y.push_back(ymax * h[static_cast<std::size_t>(m + i)]);
            const VectorField f = [&gp](std::span<const double> z) { return vf_general_packed(z, gp); };
            const auto z = s.packed();
            worst = std::max(worst, rel_error(jacobian_general(s, gp), fd_jacobian(f, z, o.jacobian_step)));
        }
        add(r, make_check("jacobian-oracle.general", general_params(m, d), "max rel |J - J_fd| over samples < 1e-6",
                          worst, Relation::Less, 1e-6));
    }
    return r;
}

VerificationReport verify_omega2_membership(const VerifyOptions& o) {
    VerificationReport r;
    for (auto [n1, n2] : o.omega2_sets) {
        const auto p = normalized_params2(n1, n2);
        auto ps = m2_params(n1, n2);
        ps.emplace_back("cells", o.omega2_cells);
        const auto c = compare_omega2_with_flood_fill(p, o.omega2_cells);
        add(r, make_check("omega2-membership.agreement", ps, "agreement with flood fill >= 0.999", c.agreement(),
                          Relation::GreaterEq, 0.999));
        add(r, make_check("omega2-membership.interior-disagreements", ps,
                          "disagreements away from the boundary <= 0", c.interior_disagree, Relation::LessEq, 0.0));
    }
    return r;
}

// ── dynamics ─────────────────────────────────────────────────────────────

namespace {

void guarded(VerificationReport& r, const std::string& id, const Params& ps, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        add(r, make_flag(id + ".completed", ps, std::string("scenario raised: ") + e.what(), false));
    }
}

bool reached(const TerminalEvent& e, FixedPointKind k) {
    return e.kind == TerminalKind::ReachedFixedPoint && e.fixed_point == k;
}

}  // namespace

VerificationReport verify_dynamics(const VerifyOptions& o) {
    (void)o;
    VerificationReport r;
    for (const auto& set : default_dynamics_sets()) {
        const auto& p = set.params;
        const auto ps = m2_params(p.n(0), p.n(1));

        for (auto [start, reg] : {std::pair{set.omega1_start, Region::Omega1}, std::pair{set.omega2_start, Region::Omega2}}) {
            const std::string id = "dynamics." + std::string(to_string(reg));
            guarded(r, id, ps, [&] {
                const auto run = run_region(start, reg, p);
                add(r, make_flag(id + ".start-region", ps, "start lies in " + std::string(to_string(reg)),
                                 run.start_region == reg));
                add(r, make_check(id + ".invariance-margin", ps, "min region margin along the run >= -1e-8",
                                  run.invariance_margin, Relation::GreaterEq, -1e-8));
                add(r, make_check(id + ".e-monotone", ps, "per-step E monotonicity defect < 1e-9",
                                  run.e_monotone_defect, Relation::Less, 1e-9));
                add(r, make_check(id + ".limit-eta", ps, "|Y(end) - eta| < 1e-8", run.distance_to_eta, Relation::Less,
                                  1e-8));
                add(r, make_check(id + ".limit-time", ps, "converged by u = 200", run.u_final, Relation::LessEq, 200.0));
            });
            guarded(r, id + ".type-i", ps, [&] {
                const auto t = run_type_i(std::string(to_string(reg)), start, FixedPointKind::Eta, p);
                add(r, make_flag(id + ".type-i.reached-tau", ps, "tau reaches 1e4", t.reached_tau));
                add(r, make_check(id + ".type-i.slope", ps, "|psi/tau - E(eta)|/E(eta) < 0.005 at tau = 1e4",
                                  t.slope_deviation, Relation::Less, 0.005));
                for (int i = 0; i < 2; ++i)
                    add(r, make_check(id + ".type-i.ratio-" + std::to_string(i + 1), ps,
                                      "|psi/b_i - eta_i|/eta_i < 0.005 at tau = 1e4", t.ratio_deviation[i],
                                      Relation::Less, 0.005));
            });
        }

        guarded(r, "dynamics.ancient", ps, [&] {
            const auto a = run_ancient_from_xi(p);
            add(r, make_flag("dynamics.ancient.forward-limit", ps, "forward run reaches eta",
                             reached(a.forward_terminal, FixedPointKind::Eta)));
            add(r, make_check("dynamics.ancient.forward-distance", ps, "|Y(end) - eta| < 1e-8",
                              a.forward_distance_to_eta, Relation::Less, 1e-8));
            add(r, make_flag("dynamics.ancient.backward-limit", ps, "backward run returns to xi",
                             reached(a.backward_terminal, FixedPointKind::Xi)));
            add(r, make_check("dynamics.ancient.collapse-time", ps, "T1 > 0", a.backward.collapse_time.value_or(0.0),
                              Relation::Greater, 0.0));
            add(r, make_check("dynamics.ancient.slope", ps, "|psi/(T1+tau) - E(xi)|/E(xi) < 0.01",
                              a.backward.reliable ? a.backward.slope_deviation : INFINITY, Relation::Less, 0.01));
        });

        guarded(r, "dynamics.gamma1", ps, [&] {
            const auto g = run_gamma1(p);
            add(r, make_flag("dynamics.gamma1.forward-limit", ps, "forward run reaches eta",
                             reached(g.forward_terminal, FixedPointKind::Eta)));
            add(r, make_flag("dynamics.gamma1.backward-limit", ps, "backward run returns to v1",
                             reached(g.backward_terminal, FixedPointKind::V1)));
            add(r, make_check("dynamics.gamma1.psi-over-b1", ps, "|lim psi/b1 - 1/((4n1+6)q1)| / target < 0.01",
                              std::abs(g.backward.limit_psi_over_b[0] - g.psi_over_b1_target) / g.psi_over_b1_target,
                              Relation::Less, 0.01));
            add(r, make_check("dynamics.gamma1.psi-over-b2", ps, "lim psi/b2 < 1e-3", g.backward.limit_psi_over_b[1],
                              Relation::Less, 1e-3));
            add(r, make_check("dynamics.gamma1.collapse-time", ps, "T3 > 0", g.backward.collapse_time.value_or(0.0),
                              Relation::Greater, 0.0));
        });

        guarded(r, "dynamics.origin", ps, [&] {
            std::vector<double> ratios;
            for (double angle : {std::numbers::pi / 6.0, std::numbers::pi / 3.0}) {
                auto pa = ps;
                pa.emplace_back("angle", angle);
                const auto b = run_origin_branch(p, angle);
                ratios.push_back(b.b_ratio);
                add(r, make_flag("dynamics.origin.start-region", pa, "start lies in omega2",
                                 b.start_region == Region::Omega2));
                add(r, make_check("dynamics.origin.slope", pa, "|psi/(T4+tau) - 1/2|/(1/2) < 0.01",
                                  b.backward.reliable ? b.backward.slope_deviation : INFINITY, Relation::Less, 0.01));
                const double t4 = b.backward.collapse_time.value_or(0.0);
                const auto bounds = b.backward.collapse_bounds.value_or(std::array<double, 2>{INFINITY, -INFINITY});
                add(r, make_check("dynamics.origin.t4-lower", pa, "T4 >= psi(0)/E(eta)", t4, Relation::GreaterEq,
                                  bounds[0]));
                add(r, make_check("dynamics.origin.t4-upper", pa, "T4 <= 2 psi(0)", t4, Relation::LessEq, bounds[1]));
            }
            const double spread = std::abs(ratios[0] - ratios[1]) / std::min(ratios[0], ratios[1]);
            add(r, make_check("dynamics.origin.ratio-spread", ps, "limiting b2/b1 ratios differ by > 10%", spread,
                              Relation::Greater, 0.1));
        });

        guarded(r, "dynamics.xi-type-i", ps, [&] {
            for (const auto& t : run_type_i_xi(p)) {
                const std::string id = "dynamics.xi-type-i." + t.label;
                add(r, make_flag(id + ".reached-tau", ps, "tau reaches 1e4", t.reached_tau));
                add(r, make_check(id + ".slope", ps, "|psi/tau - E(xi)|/E(xi) < 0.005 at tau = 1e4", t.slope_deviation,
                                  Relation::Less, 0.005));
                for (int i = 0; i < 2; ++i)
                    add(r, make_check(id + ".ratio-" + std::to_string(i + 1), ps,
                                      "|psi/b_i - xi_i|/xi_i < 0.005 at tau = 1e4", t.ratio_deviation[i],
                                      Relation::Less, 0.005));
            }
        });
    }

    for (auto [m, d] : {std::pair{3, 1}, std::pair{4, 2}}) {
        const auto gp = make_general_params(m, d);
        for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus}) {
            for (int sample = 0; sample < 3; ++sample) {
                auto ps = general_params(m, d);
                ps.emplace_back("sample", sample);
                const std::string id = "dynamics.general-" + std::string(to_string(sign));
                guarded(r, id, ps, [&] {
                    const auto run = run_general_return(gp, sign, sample);
                    add(r, make_check(id + ".start-distance", ps, "perturbation size >= 1e-3", run.start_distance,
                                      Relation::GreaterEq, kManifoldLiftDistance));
                    add(r, make_check(id + ".return", ps, "|s(end) - Einstein point| < 1e-8", run.final_distance,
                                      Relation::Less, 1e-8));
                    add(r, make_check(id + ".return-time", ps, "returned by u = 100", run.u_final, Relation::LessEq,
                                      100.0));
                    add(r, make_check(id + ".simplex-drift", ps, "max |sum X - 1| < 1e-10", run.max_simplex_drift,
                                      Relation::Less, 1e-10));
                    bool ricci = !run.ricci_final.empty();
                    for (bool f : run.ricci_final) ricci = ricci && f;
                    add(r, make_flag(id + ".ricci-positive", ps, "Ricci flags positive at the limit", ricci));
                    if (run.db_dtau_deviation)
                        add(r, make_check(id + ".db-dtau", ps, "|db_k/dtau - 2(d+2) + 6(m-1)beta+/(m sqrt d)| rel < 0.01",
                                          *run.db_dtau_deviation, Relation::Less, 0.01));
                });
            }
        }
    }
    return r;
}

// ── driver and serialization ─────────────────────────────────────────────

VerificationReport run_verify(const VerifyOptions& o) {
    using Fn = VerificationReport (*)(const VerifyOptions&);
    static const std::vector<std::pair<std::string, Fn>> table = {
        {"einstein-m2", verify_einstein_m2},         {"eta-bounds", verify_eta_bounds},
        {"classify", verify_classifications},        {"xi-estimates", verify_xi_claims},
        {"general", verify_general_algebra},          {"general-field", verify_general_field},
        {"jacobian-oracle", verify_jacobian_oracle}, {"omega2-membership", verify_omega2_membership},
        {"dynamics", verify_dynamics},
    };
    const std::string& pre = o.family_prefix;
    VerificationReport out;
    for (const auto& [name, fn] : table) {
        const bool selected = pre.empty() || name.starts_with(pre) || pre.starts_with(name + ".");
        if (!selected) continue;
        for (auto& rec : fn(o).records)
            if (rec.check_id.starts_with(pre)) out.records.push_back(std::move(rec));
    }
    if (out.records.empty()) throw ConfigError("no checks match family prefix '" + pre + "'");
    return out;
}

std::string report_json(const VerificationReport& r, const VerifyOptions& o) {
    using nlohmann::ordered_json;
    ordered_json env;
    env["margin_rel_tol"] = kMarginRelTol;
    auto pairs = [](const std::vector<std::pair<int, int>>& g) {
        ordered_json a = ordered_json::array();
        for (auto [x, y] : g) a.push_back({x, y});
        return a;
    };
    env["m2_grid"] = pairs(o.m2_grid);
    env["m2_spot"] = pairs(o.m2_spot);
    env["general_grid"] = pairs(o.general_grid);
    env["omega2_sets"] = pairs(o.omega2_sets);
    env["omega2_cells"] = o.omega2_cells;
    env["jacobian_samples"] = o.jacobian_samples;
    env["jacobian_step"] = o.jacobian_step;
    env["family_prefix"] = o.family_prefix;

    ordered_json summary = ordered_json::object();
    for (const auto& [fam, s] : r.summary())
        summary[fam] = {{"total", s.total}, {"passed", s.passed}, {"failed", s.failed}};

    ordered_json recs = ordered_json::array();
    for (const auto& c : r.records) {
        ordered_json params = ordered_json::object();
        for (const auto& [k, v] : c.params) params[k] = v;
        recs.push_back({{"check_id", c.check_id},
                        {"params", params},
                        {"claim", c.claim},
                        {"relation", std::string(to_string(c.relation))},
                        {"lhs", c.lhs},
                        {"rhs", c.rhs},
                        {"margin", c.margin},
                        {"scale", c.scale},
                        {"pass", c.pass}});
    }
    ordered_json root;
    root["environment"] = env;
    root["summary"] = summary;
    root["failures"] = r.failures();
    root["records"] = recs;
    return root.dump(2) + "\n";
}

std::string report_text(const VerificationReport& r) {
    std::size_t w_id = 8, w_par = 6;
    std::vector<std::string> params;
    for (const auto& c : r.records) {
        std::string s;
        for (const auto& [k, v] : c.params) s += (s.empty() ? "" : ",") + k + "=" + fmt("%g", v);
        w_id = std::max(w_id, c.check_id.size());
        w_par = std::max(w_par, s.size());
        params.push_back(std::move(s));
    }
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-4s  %-*s  %-*s  %14s  %14s\n", "ok", static_cast<int>(w_id), "check_id",
                  static_cast<int>(w_par), "params", "margin", "scale");
    os << buf;
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& c = r.records[i];
        os << (c.pass ? "pass" : "FAIL") << "  ";
        std::snprintf(buf, sizeof buf, "%-*s  %-*s  %14.6e  %14.6e", static_cast<int>(w_id), c.check_id.c_str(),
                      static_cast<int>(w_par), params[i].c_str(), c.margin, c.scale);
        os << buf << "  " << c.claim << "\n";
    }
    os << "\n";
    for (const auto& [fam, s] : r.summary())
        os << fam << ": " << s.passed << "/" << s.total << " passed\n";
    os << "failures: " << r.failures() << "\n";
    return os.str();
}

}  // namespace bundleflow
