// One line per acceptance criterion; exit status is nonzero if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bundleflow/commands.hpp"
#include "bundleflow/errors.hpp"
#include "bundleflow/flow_general.hpp"
#include "bundleflow/flow_m2.hpp"
#include "bundleflow/numerics.hpp"
#include "bundleflow/scenarios.hpp"
#include "bundleflow/verify.hpp"

using namespace bundleflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Accumulates failed sub-checks and a short summary.
struct Tally {
    bool ok = true;
    std::vector<std::string> failures;
    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (failures.size() < 5) failures.push_back(what);
        }
    }
    Outcome done(const std::string& summary) const {
        std::string d = summary;
        for (const auto& f : failures) d += "; FAILED " + f;
        return {ok, d};
    }
};

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string pair_tag(int a, int b) { return "(" + std::to_string(a) + "," + std::to_string(b) + ")"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool reached(const TerminalEvent& t, FixedPointKind k) {
    return t.kind == TerminalKind::ReachedFixedPoint && t.fixed_point == k;
}

// ── 1 ──
Outcome einstein_points_m2() {
    Tally t;
    const auto t0 = std::chrono::steady_clock::now();
    double worst_res = 0.0, worst_lambda = 0.0;
    for (int n1 = 1; n1 <= 12; ++n1)
        for (int n2 = 1; n2 <= 12; ++n2) {
            const auto p = normalized_params2(n1, n2);
            const auto e = einstein_points(p);
            for (const auto* fp : {&e.xi, &e.eta}) {
                const auto f = f_of(fp->location, p);
                const double res = std::hypot(f[0], f[1]);
                worst_res = std::max(worst_res, res);
                t.expect(res < 1e-9, "residual at " + pair_tag(n1, n2));
                const double dl =
                    std::abs(einstein_constant(fp->location, p, 0) - einstein_constant(fp->location, p, 1));
                worst_lambda = std::max(worst_lambda, dl);
                t.expect(dl < 1e-9, "Einstein constant agreement at " + pair_tag(n1, n2));
            }
            t.expect(e.eta.location.y1 < e.xi.location.y1 && e.eta.location.y2 < e.xi.location.y2,
                     "eta < xi at " + pair_tag(n1, n2));
        }
    const auto e11 = einstein_points(normalized_params2(1, 1)).eta.location;
    const double oracle = (3.0 - std::sqrt(2.0)) / 14.0;
    const double dev = std::max(std::abs(e11.y1 - oracle), std::abs(e11.y2 - oracle));
    t.expect(dev < 1e-12, "(1,1) eta against (3-sqrt2)/14");
    const double secs = seconds_since(t0);
    t.expect(secs < 2.0, "runtime");
    return t.done("max residual " + g(worst_res) + ", max constant gap " + g(worst_lambda) + ", (1,1) eta dev " +
                  g(dev) + ", " + g(secs) + " s");
}

// ── 2 ──
Outcome eta_bounds() {
    Tally t;
    const auto t0 = std::chrono::steady_clock::now();
    auto o = VerifyOptions::defaults();
    o.family_prefix = "eta-bounds";
    const auto r = run_verify(o);
    std::vector<std::string> cases_seen;
    double margin11 = NAN;
    for (const auto& c : r.records) {
        t.expect(c.pass && (c.relation == Relation::LessEq || c.relation == Relation::GreaterEq || c.margin > 0.0),
                 c.check_id);
        const auto id = c.check_id;
        if (id.rfind("eta-bounds.case-", 0) == 0 && std::find(cases_seen.begin(), cases_seen.end(), id) == cases_seen.end())
            cases_seen.push_back(id);
        if (id == "eta-bounds.case-v" && c.params.size() >= 2 && c.params[0].second == 1 && c.params[1].second == 1)
            margin11 = c.margin;
    }
    t.expect(cases_seen.size() == 5, "all five cases exercised");
    bool spot = false;
    for (const auto& c : r.records)
        for (const auto& [k, v] : c.params) spot = spot || (k == "n2" && v == 50);
    t.expect(spot, "spot rows at n2 = 50 present");
    t.expect(std::abs(margin11 - (0.1303 - 0.11327)) < 5e-4, "(1,1) margin about 0.017");
    const double secs = seconds_since(t0);
    t.expect(secs < 2.0, "runtime");
    return t.done(std::to_string(r.records.size()) + " checks, " + std::to_string(cases_seen.size()) +
                  " cases, (1,1) margin " + g(margin11) + ", " + g(secs) + " s");
}

// ── 3 ──
Outcome classification() {
    Tally t;
    // Expected class by kind: origin and the two far axis points are sources,
    // the near axis points and xi are saddles, eta is the sink.
    const Classification want[] = {Classification::Source,     Classification::Hyperbolic,
                                   Classification::Hyperbolic, Classification::Source,
                                   Classification::Source,     Classification::Hyperbolic,
                                   Classification::Sink};
    double worst = 0.0;
    auto near = [&](double a, double b, const std::string& what) {
        worst = std::max(worst, std::abs(a - b));
        t.expect(std::abs(a - b) < 1e-12, what);
    };
    for (int n1 = 1; n1 <= 12; ++n1)
        for (int n2 = 1; n2 <= 12; ++n2) {
            const auto p = normalized_params2(n1, n2);
            const auto fps = fixed_points(p);
            const std::string tag = pair_tag(n1, n2);
            for (int k = 0; k < 7; ++k)
                t.expect(fps[k].classification == want[k], std::string(to_string(fps[k].kind)) + " class at " + tag);
            for (double re : fps[0].spectrum.real_parts()) near(re, 0.5, "origin at " + tag);
            const int n[2] = {n1, n2};
            for (int i = 0; i < 2; ++i) {
                const double s = 1.0 / (4.0 * n[i] + 6.0);
                auto v = fps[1 + i].spectrum.real_parts();
                near(v[0], -(n[i] + 1.0) / (2.0 * n[i] + 3.0), "v stable at " + tag);
                near(v[1], 0.5 + 4.0 * n[i] * s * s, "v unstable at " + tag);
                auto vt = fps[3 + i].spectrum.real_parts();
                near(vt[0], n[i] + 0.5, "v-tilde first at " + tag);
                near(vt[1], n[i] + 1.0, "v-tilde second at " + tag);
            }
        }
    return t.done("144 parameter pairs, max closed-form deviation " + g(worst));
}

// ── 4 ──
Outcome jacobian_oracle() {
    Tally t;
    double worst = 0.0;
    const std::vector<int> bases2{2, 3};
    for (int n1 = 1; n1 <= 12; ++n1)
        for (int n2 = 1; n2 <= 12; ++n2) {
            const auto p = normalized_params2(n1, n2);
            const VectorField f = [&](std::span<const double> z) {
                const auto v = vector_field({z[0], z[1]}, p);
                return std::vector<double>{v[0], v[1]};
            };
            for (int k = 1; k <= 100; ++k) {
                const auto h = halton(k, bases2);
                const std::vector<double> z{0.6 * h[0], 0.6 * h[1]};
                const auto j = jacobian({z[0], z[1]}, p);
                const double rel = (j - fd_jacobian(f, z, 1e-5)).norm() / std::max(1.0, j.norm());
                worst = std::max(worst, rel);
                t.expect(rel < 1e-6, "m=2 at " + pair_tag(n1, n2));
            }
        }
    for (int m = 3; m <= 12; ++m)
        for (int d = 1; d <= 12; ++d) {
            const auto p = make_general_params(m, d);
            const VectorField f = [&](std::span<const double> z) { return vf_general_packed(z, p); };
            std::vector<int> bases;
            for (int b = 2; static_cast<int>(bases.size()) < 2 * m; ++b) {
                bool prime = true;
                for (int q = 2; q * q <= b; ++q) prime = prime && b % q;
                if (prime) bases.push_back(b);
            }
            for (int k = 1; k <= 100; ++k) {
                const auto h = halton(k, bases);
                StateXY s;
                double sum = 0.0;
                for (int i = 0; i < m; ++i) sum += 0.1 + h[i];
                for (int i = 0; i < m; ++i) {
                    s.x.push_back((0.1 + h[i]) / sum);
                    s.y.push_back(0.1 + h[m + i]);
                }
                const auto j = jacobian_general(s, p);
                const double rel = (j - fd_jacobian(f, s.packed(), 1e-5)).norm() / std::max(1.0, j.norm());
                worst = std::max(worst, rel);
                t.expect(rel < 1e-6, "general at " + pair_tag(m, d));
            }
        }
    return t.done("264 parameter sets x 100 points, max relative error " + g(worst));
}

// ── 5 ──
Outcome invariant_regions() {
    Tally t;
    const auto p = normalized_params2(1, 1);
    std::string summary;
    for (auto [start, reg] : {std::pair{StateY{0.2, 0.2}, Region::Omega1}, std::pair{StateY{0.05, 0.05}, Region::Omega2}}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_region(start, reg, p);
        const double secs = seconds_since(t0);
        const std::string name(to_string(reg));
        t.expect(r.start_region == reg, name + " start region");
        t.expect(r.invariance_margin >= -1e-8, name + " invariance");
        t.expect(r.e_monotone_defect < 1e-9, name + " E monotone");
        t.expect(reached(r.terminal, FixedPointKind::Eta) && r.distance_to_eta < 1e-8 && r.u_final <= 200.0,
                 name + " limit eta");
        t.expect(secs < 1.0, name + " runtime");
        summary += name + ": margin " + g(r.invariance_margin) + ", E defect " + g(r.e_monotone_defect) +
                   ", |Y-eta| " + g(r.distance_to_eta) + " at u=" + g(r.u_final) + ", " + g(secs) + " s. ";
    }
    return t.done(summary);
}

// ── 6 ──
Outcome ancient_shooting() {
    Tally t;
    const auto a = run_ancient_from_xi(normalized_params2(1, 1), 1e-6);
    t.expect(reached(a.forward_terminal, FixedPointKind::Eta) && a.forward_distance_to_eta < 1e-8, "forward limit");
    t.expect(a.backward.collapse_time && std::isfinite(*a.backward.collapse_time) && *a.backward.collapse_time > 0.0,
             "finite T1");
    t.expect(a.backward.reliable && a.backward.slope_deviation < 0.01, "slope near -T1");
    return t.done("|Y-eta| " + g(a.forward_distance_to_eta) + ", T1 " + g(a.backward.collapse_time.value_or(NAN)) +
                  ", slope deviation " + g(a.backward.slope_deviation) + " at (T1+tau)/T1 = " +
                  g(a.backward.probe_remaining));
}

// ── 7 ──
Outcome collapse_scenarios() {
    Tally t;
    std::string summary;
    for (auto [n1, n2] : {std::pair{1, 1}, std::pair{2, 3}}) {
        const auto p = normalized_params2(n1, n2);
        const std::string tag = pair_tag(n1, n2);
        const auto gm = run_gamma1(p);
        const double dev1 = std::abs(gm.backward.limit_psi_over_b[0] - gm.psi_over_b1_target) / gm.psi_over_b1_target;
        t.expect(reached(gm.backward_terminal, FixedPointKind::V1), "gamma1 backward limit at " + tag);
        t.expect(dev1 < 0.01, "gamma1 psi/b1 at " + tag);
        t.expect(gm.backward.limit_psi_over_b[1] < 1e-3, "gamma1 psi/b2 at " + tag);
        std::vector<double> ratios;
        double worst_slope = 0.0;
        for (double angle : {std::numbers::pi / 6.0, std::numbers::pi / 3.0}) {
            const auto b = run_origin_branch(p, angle);
            ratios.push_back(b.b_ratio);
            worst_slope = std::max(worst_slope, b.backward.slope_deviation);
            t.expect(b.backward.reliable && b.backward.slope_deviation < 0.01, "origin slope at " + tag);
            t.expect(b.backward.collapse_bounds_hold.value_or(false), "T4 bounds at " + tag);
        }
        const double spread = std::abs(ratios[0] - ratios[1]) / std::min(ratios[0], ratios[1]);
        t.expect(spread > 0.1, "steerable ratio at " + tag);
        summary += tag + ": psi/b1 dev " + g(dev1) + ", psi/b2 " + g(gm.backward.limit_psi_over_b[1]) +
                   ", origin slope dev " + g(worst_slope) + ", ratios " + g(ratios[0]) + "/" + g(ratios[1]) + ". ";
    }
    return t.done(summary);
}

// ── 8 ──
Outcome type_i() {
    Tally t;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int runs = 0;
    auto take = [&](const TypeIRun& r, const std::string& tag) {
        ++runs;
        worst = std::max({worst, r.slope_deviation, r.ratio_deviation[0], r.ratio_deviation[1]});
        t.expect(r.reached_tau, tag + " reaches tau");
        t.expect(r.slope_deviation < 0.005, tag + " slope");
        t.expect(r.ratio_deviation[0] < 0.005 && r.ratio_deviation[1] < 0.005, tag + " ratios");
    };
    for (const auto& set : default_dynamics_sets()) {
        const std::string tag = pair_tag(set.params.n(0), set.params.n(1));
        take(run_type_i("omega1", set.omega1_start, FixedPointKind::Eta, set.params), "eta omega1 " + tag);
        take(run_type_i("omega2", set.omega2_start, FixedPointKind::Eta, set.params), "eta omega2 " + tag);
        for (const auto& r : run_type_i_xi(set.params)) take(r, "xi " + r.label + " " + tag);
    }
    const double secs = seconds_since(t0);
    t.expect(secs < 5.0, "runtime");
    return t.done(std::to_string(runs) + " runs, worst relative deviation " + g(worst) + ", " + g(secs) + " s");
}

// ── 9 ──
Outcome general_suite() {
    Tally t;
    const auto t0 = std::chrono::steady_clock::now();
    auto o = VerifyOptions::defaults();
    o.family_prefix = "general.";
    const auto r = run_verify(o);
    for (const auto& c : r.records) t.expect(c.pass, c.check_id);
    double worst_beta = 0.0;
    for (int m = 3; m <= 12; ++m)
        for (int d = 1; d <= 12; ++d) {
            const auto p = make_general_params(m, d);
            for (auto s : {EinsteinSign::Plus, EinsteinSign::Minus}) {
                const double b = beta(p, s);
                const double res = std::abs((2.0 + 3.0 * (m - 1) / (m * d)) * b * b - ((d + 2.0) / std::sqrt(d)) * b +
                                            (m + 2.0) / (4.0 * m));
                worst_beta = std::max(worst_beta, res);
                t.expect(res < 1e-12, "beta residual at " + pair_tag(m, d));
                const auto cp = c_matrices(p, EinsteinSign::Plus);
                const auto cm = c_matrices(p, EinsteinSign::Minus);
                t.expect(cp.lambda1 < 0.0 && cp.lambda2 > 0.0, "C+ signs at " + pair_tag(m, d));
                t.expect(cm.lambda1 <= cm.lambda2 && cm.lambda2 < 0.0 && cm.trace < 0.0 && cm.det > 0.0,
                         "C- signs at " + pair_tag(m, d));
                const auto lp = l_spectrum_v2(p, EinsteinSign::Plus);
                t.expect(lp.count_positive() == m && lp.count_negative() == m - 1, "L+ counts at " + pair_tag(m, d));
                t.expect(l_spectrum_v2(p, EinsteinSign::Minus).count_negative() == 2 * m - 1,
                         "L- counts at " + pair_tag(m, d));
            }
        }
    const double secs = seconds_since(t0);
    t.expect(secs < 10.0, "runtime");
    return t.done(std::to_string(r.records.size()) + " checks, max beta residual " + g(worst_beta) + ", " + g(secs) +
                  " s");
}

// ── 10 ──
Outcome general_dynamics() {
    Tally t;
    const auto p = make_general_params(3, 1);
    double worst_dist = 0.0, worst_drift = 0.0, worst_db = 0.0;
    for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus})
        for (int sample = 0; sample < 3; ++sample) {
            const auto r = run_general_return(p, sign, sample);
            const std::string tag = std::string(to_string(sign)) + " sample " + std::to_string(sample);
            worst_dist = std::max(worst_dist, r.final_distance);
            worst_drift = std::max(worst_drift, r.max_simplex_drift);
            t.expect(r.start_distance >= kManifoldLiftDistance * (1.0 - kMarginRelTol), tag + " perturbation size");
            t.expect(r.final_distance < 1e-8 && r.u_final <= 100.0, tag + " return");
            t.expect(r.max_simplex_drift < 1e-10, tag + " simplex drift");
            bool ricci = !r.ricci_final.empty();
            for (bool f : r.ricci_final) ricci = ricci && f;
            t.expect(ricci, tag + " Ricci flags");
            if (sign == EinsteinSign::Plus) {
                worst_db = std::max(worst_db, r.db_dtau_deviation.value_or(INFINITY));
                t.expect(r.db_dtau_deviation && *r.db_dtau_deviation < 0.01, tag + " db/dtau");
            }
        }
    return t.done("max return distance " + g(worst_dist) + ", drift " + g(worst_drift) + ", db/dtau deviation " +
                  g(worst_db));
}

// ── 11 ──
Outcome omega2_flood_fill() {
    Tally t;
    std::string summary;
    for (auto [n1, n2] : {std::pair{1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 5}}) {
        const auto c = compare_omega2_with_flood_fill(normalized_params2(n1, n2), 600);
        t.expect(c.agreement() >= 0.999, "agreement at " + pair_tag(n1, n2));
        t.expect(c.interior_disagree == 0, "interior disagreement at " + pair_tag(n1, n2));
        summary += pair_tag(n1, n2) + " " + g(100.0 * c.agreement()) + "% ";
    }
    return t.done(summary);
}

// ── 12 ──
Outcome verify_cli() {
    Tally t;
    const auto base = fs::temp_directory_path() / "bundleflow_acceptance_verify";
    fs::remove_all(base);
    int codes[2];
    for (int k = 0; k < 2; ++k) {
        const auto dir = base / ("run" + std::to_string(k));
#ifdef BUNDLEFLOW_CLI_PATH
        const std::string cmd = std::string(BUNDLEFLOW_CLI_PATH) + " verify --out " + dir.string() + " >/dev/null 2>&1";
        const int s = std::system(cmd.c_str());
        codes[k] = WIFEXITED(s) ? WEXITSTATUS(s) : -1;
#else
        std::ostringstream err;
        codes[k] = run_command({"verify", "", dir.string(), ""}, err);
#endif
        t.expect(codes[k] == 0, "exit code of run " + std::to_string(k + 1));
    }
    bool same = true;
    for (const char* f : {"report.json", "report.txt"}) {
        try {
            same = same && read_text_file((base / "run0" / f).string()) == read_text_file((base / "run1" / f).string());
        } catch (const ConfigError&) {
            same = false;
        }
    }
    t.expect(same, "byte-identical reports");
    fs::remove_all(base);
    return t.done("exit codes " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) +
                  (same ? ", reports identical" : ", reports differ"));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
        {"einstein points m=2", einstein_points_m2},
        {"eta bound suite", eta_bounds},
        {"fixed-point classification", classification},
        {"jacobian oracle", jacobian_oracle},
        {"invariant-region dynamics", invariant_regions},
        {"ancient-solution shooting", ancient_shooting},
        {"collapse scenarios", collapse_scenarios},
        {"forward type-I proxies", type_i},
        {"m>=3 suite", general_suite},
        {"m>=3 dynamics", general_dynamics},
        {"omega2 membership vs flood fill", omega2_flood_fill},
        {"verify cli determinism", verify_cli},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2zu %-34s %s  %s\n", k + 1, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
