#include "bundleflow/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "bundleflow/errors.hpp"
#include "bundleflow/flow_general.hpp"
#include "bundleflow/flow_m2.hpp"
#include "bundleflow/verify.hpp"

namespace bundleflow {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"einstein", "classify", "flow", "portrait", "verify", "reconstruct"};
    return names;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

// ── formatting ───────────────────────────────────────────────────────────

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ordered_json jnum(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json complex_list(const std::vector<std::complex<double>>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& z : v) a.push_back({{"re", jnum(z.real())}, {"im", jnum(z.imag())}});
    return a;
}

ordered_json matrix_json(const SmallMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < m.order(); ++i) {
        ordered_json row = ordered_json::array();
        for (int j = 0; j < m.order(); ++j) row.push_back(jnum(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

ordered_json state_json(const StateY& s) { return ordered_json::array({jnum(s.y1), jnum(s.y2)}); }

/// Files are staged here and written together once the command succeeds.
using Outputs = std::vector<std::pair<std::string, std::string>>;

void write_outputs(const std::string& dir, const Outputs& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
    for (const auto& [name, body] : files) {
        const fs::path path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << body;
    }
}

// ── config access ────────────────────────────────────────────────────────

struct Config {
    ordered_json doc;
    std::string command;

    void allow(const std::set<std::string>& keys) const {
        for (const auto& [k, v] : doc.items())
            if (!keys.count(k)) throw ConfigError("unknown config key '" + k + "' for " + command);
    }
    bool has(const char* k) const { return doc.contains(k); }
};

double get_number(const ordered_json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return j[key].get<double>();
}

bool get_bool(const ordered_json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(std::string("'") + key + "' must be a boolean");
    return j[key].get<bool>();
}

std::string get_string(const ordered_json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
}

int get_int(const ordered_json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    return j[key].get<int>();
}

std::vector<double> get_numbers(const ordered_json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : a) {
        if (!x.is_number()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void check_keys(const ordered_json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

Config parse_config(const CommandRequest& req) {
    Config c;
    c.command = req.command;
    if (req.config_text.empty()) {
        c.doc = ordered_json::object();
        return c;
    }
    try {
        c.doc = ordered_json::parse(req.config_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!c.doc.is_object()) throw ConfigError("config must be a JSON object");
    if (c.doc.contains("kind") && get_string(c.doc, "kind", "") != req.command)
        throw ConfigError("config kind '" + get_string(c.doc, "kind", "") + "' does not match command " + req.command);
    return c;
}

using AnyParams = std::variant<BundleParams, GeneralParams>;

AnyParams parse_params(const Config& c) {
    if (!c.has("params")) return normalized_params2(1, 1);
    const auto& p = c.doc["params"];
    if (!p.is_object()) throw ConfigError("'params' must be an object");
    if (p.contains("m") || p.contains("d")) {
        check_keys(p, {"m", "d"}, "params");
        return make_general_params(get_int(p, "m", 3), get_int(p, "d", 1));
    }
    check_keys(p, {"n", "lambda"}, "params");
    if (!p.contains("n") || !p["n"].is_array()) throw ConfigError("'params.n' must be an array of integers");
    std::vector<int> n;
    for (const auto& x : p["n"]) {
        if (!x.is_number_integer()) throw ConfigError("'params.n' must be an array of integers");
        n.push_back(x.get<int>());
    }
    std::vector<double> lambda;
    if (p.contains("lambda")) {
        lambda = get_numbers(p, "lambda");
    } else {
        for (int ni : n) lambda.push_back(ni + 2.0);
    }
    auto bp = make_params(static_cast<int>(n.size()), n, lambda);
    if (bp.m() != 2) throw ConfigError("only m = 2 is supported with explicit n; use {m, d} for m >= 3");
    return bp;
}

IntegratorOptions parse_integrator(const Config& c) {
    IntegratorOptions o;
    if (!c.has("integrator")) return o;
    const auto& j = c.doc["integrator"];
    check_keys(j, {"rtol", "atol", "h_max", "h_init", "h_min", "max_steps"}, "integrator");
    o.rtol = get_number(j, "rtol", o.rtol);
    o.atol = get_number(j, "atol", o.atol);
    o.h_max = get_number(j, "h_max", o.h_max);
    o.h_init = get_number(j, "h_init", o.h_init);
    o.h_min = get_number(j, "h_min", o.h_min);
    o.max_steps = static_cast<long>(get_number(j, "max_steps", static_cast<double>(o.max_steps)));
    if (!(o.rtol > 0 && o.atol > 0 && o.h_max > 0 && o.h_init > 0 && o.h_min > 0 && o.max_steps > 0))
        throw ConfigError("integrator options must be positive");
    return o;
}

CForm parse_cform(const Config& c) {
    const auto s = get_string(c.doc, "c_form", "reference");
    if (s == "reference") return CForm::Reference;
    if (s == "linearized") return CForm::Linearized;
    throw ConfigError("'c_form' must be reference or linearized");
}

std::optional<FixedPointKind> kind_from_name(const std::string& s) {
    for (auto k : {FixedPointKind::Origin, FixedPointKind::V1, FixedPointKind::V2, FixedPointKind::V1Tilde,
                   FixedPointKind::V2Tilde, FixedPointKind::Xi, FixedPointKind::Eta})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

// ── m = 2 artifacts ──────────────────────────────────────────────────────

std::string region_name(const StateY& y, const BundleParams& p) { return std::string(to_string(region_of(y, p))); }

std::string trajectory_csv_m2(const std::vector<double>& u, const std::vector<StateY>& s, const BundleParams& p) {
    std::ostringstream os;
    os << "u,Y1,Y2,region,E\n";
    for (std::size_t k = 0; k < s.size(); ++k)
        os << num(u[k]) << ',' << num(s[k].y1) << ',' << num(s[k].y2) << ',' << region_name(s[k], p) << ','
           << num(e_of(s[k], p)) << '\n';
    return os.str();
}

std::string metric_csv_m2(const MetricPathM2& path) {
    std::ostringstream os;
    os << "tau,psi,b1,b2\n";
    for (std::size_t k = 0; k < path.tau.size(); ++k)
        os << num(path.tau[k]) << ',' << num(path.psi[k]) << ',' << num(path.b1[k]) << ',' << num(path.b2[k]) << '\n';
    return os.str();
}

ordered_json fixed_point_json(const FixedPointM2& fp, const BundleParams& p) {
    const auto f = f_of(fp.location, p);
    return {{"kind", std::string(to_string(fp.kind))},
            {"location", state_json(fp.location)},
            {"residual", jnum(std::hypot(f[0], f[1]))},
            {"classification", std::string(to_string(fp.classification))},
            {"unstable_dimension", fp.unstable_dimension},
            {"eigenvalues", complex_list(fp.spectrum.eigenvalues)}};
}

ordered_json params_json(const AnyParams& ap) {
    if (const auto* p = std::get_if<BundleParams>(&ap))
        return {{"n", p->n()}, {"lambda", p->lambda()}, {"q", p->q()}};
    const auto& g = std::get<GeneralParams>(ap);
    return {{"m", g.m}, {"d", g.d}};
}

std::string fixedpoints_csv(const std::vector<FixedPointM2>& fps) {
    std::ostringstream os;
    os << "kind,Y1,Y2,classification,unstable_dimension,lambda1_re,lambda1_im,lambda2_re,lambda2_im\n";
    for (const auto& fp : fps) {
        os << to_string(fp.kind) << ',' << num(fp.location.y1) << ',' << num(fp.location.y2) << ','
           << to_string(fp.classification) << ',' << fp.unstable_dimension;
        for (const auto& l : fp.spectrum.eigenvalues) os << ',' << num(l.real()) << ',' << num(l.imag());
        os << '\n';
    }
    return os.str();
}

ordered_json asymptotics_json(const AsymptoticsReportM2& a) {
    ordered_json j;
    j["limit_point"] = state_json(a.limit_point);
    j["limit_psi_over_b"] = {jnum(a.limit_psi_over_b[0]), jnum(a.limit_psi_over_b[1])};
    j["backward"] = a.backward;
    j["slope"] = jnum(a.slope);
    j["slope_target"] = jnum(a.slope_target);
    j["slope_deviation"] = jnum(a.slope_deviation);
    j["collapse_time"] = a.collapse_time ? jnum(*a.collapse_time) : ordered_json(nullptr);
    j["probe_remaining"] = jnum(a.probe_remaining);
    j["fit_residual"] = jnum(a.fit_residual);
    j["reliable"] = a.reliable;
    j["note"] = a.note;
    j["collapse_bounds"] = a.collapse_bounds ? ordered_json{jnum((*a.collapse_bounds)[0]), jnum((*a.collapse_bounds)[1])}
                                             : ordered_json(nullptr);
    j["collapse_bounds_hold"] = a.collapse_bounds_hold ? ordered_json(*a.collapse_bounds_hold) : ordered_json(nullptr);
    return j;
}

ordered_json ricci_json(const StateY& y, const BundleParams& p) {
    const auto r = ricci_signature(y, p);
    return {{"fibre_positive", r.fibre_positive},
            {"base_exact", {r.base_exact[0], r.base_exact[1]}},
            {"base_conservative", {r.base_conservative[0], r.base_conservative[1]}}};
}

// ── general artifacts ────────────────────────────────────────────────────

std::string trajectory_csv_general(const std::vector<double>& u, const std::vector<StateXY>& s,
                                   const GeneralParams& p) {
    std::ostringstream os;
    os << "u";
    for (int k = 1; k <= p.m; ++k) os << ",X" << k;
    for (int k = 1; k <= p.m; ++k) os << ",Y" << k;
    os << ",E\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        os << num(u[i]);
        for (double x : s[i].x) os << ',' << num(x);
        for (double y : s[i].y) os << ',' << num(y);
        os << ',' << num(e_general(s[i], p)) << '\n';
    }
    return os.str();
}

std::string metric_csv_general(const MetricPathGeneral& path, int m) {
    std::ostringstream os;
    os << "tau,a_hat";
    for (int k = 1; k <= m; ++k) os << ",a" << k;
    for (int k = 1; k <= m; ++k) os << ",b" << k;
    os << '\n';
    for (std::size_t i = 0; i < path.tau.size(); ++i) {
        os << num(path.tau[i]) << ',' << num(path.a_hat[i]);
        for (const auto& a : path.a) os << ',' << num(a[i]);
        for (const auto& b : path.b) os << ',' << num(b[i]);
        os << '\n';
    }
    return os.str();
}

ordered_json einstein_general_json(const EinsteinPointGeneral& e, const GeneralParams& p) {
    ordered_json j;
    j["sign"] = std::string(to_string(e.sign));
    j["beta"] = jnum(e.beta);
    j["beta_residual"] = jnum(e.beta_residual);
    j["x"] = e.state.x;
    j["y"] = e.state.y;
    const auto v = vf_general(e.state, p);
    double res = 0.0;
    for (double x : v.x) res = std::max(res, std::abs(x));
    for (double y : v.y) res = std::max(res, std::abs(y));
    j["field_residual"] = jnum(res);
    j["e"] = jnum(e_general(e.state, p));
    j["lambda3"] = jnum(e.lambda3);
    j["c_matrix"] = matrix_json(e.c.c);
    j["c_eigenvalues"] = {jnum(e.c.lambda1), jnum(e.c.lambda2)};
    j["c_trace"] = jnum(e.c.trace);
    j["c_det"] = jnum(e.c.det);
    j["spectrum_v2"] = complex_list(e.spectrum_v2.eigenvalues);
    const auto rp = ricci_positive_general(e.state, p);
    j["ricci_positive"] = rp;
    return j;
}

std::string terminal_general(const TerminalEventGeneral& t) {
    switch (t.kind) {
        case TerminalEventGeneral::Kind::ReachedEinsteinPoint:
            return "reached_einstein_point:" + std::string(to_string(*t.point));
        case TerminalEventGeneral::Kind::LeftDomain: return "left_domain";
        case TerminalEventGeneral::Kind::MaxTime: return "max_time";
    }
    return "unknown";
}

// ── commands ─────────────────────────────────────────────────────────────

Outputs cmd_einstein(const Config& c) {
    c.allow({"kind", "params", "c_form"});
    const auto ap = parse_params(c);
    const auto form = parse_cform(c);
    ordered_json j;
    j["params"] = params_json(ap);
    if (const auto* p = std::get_if<BundleParams>(&ap)) {
        const auto e = einstein_points(*p);
        for (const auto* fp : {&e.xi, &e.eta}) {
            auto fj = fixed_point_json(*fp, *p);
            fj["einstein_constants"] = {jnum(einstein_constant(fp->location, *p, 0)),
                                        jnum(einstein_constant(fp->location, *p, 1))};
            fj["e"] = jnum(e_of(fp->location, *p));
            j[fp == &e.xi ? "xi" : "eta"] = fj;
        }
        j["solve"] = {{"y0_lo", jnum(e.detail.y0_lo)},
                      {"y0_hi", jnum(e.detail.y0_hi)},
                      {"phi_min_location", jnum(e.detail.phi_min_location)},
                      {"phi_min_value", jnum(e.detail.phi_min_value)},
                      {"domain_lo", jnum(e.detail.domain_lo)},
                      {"swapped", e.detail.swapped}};
    } else {
        const auto& g = std::get<GeneralParams>(ap);
        const auto [plus, minus] = einstein_general(g, form);
        j["c_form"] = std::string(to_string(form));
        j["plus"] = einstein_general_json(plus, g);
        j["minus"] = einstein_general_json(minus, g);
    }
    return {{"einstein.json", j.dump(2) + "\n"}};
}

Outputs cmd_classify(const Config& c) {
    c.allow({"kind", "params", "c_form"});
    const auto ap = parse_params(c);
    const auto form = parse_cform(c);
    ordered_json j;
    j["params"] = params_json(ap);
    if (const auto* p = std::get_if<BundleParams>(&ap)) {
        const auto fps = fixed_points(*p);
        ordered_json arr = ordered_json::array();
        for (const auto& fp : fps) arr.push_back(fixed_point_json(fp, *p));
        j["fixed_points"] = arr;
        for (const auto* fp : {&fps[5], &fps[6]}) {
            const auto rb = rho_bound_check(*fp, *p);
            j[fp == &fps[5] ? "rho_xi" : "rho_eta"] = {{"rho1", jnum(rb.rho1)},
                                                       {"rho2", jnum(rb.rho2)},
                                                       {"a_value", jnum(rb.a_value)},
                                                       {"minus_e_plus_rho1", jnum(rb.minus_e_plus_rho1)},
                                                       {"perron_lower_bound", jnum(rb.perron_lower_bound)}};
        }
        return {{"classification.json", j.dump(2) + "\n"}, {"fixedpoints.csv", fixedpoints_csv(fps)}};
    }
    const auto& g = std::get<GeneralParams>(ap);
    j["c_form"] = std::string(to_string(form));
    for (auto sign : {EinsteinSign::Plus, EinsteinSign::Minus}) {
        const auto sp = l_spectrum_v2(g, sign, form);
        const auto jac = eigen_small(restrict_to(jacobian_general(einstein_state(g, sign), g), v2_basis(g.m)));
        j[std::string(to_string(sign))] = {{"spectrum_v2", complex_list(sp.eigenvalues)},
                                           {"positive", sp.count_positive()},
                                           {"negative", sp.count_negative()},
                                           {"jacobian_spectrum_v2", complex_list(jac.eigenvalues)}};
    }
    return {{"classification.json", j.dump(2) + "\n"}};
}

struct FlowSetupM2 {
    StateY start;
    FlowOptions opts;
    double u_end = 200.0;
    double psi0 = 1.0;
};

StateY parse_initial_m2(const ordered_json& init, const BundleParams& p) {
    if (!init.is_object()) throw ConfigError("'initial' must be an object");
    if (init.contains("y")) {
        check_keys(init, {"y"}, "initial");
        const auto y = get_numbers(init, "y");
        if (y.size() != 2) throw ConfigError("'initial.y' must have two entries");
        return {y[0], y[1]};
    }
    if (init.contains("fixed_point")) {
        check_keys(init, {"fixed_point"}, "initial");
        const auto k = kind_from_name(get_string(init, "fixed_point", ""));
        if (!k) throw ConfigError("unknown fixed point name");
        for (const auto& fp : fixed_points(p))
            if (fp.kind == *k) return fp.location;
    }
    if (init.contains("shoot")) {
        check_keys(init, {"shoot"}, "initial");
        const auto& s = init["shoot"];
        check_keys(s, {"from", "direction", "eps", "side", "quadratic"}, "initial.shoot");
        const auto k = kind_from_name(get_string(s, "from", "xi"));
        if (!k) throw ConfigError("unknown fixed point name in shoot.from");
        const auto dir = get_string(s, "direction", "unstable");
        if (dir != "unstable" && dir != "stable") throw ConfigError("shoot.direction must be stable or unstable");
        const double eps = get_number(s, "eps", kDefaultShootEps);
        const bool quad = get_bool(s, "quadratic", true);
        const auto side = get_string(s, "side", "positive");
        const auto fps = fixed_points(p);
        for (const auto& fp : fps) {
            if (fp.kind != *k) continue;
            for (std::size_t i = 0; i < fp.spectrum.size(); ++i) {
                const double re = fp.spectrum.eigenvalues[i].real();
                if ((dir == "unstable") != (re > 0.0)) continue;
                const auto v = fp.spectrum.real_eigenvector(i);
                std::array<double, 2> d{v[0], v[1]};
                if (side == "negative") d = {-d[0], -d[1]};
                if (side == "omega1" || side == "omega2") {
                    const Region want = side == "omega1" ? Region::Omega1 : Region::Omega2;
                    if (region_of(manifold_start(fp, d, eps, p, quad), p) != want) d = {-d[0], -d[1]};
                    if (region_of(manifold_start(fp, d, eps, p, quad), p) != want)
                        throw ConfigError("neither side of the eigendirection starts in " + side);
                } else if (side != "positive" && side != "negative") {
                    throw ConfigError("shoot.side must be positive, negative, omega1 or omega2");
                }
                return manifold_start(fp, d, eps, p, quad);
            }
            throw ConfigError("fixed point has no " + dir + " direction");
        }
    }
    throw ConfigError("'initial' needs one of y, fixed_point, shoot");
}

Outputs cmd_flow_m2(const Config& c, const BundleParams& p, const std::string& out_dir, std::ostream& err,
                    int& exit_code) {
    FlowSetupM2 f;
    f.start = c.has("initial") ? parse_initial_m2(c.doc["initial"], p) : StateY{0.2, 0.2};
    f.opts.integrator = parse_integrator(c);
    f.opts.stop_on_arrival = get_bool(c.doc, "stop_on_arrival", true);
    f.opts.arrival_tol = get_number(c.doc, "arrival_tol", f.opts.arrival_tol);
    f.u_end = get_number(c.doc, "u_end", 200.0);
    f.psi0 = get_number(c.doc, "psi0", 1.0);
    if (!(f.psi0 > 0.0)) throw ConfigError("'psi0' must be positive");
    if (!(f.start.y1 >= 0.0 && f.start.y2 >= 0.0)) throw ConfigError("initial point must lie in the closed first quadrant");

    std::vector<double> seen_u{0.0};
    std::vector<StateY> seen{f.start};
    f.opts.extra_stop = [&](double u, std::span<const double> y) {
        seen_u.push_back(u);
        seen.push_back({y[0], y[1]});
        return false;
    };
    TrajectoryM2 traj;
    try {
        traj = integrate(f.start, p, f.u_end, f.opts);
    } catch (const IntegratorError& e) {
        std::string body = trajectory_csv_m2(seen_u, seen, p);
        body += "# integrator failure at u=" + num(e.last_u) + ": " + e.what() + "\n";
        write_outputs(out_dir, {{"trajectory.csv", body}});
        err << "integrator error: " << e.what() << "\n";
        exit_code = kExitIntegrator;
        return {};
    }
    const auto path = reconstruct(traj, f.psi0, p);
    ordered_json j;
    j["params"] = params_json(p);
    j["start"] = state_json(f.start);
    j["psi0"] = f.psi0;
    j["terminal_event"] = describe(traj.terminal_event);
    j["samples"] = traj.u_grid.size();
    j["truncated"] = path.truncated;
    if (path.tau.size() >= 5) {
        const auto d = reconstruction_defect(path, traj, p);
        j["reconstruction_defect"] = {{"psi", jnum(d.psi)}, {"b", jnum(d.b)}};
    }
    j["asymptotics"] = asymptotics_json(asymptotics(path, traj, p));
    j["ricci_at_end"] = ricci_json(traj.states.back(), p);
    return {{"trajectory.csv", trajectory_csv_m2(traj.u_grid, traj.states, p)},
            {"metric.csv", metric_csv_m2(path)},
            {"asymptotics.json", j.dump(2) + "\n"}};
}

StateXY parse_initial_general(const ordered_json& init, const GeneralParams& p) {
    if (!init.is_object()) throw ConfigError("'initial' must be an object");
    const auto m = static_cast<std::size_t>(p.m);
    if (init.contains("einstein")) {
        check_keys(init, {"einstein", "offset"}, "initial");
        const auto s = get_string(init, "einstein", "plus");
        if (s != "plus" && s != "minus") throw ConfigError("'initial.einstein' must be plus or minus");
        auto z = einstein_state(p, s == "plus" ? EinsteinSign::Plus : EinsteinSign::Minus).packed();
        if (init.contains("offset")) {
            const auto off = get_numbers(init, "offset");
            if (off.size() != 2 * m) throw ConfigError("'initial.offset' must have 2m entries");
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += off[i];
        }
        return StateXY::unpack(z);
    }
    check_keys(init, {"x", "y"}, "initial");
    StateXY s;
    s.x = get_numbers(init, "x");
    s.y = get_numbers(init, "y");
    if (s.x.size() != m || s.y.size() != m) throw ConfigError("'initial.x' and 'initial.y' must have m entries");
    return s;
}

Outputs cmd_flow_general(const Config& c, const GeneralParams& p, const std::string& out_dir, std::ostream& err,
                         int& exit_code) {
    const StateXY start = c.has("initial") ? parse_initial_general(c.doc["initial"], p)
                                           : einstein_state(p, EinsteinSign::Minus);
    if (simplex_defect(start) > 1e-8) throw ConfigError("initial X must lie on the simplex");
    for (double y : start.y)
        if (!(y > 0.0)) throw ConfigError("initial Y must be positive");
    FlowOptionsGeneral o;
    o.integrator = parse_integrator(c);
    o.stop_on_arrival = get_bool(c.doc, "stop_on_arrival", false);
    o.arrival_tol = get_number(c.doc, "arrival_tol", o.arrival_tol);
    const double u_end = get_number(c.doc, "u_end", 100.0);
    const double a0 = get_number(c.doc, "a_hat0", 1.0);
    if (!(a0 > 0.0)) throw ConfigError("'a_hat0' must be positive");

    std::vector<double> seen_u{0.0};
    std::vector<StateXY> seen{start};
    o.extra_stop = [&](double u, std::span<const double> z) {
        seen_u.push_back(u);
        seen.push_back(StateXY::unpack(z));
        return false;
    };
    TrajectoryGeneral traj;
    try {
        traj = integrate_general(start, p, u_end, o);
    } catch (const IntegratorError& e) {
        std::string body = trajectory_csv_general(seen_u, seen, p);
        body += "# integrator failure at u=" + num(e.last_u) + ": " + e.what() + "\n";
        write_outputs(out_dir, {{"trajectory.csv", body}});
        err << "integrator error: " << e.what() << "\n";
        exit_code = kExitIntegrator;
        return {};
    }
    const auto path = reconstruct_general(traj, a0, p);
    ordered_json j;
    j["params"] = params_json(p);
    j["start"] = {{"x", start.x}, {"y", start.y}};
    j["a_hat0"] = a0;
    j["terminal_event"] = terminal_general(traj.terminal_event);
    j["samples"] = traj.u_grid.size();
    j["max_simplex_drift"] = jnum(traj.max_simplex_drift);
    j["truncated"] = path.truncated;
    const auto& end = traj.states.back();
    j["limit_point"] = {{"x", end.x}, {"y", end.y}};
    j["e_limit"] = jnum(e_general(end, p));
    const auto slope = last_decade_slope(path.tau, path.a_hat);
    j["a_hat_slope"] = slope ? jnum(*slope) : ordered_json(nullptr);
    if (path.tau.size() >= 5) {
        const auto d = reconstruction_defect_general(path, traj, p);
        j["reconstruction_defect"] = {{"a", jnum(d.a)}, {"b", jnum(d.b)}};
        const auto db = db_dtau_general(path);
        ordered_json last = ordered_json::array();
        for (const auto& s : db) last.push_back(jnum(s.back()));
        j["db_dtau_at_end"] = last;
    }
    j["ricci_positive_at_end"] = ricci_positive_general(end, p);
    return {{"trajectory.csv", trajectory_csv_general(traj.u_grid, traj.states, p)},
            {"metric.csv", metric_csv_general(path, p.m)},
            {"asymptotics.json", j.dump(2) + "\n"}};
}

Outputs cmd_flow(const Config& c, const std::string& out_dir, std::ostream& err, int& exit_code) {
    c.allow({"kind", "params", "initial", "u_end", "psi0", "a_hat0", "integrator", "stop_on_arrival", "arrival_tol"});
    const auto ap = parse_params(c);
    if (const auto* p = std::get_if<BundleParams>(&ap)) return cmd_flow_m2(c, *p, out_dir, err, exit_code);
    return cmd_flow_general(c, std::get<GeneralParams>(ap), out_dir, err, exit_code);
}

Outputs cmd_portrait(const Config& c) {
    c.allow({"kind", "params", "seeds", "u_end", "nullcline_samples", "integrator"});
    const auto ap = parse_params(c);
    const auto* pp = std::get_if<BundleParams>(&ap);
    if (!pp) throw ConfigError("portrait needs m = 2 params");
    const auto& p = *pp;
    const int samples = get_int(c.doc, "nullcline_samples", 256);
    if (samples < 2) throw ConfigError("'nullcline_samples' must be at least 2");
    const double u_end = get_number(c.doc, "u_end", 50.0);
    FlowOptions o;
    o.integrator = parse_integrator(c);

    std::vector<StateY> seeds;
    if (c.has("seeds")) {
        if (!c.doc["seeds"].is_array()) throw ConfigError("'seeds' must be an array of [Y1, Y2] pairs");
        for (const auto& s : c.doc["seeds"]) {
            if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
                throw ConfigError("'seeds' must be an array of [Y1, Y2] pairs");
            const StateY y{s[0].get<double>(), s[1].get<double>()};
            if (!(y.y1 >= 0.0 && y.y2 >= 0.0)) throw ConfigError("seeds must lie in the closed first quadrant");
            seeds.push_back(y);
        }
    } else {
        for (int i = 1; i <= 4; ++i)
            for (int j = 1; j <= 4; ++j) seeds.push_back({0.15 * i / p.q(0), 0.15 * j / p.q(1)});
    }

    Outputs out;
    std::ostringstream nc;
    nc << "curve,index,Y1,Y2\n";
    for (int i = 0; i < 2; ++i) {
        const auto pts = nullcline_ellipse(i, p, samples);
        for (std::size_t k = 0; k < pts.size(); ++k)
            nc << 'F' << (i + 1) << ',' << k << ',' << num(pts[k].y1) << ',' << num(pts[k].y2) << '\n';
    }
    out.emplace_back("nullclines.csv", nc.str());
    const auto fps = fixed_points(p);
    out.emplace_back("fixedpoints.csv", fixedpoints_csv(fps));

    ordered_json manifest;
    manifest["params"] = params_json(p);
    manifest["nullclines"] = "nullclines.csv";
    manifest["fixed_points"] = "fixedpoints.csv";
    ordered_json runs = ordered_json::array();
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        char name[64];
        std::snprintf(name, sizeof name, "trajectory_%03zu.csv", k);
        const auto t = integrate(seeds[k], p, u_end, o);
        out.emplace_back(name, trajectory_csv_m2(t.u_grid, t.states, p));
        runs.push_back({{"file", name}, {"seed", state_json(seeds[k])}, {"terminal_event", describe(t.terminal_event)}});
    }
    manifest["trajectories"] = runs;
    out.emplace_back("portrait.json", manifest.dump(2) + "\n");
    return out;
}

std::vector<std::pair<int, int>> parse_grid(const ordered_json& j, const char* key, int lo_a, int hi_a, int lo_b,
                                            int hi_b) {
    const auto& a = j.at(key);
    if (!a.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of pairs");
    std::vector<std::pair<int, int>> out;
    for (const auto& e : a) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw ConfigError(std::string("'") + key + "' must be an array of integer pairs");
        const int x = e[0].get<int>(), y = e[1].get<int>();
        if (x < lo_a || x > hi_a || y < lo_b || y > hi_b)
            throw ConfigError(std::string("'") + key + "' entry out of range: [" + std::to_string(x) + ", " +
                              std::to_string(y) + "]");
        out.emplace_back(x, y);
    }
    return out;
}

VerifyOptions parse_verify(const Config& c, const std::string& family) {
    c.allow({"kind", "verify"});
    VerifyOptions o = VerifyOptions::defaults();
    if (c.has("verify")) {
        const auto& v = c.doc["verify"];
        check_keys(v,
                   {"m2_grid", "m2_spot", "general_grid", "omega2_sets", "omega2_cells", "jacobian_samples",
                    "jacobian_step"},
                   "verify");
        if (v.contains("m2_grid")) o.m2_grid = parse_grid(v, "m2_grid", 1, 50, 1, 50);
        if (v.contains("m2_spot")) o.m2_spot = parse_grid(v, "m2_spot", 1, 50, 1, 50);
        if (v.contains("general_grid")) o.general_grid = parse_grid(v, "general_grid", 3, 24, 1, 50);
        if (v.contains("omega2_sets")) o.omega2_sets = parse_grid(v, "omega2_sets", 1, 50, 1, 50);
        o.omega2_cells = get_int(v, "omega2_cells", o.omega2_cells);
        o.jacobian_samples = get_int(v, "jacobian_samples", o.jacobian_samples);
        o.jacobian_step = get_number(v, "jacobian_step", o.jacobian_step);
        if (o.omega2_cells < 4 || o.jacobian_samples < 1 || !(o.jacobian_step > 0.0))
            throw ConfigError("verify sampling options out of range");
    }
    o.family_prefix = family;
    return o;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& text, const std::string& path) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        return f;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        const auto f = split(line);
        std::vector<double> row;
        for (const auto& cell : f) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                row.push_back(NAN);  // non-numeric column such as region
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty() || t.rows.empty()) throw ConfigError("empty trajectory file: " + path);
    return t;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::string& path) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    throw ConfigError("column '" + name + "' missing in " + path);
}

Outputs cmd_reconstruct(const Config& c) {
    c.allow({"kind", "params", "trajectory", "psi0", "a_hat0"});
    const auto ap = parse_params(c);
    if (!c.has("trajectory")) throw ConfigError("reconstruct needs 'trajectory' (path to a trajectory CSV)");
    const auto path = get_string(c.doc, "trajectory", "");
    const auto table = read_csv(read_text_file(path), path);
    const std::size_t cu = column(table, "u", path);
    ordered_json j;
    j["params"] = params_json(ap);
    j["trajectory"] = path;

    if (const auto* p = std::get_if<BundleParams>(&ap)) {
        const double psi0 = get_number(c.doc, "psi0", 1.0);
        if (!(psi0 > 0.0)) throw ConfigError("'psi0' must be positive");
        const std::size_t c1 = column(table, "Y1", path), c2 = column(table, "Y2", path);
        TrajectoryM2 traj;
        for (const auto& r : table.rows) {
            if (r.size() <= std::max({cu, c1, c2})) throw ConfigError("short row in " + path);
            traj.u_grid.push_back(r[cu]);
            traj.states.push_back({r[c1], r[c2]});
        }
        const auto mp = reconstruct(traj, psi0, *p);
        j["psi0"] = psi0;
        j["truncated"] = mp.truncated;
        if (mp.tau.size() >= 5) {
            const auto d = reconstruction_defect(mp, traj, *p);
            j["reconstruction_defect"] = {{"psi", jnum(d.psi)}, {"b", jnum(d.b)}};
        }
        j["asymptotics"] = asymptotics_json(asymptotics(mp, traj, *p));
        return {{"metric.csv", metric_csv_m2(mp)}, {"reconstruction.json", j.dump(2) + "\n"}};
    }
    const auto& g = std::get<GeneralParams>(ap);
    const double a0 = get_number(c.doc, "a_hat0", 1.0);
    if (!(a0 > 0.0)) throw ConfigError("'a_hat0' must be positive");
    std::vector<std::size_t> cx, cy;
    for (int k = 1; k <= g.m; ++k) {
        cx.push_back(column(table, "X" + std::to_string(k), path));
        cy.push_back(column(table, "Y" + std::to_string(k), path));
    }
    TrajectoryGeneral traj;
    for (const auto& r : table.rows) {
        StateXY s;
        for (int k = 0; k < g.m; ++k) {
            if (r.size() <= std::max(cx[k], cy[k])) throw ConfigError("short row in " + path);
            s.x.push_back(r[cx[k]]);
            s.y.push_back(r[cy[k]]);
        }
        traj.u_grid.push_back(r[cu]);
        traj.states.push_back(std::move(s));
    }
    const auto mp = reconstruct_general(traj, a0, g);
    j["a_hat0"] = a0;
    j["truncated"] = mp.truncated;
    if (mp.tau.size() >= 5) {
        const auto d = reconstruction_defect_general(mp, traj, g);
        j["reconstruction_defect"] = {{"a", jnum(d.a)}, {"b", jnum(d.b)}};
    }
    return {{"metric.csv", metric_csv_general(mp, g.m)}, {"reconstruction.json", j.dump(2) + "\n"}};
}

}  // namespace

int run_command(const CommandRequest& req, std::ostream& err) {
    try {
        if (std::find(command_names().begin(), command_names().end(), req.command) == command_names().end())
            throw ConfigError("unknown command: " + req.command);
        if (!req.family.empty() && req.command != "verify") throw ConfigError("--family applies to verify only");
        const Config c = parse_config(req);
        int code = kExitOk;
        Outputs out;
        if (req.command == "einstein") {
            out = cmd_einstein(c);
        } else if (req.command == "classify") {
            out = cmd_classify(c);
        } else if (req.command == "flow") {
            out = cmd_flow(c, req.out_dir, err, code);
            if (code != kExitOk) return code;
        } else if (req.command == "portrait") {
            out = cmd_portrait(c);
        } else if (req.command == "reconstruct") {
            out = cmd_reconstruct(c);
        } else {
            const auto opts = parse_verify(c, req.family);
            const auto report = run_verify(opts);
            out = {{"report.json", report_json(report, opts)}, {"report.txt", report_text(report)}};
            if (!report.all_pass()) {
                err << report.failures() << " verification check(s) failed\n";
                code = kExitVerification;
            }
        }
        write_outputs(req.out_dir, out);
        return code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IntegratorError& e) {
        err << "integrator error: " << e.what() << "\n";
        return kExitIntegrator;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const DomainError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace bundleflow
