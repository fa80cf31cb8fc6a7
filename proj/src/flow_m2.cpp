#include "bundleflow/flow_m2.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "bundleflow/errors.hpp"
#include "bundleflow/numerics.hpp"

namespace bundleflow {

namespace {

void require_m2(const BundleParams& p) {
    if (p.m() != 2) throw ConfigError("m = 2 operation called with m = " + std::to_string(p.m()));
}

}  // namespace

double e_of(const StateY& y, const BundleParams& p) {
    const double s1 = p.q(0) * y.y1;
    const double s2 = p.q(1) * y.y2;
    return 0.5 + 4.0 * p.n(0) * s1 * s1 + 4.0 * p.n(1) * s2 * s2;
}

std::array<double, 2> f_of(const StateY& y, const BundleParams& p) {
    const double e = e_of(y, p);
    std::array<double, 2> f{};
    for (std::size_t i = 0; i < 2; ++i) {
        const double s = p.q(i) * y[i];
        f[i] = 2.0 * (p.n(i) + 2) * s - 6.0 * s * s - e;
    }
    return f;
}

std::array<double, 2> vector_field(const StateY& y, const BundleParams& p) {
    const auto f = f_of(y, p);
    return {-y.y1 * f[0], -y.y2 * f[1]};
}

SmallMatrix jacobian(const StateY& y, const BundleParams& p) {
    require_m2(p);
    const int n1 = p.n(0), n2 = p.n(1);
    const double q1 = p.q(0), q2 = p.q(1);
    const double s1 = q1 * y.y1, s2 = q2 * y.y2;
    SmallMatrix j(2);
    j(0, 0) = -4.0 * (n1 + 2) * s1 + 3.0 * (4 * n1 + 6) * s1 * s1 + 4.0 * n2 * s2 * s2 + 0.5;
    j(1, 1) = -4.0 * (n2 + 2) * s2 + 3.0 * (4 * n2 + 6) * s2 * s2 + 4.0 * n1 * s1 * s1 + 0.5;
    j(0, 1) = 8.0 * n2 * q2 * q2 * y.y1 * y.y2;
    j(1, 0) = 8.0 * n1 * q1 * q1 * y.y1 * y.y2;
    return j;
}

double de_du(const StateY& y, const BundleParams& p) {
    const auto f = f_of(y, p);
    const double s1 = p.q(0) * y.y1, s2 = p.q(1) * y.y2;
    return -8.0 * p.n(0) * s1 * s1 * f[0] - 8.0 * p.n(1) * s2 * s2 * f[1];
}

std::string_view to_string(FixedPointKind k) {
    switch (k) {
        case FixedPointKind::Origin: return "origin";
        case FixedPointKind::V1: return "v1";
        case FixedPointKind::V2: return "v2";
        case FixedPointKind::V1Tilde: return "v1_tilde";
        case FixedPointKind::V2Tilde: return "v2_tilde";
        case FixedPointKind::Xi: return "xi";
        case FixedPointKind::Eta: return "eta";
    }
    return "?";
}

std::string_view to_string(Classification c) {
    switch (c) {
        case Classification::Source: return "source";
        case Classification::Sink: return "sink";
        case Classification::Hyperbolic: return "hyperbolic";
        case Classification::Degenerate: return "degenerate";
    }
    return "?";
}

Classification classify(const Spectrum& s) {
    if (s.any_degenerate()) return Classification::Degenerate;
    const int pos = s.count_positive();
    const int neg = s.count_negative();
    if (pos == static_cast<int>(s.size())) return Classification::Source;
    if (neg == static_cast<int>(s.size())) return Classification::Sink;
    return Classification::Hyperbolic;
}

FixedPointM2 make_fixed_point(const StateY& loc, FixedPointKind kind, const BundleParams& p) {
    FixedPointM2 fp;
    fp.location = loc;
    fp.kind = kind;
    fp.spectrum = eigen_small(jacobian(loc, p));
    fp.classification = classify(fp.spectrum);
    fp.unstable_dimension = fp.spectrum.count_positive();
    return fp;
}

double y_of_y0(double y0, int n) {
    const double k = (n + 2.0) * (n + 2.0);
    double disc = 1.0 - 3.0 / (y0 * k);
    if (disc < 0.0) {
        // Allow rounding right at the domain end.
        if (disc > -1e-14) {
            disc = 0.0;
        } else {
            std::ostringstream os;
            os.precision(17);
            os << "y_of_y0: y0 = " << y0 << " below domain (discriminant " << disc << ")";
            throw DomainError(os.str());
        }
    }
    // (2k·y0/3)(1 − √disc), rewritten without cancellation.
    return 2.0 / (1.0 + std::sqrt(disc));
}

double phi(double y0, const BundleParams& p) {
    require_m2(p);
    return 3.0 * (y0 - 1.0) + 2.0 * p.n(0) * (y_of_y0(y0, p.n(0)) - 1.0) +
           2.0 * p.n(1) * (y_of_y0(y0, p.n(1)) - 1.0);
}

double einstein_constant(const StateY& y, const BundleParams& p, int i) {
    const auto si = static_cast<std::size_t>(i);
    const double s = p.q(si) * y[si];
    return p.lambda(si) * y[si] - 3.0 * s * s;
}

namespace {

StateY recover_y(double y0, const BundleParams& p, std::array<double, 2>& y_aux) {
    y_aux = {y_of_y0(y0, p.n(0)), y_of_y0(y0, p.n(1))};
    return {y_aux[0] / (4.0 * p.lambda(0) * y0), y_aux[1] / (4.0 * p.lambda(1) * y0)};
}

// Newton steps on F(Y) = 0, kept only while they reduce the residual.
StateY polish(StateY y, const BundleParams& p) {
    auto res = [&](const StateY& s) {
        const auto f = f_of(s, p);
        return std::hypot(f[0], f[1]);
    };
    for (int it = 0; it < 3; ++it) {
        const auto f = f_of(y, p);
        const double s1 = p.q(0) * y.y1, s2 = p.q(1) * y.y2;
        const double j11 = 2.0 * (p.n(0) + 2) * p.q(0) - (12.0 + 8.0 * p.n(0)) * p.q(0) * s1;
        const double j22 = 2.0 * (p.n(1) + 2) * p.q(1) - (12.0 + 8.0 * p.n(1)) * p.q(1) * s2;
        const double j12 = -8.0 * p.n(1) * p.q(1) * s2;
        const double j21 = -8.0 * p.n(0) * p.q(0) * s1;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0) break;
        const StateY next{y.y1 - (j22 * f[0] - j12 * f[1]) / det, y.y2 - (-j21 * f[0] + j11 * f[1]) / det};
        if (!(res(next) < res(y))) break;
        y = next;
    }
    return y;
}

}  // namespace

EinsteinPointsM2 einstein_points(const BundleParams& p) {
    require_m2(p);
    EinsteinSolveDetail d;
    d.swapped = p.n(0) > p.n(1);
    const int n_small = std::min(p.n(0), p.n(1));
    d.domain_lo = 3.0 / ((n_small + 2.0) * (n_small + 2.0));
    const double hi = 1.0;

    auto f = [&](double y0) { return phi(y0, p); };
    d.phi_min_location = trisect_minimum(f, d.domain_lo, hi, 1e-14);
    d.phi_min_value = f(d.phi_min_location);
    if (!(d.phi_min_value < 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "einstein_points: min φ = " << d.phi_min_value << " at y0 = " << d.phi_min_location
           << " is not negative (n = " << p.n(0) << ", " << p.n(1) << ")";
        throw SolverError(os.str());
    }
    d.y0_lo = bisect_root(f, d.domain_lo, d.phi_min_location, 1e-14);
    d.y0_hi = bisect_root(f, d.phi_min_location, hi, 1e-14);

    const StateY xi = polish(recover_y(d.y0_lo, p, d.y_aux_lo), p);
    const StateY eta = polish(recover_y(d.y0_hi, p, d.y_aux_hi), p);
    d.lambda_xi = {einstein_constant(xi, p, 0), einstein_constant(xi, p, 1)};
    d.lambda_eta = {einstein_constant(eta, p, 0), einstein_constant(eta, p, 1)};

    return {make_fixed_point(xi, FixedPointKind::Xi, p), make_fixed_point(eta, FixedPointKind::Eta, p), d};
}

StateY v1_location(const BundleParams& p) { return {1.0 / ((4.0 * p.n(0) + 6.0) * p.q(0)), 0.0}; }
StateY v2_location(const BundleParams& p) { return {0.0, 1.0 / ((4.0 * p.n(1) + 6.0) * p.q(1))}; }
StateY v1_tilde_location(const BundleParams& p) { return {1.0 / (2.0 * p.q(0)), 0.0}; }
StateY v2_tilde_location(const BundleParams& p) { return {0.0, 1.0 / (2.0 * p.q(1))}; }

std::vector<FixedPointM2> fixed_points(const BundleParams& p) {
    require_m2(p);
    auto ein = einstein_points(p);
    return {
        make_fixed_point({0.0, 0.0}, FixedPointKind::Origin, p),
        make_fixed_point(v1_location(p), FixedPointKind::V1, p),
        make_fixed_point(v2_location(p), FixedPointKind::V2, p),
        make_fixed_point(v1_tilde_location(p), FixedPointKind::V1Tilde, p),
        make_fixed_point(v2_tilde_location(p), FixedPointKind::V2Tilde, p),
        std::move(ein.xi),
        std::move(ein.eta),
    };
}

SmallMatrix alpha_matrix(const StateY& chi, const BundleParams& p) {
    const double x = p.q(0) * p.q(0) * chi.y1 * chi.y1;
    const double y = p.q(1) * p.q(1) * chi.y2 * chi.y2;
    const int n1 = p.n(0), n2 = p.n(1);
    return SmallMatrix{{(8.0 * n1 + 6.0) * x, 8.0 * n2 * y}, {8.0 * n1 * x, (8.0 * n2 + 6.0) * y}};
}

RhoBound rho_bound_check(const FixedPointM2& fp, const BundleParams& p) {
    if (fp.kind != FixedPointKind::Xi && fp.kind != FixedPointKind::Eta) {
        throw ConfigError("rho_bound_check: point must be xi or eta");
    }
    const StateY& c = fp.location;
    const double x = p.q(0) * p.q(0) * c.y1 * c.y1;
    const double y = p.q(1) * p.q(1) * c.y2 * c.y2;
    const int n1 = p.n(0), n2 = p.n(1);

    RhoBound r;
    const auto s = eigen_small(alpha_matrix(c, p));
    r.rho1 = s.eigenvalues[1].real();
    r.rho2 = s.eigenvalues[0].real();
    r.a_value = (4.0 * n1 + 3) * (4.0 * n1 + 3) * x * x + (4.0 * n2 + 3) * (4.0 * n2 + 3) * y * y +
                (32.0 * n1 * n2 - 24.0 * n1 - 24.0 * n2 - 18.0) * x * y;
    r.e_value = e_of(c, p);
    r.minus_e_plus_rho1 = -r.e_value + r.rho1;
    r.minus_e_plus_rho2 = -r.e_value + r.rho2;
    r.minus_e_plus_rho1_closed = 3.0 * x + 3.0 * y - 0.5 + std::sqrt(r.a_value);
    r.perron_lower_bound = 8.0 * n1 * x + (8.0 * n2 + 6.0) * y;
    return r;
}

std::string_view to_string(Region r) {
    switch (r) {
        case Region::Omega1: return "omega1";
        case Region::Omega2: return "omega2";
        case Region::Other: return "other";
    }
    return "?";
}

Region region_of(const StateY& y, const BundleParams& p) {
    if (!(y.y1 >= 0.0) || !(y.y2 >= 0.0)) return Region::Other;
    const auto f = f_of(y, p);
    if (f[0] >= 0.0 && f[1] >= 0.0) return Region::Omega1;
    if (f[0] > 0.0 || f[1] > 0.0) return Region::Other;
    for (int k = 1; k < kOmega2SegmentSamples; ++k) {
        const double t = static_cast<double>(k) / kOmega2SegmentSamples;
        const auto g = f_of({t * y.y1, t * y.y2}, p);
        if (g[0] > kOmega2Slack || g[1] > kOmega2Slack) return Region::Other;
    }
    return Region::Omega2;
}

namespace {

StateY cell_centre(const BundleParams& p, int n_cells, int i, int j) {
    const double w = 1.0 / (2.0 * p.q(0)), h = 1.0 / (2.0 * p.q(1));
    return {(i + 0.5) * w / n_cells, (j + 0.5) * h / n_cells};
}

}  // namespace

std::vector<unsigned char> omega2_flood_fill(const BundleParams& p, int n_cells) {
    if (n_cells < 2) throw ConfigError("omega2_flood_fill: need at least 2 cells per side");
    const auto idx = [n_cells](int i, int j) { return static_cast<std::size_t>(j) * n_cells + i; };
    std::vector<unsigned char> feasible(static_cast<std::size_t>(n_cells) * n_cells, 0);
    for (int j = 0; j < n_cells; ++j)
        for (int i = 0; i < n_cells; ++i) {
            const auto f = f_of(cell_centre(p, n_cells, i, j), p);
            feasible[idx(i, j)] = f[0] <= 0.0 && f[1] <= 0.0;
        }

    std::vector<unsigned char> mask(feasible.size(), 0);
    if (!feasible[0]) return mask;
    std::deque<std::pair<int, int>> queue{{0, 0}};
    mask[0] = 1;
    while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int a = i + di[k], b = j + dj[k];
            if (a < 0 || b < 0 || a >= n_cells || b >= n_cells) continue;
            if (feasible[idx(a, b)] && !mask[idx(a, b)]) {
                mask[idx(a, b)] = 1;
                queue.emplace_back(a, b);
            }
        }
    }
    return mask;
}

FloodFillComparison compare_omega2_with_flood_fill(const BundleParams& p, int n_cells) {
    const auto mask = omega2_flood_fill(p, n_cells);
    const auto idx = [n_cells](int i, int j) { return static_cast<std::size_t>(j) * n_cells + i; };
    FloodFillComparison c;
    for (int j = 0; j < n_cells; ++j)
        for (int i = 0; i < n_cells; ++i) {
            ++c.cells;
            const bool alg = region_of(cell_centre(p, n_cells, i, j), p) == Region::Omega2;
            const bool oracle = mask[idx(i, j)] != 0;
            if (alg == oracle) {
                ++c.agree;
                continue;
            }
            ++c.disagree;
            bool near_boundary = false;
            for (int b = std::max(0, j - 1); b <= std::min(n_cells - 1, j + 1); ++b)
                for (int a = std::max(0, i - 1); a <= std::min(n_cells - 1, i + 1); ++a)
                    if ((mask[idx(a, b)] != 0) != oracle) near_boundary = true;
            if (!near_boundary) ++c.interior_disagree;
        }
    return c;
}

std::vector<StateY> nullcline_ellipse(int i, const BundleParams& p, int samples) {
    if (i != 0 && i != 1) throw ConfigError("nullcline_ellipse: index must be 0 or 1");
    if (samples < 2) throw ConfigError("nullcline_ellipse: need at least 2 samples");
    const auto si = static_cast<std::size_t>(i), sj = 1 - si;
    const double ni = p.n(si), nj = p.n(sj);
    const double centre = (ni + 2.0) / (4.0 * ni + 6.0);
    const double r_own = (ni + 1.0) / (4.0 * ni + 6.0);
    const double r_other = std::sqrt((ni + 1.0) * (ni + 1.0) / ((4.0 * ni + 6.0) * 4.0 * nj));
    std::vector<StateY> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        const double th = M_PI * k / (samples - 1);
        const double s_own = centre + r_own * std::cos(th);
        const double s_other = r_other * std::sin(th);
        StateY y{};
        if (i == 0) {
            y = {s_own / p.q(0), s_other / p.q(1)};
        } else {
            y = {s_other / p.q(0), s_own / p.q(1)};
        }
        out.push_back(y);
    }
    return out;
}

std::string_view to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::ReachedFixedPoint: return "reached_fixed_point";
        case TerminalKind::LeftDomain: return "left_domain";
        case TerminalKind::MaxTime: return "max_time";
    }
    return "?";
}

std::string describe(const TerminalEvent& e) {
    std::string s(to_string(e.kind));
    if (e.fixed_point) s += ":" + std::string(to_string(*e.fixed_point));
    return s;
}

TrajectoryM2 integrate(const StateY& y0, const BundleParams& p, double u_end, const FlowOptions& opts) {
    require_m2(p);
    if (!(y0.y1 >= 0.0) || !(y0.y2 >= 0.0) || !std::isfinite(y0.y1) || !std::isfinite(y0.y2)) {
        throw ConfigError("integrate: initial state outside the closed first quadrant");
    }
    const double cap = 10.0 * std::max(1.0 / (2.0 * p.q(0)), 1.0 / (2.0 * p.q(1)));

    std::vector<std::pair<StateY, FixedPointKind>> targets;
    for (const auto& fp : fixed_points(p)) targets.emplace_back(fp.location, fp.kind);
    std::vector<bool> armed;
    for (const auto& [loc, kind] : targets) armed.push_back(distance(loc, y0) >= opts.arrival_tol);

    TerminalEvent event;
    auto nearest = [&](const StateY& s) -> std::optional<FixedPointKind> {
        for (const auto& [loc, kind] : targets)
            if (distance(loc, s) < opts.arrival_tol) return kind;
        return std::nullopt;
    };

    const OdeRhs rhs = [&p](double, std::span<const double> y, std::span<double> dy) {
        const auto v = vector_field({y[0], y[1]}, p);
        dy[0] = v[0];
        dy[1] = v[1];
    };
    const OdeStop stop = [&](double u, std::span<const double> y) {
        if (y[0] < 0.0 || y[1] < 0.0 || y[0] > cap || y[1] > cap) {
            event = {TerminalKind::LeftDomain, std::nullopt};
            return true;
        }
        if (opts.extra_stop && opts.extra_stop(u, y)) {
            event = {TerminalKind::MaxTime, std::nullopt};
            return true;
        }
        if (opts.stop_on_arrival) {
            const StateY s{y[0], y[1]};
            for (std::size_t k = 0; k < targets.size(); ++k) {
                if (armed[k] && distance(targets[k].first, s) < opts.arrival_tol) {
                    event = {TerminalKind::ReachedFixedPoint, targets[k].second};
                    return true;
                }
            }
        }
        return false;
    };

    const auto sol = dopri45(rhs, 0.0, {y0.y1, y0.y2}, u_end, opts.integrator, {}, stop);

    TrajectoryM2 t;
    t.u_grid = sol.t;
    t.states.reserve(sol.y.size());
    for (const auto& y : sol.y) t.states.push_back({y[0], y[1]});
    t.step_diagnostics = sol.diagnostics;
    if (sol.stopped) {
        t.terminal_event = event;
    } else if (auto k = nearest(t.states.back())) {
        t.terminal_event = {TerminalKind::ReachedFixedPoint, k};
    } else {
        t.terminal_event = {TerminalKind::MaxTime, std::nullopt};
    }
    return t;
}

namespace {

double check_eigendirection(const FixedPointM2& fp, std::array<double, 2> direction, double eps,
                            const BundleParams& p) {
    if (!(eps > 0.0) || eps > 1e-4) throw ConfigError("shoot_manifold: eps must lie in (0, 1e-4]");
    const double nrm = std::hypot(direction[0], direction[1]);
    if (std::abs(nrm - 1.0) > 1e-9) throw ConfigError("shoot_manifold: direction must be a unit vector");
    const auto j = jacobian(fp.location, p);
    const auto jd = j.apply(direction);
    const double lambda = direction[0] * jd[0] + direction[1] * jd[1];
    const double residual = std::hypot(jd[0] - lambda * direction[0], jd[1] - lambda * direction[1]);
    if (residual > kEigenResidualTol) {
        std::ostringstream os;
        os << "shoot_manifold: direction is not an eigendirection at " << to_string(fp.kind)
           << " (residual " << residual << ")";
        throw ConfigError(os.str());
    }
    if (std::abs(lambda) < kDegenerateThreshold) throw ConfigError("shoot_manifold: eigenvalue is degenerate");
    return lambda;
}

}  // namespace

StateY manifold_start(const FixedPointM2& fp, std::array<double, 2> direction, double eps,
                      const BundleParams& p, bool quadratic) {
    const double lambda = check_eigendirection(fp, direction, eps, p);
    StateY start{fp.location.y1 + eps * direction[0], fp.location.y2 + eps * direction[1]};
    if (!quadratic || fp.classification != Classification::Hyperbolic) return start;

    // Other eigenpair of the planar saddle.
    const auto& s = fp.spectrum;
    const std::size_t other = std::abs(s.eigenvalues[0].real() - lambda) > std::abs(s.eigenvalues[1].real() - lambda)
                                  ? 0
                                  : 1;
    const double lambda_o = s.eigenvalues[other].real();
    const auto v = s.real_eigenvector(other);
    // Left eigenvector for v: orthogonal to direction, normalized against v.
    const double perp[] = {-direction[1], direction[0]};
    const double pv = perp[0] * v[0] + perp[1] * v[1];
    if (pv == 0.0) return start;

    // The field is cubic, so the central second difference is exact up to rounding.
    const double h = 1e-4;
    const auto fp_ = vector_field(fp.location, p);
    const auto fplus = vector_field({fp.location.y1 + h * direction[0], fp.location.y2 + h * direction[1]}, p);
    const auto fminus = vector_field({fp.location.y1 - h * direction[0], fp.location.y2 - h * direction[1]}, p);
    const double d2[] = {(fplus[0] + fminus[0] - 2.0 * fp_[0]) / (h * h),
                         (fplus[1] + fminus[1] - 2.0 * fp_[1]) / (h * h)};
    const double q = (perp[0] * d2[0] + perp[1] * d2[1]) / pv;
    const double c = q / (2.0 * (2.0 * lambda - lambda_o));
    start.y1 += c * eps * eps * v[0];
    start.y2 += c * eps * eps * v[1];
    return start;
}

TrajectoryM2 shoot_manifold(const FixedPointM2& fp, std::array<double, 2> direction, double eps,
                            const BundleParams& p, double u_span, const FlowOptions& opts, bool quadratic) {
    const double lambda = check_eigendirection(fp, direction, eps, p);
    const StateY start = manifold_start(fp, direction, eps, p, quadratic);
    const double u_end = lambda > 0.0 ? std::abs(u_span) : -std::abs(u_span);
    return integrate(start, p, u_end, opts);
}

MetricPathM2 reconstruct(const TrajectoryM2& traj, double psi0, const BundleParams& p) {
    if (traj.states.empty()) throw ConfigError("reconstruct: empty trajectory");
    if (!(psi0 > 0.0)) throw ConfigError("reconstruct: psi0 must be positive");
    MetricPathM2 path;
    std::size_t n = traj.states.size();
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        if (traj.states[k].y1 == 0.0 || traj.states[k].y2 == 0.0) {
            n = k;
            path.truncated = true;
            break;
        }
    }
    if (n == 0) return path;

    std::vector<double> u(traj.u_grid.begin(), traj.u_grid.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> e(n), de(n);
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = e_of(traj.states[k], p);
        de[k] = de_du(traj.states[k], p);
    }
    const auto log_psi = cumulative_hermite(u, e, de);
    std::vector<double> psi(n), dpsi(n);
    for (std::size_t k = 0; k < n; ++k) {
        psi[k] = psi0 * std::exp(log_psi[k]);
        dpsi[k] = e[k] * psi[k];
    }
    path.tau = cumulative_hermite(u, psi, dpsi);
    path.u = std::move(u);
    path.b1.resize(n);
    path.b2.resize(n);
    path.a.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        path.b1[k] = psi[k] / traj.states[k].y1;
        path.b2[k] = psi[k] / traj.states[k].y2;
        path.a[k] = 2.0 * psi[k];
    }
    path.psi = std::move(psi);
    return path;
}

ReconstructionDefect reconstruction_defect(const MetricPathM2& path, const TrajectoryM2& traj,
                                           const BundleParams& p) {
    const std::size_t n = path.psi.size();
    if (n < 5) throw ConfigError("reconstruction_defect: need at least 5 samples");
    // d/dτ = (1/ψ) d/du; differentiating in u avoids cancellation in τ
    // differences near a collapse.
    const auto dpsi = lagrange_derivative(path.u, path.psi);
    const auto db1 = lagrange_derivative(path.u, path.b1);
    const auto db2 = lagrange_derivative(path.u, path.b2);
    ReconstructionDefect d;
    for (std::size_t k = 0; k < n; ++k) {
        const StateY& y = traj.states[k];
        const double e = e_of(y, p);
        d.psi = std::max(d.psi, std::abs(dpsi[k] / path.psi[k] - e) / e);
        const double db[] = {db1[k] / path.psi[k], db2[k] / path.psi[k]};
        for (std::size_t i = 0; i < 2; ++i) {
            const double target = 2.0 * (p.n(i) + 2) * p.q(i) - 6.0 * p.q(i) * p.q(i) * y[i];
            d.b = std::max(d.b, std::abs(db[i] - target) / std::max(std::abs(target), 1.0));
        }
    }
    return d;
}

PathSample path_at_tau(const MetricPathM2& path, const TrajectoryM2& traj, const BundleParams& p, double tau) {
    const auto& t = path.tau;
    if (t.size() < 2) throw ConfigError("path_at_tau: path too short");
    const double lo = std::min(t.front(), t.back()), hi = std::max(t.front(), t.back());
    if (tau < lo || tau > hi) throw ConfigError("path_at_tau: tau outside the reconstructed range");
    std::size_t k = 0;
    while (k + 2 < t.size() && !((t[k] - tau) * (t[k + 1] - tau) <= 0.0)) ++k;

    const double h = t[k + 1] - t[k];
    const double s = (tau - t[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    auto herm = [&](double y0, double d0, double y1, double d1) {
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    };
    auto db = [&](std::size_t idx, std::size_t i) {
        return 2.0 * (p.n(i) + 2) * p.q(i) - 6.0 * p.q(i) * p.q(i) * traj.states[idx][i];
    };
    PathSample out;
    out.tau = tau;
    out.psi = herm(path.psi[k], e_of(traj.states[k], p), path.psi[k + 1], e_of(traj.states[k + 1], p));
    out.b1 = herm(path.b1[k], db(k, 0), path.b1[k + 1], db(k + 1, 0));
    out.b2 = herm(path.b2[k], db(k, 1), path.b2[k + 1], db(k + 1, 1));
    return out;
}

AsymptoticsReportM2 asymptotics(const MetricPathM2& path, const TrajectoryM2& traj, const BundleParams& p) {
    AsymptoticsReportM2 r;
    const std::size_t n = path.psi.size();
    if (n < 2) {
        r.note = "path too short";
        return r;
    }
    r.limit_point = traj.states[n - 1];
    r.limit_psi_over_b = {path.psi[n - 1] / path.b1[n - 1], path.psi[n - 1] / path.b2[n - 1]};
    r.slope_target = e_of(r.limit_point, p);
    r.backward = path.u[n - 1] < path.u[0];

    if (!r.backward) {
        const double tau_end = path.tau[n - 1];
        std::vector<double> x, y;
        for (std::size_t k = 0; k < n; ++k) {
            if (path.tau[k] >= 0.1 * tau_end) {
                x.push_back(path.tau[k]);
                y.push_back(path.psi[k]);
            }
        }
        if (x.size() < 10 || tau_end <= 0.0) {
            r.note = "fewer than 10 samples in the last decade of tau";
            return r;
        }
        const auto [c0, c1] = linear_fit(x, y);
        r.slope = c1;
        for (std::size_t k = 0; k < x.size(); ++k)
            r.fit_residual = std::max(r.fit_residual, std::abs(y[k] - (c0 + c1 * x[k])) / y[k]);
        r.slope_deviation = std::abs(r.slope - r.slope_target) / r.slope_target;
        r.reliable = true;
        return r;
    }

    const double u_last = path.u[n - 1];
    std::vector<double> x, y;
    for (std::size_t k = 0; k < n; ++k) {
        if (path.u[k] <= u_last + 5.0) {
            x.push_back(std::exp(r.slope_target * (path.u[k] - u_last)));
            y.push_back(path.tau[k]);
        }
    }
    if (x.size() < 10) {
        r.note = "fewer than 10 samples in the backward tail";
        return r;
    }
    const auto [c0, c1] = linear_fit(x, y);
    const double t_collapse = -c0;
    if (!(t_collapse > 0.0)) {
        r.note = "tail fit gave a nonpositive collapse time";
        return r;
    }
    r.collapse_time = t_collapse;
    for (std::size_t k = 0; k < x.size(); ++k)
        r.fit_residual = std::max(r.fit_residual, std::abs(y[k] - (c0 + c1 * x[k])) / t_collapse);

    // First sample within 1e-4·T of the collapse, else the closest one available.
    std::size_t probe = n - 1;
    for (std::size_t k = 0; k < n; ++k) {
        if (t_collapse + path.tau[k] <= 1e-4 * t_collapse) {
            probe = k;
            break;
        }
    }
    const double remaining = t_collapse + path.tau[probe];
    if (!(remaining > 0.0)) {
        r.note = "collapse time precedes the sampled path";
        return r;
    }
    r.slope = path.psi[probe] / remaining;
    r.probe_remaining = remaining / t_collapse;
    r.slope_deviation = std::abs(r.slope - r.slope_target) / r.slope_target;

    if (region_of(traj.states.front(), p) == Region::Omega2) {
        const double e_eta = e_of(einstein_points(p).eta.location, p);
        const std::array<double, 2> bounds{path.psi[0] / e_eta, 2.0 * path.psi[0]};
        r.collapse_bounds = bounds;
        r.collapse_bounds_hold = bounds[0] <= t_collapse && t_collapse <= bounds[1];
    }
    r.reliable = true;
    return r;
}

RicciSignature ricci_signature(const StateY& y, const BundleParams& p) {
    RicciSignature r;
    r.fibre_positive = e_of(y, p) > 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        r.base_exact[i] = y[i] < (p.n(i) + 2.0) / (3.0 * p.q(i));
        r.base_conservative[i] = y[i] < (p.n(i) + 2.0) / (6.0 * p.q(i));
    }
    return r;
}

}  // namespace bundleflow
