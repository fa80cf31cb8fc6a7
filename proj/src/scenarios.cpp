#include "bundleflow/scenarios.hpp"

#include <algorithm>
#include <cmath>

#include "bundleflow/errors.hpp"
#include "bundleflow/numerics.hpp"

namespace bundleflow {

namespace {

const FixedPointM2& find_kind(const std::vector<FixedPointM2>& fps, FixedPointKind kind) {
    for (const auto& fp : fps)
        if (fp.kind == kind) return fp;
    throw SolverError("fixed point missing from the catalogue");
}

std::array<double, 2> eigvec_with_sign(const FixedPointM2& fp, bool unstable) {
    for (std::size_t i = 0; i < fp.spectrum.size(); ++i) {
        const double re = fp.spectrum.eigenvalues[i].real();
        if ((unstable && re > 0.0) || (!unstable && re < 0.0)) {
            const auto v = fp.spectrum.real_eigenvector(i);
            return {v[0], v[1]};
        }
    }
    throw SolverError("no eigenvalue of the requested sign");
}

}  // namespace

FlowOptions tight_flow_options() {
    FlowOptions o;
    o.integrator.rtol = 1e-12;
    o.integrator.atol = 1e-14;
    o.stop_on_arrival = false;
    return o;
}

FlowOptions saddle_backward_options() {
    FlowOptions o;
    o.arrival_tol = kSaddleBackwardArrival;
    return o;
}

RegionRun run_region(const StateY& start, Region expected, const BundleParams& p, double u_end) {
    RegionRun r;
    r.start = start;
    r.expected = expected;
    r.start_region = region_of(start, p);
    const auto traj = integrate(start, p, u_end);
    r.terminal = traj.terminal_event;
    r.u_final = traj.u_grid.back();
    r.invariance_margin = INFINITY;
    double e_prev = e_of(traj.states.front(), p);
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const auto f = f_of(traj.states[k], p);
        const double m = expected == Region::Omega1 ? std::min(f[0], f[1]) : -std::max(f[0], f[1]);
        r.invariance_margin = std::min(r.invariance_margin, m);
        const double e = e_of(traj.states[k], p);
        const double step = expected == Region::Omega1 ? e - e_prev : e_prev - e;
        r.e_monotone_defect = std::max(r.e_monotone_defect, step);
        e_prev = e;
    }
    r.distance_to_eta = distance(traj.states.back(), einstein_points(p).eta.location);
    return r;
}

AncientRun run_ancient_from_xi(const BundleParams& p, double eps) {
    const auto fps = fixed_points(p);
    const auto& xi = find_kind(fps, FixedPointKind::Xi);
    AncientRun r;
    r.direction = eigvec_with_sign(xi, true);
    if (region_of(manifold_start(xi, r.direction, eps, p, true), p) != Region::Omega1)
        r.direction = {-r.direction[0], -r.direction[1]};
    r.start = manifold_start(xi, r.direction, eps, p, true);

    const auto fwd = shoot_manifold(xi, r.direction, eps, p, 200.0, {}, true);
    r.forward_terminal = fwd.terminal_event;
    r.forward_distance_to_eta = distance(fwd.states.back(), find_kind(fps, FixedPointKind::Eta).location);

    const auto bwd = integrate(r.start, p, -200.0, saddle_backward_options());
    r.backward_terminal = bwd.terminal_event;
    r.backward = asymptotics(reconstruct(bwd, 1.0, p), bwd, p);
    return r;
}

Gamma1Run run_gamma1(const BundleParams& p, double eps) {
    const auto fps = fixed_points(p);
    const auto& v1 = find_kind(fps, FixedPointKind::V1);
    Gamma1Run r;
    r.start = manifold_start(v1, {0.0, 1.0}, eps, p, true);
    const auto fwd = shoot_manifold(v1, {0.0, 1.0}, eps, p, 200.0, {}, true);
    r.forward_terminal = fwd.terminal_event;
    r.forward_distance_to_eta = distance(fwd.states.back(), find_kind(fps, FixedPointKind::Eta).location);
    const auto bwd = integrate(r.start, p, -200.0, saddle_backward_options());
    r.backward_terminal = bwd.terminal_event;
    r.backward = asymptotics(reconstruct(bwd, 1.0, p), bwd, p);
    r.psi_over_b1_target = 1.0 / ((4.0 * p.n(0) + 6.0) * p.q(0));
    return r;
}

OriginBranchRun run_origin_branch(const BundleParams& p, double angle, double radius) {
    OriginBranchRun r;
    r.angle = angle;
    r.start = {radius * std::cos(angle), radius * std::sin(angle)};
    r.start_region = region_of(r.start, p);
    FlowOptions o;
    o.stop_on_arrival = false;
    const auto traj = integrate(r.start, p, -60.0, o);
    r.terminal = traj.terminal_event;
    const auto path = reconstruct(traj, 1.0, p);
    r.backward = asymptotics(path, traj, p);
    r.b_ratio = path.b2.back() / path.b1.back();
    return r;
}

TypeIRun run_type_i(const std::string& label, const StateY& start, FixedPointKind limit, const BundleParams& p,
                    const FlowOptions& opts, double psi0) {
    TypeIRun r;
    r.label = label;
    r.limit = limit;
    r.start = start;
    r.psi0 = psi0;
    const auto fps = fixed_points(p);
    const StateY target = find_kind(fps, limit).location;
    const auto traj = integrate(start, p, 200.0, opts);
    r.terminal = traj.terminal_event;
    const auto path = reconstruct(traj, psi0, p);
    if (path.tau.back() < r.tau_eval) return r;
    r.reached_tau = true;
    const auto s = path_at_tau(path, traj, p, r.tau_eval);
    const double e = e_of(target, p);
    r.slope_deviation = std::abs(s.psi / r.tau_eval - e) / e;
    r.ratio_deviation = {std::abs(s.psi / s.b1 - target.y1) / target.y1,
                         std::abs(s.psi / s.b2 - target.y2) / target.y2};
    return r;
}

StateY lift_stable_manifold(const FixedPointM2& fp, std::array<double, 2> direction, const BundleParams& p) {
    FlowOptions o = tight_flow_options();
    const StateY c = fp.location;
    o.extra_stop = [c](double, std::span<const double> y) {
        return std::hypot(y[0] - c.y1, y[1] - c.y2) >= kManifoldLiftDistance;
    };
    const auto lift = shoot_manifold(fp, direction, kManifoldLiftSeed, p, 200.0, o, true);
    return lift.states.back();
}

std::vector<TypeIRun> run_type_i_xi(const BundleParams& p) {
    const auto fps = fixed_points(p);
    const auto& xi = find_kind(fps, FixedPointKind::Xi);
    const auto v = eigvec_with_sign(xi, false);
    std::vector<TypeIRun> out;
    int side = 0;
    for (const std::array<double, 2> d : {v, std::array<double, 2>{-v[0], -v[1]}}) {
        const StateY s0 = lift_stable_manifold(xi, d, p);
        FlowOptions o = tight_flow_options();
        const StateY c = xi.location;
        o.extra_stop = [c](double, std::span<const double> y) { return std::hypot(y[0] - c.y1, y[1] - c.y2) > 0.05; };
        out.push_back(run_type_i(side++ == 0 ? "xi-stable-plus" : "xi-stable-minus", s0, FixedPointKind::Xi, p, o));
    }
    return out;
}

std::vector<DynamicsSetM2> default_dynamics_sets() {
    std::vector<DynamicsSetM2> out;
    out.push_back({normalized_params2(1, 1), {0.2, 0.2}, {0.05, 0.05}});
    const auto p = normalized_params2(2, 3);
    const auto e = einstein_points(p);
    const StateY mid{0.5 * (e.xi.location.y1 + e.eta.location.y1), 0.5 * (e.xi.location.y2 + e.eta.location.y2)};
    out.push_back({p, mid, {0.4 * e.eta.location.y1, 0.4 * e.eta.location.y2}});
    return out;
}

// ── m >= 3 ───────────────────────────────────────────────────────────────

std::vector<std::vector<double>> stable_subspace_v2(const GeneralParams& p, EinsteinSign sign) {
    const auto state = einstein_state(p, sign);
    const auto basis = v2_basis(p.m);
    const auto spec = eigen_small(restrict_to(jacobian_general(state, p), basis));
    const std::size_t dim = 2 * static_cast<std::size_t>(p.m);

    auto lift = [&](const std::vector<double>& c) {
        std::vector<double> w(dim, 0.0);
        for (std::size_t j = 0; j < basis.size(); ++j)
            for (std::size_t i = 0; i < dim; ++i) w[i] += c[j] * basis[j][i];
        return w;
    };

    std::vector<std::vector<double>> raw;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto lam = spec.eigenvalues[i];
        if (lam.real() >= 0.0 || lam.imag() < 0.0) continue;
        std::vector<double> re(basis.size()), im(basis.size());
        for (std::size_t j = 0; j < basis.size(); ++j) {
            re[j] = spec.eigenvectors[i][j].real();
            im[j] = spec.eigenvectors[i][j].imag();
        }
        raw.push_back(lift(re));
        if (lam.imag() > 0.0) raw.push_back(lift(im));
    }

    std::vector<std::vector<double>> ortho;
    for (auto v : raw) {
        for (const auto& q : ortho) {
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) dot += v[i] * q[i];
            for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * q[i];
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-6) throw SolverError("stable eigenvectors are linearly dependent");
        for (double& x : v) x /= nrm;
        ortho.push_back(std::move(v));
    }
    return ortho;
}

GeneralDynamicsRun run_general_return(const GeneralParams& p, EinsteinSign sign, int sample) {
    static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83};
    GeneralDynamicsRun r;
    r.sign = sign;
    r.sample = sample;
    const auto fp = einstein_state(p, sign);
    const auto stable = stable_subspace_v2(p, sign);
    if (stable.empty() || stable.size() > std::size(kPrimes)) throw SolverError("unexpected stable subspace dimension");

    const auto h = halton(sample + 1, std::span<const int>(kPrimes, stable.size()));
    const std::size_t dim = 2 * static_cast<std::size_t>(p.m);
    std::vector<double> w(dim, 0.0);
    for (std::size_t j = 0; j < stable.size(); ++j)
        for (std::size_t i = 0; i < dim; ++i) w[i] += (2.0 * h[j] - 1.0) * stable[j][i];
    double nrm = 0.0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : w) x /= nrm;

    const auto base = fp.packed();
    auto offset = [&](double s) {
        std::vector<double> z(base);
        for (std::size_t i = 0; i < dim; ++i) z[i] += s * w[i];
        return StateXY::unpack(z);
    };

    FlowOptionsGeneral fwd;
    fwd.stop_on_arrival = true;
    fwd.arrival_tol = 1e-8;
    StateXY start;
    if (sign == EinsteinSign::Minus) {
        start = offset(kManifoldLiftDistance);
    } else {
        // Saddle: lift the linear seed onto the stable manifold first.
        FlowOptionsGeneral back;
        back.integrator.rtol = 1e-13;
        back.integrator.atol = 1e-14;
        back.extra_stop = [&base](double, std::span<const double> z) {
            double s = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - base[i]) * (z[i] - base[i]);
            return std::sqrt(s) >= kManifoldLiftDistance;
        };
        const auto lift = integrate_general(offset(kManifoldLiftSeed), p, -100.0, back);
        start = lift.states.back();
        r.max_simplex_drift = lift.max_simplex_drift;
        fwd.integrator.rtol = 1e-13;
        fwd.integrator.atol = 1e-14;
    }
    r.start_distance = distance(start, fp);

    const auto traj = integrate_general(start, p, 100.0, fwd);
    r.terminal = traj.terminal_event;
    r.u_final = traj.u_grid.back();
    r.final_distance = distance(traj.states.back(), fp);
    r.max_simplex_drift = std::max(r.max_simplex_drift, traj.max_simplex_drift);
    r.ricci_final = ricci_positive_general(traj.states.back(), p);

    const double e0 = e_general(traj.states.front(), p);
    const double e1 = e_general(traj.states.back(), p);
    r.e_trend = e1 > e0 ? 1 : (e1 < e0 ? -1 : 0);
    double prev = e0;
    for (const auto& s : traj.states) {
        const double e = e_general(s, p);
        r.e_monotone_defect = std::max(r.e_monotone_defect, r.e_trend >= 0 ? prev - e : e - prev);
        prev = e;
    }

    if (sign == EinsteinSign::Plus) {
        const double b = beta(p, EinsteinSign::Plus);
        r.db_dtau_target = 2.0 * (p.d + 2) - 6.0 * (p.m - 1) * b / (p.m * std::sqrt(static_cast<double>(p.d)));
        const auto path = reconstruct_general(traj, 1.0, p);
        const auto db = db_dtau_general(path);
        double dev = 0.0;
        for (const auto& series : db) dev = std::max(dev, std::abs(series.back() - r.db_dtau_target) / r.db_dtau_target);
        r.db_dtau_deviation = dev;
    }
    return r;
}

}  // namespace bundleflow
