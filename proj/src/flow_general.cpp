#include "bundleflow/flow_general.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bundleflow/errors.hpp"
#include "bundleflow/numerics.hpp"

namespace bundleflow {

double e_general(const StateXY& s, const GeneralParams& p) {
    double e = p.m / 2.0 + 1.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) e += 4.0 * p.d * s.x[k] * s.x[k] * s.y[k] * s.y[k];
    return e;
}

std::vector<double> vf_general_packed(std::span<const double> z, const GeneralParams& p) {
    const std::size_t m = z.size() / 2;
    const double d = p.d;
    double e = p.m / 2.0 + 1.0;
    for (std::size_t k = 0; k < m; ++k) e += 4.0 * d * z[k] * z[k] * z[m + k] * z[m + k];
    std::vector<double> out(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
        const double x = z[k], y = z[m + k];
        out[k] = 0.5 + x + 4.0 * d * x * x * y * y - x * e;
        out[m + k] = -y * (2.0 * (d + 2.0) * y - 6.0 * x * (1.0 - x) * y * y - e);
    }
    return out;
}

StateXY vf_general(const StateXY& s, const GeneralParams& p) {
    if (s.x.size() != static_cast<std::size_t>(p.m) || s.y.size() != s.x.size()) {
        throw ConfigError("vf_general: state dimension does not match m");
    }
    const double defect = simplex_defect(s);
    if (defect > 1e-8) {
        std::ostringstream os;
        os << "vf_general: simplex constraint violated by " << defect;
        throw ConfigError(os.str());
    }
    return StateXY::unpack(vf_general_packed(s.packed(), p));
}

SmallMatrix jacobian_general(const StateXY& s, const GeneralParams& p) {
    const int m = p.m;
    const double d = p.d;
    const double e = e_general(s, p);
    SmallMatrix j(2 * m);
    for (int k = 0; k < m; ++k) {
        const auto sk = static_cast<std::size_t>(k);
        const double xk = s.x[sk], yk = s.y[sk];
        const double gk = 2.0 * (d + 2.0) * yk - 6.0 * xk * (1.0 - xk) * yk * yk - e;
        for (int i = 0; i < m; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const double ex = 8.0 * d * s.x[si] * s.y[si] * s.y[si];
            const double ey = 8.0 * d * s.x[si] * s.x[si] * s.y[si];
            const bool diag = i == k;
            j(k, i) = (diag ? 1.0 + 8.0 * d * xk * yk * yk - e : 0.0) - xk * ex;
            j(k, m + i) = (diag ? 8.0 * d * xk * xk * yk : 0.0) - xk * ey;
            j(m + k, i) = -yk * ((diag ? -6.0 * (1.0 - 2.0 * xk) * yk * yk : 0.0) - ex);
            j(m + k, m + i) =
                (diag ? -gk - yk * (2.0 * (d + 2.0) - 12.0 * xk * (1.0 - xk) * yk) : 0.0) + yk * ey;
        }
    }
    return j;
}

std::string_view to_string(EinsteinSign s) { return s == EinsteinSign::Plus ? "plus" : "minus"; }

std::string_view to_string(CForm f) { return f == CForm::Reference ? "reference" : "linearized"; }

BetaQuadratic beta_quadratic(const GeneralParams& p) {
    const double m = p.m, d = p.d;
    BetaQuadratic q;
    q.a = 2.0 + 3.0 * (m - 1.0) / (m * d);
    q.b = -(d + 2.0) / std::sqrt(d);
    q.c = (m + 2.0) / (4.0 * m);
    q.discriminant = q.b * q.b - 4.0 * q.a * q.c;
    return q;
}

double beta(const GeneralParams& p, EinsteinSign sign) {
    const auto q = beta_quadratic(p);
    if (!(q.discriminant > 0.0)) throw SolverError("beta: nonpositive discriminant");
    const double plus = (-q.b + std::sqrt(q.discriminant)) / (2.0 * q.a);
    return sign == EinsteinSign::Plus ? plus : q.c / (q.a * plus);
}

double beta_residual(const GeneralParams& p, double b) {
    const auto q = beta_quadratic(p);
    return q.a * b * b + q.b * b + q.c;
}

double lambda3(const GeneralParams& p, double b) {
    return 2.0 * (p.d + 2.0) * p.m * b / std::sqrt(static_cast<double>(p.d)) - (p.m + 2.0);
}

CMatrixReport c_matrices(const GeneralParams& p, EinsteinSign sign, CForm form) {
    const double m = p.m, d = p.d, sd = std::sqrt(d);
    const double b = beta(p, sign);
    CMatrixReport r;
    r.c = SmallMatrix(2);
    const double c11_coeff = form == CForm::Reference ? 4.0 * (2.0 * m - 1.0) : 4.0 * m;
    r.c(0, 0) = c11_coeff * b * b - m / 2.0;
    r.c(0, 1) = 8.0 * sd * b / m;
    r.c(1, 0) = 6.0 * m * m * (m - 2.0) * b * b * b / (d * sd);
    r.c(1, 1) = (6.0 * (m - 1.0) / d - 4.0 * m) * b * b - (m + 2.0) / 2.0;
    r.trace = r.c(0, 0) + r.c(1, 1);
    r.det = r.c(0, 0) * r.c(1, 1) - r.c(0, 1) * r.c(1, 0);
    const double disc = r.trace * r.trace - 4.0 * r.det;
    r.real_distinct = disc > 0.0;
    const double root = std::sqrt(std::max(disc, 0.0));
    // Cancellation-free pair.
    const double big = r.trace >= 0.0 ? (r.trace + root) / 2.0 : (r.trace - root) / 2.0;
    const double small = big != 0.0 ? r.det / big : 0.0;
    r.lambda1 = std::min(big, small);
    r.lambda2 = std::max(big, small);
    return r;
}

SmallMatrix l_matrix(const GeneralParams& p, EinsteinSign sign, CForm form) {
    const int m = p.m;
    const double md = m, sd = std::sqrt(static_cast<double>(p.d));
    const double b = beta(p, sign);
    const auto c = c_matrices(p, sign, form).c;
    const double j11 = -8.0 * b * b;
    const double j12 = -8.0 * sd * b / (md * md);
    const double j21 = 8.0 * md * md * b * b * b / sd;
    const double j22 = 8.0 * b * b;
    SmallMatrix l(2 * m);
    for (int r = 0; r < m; ++r)
        for (int s = 0; s < m; ++s) {
            const double id = r == s ? 1.0 : 0.0;
            l(r, s) = c(0, 0) * id + j11;
            l(r, m + s) = c(0, 1) * id + j12;
            l(m + r, s) = c(1, 0) * id + j21;
            l(m + r, m + s) = c(1, 1) * id + j22;
        }
    return l;
}

std::vector<std::vector<double>> v2_basis(int m) {
    std::vector<double> normal(static_cast<std::size_t>(2 * m), 0.0);
    for (int k = 0; k < m; ++k) normal[static_cast<std::size_t>(k)] = 1.0;
    return orthonormal_complement(normal);
}

Spectrum l_spectrum_v2(const GeneralParams& p, EinsteinSign sign, CForm form) {
    return eigen_small(restrict_to(l_matrix(p, sign, form), v2_basis(p.m)));
}

StateXY einstein_state(const GeneralParams& p, EinsteinSign sign) {
    const double b = beta(p, sign);
    const auto m = static_cast<std::size_t>(p.m);
    return StateXY{std::vector<double>(m, 1.0 / p.m),
                   std::vector<double>(m, p.m * b / std::sqrt(static_cast<double>(p.d)))};
}

std::pair<EinsteinPointGeneral, EinsteinPointGeneral> einstein_general(const GeneralParams& p, CForm form) {
    auto build = [&](EinsteinSign sign) {
        EinsteinPointGeneral e;
        e.sign = sign;
        e.beta = beta(p, sign);
        e.beta_residual = beta_residual(p, e.beta);
        e.state = einstein_state(p, sign);
        e.lambda3 = lambda3(p, e.beta);
        e.c = c_matrices(p, sign, form);
        e.spectrum_v2 = l_spectrum_v2(p, sign, form);
        return e;
    };
    return {build(EinsteinSign::Plus), build(EinsteinSign::Minus)};
}

TrajectoryGeneral integrate_general(const StateXY& s0, const GeneralParams& p, double u_end,
                                    const FlowOptionsGeneral& opts) {
    if (s0.x.size() != static_cast<std::size_t>(p.m) || s0.y.size() != s0.x.size()) {
        throw ConfigError("integrate_general: state dimension does not match m");
    }
    if (simplex_defect(s0) > 1e-8) throw ConfigError("integrate_general: initial state off the simplex");
    for (std::size_t k = 0; k < s0.x.size(); ++k) {
        if (!(s0.x[k] > 0.0) || !(s0.y[k] > 0.0)) {
            throw ConfigError("integrate_general: initial X and Y must be positive");
        }
    }

    const auto m = static_cast<std::size_t>(p.m);
    const StateXY targets[] = {einstein_state(p, EinsteinSign::Plus), einstein_state(p, EinsteinSign::Minus)};
    const EinsteinSign signs[] = {EinsteinSign::Plus, EinsteinSign::Minus};
    bool armed[2];
    for (int k = 0; k < 2; ++k) armed[k] = distance(targets[k], s0) >= opts.arrival_tol;

    TrajectoryGeneral traj;
    TerminalEventGeneral event;

    const OdeRhs rhs = [&p](double, std::span<const double> z, std::span<double> dz) {
        const auto v = vf_general_packed(z, p);
        std::copy(v.begin(), v.end(), dz.begin());
    };
    const OdeProjection project = [&traj, m](std::span<double> z) {
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) sum += z[k];
        traj.max_simplex_drift = std::max(traj.max_simplex_drift, std::abs(sum - 1.0));
        for (std::size_t k = 0; k < m; ++k) z[k] /= sum;
    };
    const OdeStop stop = [&](double u, std::span<const double> z) {
        for (std::size_t k = 0; k < m; ++k) {
            if (z[m + k] <= 0.0) {
                event = {TerminalEventGeneral::Kind::LeftDomain, std::nullopt};
                return true;
            }
        }
        if (opts.extra_stop && opts.extra_stop(u, z)) {
            event = {TerminalEventGeneral::Kind::MaxTime, std::nullopt};
            return true;
        }
        if (opts.stop_on_arrival) {
            const auto s = StateXY::unpack(z);
            for (int k = 0; k < 2; ++k) {
                if (armed[k] && distance(targets[k], s) < opts.arrival_tol) {
                    event = {TerminalEventGeneral::Kind::ReachedEinsteinPoint, signs[k]};
                    return true;
                }
            }
        }
        return false;
    };

    const auto sol = dopri45(rhs, 0.0, s0.packed(), u_end, opts.integrator, project, stop);
    traj.u_grid = sol.t;
    traj.step_diagnostics = sol.diagnostics;
    for (const auto& z : sol.y) traj.states.push_back(StateXY::unpack(z));
    if (sol.stopped) {
        traj.terminal_event = event;
    } else {
        traj.terminal_event = {TerminalEventGeneral::Kind::MaxTime, std::nullopt};
        for (int k = 0; k < 2; ++k)
            if (distance(targets[k], traj.states.back()) < opts.arrival_tol)
                traj.terminal_event = {TerminalEventGeneral::Kind::ReachedEinsteinPoint, signs[k]};
    }
    return traj;
}

MetricPathGeneral reconstruct_general(const TrajectoryGeneral& traj, double a_hat0, const GeneralParams& p) {
    if (traj.states.empty()) throw ConfigError("reconstruct_general: empty trajectory");
    if (!(a_hat0 > 0.0)) throw ConfigError("reconstruct_general: a_hat0 must be positive");
    MetricPathGeneral path;
    std::size_t n = traj.states.size();
    for (std::size_t k = 0; k < traj.states.size() && n == traj.states.size(); ++k)
        for (double y : traj.states[k].y)
            if (y == 0.0) {
                n = k;
                path.truncated = true;
                break;
            }
    const auto m = static_cast<std::size_t>(p.m);
    path.a.assign(m, {});
    path.b.assign(m, {});
    if (n == 0) return path;

    std::vector<double> u(traj.u_grid.begin(), traj.u_grid.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> e(n), de(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = traj.states[k];
        e[k] = e_general(s, p);
        const auto v = vf_general_packed(s.packed(), p);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += 8.0 * p.d * (s.x[i] * s.y[i] * s.y[i] * v[i] + s.x[i] * s.x[i] * s.y[i] * v[m + i]);
        }
        de[k] = acc;
    }
    const auto log_a = cumulative_hermite(u, e, de);
    std::vector<double> ah(n), dah(n);
    for (std::size_t k = 0; k < n; ++k) {
        ah[k] = a_hat0 * std::exp(log_a[k]);
        dah[k] = e[k] * ah[k];
    }
    path.tau = cumulative_hermite(u, ah, dah);
    path.u = std::move(u);
    for (std::size_t i = 0; i < m; ++i) {
        path.a[i].resize(n);
        path.b[i].resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            path.a[i][k] = traj.states[k].x[i] * ah[k];
            path.b[i][k] = ah[k] / traj.states[k].y[i];
        }
    }
    path.a_hat = std::move(ah);
    return path;
}

std::vector<std::vector<double>> db_dtau_general(const MetricPathGeneral& path) {
    std::vector<std::vector<double>> out;
    for (const auto& bk : path.b) {
        auto db = lagrange_derivative(path.u, bk);
        for (std::size_t k = 0; k < db.size(); ++k) db[k] /= path.a_hat[k];
        out.push_back(std::move(db));
    }
    return out;
}

ReconstructionDefectGeneral reconstruction_defect_general(const MetricPathGeneral& path,
                                                          const TrajectoryGeneral& traj, const GeneralParams& p) {
    const std::size_t n = path.a_hat.size();
    if (n < 5) throw ConfigError("reconstruction_defect_general: need at least 5 samples");
    const double d = p.d;
    const auto db = db_dtau_general(path);
    ReconstructionDefectGeneral r;
    for (std::size_t i = 0; i < path.a.size(); ++i) {
        const auto da = lagrange_derivative(path.u, path.a[i]);
        for (std::size_t k = 0; k < n; ++k) {
            const double x = traj.states[k].x[i], y = traj.states[k].y[i];
            const double ta = 0.5 + x + 4.0 * d * x * x * y * y;
            const double tb = 2.0 * (d + 2.0) - 6.0 * x * (1.0 - x) * y;
            r.a = std::max(r.a, std::abs(da[k] / path.a_hat[k] - ta) / std::max(std::abs(ta), 1.0));
            r.b = std::max(r.b, std::abs(db[i][k] - tb) / std::max(std::abs(tb), 1.0));
        }
    }
    return r;
}

std::vector<bool> ricci_positive_general(const StateXY& s, const GeneralParams& p) {
    std::vector<bool> out;
    for (std::size_t k = 0; k < s.x.size(); ++k)
        out.push_back(2.0 * (p.d + 2.0) - 6.0 * s.x[k] * (1.0 - s.x[k]) * s.y[k] > 0.0);
    return out;
}

std::optional<double> last_decade_slope(std::span<const double> tau, std::span<const double> v) {
    if (tau.empty()) return std::nullopt;
    const double end = tau.back();
    std::vector<double> x, y;
    for (std::size_t k = 0; k < tau.size(); ++k)
        if (tau[k] >= 0.1 * end) {
            x.push_back(tau[k]);
            y.push_back(v[k]);
        }
    if (x.size() < 10 || !(end > 0.0)) return std::nullopt;
    return linear_fit(x, y).second;
}

}  // namespace bundleflow
