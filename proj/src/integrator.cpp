#include "bundleflow/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "bundleflow/errors.hpp"

namespace bundleflow {

namespace {

// Dormand–Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

[[noreturn]] void fail(const std::string& why, double t, const std::vector<double>& y) {
    std::ostringstream os;
    os.precision(17);
    os << "dopri45: " << why << " at t = " << t;
    throw IntegratorError(os.str(), t, y);
}

}  // namespace

std::vector<double> OdeSolution::at(double tq) const {
    if (t.empty()) return {};
    const bool forward = t.size() < 2 || t.back() >= t.front();
    // Index k with tq in [t[k], t[k+1]] (in the direction of integration).
    std::size_t k = 0;
    if (forward) {
        auto it = std::upper_bound(t.begin(), t.end(), tq);
        k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    } else {
        auto it = std::upper_bound(t.begin(), t.end(), tq, std::greater<>());
        k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    }
    if (k + 1 >= t.size()) return y.back();
    const double h = t[k + 1] - t[k];
    const double s = (tq - t[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    std::vector<double> out(y[k].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = h00 * y[k][i] + h10 * h * dy[k][i] + h01 * y[k + 1][i] + h11 * h * dy[k + 1][i];
    }
    return out;
}

OdeSolution dopri45(const OdeRhs& f, double t0, std::vector<double> y0, double t_end,
                    const IntegratorOptions& opts, const OdeProjection& project, const OdeStop& stop) {
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0) || !(opts.h_max > 0.0) || !(opts.h_init > 0.0)) {
        throw ConfigError("dopri45: tolerances and step bounds must be positive");
    }
    if (!all_finite(y0)) throw ConfigError("dopri45: non-finite initial state");

    const std::size_t n = y0.size();
    const double dir = t_end >= t0 ? 1.0 : -1.0;

    auto eval = [&](double t, std::span<const double> y, std::span<double> out) {
        try {
            f(t, y, out);
        } catch (const IntegratorError&) {
            throw;
        } catch (const std::exception& e) {
            fail(std::string("right-hand side failed: ") + e.what(), t, {y.begin(), y.end()});
        }
        if (!all_finite(out)) fail("non-finite right-hand side", t, {y.begin(), y.end()});
    };

    OdeSolution sol;
    if (project) project(y0);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
    eval(t0, y0, k1);
    sol.t.push_back(t0);
    sol.y.push_back(y0);
    sol.dy.push_back(k1);

    if (stop && stop(t0, y0)) {
        sol.stopped = true;
        return sol;
    }

    double t = t0;
    std::vector<double> y = std::move(y0);
    double h = std::min(opts.h_init, opts.h_max);
    int rejected = 0;
    long steps = 0;

    while (dir * (t_end - t) > 0.0) {
        if (++steps > opts.max_steps) fail("maximum step count exceeded", t, y);
        bool last = false;
        if (h >= dir * (t_end - t)) {
            h = dir * (t_end - t);
            last = true;
        }
        const double hs = dir * h;

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * a21 * k1[i];
        eval(t + c2 * hs, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
        eval(t + c3 * hs, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        eval(t + c4 * hs, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        eval(t + c5 * hs, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        eval(t + hs, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        eval(t + hs, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e =
                hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / static_cast<double>(std::max<std::size_t>(n, 1)));

        if (err <= 1.0) {
            const double t_new = last ? t_end : t + hs;
            if (project) {
                project(ynew);
                eval(t_new, ynew, k7);
            }
            sol.diagnostics.push_back({hs, err, rejected});
            rejected = 0;
            t = t_new;
            y = ynew;
            k1 = k7;
            sol.t.push_back(t);
            sol.y.push_back(y);
            sol.dy.push_back(k1);
            if (stop && stop(t, y)) {
                sol.stopped = true;
                return sol;
            }
            const double grow = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * grow, opts.h_max);
        } else {
            ++rejected;
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            if (h < opts.h_min * std::max(1.0, std::abs(t))) fail("step-size underflow", t, y);
        }
    }
    return sol;
}

}  // namespace bundleflow
