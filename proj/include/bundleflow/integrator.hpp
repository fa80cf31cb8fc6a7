#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bundleflow {

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    /// Largest allowed |h|. Keeps the stored grid fine enough for
    /// differentiating reconstructed quantities.
    double h_max = 0.02;
    double h_init = 1e-3;
    /// Relative step floor; |h| below h_min·max(1,|t|) is an underflow.
    double h_min = 1e-14;
    long max_steps = 5'000'000;
};

struct StepDiagnostic {
    double h = 0.0;
    /// Scaled local error estimate of the accepted step (<= 1).
    double error_norm = 0.0;
    int rejected_before = 0;
};

/// dy/dt = f(t, y), written into the output span.
using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;
/// Applied to each accepted state (e.g. renormalization onto a constraint).
using OdeProjection = std::function<void(std::span<double>)>;
/// Checked after each accepted step; returning true ends the integration.
using OdeStop = std::function<bool(double, std::span<const double>)>;

struct OdeSolution {
    std::vector<double> t;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> dy;
    /// diagnostics[k] describes the step from t[k] to t[k+1].
    std::vector<StepDiagnostic> diagnostics;
    bool stopped = false;

    /// Cubic Hermite interpolation between stored samples.
    std::vector<double> at(double tq) const;
};

/// Adaptive Dormand–Prince 5(4) integration from t0 to t_end (either direction).
///
/// Throws IntegratorError (carrying the last accepted state) on step-size
/// underflow, a throwing or non-finite right-hand side, or max_steps.
OdeSolution dopri45(const OdeRhs& f, double t0, std::vector<double> y0, double t_end,
                    const IntegratorOptions& opts, const OdeProjection& project = {},
                    const OdeStop& stop = {});

}  // namespace bundleflow
