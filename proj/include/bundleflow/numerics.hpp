#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bundleflow {

/// Cumulative integral of f on a (possibly nonuniform, possibly decreasing)
/// grid using the Hermite-corrected trapezoid rule
///   ∫ f ≈ h/2 (f_k + f_{k+1}) + h²/12 (f'_k − f'_{k+1}),
/// which is fourth-order accurate. out[0] = 0.
std::vector<double> cumulative_hermite(std::span<const double> x, std::span<const double> f,
                                       std::span<const double> df);

/// Derivative dy/dx at every sample from a 5-point Lagrange stencil
/// (shifted at the ends). x must be strictly monotone with at least 5 points.
std::vector<double> lagrange_derivative(std::span<const double> x, std::span<const double> y);

/// Minimizer of a convex function on [a, b] by trisection down to width tol.
double trisect_minimum(const std::function<double(double)>& f, double a, double b, double tol);

/// Root of f on [a, b] by bisection to width tol. Requires a sign change;
/// throws SolverError otherwise.
double bisect_root(const std::function<double(double)>& f, double a, double b, double tol);

/// Halton point with the given prime bases (index starts at 1).
std::vector<double> halton(int index, std::span<const int> bases);

/// Least-squares fit y ≈ c0 + c1·x. Returns {c0, c1}.
std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace bundleflow
