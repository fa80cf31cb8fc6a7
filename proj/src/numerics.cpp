#include "bundleflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bundleflow/errors.hpp"

namespace bundleflow {

std::vector<double> cumulative_hermite(std::span<const double> x, std::span<const double> f,
                                       std::span<const double> df) {
    if (x.size() != f.size() || x.size() != df.size()) {
        throw ConfigError("cumulative_hermite: length mismatch");
    }
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        const double h = x[k + 1] - x[k];
        out[k + 1] = out[k] + 0.5 * h * (f[k] + f[k + 1]) + h * h / 12.0 * (df[k] - df[k + 1]);
    }
    return out;
}

std::vector<double> lagrange_derivative(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 5 || y.size() != n) throw ConfigError("lagrange_derivative: need >= 5 matching samples");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = std::min(i >= 2 ? i - 2 : 0, n - 5);
        double acc = 0.0;
        // d/dx of the Lagrange interpolant through x[lo..lo+4], at x[i].
        for (std::size_t j = lo; j < lo + 5; ++j) {
            double dl = 0.0;
            if (j == i) {
                for (std::size_t k = lo; k < lo + 5; ++k)
                    if (k != j) dl += 1.0 / (x[j] - x[k]);
            } else {
                double num = 1.0;
                double den = x[j] - x[i];
                for (std::size_t k = lo; k < lo + 5; ++k) {
                    if (k == j) continue;
                    if (k != i) {
                        num *= x[i] - x[k];
                        den *= x[j] - x[k];
                    }
                }
                // l_j'(x_i) = Π_{k≠i,j}(x_i − x_k) / Π_{k≠j}(x_j − x_k)
                dl = num / den;
            }
            acc += y[j] * dl;
        }
        out[i] = acc;
    }
    return out;
}

double trisect_minimum(const std::function<double(double)>& f, double a, double b, double tol) {
    while (b - a > tol) {
        const double m1 = a + (b - a) / 3.0;
        const double m2 = b - (b - a) / 3.0;
        if (m1 <= a || m2 >= b) break;  // no representable progress
        if (f(m1) < f(m2)) {
            b = m2;
        } else {
            a = m1;
        }
    }
    return 0.5 * (a + b);
}

double bisect_root(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a);
    const double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0) || !std::isfinite(fa) || !std::isfinite(fb)) {
        std::ostringstream os;
        os.precision(17);
        os << "bisect_root: no sign change on [" << a << ", " << b << "] (f = " << fa << ", " << fb << ")";
        throw SolverError(os.str());
    }
    while (std::abs(b - a) > tol) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

std::vector<double> halton(int index, std::span<const int> bases) {
    std::vector<double> out;
    out.reserve(bases.size());
    for (int base : bases) {
        double f = 1.0;
        double r = 0.0;
        int i = index;
        while (i > 0) {
            f /= base;
            r += f * (i % base);
            i /= base;
        }
        out.push_back(r);
    }
    return out;
}

std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 2 || y.size() != x.size()) throw ConfigError("linear_fit: need >= 2 matching samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw SolverError("linear_fit: degenerate abscissae");
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

}  // namespace bundleflow
