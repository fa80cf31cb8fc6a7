#include "bundleflow/params.hpp"

#include <cmath>
#include <string>

#include "bundleflow/errors.hpp"

namespace bundleflow {

BundleParams make_params(int m, std::span<const int> n, std::span<const double> lambda) {
    if (m < 2) {
        throw ConfigError("make_params: need m >= 2, got " + std::to_string(m));
    }
    if (n.size() != static_cast<std::size_t>(m) || lambda.size() != static_cast<std::size_t>(m)) {
        throw ConfigError("make_params: dimension mismatch (m = " + std::to_string(m) +
                          ", |n| = " + std::to_string(n.size()) +
                          ", |lambda| = " + std::to_string(lambda.size()) + ")");
    }
    BundleParams p;
    p.n_.assign(n.begin(), n.end());
    p.lambda_.assign(lambda.begin(), lambda.end());
    p.q_.resize(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < 1) {
            throw ConfigError("make_params: n[" + std::to_string(i) + "] = " + std::to_string(n[i]) +
                              " < 1");
        }
        if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i])) {
            throw ConfigError("make_params: nonpositive Einstein constant lambda[" + std::to_string(i) +
                              "] = " + std::to_string(lambda[i]) +
                              " (pseudo-Riemannian regime is unsupported)");
        }
        p.q_[i] = lambda[i] / (n[i] + 2);
    }
    return p;
}

BundleParams make_params2(int n1, int n2, double lambda1, double lambda2) {
    const int n[] = {n1, n2};
    const double l[] = {lambda1, lambda2};
    return make_params(2, n, l);
}

BundleParams normalized_params2(int n1, int n2) {
    return make_params2(n1, n2, n1 + 2.0, n2 + 2.0);
}

double distance(const StateY& a, const StateY& b) { return std::hypot(a.y1 - b.y1, a.y2 - b.y2); }

double norm(const StateY& a) { return std::hypot(a.y1, a.y2); }

GeneralParams make_general_params(int m, int d) {
    if (m < 3) throw ConfigError("make_general_params: need m >= 3, got " + std::to_string(m));
    if (d < 1) throw ConfigError("make_general_params: need d >= 1, got " + std::to_string(d));
    return GeneralParams{m, d};
}

std::vector<double> StateXY::packed() const {
    std::vector<double> z(x);
    z.insert(z.end(), y.begin(), y.end());
    return z;
}

StateXY StateXY::unpack(std::span<const double> z) {
    const std::size_t m = z.size() / 2;
    return StateXY{{z.begin(), z.begin() + m}, {z.begin() + m, z.end()}};
}

double simplex_defect(const StateXY& s) {
    double sum = 0.0;
    for (double v : s.x) sum += v;
    return std::abs(sum - 1.0);
}

double distance(const StateXY& a, const StateXY& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.x.size(); ++k) {
        acc += (a.x[k] - b.x[k]) * (a.x[k] - b.x[k]);
        acc += (a.y[k] - b.y[k]) * (a.y[k] - b.y[k]);
    }
    return std::sqrt(acc);
}

}  // namespace bundleflow
