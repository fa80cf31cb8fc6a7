#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bundleflow {

/// Base data of the bundle: m quaternionic Kähler factors with quaternionic
/// dimensions n_i and Einstein constants Λ_i. The derived q_i = Λ_i/(n_i+2)
/// enter every vector field.
///
/// Instances are immutable and only obtainable through make_params(), so the
/// invariants (m >= 2, n_i >= 1, Λ_i > 0, q consistent) always hold.
class BundleParams {
public:
    int m() const { return static_cast<int>(n_.size()); }
    const std::vector<int>& n() const { return n_; }
    const std::vector<double>& lambda() const { return lambda_; }
    const std::vector<double>& q() const { return q_; }

    int n(std::size_t i) const { return n_[i]; }
    double lambda(std::size_t i) const { return lambda_[i]; }
    double q(std::size_t i) const { return q_[i]; }

    friend bool operator==(const BundleParams&, const BundleParams&) = default;

private:
    friend BundleParams make_params(int m, std::span<const int> n, std::span<const double> lambda);
    BundleParams() = default;

    std::vector<int> n_;
    std::vector<double> lambda_;
    std::vector<double> q_;
};

/// Validates (m, n, Λ) and derives q_i = Λ_i/(n_i+2).
///
/// Throws ConfigError on a length mismatch, m < 2, n_i < 1, or Λ_i <= 0
/// (negative Λ would be the pseudo-Riemannian regime, which is unsupported).
BundleParams make_params(int m, std::span<const int> n, std::span<const double> lambda);

/// Convenience for the common m = 2 case.
BundleParams make_params2(int n1, int n2, double lambda1, double lambda2);

/// Λ_i = n_i + 2 normalization, so q_i = 1.
BundleParams normalized_params2(int n1, int n2);

/// Rescaled phase-space point Y_i = ψ/b_i of the m = 2 system.
struct StateY {
    double y1 = 0.0;
    double y2 = 0.0;

    double operator[](std::size_t i) const { return i == 0 ? y1 : y2; }
    friend bool operator==(const StateY&, const StateY&) = default;
};

double distance(const StateY& a, const StateY& b);
double norm(const StateY& a);

/// Equal-dimension m >= 3 family: n_1 = ... = n_m = d and Λ_i = d + 2,
/// so that q_i = 1.
struct GeneralParams {
    int m = 3;
    int d = 1;

    friend bool operator==(const GeneralParams&, const GeneralParams&) = default;
};

/// Throws ConfigError unless m >= 3 and d >= 1.
GeneralParams make_general_params(int m, int d);

/// Point of the m >= 3 phase space: X_k = a_k/â on the simplex ΣX_k = 1,
/// Y_k = â/b_k.
struct StateXY {
    std::vector<double> x;
    std::vector<double> y;

    std::size_t m() const { return x.size(); }
    /// Concatenated (X, Y) coordinates, length 2m.
    std::vector<double> packed() const;
    static StateXY unpack(std::span<const double> z);
};

inline constexpr double kSimplexTolerance = 1e-12;

/// |ΣX_k - 1|.
double simplex_defect(const StateXY& s);
double distance(const StateXY& a, const StateXY& b);

}  // namespace bundleflow
