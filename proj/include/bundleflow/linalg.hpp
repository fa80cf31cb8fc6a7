#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace bundleflow {

/// Dense square real matrix of small order (row-major).
class SmallMatrix {
public:
    static constexpr int kMaxOrder = 64;

    SmallMatrix() = default;
    explicit SmallMatrix(int order);
    SmallMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static SmallMatrix identity(int order);
    static SmallMatrix diagonal(std::span<const double> d);

    int order() const { return order_; }
    double& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i * order_ + j)]; }
    double operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i * order_ + j)]; }
    std::span<const double> entries() const { return entries_; }

    SmallMatrix transposed() const;
    std::vector<double> apply(std::span<const double> v) const;
    bool is_symmetric(double tol = 0.0) const;
    bool is_finite() const;
    /// Frobenius norm.
    double norm() const;
    /// FNV-1a hash of the raw entries; used in diagnostics.
    std::uint64_t hash() const;

    friend SmallMatrix operator+(const SmallMatrix& a, const SmallMatrix& b);
    friend SmallMatrix operator-(const SmallMatrix& a, const SmallMatrix& b);
    friend SmallMatrix operator*(const SmallMatrix& a, const SmallMatrix& b);
    friend SmallMatrix operator*(double s, const SmallMatrix& a);

private:
    int order_ = 0;
    std::vector<double> entries_;
};

inline constexpr double kDegenerateThreshold = 1e-9;

/// Eigen-decomposition sorted by (Re λ, Im λ) ascending.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    /// Unit-norm eigenvectors, one per eigenvalue.
    std::vector<std::vector<std::complex<double>>> eigenvectors;
    /// Set where |Re λ| < kDegenerateThreshold.
    std::vector<bool> degenerate_flags;

    std::size_t size() const { return eigenvalues.size(); }
    bool any_degenerate() const;
    int count_positive() const;
    int count_negative() const;
    /// Real parts, in the stored order.
    std::vector<double> real_parts() const;
    /// Real part of eigenvector i (for eigenvalues known to be real).
    std::vector<double> real_eigenvector(std::size_t i) const;
};

/// Full eigen-decomposition of M (order <= 64). Symmetric input takes the
/// self-adjoint path so eigenvalues come out exactly real.
///
/// Throws SolverError (with the matrix hash) if the iteration does not
/// converge, and ConfigError for non-finite entries or oversize input.
Spectrum eigen_small(const SmallMatrix& m);

/// max_i ‖M v_i − λ_i v_i‖.
double max_residual(const SmallMatrix& m, const Spectrum& s);

using VectorField = std::function<std::vector<double>(std::span<const double>)>;

/// Central-difference Jacobian of f at p with step h.
/// Throws SolverError if f throws or returns non-finite values in the stencil.
SmallMatrix fd_jacobian(const VectorField& f, std::span<const double> p, double h);

/// Orthonormal basis (as columns of a dim x (dim-1) array, column-major
/// vectors) of the hyperplane orthogonal to `normal`, built by a Householder
/// reflection that maps e_1 onto normal/‖normal‖.
std::vector<std::vector<double>> orthonormal_complement(std::span<const double> normal);

/// Matrix of M restricted to span(basis): B^T M B for an orthonormal basis.
SmallMatrix restrict_to(const SmallMatrix& m, const std::vector<std::vector<double>>& basis);

}  // namespace bundleflow
