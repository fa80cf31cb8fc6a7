#include "bundleflow/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "bundleflow/errors.hpp"

namespace bundleflow {

SmallMatrix::SmallMatrix(int order) : order_(order), entries_(static_cast<std::size_t>(order * order), 0.0) {
    if (order < 1 || order > kMaxOrder) {
        throw ConfigError("SmallMatrix: order " + std::to_string(order) + " outside [1, 64]");
    }
}

SmallMatrix::SmallMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SmallMatrix(static_cast<int>(rows.size())) {
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != order_) throw ConfigError("SmallMatrix: ragged initializer");
        int j = 0;
        for (double v : row) (*this)(i, j++) = v;
        ++i;
    }
}

SmallMatrix SmallMatrix::identity(int order) {
    SmallMatrix m(order);
    for (int i = 0; i < order; ++i) m(i, i) = 1.0;
    return m;
}

SmallMatrix SmallMatrix::diagonal(std::span<const double> d) {
    SmallMatrix m(static_cast<int>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
}

SmallMatrix SmallMatrix::transposed() const {
    SmallMatrix t(order_);
    for (int i = 0; i < order_; ++i)
        for (int j = 0; j < order_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

std::vector<double> SmallMatrix::apply(std::span<const double> v) const {
    std::vector<double> out(static_cast<std::size_t>(order_), 0.0);
    for (int i = 0; i < order_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < order_; ++j) acc += (*this)(i, j) * v[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

bool SmallMatrix::is_symmetric(double tol) const {
    for (int i = 0; i < order_; ++i)
        for (int j = i + 1; j < order_; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
}

bool SmallMatrix::is_finite() const {
    return std::all_of(entries_.begin(), entries_.end(), [](double v) { return std::isfinite(v); });
}

double SmallMatrix::norm() const {
    return std::sqrt(std::inner_product(entries_.begin(), entries_.end(), entries_.begin(), 0.0));
}

std::uint64_t SmallMatrix::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : entries_) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

SmallMatrix operator+(const SmallMatrix& a, const SmallMatrix& b) {
    SmallMatrix c(a.order_);
    for (std::size_t k = 0; k < c.entries_.size(); ++k) c.entries_[k] = a.entries_[k] + b.entries_[k];
    return c;
}

SmallMatrix operator-(const SmallMatrix& a, const SmallMatrix& b) {
    SmallMatrix c(a.order_);
    for (std::size_t k = 0; k < c.entries_.size(); ++k) c.entries_[k] = a.entries_[k] - b.entries_[k];
    return c;
}

SmallMatrix operator*(const SmallMatrix& a, const SmallMatrix& b) {
    SmallMatrix c(a.order_);
    for (int i = 0; i < a.order_; ++i)
        for (int k = 0; k < a.order_; ++k) {
            const double aik = a(i, k);
            for (int j = 0; j < a.order_; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

SmallMatrix operator*(double s, const SmallMatrix& a) {
    SmallMatrix c(a);
    for (double& v : c.entries_) v *= s;
    return c;
}

bool Spectrum::any_degenerate() const {
    return std::any_of(degenerate_flags.begin(), degenerate_flags.end(), [](bool b) { return b; });
}

int Spectrum::count_positive() const {
    return static_cast<int>(std::count_if(eigenvalues.begin(), eigenvalues.end(),
                                          [](auto l) { return l.real() >= kDegenerateThreshold; }));
}

int Spectrum::count_negative() const {
    return static_cast<int>(std::count_if(eigenvalues.begin(), eigenvalues.end(),
                                          [](auto l) { return l.real() <= -kDegenerateThreshold; }));
}

std::vector<double> Spectrum::real_parts() const {
    std::vector<double> out;
    out.reserve(eigenvalues.size());
    for (auto l : eigenvalues) out.push_back(l.real());
    return out;
}

std::vector<double> Spectrum::real_eigenvector(std::size_t i) const {
    std::vector<double> out;
    out.reserve(eigenvectors[i].size());
    for (auto c : eigenvectors[i]) out.push_back(c.real());
    return out;
}

namespace {

using CVec = std::vector<std::complex<double>>;

// Unit norm, and the largest-magnitude component rotated onto the positive
// real axis (ties broken by lowest index) so output is reproducible.
void normalize_phase(CVec& v) {
    double nrm = 0.0;
    for (auto c : v) nrm += std::norm(c);
    nrm = std::sqrt(nrm);
    std::size_t pivot = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > best * (1.0 + 1e-12)) {
            best = a;
            pivot = i;
        }
    }
    const std::complex<double> phase = std::conj(v[pivot]) / std::abs(v[pivot]);
    for (auto& c : v) {
        c = c * phase / nrm;
        if (c.imag() == 0.0) c = {c.real(), 0.0};
    }
    v[pivot] = {v[pivot].real(), 0.0};
}

[[noreturn]] void no_convergence(const SmallMatrix& m) {
    std::ostringstream os;
    os << "eigen_small: eigenvalue iteration did not converge (order " << m.order() << ", matrix hash 0x"
       << std::hex << m.hash() << ")";
    throw SolverError(os.str());
}

}  // namespace

Spectrum eigen_small(const SmallMatrix& m) {
    if (m.order() < 1 || m.order() > SmallMatrix::kMaxOrder) {
        throw ConfigError("eigen_small: order outside [1, 64]");
    }
    if (!m.is_finite()) throw ConfigError("eigen_small: non-finite matrix entries");

    const int n = m.order();
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = m(i, j);

    std::vector<std::pair<std::complex<double>, CVec>> pairs;
    pairs.reserve(static_cast<std::size_t>(n));

    if (m.is_symmetric()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        if (es.info() != Eigen::Success) no_convergence(m);
        for (int k = 0; k < n; ++k) {
            CVec v(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = es.eigenvectors()(i, k);
            pairs.emplace_back(std::complex<double>(es.eigenvalues()(k), 0.0), std::move(v));
        }
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
        if (es.info() != Eigen::Success) no_convergence(m);
        for (int k = 0; k < n; ++k) {
            CVec v(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = es.eigenvectors()(i, k);
            pairs.emplace_back(es.eigenvalues()(k), std::move(v));
        }
    }

    for (auto& [lambda, v] : pairs) normalize_phase(v);
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r) {
        if (l.first.real() != r.first.real()) return l.first.real() < r.first.real();
        return l.first.imag() < r.first.imag();
    });

    Spectrum s;
    for (auto& [lambda, v] : pairs) {
        s.eigenvalues.push_back(lambda);
        s.eigenvectors.push_back(std::move(v));
        s.degenerate_flags.push_back(std::abs(lambda.real()) < kDegenerateThreshold);
    }
    return s;
}

double max_residual(const SmallMatrix& m, const Spectrum& s) {
    const int n = m.order();
    double worst = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            std::complex<double> mv = 0.0;
            for (int j = 0; j < n; ++j) mv += m(i, j) * s.eigenvectors[k][static_cast<std::size_t>(j)];
            acc += std::norm(mv - s.eigenvalues[k] * s.eigenvectors[k][static_cast<std::size_t>(i)]);
        }
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

SmallMatrix fd_jacobian(const VectorField& f, std::span<const double> p, double h) {
    if (!(h > 0.0)) throw ConfigError("fd_jacobian: step must be positive");
    const int n = static_cast<int>(p.size());
    SmallMatrix jac(n);
    std::vector<double> probe(p.begin(), p.end());

    auto eval = [&](std::span<const double> x) {
        std::vector<double> out;
        try {
            out = f(x);
        } catch (const std::exception& e) {
            throw SolverError(std::string("fd_jacobian: evaluation failed inside stencil: ") + e.what());
        }
        if (static_cast<int>(out.size()) != n) throw SolverError("fd_jacobian: field dimension mismatch");
        for (double v : out)
            if (!std::isfinite(v)) throw SolverError("fd_jacobian: non-finite value inside stencil");
        return out;
    };

    for (int j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        probe[sj] = p[sj] + h;
        const auto fp = eval(probe);
        probe[sj] = p[sj] - h;
        const auto fm = eval(probe);
        probe[sj] = p[sj];
        for (int i = 0; i < n; ++i) {
            const auto si = static_cast<std::size_t>(i);
            jac(i, j) = (fp[si] - fm[si]) / (2.0 * h);
        }
    }
    return jac;
}

std::vector<std::vector<double>> orthonormal_complement(std::span<const double> normal) {
    const std::size_t n = normal.size();
    double nrm = 0.0;
    for (double v : normal) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (n < 2 || nrm == 0.0) throw ConfigError("orthonormal_complement: need a nonzero normal in dim >= 2");

    // H = I - 2 w w^T / (w^T w), w = e_1 - n̂ (or e_1 + n̂ when that is better
    // conditioned); H e_1 = ±n̂ and the remaining columns of H span n̂^⊥.
    std::vector<double> w(n);
    const double sign = normal[0] >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) w[i] = normal[i] / nrm * sign;
    w[0] += 1.0;
    double ww = 0.0;
    for (double v : w) ww += v * v;

    std::vector<std::vector<double>> basis;
    basis.reserve(n - 1);
    for (std::size_t col = 1; col < n; ++col) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = (i == col ? 1.0 : 0.0) - 2.0 * w[i] * w[col] / ww;
        basis.push_back(std::move(v));
    }
    return basis;
}

SmallMatrix restrict_to(const SmallMatrix& m, const std::vector<std::vector<double>>& basis) {
    const int k = static_cast<int>(basis.size());
    SmallMatrix r(k);
    for (int j = 0; j < k; ++j) {
        const auto mb = m.apply(basis[static_cast<std::size_t>(j)]);
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            const auto& bi = basis[static_cast<std::size_t>(i)];
            for (std::size_t t = 0; t < bi.size(); ++t) acc += bi[t] * mb[t];
            r(i, j) = acc;
        }
    }
    return r;
}

}  // namespace bundleflow
