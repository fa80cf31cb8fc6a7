#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "bundleflow/integrator.hpp"
#include "bundleflow/linalg.hpp"
#include "bundleflow/params.hpp"

namespace bundleflow {

/// E(X,Y) = m/2 + 1 + Σ 4d Xₖ²Yₖ².
double e_general(const StateXY& s, const GeneralParams& p);

/// dXₖ = 1/2 + Xₖ + 4dXₖ²Yₖ² − XₖE, dYₖ = −Yₖ(2(d+2)Yₖ − 6Xₖ(1−Xₖ)Yₖ² − E).
/// Throws ConfigError if |ΣXₖ − 1| > 1e-8.
StateXY vf_general(const StateXY& s, const GeneralParams& p);

/// Same field on packed coordinates (X, Y), without the simplex check.
std::vector<double> vf_general_packed(std::span<const double> z, const GeneralParams& p);

/// Analytic 2m×2m Jacobian in packed coordinates.
SmallMatrix jacobian_general(const StateXY& s, const GeneralParams& p);

enum class EinsteinSign { Plus, Minus };
std::string_view to_string(EinsteinSign s);

/// Which value of the (1,1) entry of C to use. Reference: 4(2m−1)β² − m/2.
/// Linearized: 4mβ² − m/2, the value obtained by linearizing the field at
/// the Einstein point (the two differ by 4(m−1)β²; see README).
enum class CForm { Reference, Linearized };
std::string_view to_string(CForm f);

struct BetaQuadratic {
    double a = 0.0, b = 0.0, c = 0.0;
    double discriminant = 0.0;
};

/// (2 + 3(m−1)/(md))β² − ((d+2)/√d)β + (m+2)/(4m).
BetaQuadratic beta_quadratic(const GeneralParams& p);
double beta(const GeneralParams& p, EinsteinSign sign);
double beta_residual(const GeneralParams& p, double beta);

/// λ₃ = 2(d+2)mβ/√d − (m+2).
double lambda3(const GeneralParams& p, double beta);

struct CMatrixReport {
    SmallMatrix c;
    /// λ₁ <= λ₂.
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double trace = 0.0;
    double det = 0.0;
    bool real_distinct = false;
};

CMatrixReport c_matrices(const GeneralParams& p, EinsteinSign sign, CForm form = CForm::Reference);

/// L± = [[c₁₁I − 8β²J, c₁₂I − (8√d/m²)βJ], [c₂₁I + (8m²/√d)β³J, c₂₂I + 8β²J]].
SmallMatrix l_matrix(const GeneralParams& p, EinsteinSign sign, CForm form = CForm::Reference);

/// Orthonormal basis of V₂ = {ΣXₖ = 0} in R^{2m}.
std::vector<std::vector<double>> v2_basis(int m);

/// Spectrum of L± restricted to V₂ (order 2m−1).
Spectrum l_spectrum_v2(const GeneralParams& p, EinsteinSign sign, CForm form = CForm::Reference);

struct EinsteinPointGeneral {
    EinsteinSign sign = EinsteinSign::Plus;
    double beta = 0.0;
    double beta_residual = 0.0;
    StateXY state;
    double lambda3 = 0.0;
    CMatrixReport c;
    Spectrum spectrum_v2;
};

/// (Plus, Minus).
std::pair<EinsteinPointGeneral, EinsteinPointGeneral> einstein_general(const GeneralParams& p,
                                                                       CForm form = CForm::Reference);

StateXY einstein_state(const GeneralParams& p, EinsteinSign sign);

struct TerminalEventGeneral {
    enum class Kind { ReachedEinsteinPoint, LeftDomain, MaxTime } kind = Kind::MaxTime;
    std::optional<EinsteinSign> point;
};

struct FlowOptionsGeneral {
    IntegratorOptions integrator;
    bool stop_on_arrival = false;
    double arrival_tol = 1e-11;
    /// Optional extra terminal condition on (u, packed state); reported as MaxTime.
    OdeStop extra_stop;
};

struct TrajectoryGeneral {
    std::vector<double> u_grid;
    std::vector<StateXY> states;
    std::vector<StepDiagnostic> step_diagnostics;
    TerminalEventGeneral terminal_event;
    /// Largest |ΣXₖ − 1| seen before renormalization.
    double max_simplex_drift = 0.0;
};

/// Integrates with Xₖ ← Xₖ/ΣXⱼ after every accepted step. Exits when some Yₖ <= 0.
TrajectoryGeneral integrate_general(const StateXY& s0, const GeneralParams& p, double u_end,
                                    const FlowOptionsGeneral& opts = {});

struct MetricPathGeneral {
    std::vector<double> u;
    std::vector<double> tau;
    std::vector<double> a_hat;
    /// a[k][sample], b[k][sample].
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> b;
    bool truncated = false;
};

MetricPathGeneral reconstruct_general(const TrajectoryGeneral& traj, double a_hat0, const GeneralParams& p);

struct ReconstructionDefectGeneral {
    double a = 0.0;
    double b = 0.0;
};

/// Numerical daₖ/dτ and dbₖ/dτ against 1/2 + Xₖ + 4dXₖ²Yₖ² and 2(d+2) − 6Xₖ(1−Xₖ)Yₖ.
ReconstructionDefectGeneral reconstruction_defect_general(const MetricPathGeneral& path,
                                                          const TrajectoryGeneral& traj, const GeneralParams& p);

/// Numerical dbₖ/dτ at every sample (chain rule through u).
std::vector<std::vector<double>> db_dtau_general(const MetricPathGeneral& path);

/// Per-factor 2(d+2) − 6Xₖ(1−Xₖ)Yₖ > 0.
std::vector<bool> ricci_positive_general(const StateXY& s, const GeneralParams& p);

/// Slope of a least-squares line through (τ, v) over the last decade of τ.
/// Returns nullopt with fewer than 10 samples there.
std::optional<double> last_decade_slope(std::span<const double> tau, std::span<const double> v);

}  // namespace bundleflow
