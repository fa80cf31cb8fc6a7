#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bundleflow/integrator.hpp"
#include "bundleflow/linalg.hpp"
#include "bundleflow/params.hpp"

namespace bundleflow {

// ── Vector field ─────────────────────────────────────────────────────────

/// E(Y) = 1/2 + 4n₁q₁²Y₁² + 4n₂q₂²Y₂².
double e_of(const StateY& y, const BundleParams& p);

/// Fᵢ(Y) = 2(nᵢ+2)qᵢYᵢ − 6qᵢ²Yᵢ² − E(Y).
std::array<double, 2> f_of(const StateY& y, const BundleParams& p);

/// dY/du = (−Y₁F₁, −Y₂F₂).
std::array<double, 2> vector_field(const StateY& y, const BundleParams& p);

/// Analytic Jacobian of vector_field.
SmallMatrix jacobian(const StateY& y, const BundleParams& p);

/// dE/du along the flow, −8n₁q₁²Y₁²F₁ − 8n₂q₂²Y₂²F₂.
double de_du(const StateY& y, const BundleParams& p);

// ── Fixed points ─────────────────────────────────────────────────────────

enum class FixedPointKind { Origin, V1, V2, V1Tilde, V2Tilde, Xi, Eta };
enum class Classification { Source, Sink, Hyperbolic, Degenerate };

std::string_view to_string(FixedPointKind k);
std::string_view to_string(Classification c);

/// Source / Sink / Hyperbolic from strict signs of Re λ; Degenerate if any
/// eigenvalue is flagged.
Classification classify(const Spectrum& s);

struct FixedPointM2 {
    StateY location;
    FixedPointKind kind = FixedPointKind::Origin;
    Spectrum spectrum;
    Classification classification = Classification::Degenerate;
    int unstable_dimension = 0;
};

/// Spectrum and classification of the Jacobian at a given location.
FixedPointM2 make_fixed_point(const StateY& loc, FixedPointKind kind, const BundleParams& p);

struct EinsteinSolveDetail {
    /// Roots of φ in the ordered (n₁ <= n₂) frame; y0_lo gives ξ, y0_hi gives η.
    double y0_lo = 0.0;
    double y0_hi = 0.0;
    /// (y₁, y₂) at each root, in output index order.
    std::array<double, 2> y_aux_lo{};
    std::array<double, 2> y_aux_hi{};
    double phi_min_location = 0.0;
    double phi_min_value = 0.0;
    /// Lower end of the φ domain, 3/(n₁+2)².
    double domain_lo = 0.0;
    /// Einstein constant of the ξ and η metrics (ψ = 1), from factor i = 1 and i = 2.
    std::array<double, 2> lambda_xi{};
    std::array<double, 2> lambda_eta{};
    /// True if the factors were swapped internally so that n₁ <= n₂.
    bool swapped = false;
};

struct EinsteinPointsM2 {
    FixedPointM2 xi;
    FixedPointM2 eta;
    EinsteinSolveDetail detail;
};

/// yᵢ(y₀) on the negative branch of the quadratic; throws DomainError when
/// 1 − 3/(y₀(n+2)²) < 0.
double y_of_y0(double y0, int n);

/// φ(y₀) = 3(y₀−1) + 2n₁(y₁−1) + 2n₂(y₂−1). Symmetric in the factors.
double phi(double y0, const BundleParams& p);

/// Both Einstein points: trisection for the minimizer of the convex φ, then
/// bisection on each side. Throws SolverError if a root is not bracketed.
EinsteinPointsM2 einstein_points(const BundleParams& p);

/// Einstein constant Λᵢ·Yᵢ − 3qᵢ²Yᵢ² (metric with ψ = 1), factor i.
double einstein_constant(const StateY& y, const BundleParams& p, int i);

/// Origin, v₁, v₂, ṽ₁, ṽ₂, ξ, η in that order.
std::vector<FixedPointM2> fixed_points(const BundleParams& p);

/// Closed-form locations.
StateY v1_location(const BundleParams& p);
StateY v2_location(const BundleParams& p);
StateY v1_tilde_location(const BundleParams& p);
StateY v2_tilde_location(const BundleParams& p);

struct RhoBound {
    /// Eigenvalues ρ₁ >= ρ₂ of α_χ.
    double rho1 = 0.0;
    double rho2 = 0.0;
    /// A(χ), the discriminant in closed form.
    double a_value = 0.0;
    double e_value = 0.0;
    double minus_e_plus_rho1 = 0.0;
    double minus_e_plus_rho2 = 0.0;
    /// 3q₁²χ₁² + 3q₂²χ₂² − 1/2 + √A(χ).
    double minus_e_plus_rho1_closed = 0.0;
    /// 8n₁q₁²χ₁² + (8n₂+6)q₂²χ₂².
    double perron_lower_bound = 0.0;
};

SmallMatrix alpha_matrix(const StateY& chi, const BundleParams& p);
RhoBound rho_bound_check(const FixedPointM2& fp, const BundleParams& p);

// ── Regions ──────────────────────────────────────────────────────────────

enum class Region { Omega1, Omega2, Other };
std::string_view to_string(Region r);

inline constexpr int kOmega2SegmentSamples = 512;
inline constexpr double kOmega2Slack = 1e-12;

/// Ω₁ = {F₁ >= 0, F₂ >= 0}; Ω₂ = points with F <= 0 whose segment to the
/// origin stays in {F₁ <= 1e-12, F₂ <= 1e-12}; Other otherwise.
Region region_of(const StateY& y, const BundleParams& p);

struct FloodFillComparison {
    int cells = 0;
    int agree = 0;
    int disagree = 0;
    /// Disagreeing cells with no neighbour of different oracle membership.
    int interior_disagree = 0;
    double agreement() const { return cells ? static_cast<double>(agree) / cells : 0.0; }
};

/// 4-connected flood fill of {F₁ <= 0, F₂ <= 0} from the origin cell on an
/// N×N grid of cell centres over [0, 1/(2q₁)]×[0, 1/(2q₂)]. Row-major, j (Y₂)
/// major.
std::vector<unsigned char> omega2_flood_fill(const BundleParams& p, int n_cells);
FloodFillComparison compare_omega2_with_flood_fill(const BundleParams& p, int n_cells);

/// Points on the upper half of the ellipse Fᵢ = 0 (i = 0 or 1), sampled
/// uniformly in the ellipse angle.
std::vector<StateY> nullcline_ellipse(int i, const BundleParams& p, int samples);

// ── Integration ──────────────────────────────────────────────────────────

enum class TerminalKind { ReachedFixedPoint, LeftDomain, MaxTime };
std::string_view to_string(TerminalKind k);

struct TerminalEvent {
    TerminalKind kind = TerminalKind::MaxTime;
    std::optional<FixedPointKind> fixed_point;
};

std::string describe(const TerminalEvent& e);

struct FlowOptions {
    IntegratorOptions integrator;
    /// Stop once within arrival_tol of a fixed point the run did not start at.
    bool stop_on_arrival = true;
    double arrival_tol = 1e-11;
    /// Optional extra terminal condition on (u, Y); reported as MaxTime.
    OdeStop extra_stop;
};

struct TrajectoryM2 {
    std::vector<double> u_grid;
    std::vector<StateY> states;
    std::vector<StepDiagnostic> step_diagnostics;
    TerminalEvent terminal_event;
};

/// Integrates dY/du from Y0 at u = 0 to u_end (negative for backward runs).
/// Throws ConfigError for a start outside the closed first quadrant, and
/// IntegratorError on underflow.
TrajectoryM2 integrate(const StateY& y0, const BundleParams& p, double u_end, const FlowOptions& opts = {});

inline constexpr double kDefaultShootEps = 1e-6;
inline constexpr double kEigenResidualTol = 1e-8;

/// fp + eps·direction, plus (when `quadratic` is set and fp is a saddle) the
/// second-order term c·eps²·v_other that places the point on the invariant
/// curve tangent to `direction` up to O(eps³).
StateY manifold_start(const FixedPointM2& fp, std::array<double, 2> direction, double eps,
                      const BundleParams& p, bool quadratic);

/// Starts at manifold_start(...) and integrates forward (unstable direction)
/// or backward (stable direction) for |u_span|. Throws ConfigError if the
/// direction is not a unit eigenvector of the Jacobian at fp.
TrajectoryM2 shoot_manifold(const FixedPointM2& fp, std::array<double, 2> direction, double eps,
                            const BundleParams& p, double u_span, const FlowOptions& opts = {},
                            bool quadratic = false);

// ── Reconstruction and asymptotics ───────────────────────────────────────

struct MetricPathM2 {
    std::vector<double> u;
    std::vector<double> tau;
    std::vector<double> psi;
    std::vector<double> b1;
    std::vector<double> b2;
    /// Fibre scale a₁ = a₂ = 2ψ.
    std::vector<double> a;
    /// Set when some Yᵢ = 0 cut the path short.
    bool truncated = false;
};

/// ψ = ψ₀·exp(∫E du), τ = ∫ψ du (both by fourth-order Hermite quadrature),
/// bᵢ = ψ/Yᵢ, a = 2ψ.
MetricPathM2 reconstruct(const TrajectoryM2& traj, double psi0, const BundleParams& p);

struct ReconstructionDefect {
    /// max |dψ/dτ − E| / E over the path.
    double psi = 0.0;
    /// max |dbᵢ/dτ − (2(nᵢ+2)qᵢ − 6qᵢ²ψ/bᵢ)| / scale.
    double b = 0.0;
};

/// Differentiates the reconstructed path numerically and compares with the flow equations.
ReconstructionDefect reconstruction_defect(const MetricPathM2& path, const TrajectoryM2& traj,
                                           const BundleParams& p);

struct PathSample {
    double tau = 0.0;
    double psi = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

/// Hermite interpolation of the path at a given τ inside its range.
PathSample path_at_tau(const MetricPathM2& path, const TrajectoryM2& traj, const BundleParams& p, double tau);

struct AsymptoticsReportM2 {
    StateY limit_point;
    std::array<double, 2> limit_psi_over_b{};
    bool backward = false;
    double slope = 0.0;
    double slope_target = 0.0;
    std::optional<double> collapse_time;
    /// (T + τ)/T at the sample where the backward slope was read.
    double probe_remaining = 0.0;
    /// |slope − target| / target.
    double slope_deviation = 0.0;
    /// Fit residual (max abs) of the τ tail model or the forward linear fit.
    double fit_residual = 0.0;
    bool reliable = false;
    std::string note;
    /// For Ω₂ starts: ψ(0)/E(η) <= T <= 2ψ(0).
    std::optional<std::array<double, 2>> collapse_bounds;
    std::optional<bool> collapse_bounds_hold;
};

/// Forward runs: slope of ψ against τ over the last decade of τ.
/// Backward runs: collapse time T from fitting τ ≈ τ∞ + c·e^{E(lim)·u} on the
/// final stretch of u, and ψ/(T+τ) read where T+τ first drops to 1e-4·T (or at
/// the last sample if it never does).
AsymptoticsReportM2 asymptotics(const MetricPathM2& path, const TrajectoryM2& traj, const BundleParams& p);

// ── Ricci signature ──────────────────────────────────────────────────────

struct RicciSignature {
    bool fibre_positive = true;
    std::array<bool, 2> base_exact{};
    std::array<bool, 2> base_conservative{};
};

/// base_exact: Yᵢ < (nᵢ+2)/(3qᵢ); base_conservative: Yᵢ < (nᵢ+2)/(6qᵢ).
RicciSignature ricci_signature(const StateY& y, const BundleParams& p);

}  // namespace bundleflow
