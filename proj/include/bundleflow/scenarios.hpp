#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bundleflow/flow_general.hpp"
#include "bundleflow/flow_m2.hpp"

namespace bundleflow {

/// ψ₀ used by the forward Type-I runs. Rescaling ψ₀ by k rescales τ by k,
/// so a small ψ₀ probes the same trajectory further out in τ.
inline constexpr double kTypeIPsi0 = 0.01;
inline constexpr double kTypeITau = 1e4;

/// Distance from a saddle at which stable-manifold starts are taken.
inline constexpr double kManifoldLiftDistance = 1e-3;
/// Seed offset along the linear stable direction before lifting.
inline constexpr double kManifoldLiftSeed = 1e-7;

// ── m = 2 ────────────────────────────────────────────────────────────────

struct RegionRun {
    StateY start;
    Region expected = Region::Omega1;
    Region start_region = Region::Other;
    TerminalEvent terminal;
    double u_final = 0.0;
    /// Ω₁: min over samples of min(F₁, F₂). Ω₂: min of −max(F₁, F₂).
    double invariance_margin = 0.0;
    /// Largest per-step increase (Ω₁) or decrease (Ω₂) of E.
    double e_monotone_defect = 0.0;
    double distance_to_eta = 0.0;
};

/// Integrates to u = 200 and measures invariance and monotonicity of E.
RegionRun run_region(const StateY& start, Region expected, const BundleParams& p, double u_end = 200.0);

struct AncientRun {
    std::array<double, 2> direction{};
    StateY start;
    TerminalEvent forward_terminal;
    double forward_distance_to_eta = 0.0;
    TerminalEvent backward_terminal;
    AsymptoticsReportM2 backward;
};

/// Unstable manifold of ξ on the Ω₁ side (ε = 1e-6, quadratic start).
AncientRun run_ancient_from_xi(const BundleParams& p, double eps = kDefaultShootEps);

struct Gamma1Run {
    StateY start;
    TerminalEvent forward_terminal;
    double forward_distance_to_eta = 0.0;
    TerminalEvent backward_terminal;
    AsymptoticsReportM2 backward;
    /// 1/((4n₁+6)q₁).
    double psi_over_b1_target = 0.0;
};

/// Unstable manifold of v₁ (direction (0, 1)).
Gamma1Run run_gamma1(const BundleParams& p, double eps = kDefaultShootEps);

struct OriginBranchRun {
    double angle = 0.0;
    StateY start;
    Region start_region = Region::Other;
    TerminalEvent terminal;
    AsymptoticsReportM2 backward;
    /// b₂/b₁ at the last sample.
    double b_ratio = 0.0;
};

/// Backward runs to u = −60 from r·(cos θ, sin θ).
OriginBranchRun run_origin_branch(const BundleParams& p, double angle, double radius = 0.05);

struct TypeIRun {
    std::string label;
    FixedPointKind limit = FixedPointKind::Eta;
    StateY start;
    TerminalEvent terminal;
    double psi0 = kTypeIPsi0;
    double tau_eval = kTypeITau;
    bool reached_tau = false;
    /// |ψ/τ − E(lim)| / E(lim).
    double slope_deviation = 0.0;
    /// |ψ/bᵢ − limᵢ| / limᵢ.
    std::array<double, 2> ratio_deviation{};
};

TypeIRun run_type_i(const std::string& label, const StateY& start, FixedPointKind limit,
                    const BundleParams& p, const FlowOptions& opts = {}, double psi0 = kTypeIPsi0);

/// Point on the stable manifold of a saddle at distance ~kManifoldLiftDistance,
/// obtained by integrating backward from fp + seed·direction.
StateY lift_stable_manifold(const FixedPointM2& fp, std::array<double, 2> direction, const BundleParams& p);

/// Both sides of ξ's stable manifold, each run forward with the tight options.
std::vector<TypeIRun> run_type_i_xi(const BundleParams& p);

/// Forward options used for runs that must shadow a saddle.
FlowOptions tight_flow_options();

/// Backward runs along an unstable manifold lose the manifold at a rate set by
/// the stable eigenvalue, so they stop a little further from the saddle.
inline constexpr double kSaddleBackwardArrival = 1e-10;
FlowOptions saddle_backward_options();

struct DynamicsSetM2 {
    BundleParams params;
    StateY omega1_start;
    StateY omega2_start;
};

/// (1,1) with starts (0.2, 0.2) and (0.05, 0.05); (2,3) with starts on the
/// segment between η and ξ and at 0.4·η.
std::vector<DynamicsSetM2> default_dynamics_sets();

// ── m >= 3 ───────────────────────────────────────────────────────────────

struct GeneralDynamicsRun {
    EinsteinSign sign = EinsteinSign::Plus;
    int sample = 0;
    double start_distance = 0.0;
    double final_distance = 0.0;
    double u_final = 0.0;
    TerminalEventGeneral terminal;
    double max_simplex_drift = 0.0;
    /// max over k of |dbₖ/dτ − target| / target at the last sample (Plus only).
    std::optional<double> db_dtau_deviation;
    double db_dtau_target = 0.0;
    std::vector<bool> ricci_final;
    /// Sign of the net change of E along the run (+1, −1, 0).
    int e_trend = 0;
    double e_monotone_defect = 0.0;
};

/// Orthonormal basis of the stable subspace of the true Jacobian on V₂, as
/// packed 2m vectors.
std::vector<std::vector<double>> stable_subspace_v2(const GeneralParams& p, EinsteinSign sign);

/// Stable-subspace perturbation number `sample` (Halton coefficients) of
/// norm 1e-3 (Minus) or lifted to distance ~1e-3 (Plus), integrated forward
/// to u = 100 with arrival at 1e-8.
GeneralDynamicsRun run_general_return(const GeneralParams& p, EinsteinSign sign, int sample);

}  // namespace bundleflow
