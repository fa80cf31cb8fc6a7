#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bundleflow {

enum class Relation { Less, LessEq, Greater, GreaterEq };
std::string_view to_string(Relation r);

/// Relative slack used for every pass decision.
inline constexpr double kMarginRelTol = 1e-9;

struct CheckRecord {
    std::string check_id;
    /// Grid coordinates in a fixed order, e.g. {("n1", 2), ("n2", 3)}.
    std::vector<std::pair<std::string, double>> params;
    std::string claim;
    double lhs = 0.0;
    double rhs = 0.0;
    /// rhs − lhs for Less/LessEq, lhs − rhs for Greater/GreaterEq.
    double margin = 0.0;
    /// max(|lhs|, |rhs|).
    double scale = 0.0;
    Relation relation = Relation::Less;
    /// Strict: margin > 1e-9·scale. Non-strict: margin >= −1e-9·scale.
    bool pass = false;
};

CheckRecord make_check(std::string id, std::vector<std::pair<std::string, double>> params, std::string claim,
                       double lhs, Relation rel, double rhs);

/// Boolean outcome as a record with lhs ∈ {0, 1} against 0.5.
CheckRecord make_flag(std::string id, std::vector<std::pair<std::string, double>> params, std::string claim,
                      bool holds);

struct FamilySummary {
    int total = 0;
    int passed = 0;
    int failed = 0;
};

struct VerifyOptions {
    std::vector<std::pair<int, int>> m2_grid;
    std::vector<std::pair<int, int>> m2_spot;
    std::vector<std::pair<int, int>> general_grid;
    std::vector<std::pair<int, int>> omega2_sets;
    int omega2_cells = 600;
    int jacobian_samples = 100;
    double jacobian_step = 1e-5;
    /// Only families (and records) whose check_id starts with this prefix.
    std::string family_prefix;

    /// {1..12}², spot rows (n₁, 50), {3..12}×{1..12}, five Ω₂ sets.
    static VerifyOptions defaults();
};

struct VerificationReport {
    std::vector<CheckRecord> records;
    /// Keyed by the text before the first '.' of check_id.
    std::map<std::string, FamilySummary> summary() const;
    int failures() const;
    bool all_pass() const { return failures() == 0; }
};

/// Family identifiers, in report order.
const std::vector<std::string>& verify_families();

VerificationReport verify_einstein_m2(const VerifyOptions& o);
VerificationReport verify_eta_bounds(const VerifyOptions& o);
VerificationReport verify_classifications(const VerifyOptions& o);
VerificationReport verify_xi_claims(const VerifyOptions& o);
VerificationReport verify_general_algebra(const VerifyOptions& o);
VerificationReport verify_general_field(const VerifyOptions& o);
VerificationReport verify_jacobian_oracle(const VerifyOptions& o);
VerificationReport verify_omega2_membership(const VerifyOptions& o);
/// Integrator failures become failing records rather than exceptions.
VerificationReport verify_dynamics(const VerifyOptions& o);

/// Runs every family selected by o.family_prefix and keeps the matching
/// records. Throws ConfigError if the prefix selects nothing.
VerificationReport run_verify(const VerifyOptions& o);

/// {"environment", "summary", "records"}; byte-stable for identical input.
std::string report_json(const VerificationReport& r, const VerifyOptions& o);
/// Aligned plain-text table followed by per-family counts.
std::string report_text(const VerificationReport& r);

}  // namespace bundleflow
