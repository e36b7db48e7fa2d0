#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsa/grid_model.hpp"
#include "vsa/powerflow.hpp"

namespace vsa::security {

/// Parameters of the voltage performance index
///   PI_V = sum_i (w_i / 2n) * ((|V_i^post| - |V_i^pre|) / dV_lim_i)^(2n).
/// Empty per-bus vectors mean "use the default for every bus".
struct PivConfig {
    std::vector<double> weights;
    int exponent = 1;
    std::vector<double> dv_limits;
    double default_weight = 1.0;
    double default_dv_limit = 0.05;

    void validate(std::size_t bus_count) const;
};

double compute_piv(const powerflow::PowerFlowSolution& pre, const powerflow::PowerFlowSolution& post,
                   const PivConfig& cfg = {});

/// Same index evaluated on raw voltage magnitudes.
double compute_piv(const Eigen::VectorXd& v_pre, const Eigen::VectorXd& v_post, const PivConfig& cfg = {});

enum class Category { Negligible, TC, CSC };

std::string_view to_string(Category c);

inline constexpr double kPivThreshold = 0.1;
inline constexpr double kFlowDeltaThresholdMw = 200.0;

/// pi_v <= 0.1 is Negligible; above that, a flow change under 200 MW is a TC and anything
/// else (including exactly 200 MW) a CSC.
Category classify(double pi_v, double max_flow_delta_mw);

struct ConfigurationAssessment {
    std::string configuration;  // branch reference, or "base"
    double pi_v = 0.0;
    double max_flow_delta_mw = 0.0;
    Category category = Category::Negligible;
};

/// Largest |P_from^post - P_from^pre| in MW over branches in service in both configurations.
double max_flow_delta_mw(const grid::NetworkCase& pre_case, const powerflow::PowerFlowSolution& pre,
                         const grid::NetworkCase& post_case, const powerflow::PowerFlowSolution& post);

ConfigurationAssessment classify_configuration(const grid::NetworkCase& pre_case,
                                               const powerflow::PowerFlowSolution& pre,
                                               const grid::NetworkCase& post_case,
                                               const powerflow::PowerFlowSolution& post, const PivConfig& cfg = {},
                                               std::string configuration = {});

struct OperatingLimits {
    double v_min = 0.90;
    double v_max = 1.10;
    double loading_limit = 1.0;  // fraction of mva_rating
    /// Check each bus against its own case-file band instead of [v_min, v_max].
    bool use_bus_limits = true;

    void validate() const;
};

enum class ViolationKind { LowVoltage, HighVoltage, Overload };

std::string_view to_string(ViolationKind k);

struct Violation {
    ViolationKind kind = ViolationKind::LowVoltage;
    std::string element;  // bus id or branch reference
    double value = 0.0;   // p.u. voltage, or loading as a fraction of rating

    bool operator==(const Violation&) const = default;
};

std::vector<Violation> check_limits(const grid::NetworkCase& c, const powerflow::PowerFlowSolution& solution,
                                    const OperatingLimits& limits = {});

enum class Label { Secure = 0, Insecure = 1 };

std::string_view to_string(Label l);

struct ContingencyOutcome {
    std::string contingency;
    bool islanded = false;
    bool converged = false;
    std::vector<Violation> violations;
    double pi_v = 0.0;  // relative to the pre-contingency state; +inf when not computable

    bool secure() const { return !islanded && converged && violations.empty(); }
};

struct ScreenResult {
    Label label = Label::Secure;
    std::vector<ContingencyOutcome> outcomes;
    std::optional<std::size_t> first_failure;
};

struct ScreenOptions {
    powerflow::SolverOptions solver;
    PivConfig piv;
    bool stop_at_first_failure = false;
};

/// N-1 screen of `c` against every branch outage in `csc_list`. Secure only if every outage
/// converges without limit violations. Islanding outages are Insecure without a solve.
ScreenResult run_contingency_screen(const grid::NetworkCase& c, const std::vector<grid::BranchRef>& csc_list,
                                    const OperatingLimits& limits = {}, const ScreenOptions& options = {});

/// Same, reusing an already converged pre-contingency solution.
ScreenResult run_contingency_screen(const grid::NetworkCase& c, const powerflow::PowerFlowSolution& base,
                                    const std::vector<grid::BranchRef>& csc_list, const OperatingLimits& limits,
                                    const ScreenOptions& options);

/// Contingency list file: one `from-to[:circuit]` per line, `#` comments allowed.
std::vector<grid::BranchRef> parse_contingency_list(std::string_view text);
std::vector<grid::BranchRef> load_contingency_list(const std::filesystem::path& path);

/// Screening report rows: contingency,islanded,converged,violations,pi_v.
std::string render_screen_report(const ScreenResult& result);

/// Assesses each configuration (the token "base" means no outage) against the base case and
/// returns rows sorted by descending pi_v. Islanding or divergent configurations get pi_v = inf.
std::vector<ConfigurationAssessment> assess_configurations(const grid::NetworkCase& c,
                                                           const std::vector<std::string>& configurations,
                                                           const ScreenOptions& options = {});

std::string render_assessments(const std::vector<ConfigurationAssessment>& rows);

}  // namespace vsa::security
