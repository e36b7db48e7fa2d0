#include "vsa/security.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::security {

void PivConfig::validate(std::size_t bus_count) const {
    if (exponent < 1) throw ValidationError("PI_V exponent must be >= 1");
    if (!weights.empty() && weights.size() != bus_count)
        throw DimensionError("PI_V weights have " + std::to_string(weights.size()) + " entries for " +
                             std::to_string(bus_count) + " buses");
    if (!dv_limits.empty() && dv_limits.size() != bus_count)
        throw DimensionError("PI_V deviation limits have " + std::to_string(dv_limits.size()) + " entries for " +
                             std::to_string(bus_count) + " buses");
    if (default_weight < 0.0) throw ValidationError("PI_V weights must be non-negative");
    if (!(default_dv_limit > 0.0)) throw ValidationError("PI_V deviation limit must be positive");
    for (double w : weights)
        if (!(w >= 0.0)) throw ValidationError("PI_V weights must be non-negative");
    for (double d : dv_limits)
        if (!(d > 0.0)) throw ValidationError("PI_V deviation limits must be positive");
}

double compute_piv(const Eigen::VectorXd& v_pre, const Eigen::VectorXd& v_post, const PivConfig& cfg) {
    if (v_pre.size() != v_post.size())
        throw DimensionError("PI_V inputs differ in bus count (" + std::to_string(v_pre.size()) + " vs " +
                             std::to_string(v_post.size()) + ")");
    const auto n = static_cast<std::size_t>(v_pre.size());
    cfg.validate(n);
    const int power = 2 * cfg.exponent;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = cfg.weights.empty() ? cfg.default_weight : cfg.weights[i];
        const double lim = cfg.dv_limits.empty() ? cfg.default_dv_limit : cfg.dv_limits[i];
        const double ratio = (v_post[static_cast<Eigen::Index>(i)] - v_pre[static_cast<Eigen::Index>(i)]) / lim;
        total += w / power * std::pow(ratio, power);
    }
    return total;
}

double compute_piv(const powerflow::PowerFlowSolution& pre, const powerflow::PowerFlowSolution& post,
                   const PivConfig& cfg) {
    if (!pre.converged || !post.converged) throw InfeasibleError("PI_V needs converged pre and post solutions");
    return compute_piv(pre.v_mag, post.v_mag, cfg);
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Negligible:
            return "Negligible";
        case Category::TC:
            return "TC";
        case Category::CSC:
            return "CSC";
    }
    return "?";
}

Category classify(double pi_v, double max_flow_delta_mw) {
    if (!(pi_v > kPivThreshold)) return Category::Negligible;
    return max_flow_delta_mw < kFlowDeltaThresholdMw ? Category::TC : Category::CSC;
}

double max_flow_delta_mw(const grid::NetworkCase& pre_case, const powerflow::PowerFlowSolution& pre,
                         const grid::NetworkCase& post_case, const powerflow::PowerFlowSolution& post) {
    if (pre_case.branch_count() != post_case.branch_count() || pre.p_from.size() != post.p_from.size())
        throw DimensionError("configurations differ in branch count");
    double worst = 0.0;
    for (std::size_t k = 0; k < pre_case.branch_count(); ++k) {
        if (!pre_case.branches()[k].in_service || !post_case.branches()[k].in_service) continue;
        const auto i = static_cast<Eigen::Index>(k);
        worst = std::max(worst, std::abs(post.p_from[i] - pre.p_from[i]));
    }
    return worst;
}

ConfigurationAssessment classify_configuration(const grid::NetworkCase& pre_case,
                                               const powerflow::PowerFlowSolution& pre,
                                               const grid::NetworkCase& post_case,
                                               const powerflow::PowerFlowSolution& post, const PivConfig& cfg,
                                               std::string configuration) {
    ConfigurationAssessment a;
    a.configuration = std::move(configuration);
    a.pi_v = compute_piv(pre, post, cfg);
    a.max_flow_delta_mw = max_flow_delta_mw(pre_case, pre, post_case, post);
    a.category = classify(a.pi_v, a.max_flow_delta_mw);
    return a;
}

void OperatingLimits::validate() const {
    if (!(v_min < v_max)) throw ValidationError("operating limits need v_min < v_max");
    if (!(loading_limit > 0.0)) throw ValidationError("branch loading limit must be positive");
}

std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::LowVoltage:
            return "low-voltage";
        case ViolationKind::HighVoltage:
            return "high-voltage";
        case ViolationKind::Overload:
            return "overload";
    }
    return "?";
}

std::vector<Violation> check_limits(const grid::NetworkCase& c, const powerflow::PowerFlowSolution& solution,
                                    const OperatingLimits& limits) {
    limits.validate();
    if (solution.bus_count() != c.bus_count()) throw DimensionError("solution does not match case");
    std::vector<Violation> out;
    for (std::size_t i = 0; i < c.bus_count(); ++i) {
        const auto& bus = c.buses()[i];
        const double v = solution.v_mag[static_cast<Eigen::Index>(i)];
        const double lo = limits.use_bus_limits ? bus.v_min : limits.v_min;
        const double hi = limits.use_bus_limits ? bus.v_max : limits.v_max;
        const auto id = std::to_string(bus.id);
        if (v < lo) out.push_back({ViolationKind::LowVoltage, id, v});
        else if (v > hi) out.push_back({ViolationKind::HighVoltage, id, v});
    }
    for (std::size_t k = 0; k < c.branch_count(); ++k) {
        const auto& br = c.branches()[k];
        if (!br.in_service) continue;
        const auto i = static_cast<Eigen::Index>(k);
        const double s_from = std::hypot(solution.p_from[i], solution.q_from[i]);
        const double s_to = std::hypot(solution.p_to[i], solution.q_to[i]);
        const double loading = std::max(s_from, s_to) / br.mva_rating;
        if (loading > limits.loading_limit) out.push_back({ViolationKind::Overload, c.branch_ref(k).to_string(), loading});
    }
    return out;
}

std::string_view to_string(Label l) { return l == Label::Secure ? "Secure" : "Insecure"; }

ScreenResult run_contingency_screen(const grid::NetworkCase& c, const powerflow::PowerFlowSolution& base,
                                    const std::vector<grid::BranchRef>& csc_list, const OperatingLimits& limits,
                                    const ScreenOptions& options) {
    if (csc_list.empty()) throw ValidationError("no contingencies configured");
    if (!base.converged) throw InfeasibleError("pre-contingency state did not converge");

    ScreenResult result;
    for (const auto& ref : csc_list) {
        ContingencyOutcome outcome;
        outcome.contingency = ref.to_string();
        outcome.pi_v = HUGE_VAL;
        const auto index = c.branch_index(ref);
        if (!c.branches()[index].in_service) {
            // Already out in this operating condition: losing it again changes nothing.
            outcome.converged = true;
            outcome.violations = check_limits(c, base, limits);
            outcome.pi_v = 0.0;
        } else {
            try {
                const auto post_case = grid::apply_outage(c, index);
                const auto post = powerflow::solve_powerflow(post_case, options.solver);
                outcome.converged = post.converged;
                if (post.converged) {
                    outcome.violations = check_limits(post_case, post, limits);
                    outcome.pi_v = compute_piv(base, post, options.piv);
                }
            } catch (const IslandingError&) {
                outcome.islanded = true;
            }
        }
        const bool failed = !outcome.secure();
        result.outcomes.push_back(std::move(outcome));
        if (failed && !result.first_failure) {
            result.first_failure = result.outcomes.size() - 1;
            result.label = Label::Insecure;
            if (options.stop_at_first_failure) break;
        }
    }
    return result;
}

ScreenResult run_contingency_screen(const grid::NetworkCase& c, const std::vector<grid::BranchRef>& csc_list,
                                    const OperatingLimits& limits, const ScreenOptions& options) {
    if (csc_list.empty()) throw ValidationError("no contingencies configured");
    const auto base = powerflow::solve_powerflow(c, options.solver);
    return run_contingency_screen(c, base, csc_list, limits, options);
}

std::vector<grid::BranchRef> parse_contingency_list(std::string_view text) {
    std::vector<grid::BranchRef> out;
    std::size_t line_no = 0;
    for (auto raw : text::split(text, '\n')) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const auto line = text::trim(raw);
        if (line.empty()) continue;
        try {
            out.push_back(grid::BranchRef::parse(line));
        } catch (const ParseError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

std::vector<grid::BranchRef> load_contingency_list(const std::filesystem::path& path) {
    return parse_contingency_list(text::read_file(path));
}

std::string render_screen_report(const ScreenResult& result) {
    std::ostringstream out;
    out << "contingency,islanded,converged,violations,pi_v\n";
    for (const auto& o : result.outcomes) {
        std::string v;
        for (std::size_t i = 0; i < o.violations.size(); ++i) {
            if (i) v += ';';
            v += std::string(to_string(o.violations[i].kind)) + "@" + o.violations[i].element + "=" +
                 text::format_double(o.violations[i].value);
        }
        out << o.contingency << ',' << (o.islanded ? 1 : 0) << ',' << (o.converged ? 1 : 0) << ',' << v << ','
            << text::format_double(o.pi_v) << '\n';
    }
    out << "# label," << to_string(result.label) << '\n';
    return out.str();
}

std::vector<ConfigurationAssessment> assess_configurations(const grid::NetworkCase& c,
                                                           const std::vector<std::string>& configurations,
                                                           const ScreenOptions& options) {
    const auto base = powerflow::solve_powerflow(c, options.solver);
    if (!base.converged) throw InfeasibleError("base case infeasible: " + base.diagnostic);

    std::vector<ConfigurationAssessment> rows;
    for (const auto& name : configurations) {
        if (name == "base") {
            rows.push_back(classify_configuration(c, base, c, base, options.piv, name));
            continue;
        }
        const auto ref = grid::BranchRef::parse(name);
        ConfigurationAssessment row;
        row.configuration = ref.to_string();
        row.pi_v = HUGE_VAL;
        row.max_flow_delta_mw = HUGE_VAL;
        row.category = Category::CSC;
        try {
            const auto post_case = grid::apply_outage(c, c.branch_index(ref));
            const auto post = powerflow::solve_powerflow(post_case, options.solver);
            if (post.converged) row = classify_configuration(c, base, post_case, post, options.piv, ref.to_string());
        } catch (const IslandingError&) {
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ConfigurationAssessment& a, const ConfigurationAssessment& b) { return a.pi_v > b.pi_v; });
    return rows;
}

std::string render_assessments(const std::vector<ConfigurationAssessment>& rows) {
    std::ostringstream out;
    out << "rank,configuration,pi_v,max_flow_delta_mw,category\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << i + 1 << ',' << r.configuration << ',' << text::format_double(r.pi_v) << ','
            << text::format_double(r.max_flow_delta_mw) << ',' << to_string(r.category) << '\n';
    }
    return out.str();
}

}  // namespace vsa::security
