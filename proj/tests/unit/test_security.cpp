#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "vsa/error.hpp"
#include "vsa/security.hpp"

using namespace vsa;
using security::Category;
using vsa::testing::load_bundled;
using vsa::testing::two_bus;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

// Category from the thresholds, written out independently of the library.
Category expected_category(double pi_v, double flow) {
    if (!(pi_v > 0.1)) return Category::Negligible;
    return flow < 200.0 ? Category::TC : Category::CSC;
}

// Converged-looking solution with flat voltages and zero flows sized to `c`.
powerflow::PowerFlowSolution flat_solution(const grid::NetworkCase& c) {
    powerflow::PowerFlowSolution s;
    const auto n = static_cast<Eigen::Index>(c.bus_count());
    const auto m = static_cast<Eigen::Index>(c.branch_count());
    s.v_mag = Eigen::VectorXd::Ones(n);
    s.v_ang = Eigen::VectorXd::Zero(n);
    s.p_from = s.q_from = s.p_to = s.q_to = s.i_from = s.i_to = Eigen::VectorXd::Zero(m);
    s.converged = true;
    return s;
}

std::vector<grid::BranchRef> refs(std::initializer_list<const char*> names) {
    std::vector<grid::BranchRef> out;
    for (const char* n : names) out.push_back(grid::BranchRef::parse(n));
    return out;
}

}  // namespace

TEST(Piv, IdenticalStatesGiveZero) {
    const auto v = vec({1.0, 0.98, 1.03});
    EXPECT_EQ(security::compute_piv(v, v), 0.0);
}

TEST(Piv, SingleBusDeviation) {
    EXPECT_NEAR(security::compute_piv(vec({1.00}), vec({0.95})), 0.5, 1e-12);
}

TEST(Piv, TwoBusDeviations) {
    EXPECT_NEAR(security::compute_piv(vec({1.00, 1.00}), vec({0.95, 0.90})), 2.5, 1e-12);
}

TEST(Piv, HigherExponentAndWeights) {
    security::PivConfig cfg;
    cfg.exponent = 2;
    cfg.weights = {2.0, 0.0};
    // (2/4) * (0.1/0.05)^4 = 8; the second bus carries no weight.
    EXPECT_NEAR(security::compute_piv(vec({1.0, 1.0}), vec({0.9, 0.5}), cfg), 8.0, 1e-12);
}

TEST(Piv, PermutationInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.9, 1.1), w(0.0, 2.0), lim(0.01, 0.1);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 10;
        Eigen::VectorXd pre(n), post(n);
        security::PivConfig cfg;
        cfg.exponent = 1 + trial % 3;
        for (int i = 0; i < n; ++i) {
            pre[i] = u(rng), post[i] = u(rng);
            cfg.weights.push_back(w(rng));
            cfg.dv_limits.push_back(lim(rng));
        }
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::VectorXd pre_p(n), post_p(n);
        security::PivConfig cfg_p = cfg;
        for (int i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
            pre_p[i] = pre[static_cast<Eigen::Index>(j)];
            post_p[i] = post[static_cast<Eigen::Index>(j)];
            cfg_p.weights[static_cast<std::size_t>(i)] = cfg.weights[j];
            cfg_p.dv_limits[static_cast<std::size_t>(i)] = cfg.dv_limits[j];
        }
        const double a = security::compute_piv(pre, post, cfg);
        const double b = security::compute_piv(pre_p, post_p, cfg_p);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
    }
}

TEST(Piv, ScalesWithEvenPower) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-0.05, 0.05), s(0.2, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 8;
        security::PivConfig cfg;
        cfg.exponent = 1 + trial % 4;
        Eigen::VectorXd pre = Eigen::VectorXd::Ones(n), dev(n);
        for (int i = 0; i < n; ++i) dev[i] = d(rng);
        const double scale = s(rng);
        const double base = security::compute_piv(pre, pre + dev, cfg);
        const double scaled = security::compute_piv(pre, pre + scale * dev, cfg);
        const double factor = std::pow(scale, 2 * cfg.exponent);
        EXPECT_NEAR(scaled, factor * base, 1e-9 * std::max(1e-300, factor * base));
    }
}

TEST(Piv, InputChecks) {
    EXPECT_THROW(security::compute_piv(vec({1.0}), vec({1.0, 1.0})), DimensionError);
    security::PivConfig cfg;
    cfg.exponent = 0;
    EXPECT_THROW(security::compute_piv(vec({1.0}), vec({1.0}), cfg), ValidationError);
    cfg = {};
    cfg.default_dv_limit = 0.0;
    EXPECT_THROW(security::compute_piv(vec({1.0}), vec({1.0}), cfg), ValidationError);
    cfg = {};
    cfg.weights = {-1.0};
    EXPECT_THROW(security::compute_piv(vec({1.0}), vec({1.0}), cfg), ValidationError);

    const auto c = two_bus(10.0);
    auto pre = flat_solution(c), post = flat_solution(c);
    post.converged = false;
    EXPECT_THROW(security::compute_piv(pre, post), InfeasibleError);
}

TEST(Classify, WorkedExamples) {
    EXPECT_EQ(security::classify(0.0, 0.0), Category::Negligible);
    EXPECT_EQ(security::classify(0.5, 150.0), Category::TC);
    EXPECT_EQ(security::classify(0.5, 450.0), Category::CSC);
}

TEST(Classify, ExhaustiveDecisionTable) {
    const double pis[] = {0.0, 0.05, std::nextafter(0.1, 0.0), 0.1, std::nextafter(0.1, 1.0), 0.5, 3.0, 1e6};
    const double flows[] = {0.0, 100.0, 199.999, std::nextafter(200.0, 0.0), 200.0, std::nextafter(200.0, 1e9),
                            450.0, 1e6};
    for (double p : pis)
        for (double f : flows) EXPECT_EQ(security::classify(p, f), expected_category(p, f)) << p << " " << f;
    EXPECT_EQ(security::classify(0.1, 1e6), Category::Negligible);
    EXPECT_EQ(security::classify(0.1000001, 199.9), Category::TC);
    EXPECT_EQ(security::classify(0.1000001, 200.0), Category::CSC);
}

TEST(Classify, IdenticalSolutionsAreNegligible) {
    const auto c = load_bundled("case9.txt");
    const auto sol = powerflow::solve_powerflow(c);
    const auto a = security::classify_configuration(c, sol, c, sol);
    EXPECT_EQ(a.pi_v, 0.0);
    EXPECT_EQ(a.max_flow_delta_mw, 0.0);
    EXPECT_EQ(a.category, Category::Negligible);
}

TEST(Classify, AssessmentConsistentWithRule) {
    const auto c = load_bundled("case68.txt");
    std::vector<std::string> configs = {"base"};
    for (const char* f : {"ieee68_tc.txt", "ieee68_csc.txt"})
        for (const auto& r : security::load_contingency_list(vsa::testing::source_path(std::string("data/contingencies/") + f)))
            configs.push_back(r.to_string());
    const auto rows = security::assess_configurations(c, configs);
    ASSERT_EQ(rows.size(), configs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (std::isfinite(rows[i].pi_v))
            EXPECT_EQ(rows[i].category, security::classify(rows[i].pi_v, rows[i].max_flow_delta_mw)) << rows[i].configuration;
        if (i > 0) EXPECT_GE(rows[i - 1].pi_v, rows[i].pi_v);
    }
    EXPECT_EQ(rows.back().configuration, "base");
    EXPECT_EQ(rows.back().category, Category::Negligible);
    // The listed lines are all significant configurations at the base case.
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) EXPECT_GT(rows[i].pi_v, 0.1) << rows[i].configuration;
}

TEST(FlowDelta, OnlyBranchesInServiceInBoth) {
    const auto c = load_bundled("case9.txt");
    const auto pre = powerflow::solve_powerflow(c);
    const auto idx = c.branch_index(grid::BranchRef::parse("4-5"));
    const auto post_case = grid::apply_outage(c, idx);
    const auto post = powerflow::solve_powerflow(post_case);
    double expected = 0.0;
    for (std::size_t k = 0; k < c.branch_count(); ++k) {
        if (k == idx) continue;
        const auto i = static_cast<Eigen::Index>(k);
        expected = std::max(expected, std::abs(post.p_from[i] - pre.p_from[i]));
    }
    EXPECT_DOUBLE_EQ(security::max_flow_delta_mw(c, pre, post_case, post), expected);
}

TEST(CheckLimits, AllWithinBounds) {
    const auto c = load_bundled("case9.txt");
    auto sol = flat_solution(c);
    for (Eigen::Index i = 0; i < sol.v_mag.size(); ++i) sol.v_mag[i] = 0.95 + 0.01 * static_cast<double>(i);
    for (std::size_t k = 0; k < c.branch_count(); ++k) sol.p_from[static_cast<Eigen::Index>(k)] = 0.79 * c.branches()[k].mva_rating;
    EXPECT_TRUE(security::check_limits(c, sol).empty());
}

TEST(CheckLimits, LowVoltageAtOneBus) {
    const auto c = load_bundled("case9.txt");
    auto sol = flat_solution(c);
    sol.v_mag[static_cast<Eigen::Index>(c.bus_index(7))] = 0.85;
    security::OperatingLimits limits;
    limits.use_bus_limits = false;
    const auto v = security::check_limits(c, sol, limits);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], (security::Violation{security::ViolationKind::LowVoltage, "7", 0.85}));
}

TEST(CheckLimits, HighVoltageUsesCaseBand) {
    const auto c = load_bundled("case9.txt");
    auto sol = flat_solution(c);
    const auto i = c.bus_index(5);
    sol.v_mag[static_cast<Eigen::Index>(i)] = c.buses()[i].v_max + 0.01;
    const auto v = security::check_limits(c, sol);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, security::ViolationKind::HighVoltage);
    EXPECT_EQ(v[0].element, "5");
}

TEST(CheckLimits, OverloadedBranch) {
    const auto c = load_bundled("case9.txt");
    auto sol = flat_solution(c);
    const auto k = c.branch_index(grid::BranchRef::parse("5-7"));
    sol.p_from[static_cast<Eigen::Index>(k)] = 1.10 * c.branches()[k].mva_rating;
    const auto v = security::check_limits(c, sol);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, security::ViolationKind::Overload);
    EXPECT_EQ(v[0].element, "5-7");
    EXPECT_NEAR(v[0].value, 1.10, 1e-12);
}

TEST(CheckLimits, InvalidBand) {
    security::OperatingLimits limits;
    limits.v_min = 1.1;
    limits.v_max = 0.9;
    const auto c = two_bus(10.0);
    EXPECT_THROW(security::check_limits(c, flat_solution(c), limits), ValidationError);
}

TEST(Screen, EmptyListRejected) {
    try {
        security::run_contingency_screen(two_bus(10.0), {});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "no contingencies configured");
    }
}

TEST(Screen, IslandingOutageIsInsecure) {
    const auto r = security::run_contingency_screen(two_bus(10.0), refs({"1-2"}));
    EXPECT_EQ(r.label, security::Label::Insecure);
    ASSERT_EQ(r.outcomes.size(), 1u);
    EXPECT_TRUE(r.outcomes[0].islanded);
    EXPECT_EQ(r.first_failure, std::optional<std::size_t>(0));
}

TEST(Screen, NineBusLightLoadMildOutageIsSecure) {
    const auto c = powerflow::scale_loads(load_bundled("case9.txt"), 0.8, powerflow::GenerationPolicy::Reschedule);
    const auto r = security::run_contingency_screen(c, refs({"8-9"}));
    EXPECT_EQ(r.label, security::Label::Secure) << security::render_screen_report(r);
    EXPECT_FALSE(r.first_failure.has_value());
}

TEST(Screen, StopAtFirstFailure) {
    const auto c = load_bundled("case9.txt");
    security::ScreenOptions opt;
    opt.stop_at_first_failure = true;
    const auto all = security::run_contingency_screen(c, refs({"4-5", "6-9", "7-8"}));
    const auto stopped = security::run_contingency_screen(c, refs({"4-5", "6-9", "7-8"}), {}, opt);
    EXPECT_EQ(all.label, stopped.label);
    ASSERT_TRUE(all.first_failure.has_value());
    EXPECT_EQ(stopped.outcomes.size(), *all.first_failure + 1);
}

TEST(Screen, RemovingContingenciesNeverMakesItLessSecure) {
    const auto base = load_bundled("case9.txt");
    const auto lines = refs({"4-5", "4-6", "5-7", "6-9", "7-8", "8-9"});
    for (double scale : {0.6, 0.8, 1.0}) {
        const auto c = powerflow::scale_loads(base, scale, powerflow::GenerationPolicy::Reschedule);
        for (unsigned mask = 1; mask < 64; ++mask) {
            std::vector<grid::BranchRef> subset;
            for (unsigned b = 0; b < 6; ++b)
                if (mask & (1u << b)) subset.push_back(lines[b]);
            const auto label = security::run_contingency_screen(c, subset).label;
            if (label == security::Label::Secure) continue;
            for (unsigned b = 0; b < 6; ++b) {
                if (mask & (1u << b)) continue;
                auto bigger = subset;
                bigger.push_back(lines[b]);
                EXPECT_EQ(security::run_contingency_screen(c, bigger).label, security::Label::Insecure);
            }
        }
    }
}

TEST(Screen, SixtyEightBusHeavyLoadAgainstCriticalList) {
    const auto c = powerflow::scale_loads(load_bundled("case68.txt"), 1.05, powerflow::GenerationPolicy::Reschedule);
    const auto csc = security::load_contingency_list(vsa::testing::source_path("data/contingencies/ieee68_csc.txt"));
    ASSERT_EQ(csc.size(), 8u);
    const auto r = security::run_contingency_screen(c, csc);
    ASSERT_EQ(r.outcomes.size(), 8u);
    const bool all_ok = std::all_of(r.outcomes.begin(), r.outcomes.end(), [](const auto& o) { return o.secure(); });
    EXPECT_EQ(r.label, all_ok ? security::Label::Secure : security::Label::Insecure);
}

TEST(ContingencyList, CommentsAndCircuits) {
    const auto list = security::parse_contingency_list("# header\n17-43\n\n63-64:2  # parallel\n");
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[1], (grid::BranchRef{63, 64, 2}));
    try {
        security::parse_contingency_list("17-43\nbogus\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(ContingencyList, ReportShape) {
    const auto r = security::run_contingency_screen(two_bus(10.0), refs({"1-2"}));
    const auto text = security::render_screen_report(r);
    EXPECT_EQ(text.substr(0, text.find('\n')), "contingency,islanded,converged,violations,pi_v");
    EXPECT_NE(text.find("# label,Insecure"), std::string::npos);
}
