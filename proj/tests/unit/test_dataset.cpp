#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vsa/dataset.hpp"
#include "vsa/error.hpp"

using namespace vsa;
using vsa::testing::load_bundled;
using vsa::testing::source_path;

namespace {

// Slack at bus 1 plus two dispatchable units with p_max 100 and 300.
grid::NetworkCase three_unit_case(double p2, double p3) {
    std::vector<grid::Bus> buses = {{1, grid::BusKind::Slack, 138, 1.0, 0.9, 1.1},
                                    {2, grid::BusKind::PV, 138, 1.0, 0.9, 1.1},
                                    {3, grid::BusKind::PV, 138, 1.0, 0.9, 1.1},
                                    {4, grid::BusKind::PQ, 138, 1.0, 0.9, 1.1}};
    std::vector<grid::Branch> branches = {{1, 4, 1, 0, 0.05, 0, 1, 500, true},
                                          {2, 4, 1, 0, 0.05, 0, 1, 500, true},
                                          {3, 4, 1, 0, 0.05, 0, 1, 500, true}};
    std::vector<grid::Generator> gens = {
        {1, 200, -300, 300, 500, true}, {2, p2, -300, 300, 100, true}, {3, p3, -300, 300, 300, true}};
    return grid::NetworkCase::create(100, buses, branches, gens, {{4, 150, 20}});
}

// Iterative water-filling written from the rule itself: share by capacity, clamp, repeat over
// the units that did not clamp.
std::vector<double> waterfill(std::vector<double> p, const std::vector<double>& p_max, double delta) {
    std::vector<bool> free(p.size(), true);
    for (int round = 0; round < 100 && std::abs(delta) > 1e-12; ++round) {
        double cap = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (free[i]) cap += p_max[i];
        if (cap == 0) break;
        double moved = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!free[i]) continue;
            const double want = p[i] + delta * p_max[i] / cap;
            const double got = std::clamp(want, 0.0, p_max[i]);
            if (got != want) free[i] = false;
            moved += got - p[i];
            p[i] = got;
        }
        delta -= moved;
    }
    return p;
}

std::vector<grid::BranchRef> list(const char* file) {
    return security::load_contingency_list(source_path(std::string("data/contingencies/") + file));
}

data::DatasetConfig nine_bus_config(std::size_t n, double tc_fraction) {
    data::DatasetConfig cfg;
    cfg.n_samples = n;
    cfg.scale_range = {0.6, 1.0};
    cfg.tc_fraction = tc_fraction;
    cfg.tc_list = {grid::BranchRef::parse("8-9"), grid::BranchRef::parse("6-9")};
    cfg.csc_list = {grid::BranchRef::parse("4-5"), grid::BranchRef::parse("7-8")};
    cfg.seed = 21;
    cfg.threads = 1;
    return cfg;
}

data::DatasetConfig sixty_eight_bus_config(std::size_t n, double tc_fraction) {
    data::DatasetConfig cfg;
    cfg.n_samples = n;
    cfg.tc_fraction = tc_fraction;
    cfg.tc_list = list("ieee68_tc.txt");
    cfg.csc_list = list("ieee68_csc.txt");
    cfg.seed = 7;
    return cfg;
}

data::Dataset synthetic(std::size_t n) {
    data::Dataset ds;
    ds.feature_names = {"a", "b"};
    for (std::size_t i = 0; i < n; ++i)
        ds.samples.push_back({{static_cast<double>(i), 0.5 * static_cast<double>(i)},
                              i % 3 ? security::Label::Secure : security::Label::Insecure,
                              {i, 0, std::nullopt}});
    return ds;
}

void expect_same(const data::Dataset& a, const data::Dataset& b) {
    EXPECT_EQ(a.feature_names, b.feature_names);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_EQ(a.config_digest, b.config_digest);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.rejections, b.rejections);
    EXPECT_EQ(a.scale_range.lo, b.scale_range.lo);
    EXPECT_EQ(a.scale_range.hi, b.scale_range.hi);
    EXPECT_EQ(a.notes, b.notes);
}

}  // namespace

TEST(Reschedule, ZeroDeltaUnchanged) {
    const auto c = three_unit_case(20, 60);
    EXPECT_EQ(data::reschedule_generation(c, 0.0), c);
}

TEST(Reschedule, CapacityProportional) {
    const auto out = data::reschedule_generation(three_unit_case(20, 60), 40.0);
    EXPECT_NEAR(out.generators()[1].p_mw, 30.0, 1e-12);
    EXPECT_NEAR(out.generators()[2].p_mw, 90.0, 1e-12);
    EXPECT_EQ(out.generators()[0].p_mw, 200.0);  // slack untouched
}

TEST(Reschedule, ClampedUnitHandsRemainderOn) {
    const auto out = data::reschedule_generation(three_unit_case(90, 0), 80.0);
    const auto expected = waterfill({90, 0}, {100, 300}, 80.0);
    EXPECT_NEAR(out.generators()[1].p_mw, 100.0, 1e-12);
    EXPECT_NEAR(out.generators()[1].p_mw, expected[0], 1e-9);
    EXPECT_NEAR(out.generators()[2].p_mw, expected[1], 1e-9);
    EXPECT_NEAR(out.generators()[1].p_mw + out.generators()[2].p_mw, 170.0, 1e-9);
}

TEST(Reschedule, MatchesWaterfillOracle) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double p2 = 100 * u(rng), p3 = 300 * u(rng);
        const double delta = -150 + 300 * u(rng);
        const auto c = three_unit_case(p2, p3);
        const auto out = data::reschedule_generation(c, delta);
        const auto expected = waterfill({p2, p3}, {100, 300}, delta);
        EXPECT_NEAR(out.generators()[1].p_mw, expected[0], 1e-9);
        EXPECT_NEAR(out.generators()[2].p_mw, expected[1], 1e-9);
        for (const auto& g : out.generators()) {
            EXPECT_GE(g.p_mw, 0.0);
            EXPECT_LE(g.p_mw, g.p_max);
        }
    }
}

TEST(Reschedule, BeyondAggregateCapacity) {
    EXPECT_THROW(data::reschedule_generation(three_unit_case(20, 60), 10000.0), InfeasibleError);
    EXPECT_THROW(data::reschedule_generation(three_unit_case(20, 60), -1000.0), InfeasibleError);
}

TEST(GenerateOc, DegenerateRangeReproducesBaseSolve) {
    const auto c = load_bundled("case68.txt");
    const auto oc = data::generate_oc(c, 3, {1.0, 1.0});
    const auto base = powerflow::solve_powerflow(c);
    EXPECT_EQ(oc.scaled_case, c);
    EXPECT_EQ(oc.solution.v_mag, base.v_mag);
    EXPECT_EQ(oc.solution.v_ang, base.v_ang);
    EXPECT_EQ(oc.attempt, 0);
}

TEST(GenerateOc, TotalLoadWithinScaledRange) {
    const auto c = load_bundled("case68.txt");
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto oc = data::generate_oc(c, seed, {0.8, 1.05});
        EXPECT_GE(oc.scaled_case.total_load_mw(), 0.8 * 17620.7 - 1e-6);
        EXPECT_LE(oc.scaled_case.total_load_mw(), 1.05 * 17620.7 + 1e-6);
        for (double s : oc.load_scales) {
            EXPECT_GE(s, 0.8);
            EXPECT_LE(s, 1.05);
        }
        for (std::size_t k = 0; k < c.loads().size(); ++k) {
            const auto& before = c.loads()[k];
            const auto& after = oc.scaled_case.loads()[k];
            EXPECT_NEAR(after.p_mw, before.p_mw * oc.load_scales[k], 1e-9 * std::max(1.0, std::abs(before.p_mw)));
            EXPECT_NEAR(after.q_mvar, before.q_mvar * oc.load_scales[k], 1e-9 * std::max(1.0, std::abs(before.q_mvar)));
        }
    }
}

TEST(GenerateOc, TopologyChangeApplied) {
    const auto c = load_bundled("case68.txt");
    const auto tc = grid::BranchRef::parse("24-68");
    const auto oc = data::generate_oc(c, 5, {0.8, 1.05}, tc);
    EXPECT_TRUE(oc.solution.converged);
    EXPECT_FALSE(oc.scaled_case.branches()[c.branch_index(tc)].in_service);
    EXPECT_EQ(oc.scaled_case.in_service_branch_count(), 82u);
}

TEST(GenerateOc, RejectsUntilGivingUp) {
    // Every draw lies beyond the nose of the two-bus feeder.
    const auto c = vsa::testing::two_bus(100.0);
    data::GenerationOptions opt;
    opt.max_consecutive_rejections = 3;
    try {
        data::generate_oc(c, 1, {7.0, 8.0}, std::nullopt, opt);
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible generation config"), std::string::npos);
    }
    EXPECT_THROW(data::generate_oc(c, 1, {1.0, 0.9}), ValidationError);
}

TEST(Features, TwoBusLayout) {
    const auto c = vsa::testing::two_bus(50.0);
    const data::FeatureLayout layout(c);
    EXPECT_EQ(layout.size(), 5u);
    EXPECT_EQ(layout.names(), (std::vector<std::string>{"vm_2", "va_2", "i_1-2", "p_1-2", "q_1-2"}));
    const auto x = layout.extract(powerflow::solve_powerflow(c));
    ASSERT_EQ(x.size(), 5u);
    EXPECT_NEAR(x[3], 50.0, 1e-6);
}

TEST(Features, FlatCaseHasNoAnglesOrFlows) {
    const auto c = vsa::testing::two_bus(0.0);
    const auto x = data::extract_features(powerflow::solve_powerflow(c), c);
    EXPECT_NEAR(x[0], 1.0, 1e-12);
    for (std::size_t i = 1; i < x.size(); ++i) EXPECT_NEAR(x[i], 0.0, 1e-12);
}

TEST(Features, SixtyEightBusCountStable) {
    const auto c = load_bundled("case68.txt");
    const data::FeatureLayout a(c), b(load_bundled("case68.txt"));
    EXPECT_EQ(a.size(), 2u * 52u + 3u * 83u);
    EXPECT_EQ(a.names(), b.names());
    const std::set<std::string> unique(a.names().begin(), a.names().end());
    EXPECT_EQ(unique.size(), a.size());
}

TEST(Features, OutagedBranchReadsZero) {
    const auto c = load_bundled("case68.txt");
    const data::FeatureLayout layout(c);
    const auto tc = grid::BranchRef::parse("17-43");
    const auto oc = data::generate_oc(c, 2, {0.9, 1.0}, tc);
    const auto x = layout.extract(oc.solution);
    ASSERT_EQ(x.size(), layout.size());
    for (const char* prefix : {"i_", "p_", "q_"}) {
        const auto it = std::find(layout.names().begin(), layout.names().end(), prefix + c.branch_ref(c.branch_index(tc)).to_string());
        ASSERT_NE(it, layout.names().end());
        EXPECT_EQ(x[static_cast<std::size_t>(it - layout.names().begin())], 0.0);
    }
}

TEST(Features, NonConvergedRejected) {
    const auto c = vsa::testing::two_bus(600.0);
    EXPECT_THROW(data::extract_features(powerflow::solve_powerflow(c), c), InfeasibleError);
}

TEST(TopologyPlan, ExactCountAndUniformChoice) {
    const auto tcs = list("ieee68_tc.txt");
    const auto plan = data::plan_topology_changes(4000, 0.3, tcs, 11);
    ASSERT_EQ(plan.size(), 4000u);
    std::map<std::string, int> per_tc;
    for (const auto& p : plan)
        if (p) ++per_tc[p->to_string()];
    int total = 0;
    for (const auto& [name, count] : per_tc) total += count;
    EXPECT_EQ(total, 1200);
    EXPECT_EQ(per_tc.size(), tcs.size());
    for (const auto& [name, count] : per_tc) EXPECT_GT(count, 90) << name;  // expected 150 each
    EXPECT_EQ(plan, data::plan_topology_changes(4000, 0.3, tcs, 11));
}

TEST(TopologyPlan, ZeroFractionMeansNoChanges) {
    const auto plan = data::plan_topology_changes(100, 0.0, {}, 1);
    EXPECT_TRUE(std::none_of(plan.begin(), plan.end(), [](const auto& p) { return p.has_value(); }));
}

TEST(BuildDataset, NineBusShapeAndTcCount) {
    const auto c = load_bundled("case9.txt");
    const auto ds = data::build_dataset(c, nine_bus_config(20, 0.3));
    EXPECT_EQ(ds.size(), 20u);
    EXPECT_EQ(ds.count_with_tc(), 6u);
    EXPECT_EQ(ds.feature_count(), data::FeatureLayout(c).size());
    for (const auto& s : ds.samples) EXPECT_EQ(s.features.size(), ds.feature_count());
}

TEST(BuildDataset, DeterministicAcrossThreadCounts) {
    const auto c = load_bundled("case68.txt");
    auto cfg = sixty_eight_bus_config(12, 0.3);
    cfg.threads = 1;
    const auto a = data::build_dataset(c, cfg);
    const auto b = data::build_dataset(c, cfg);
    cfg.threads = 3;
    const auto d = data::build_dataset(c, cfg);
    expect_same(a, b);
    expect_same(a, d);
}

TEST(BuildDataset, InitializationDataCarriesNoTc) {
    const auto ds = data::build_dataset(load_bundled("case68.txt"), sixty_eight_bus_config(10, 0.0));
    EXPECT_EQ(ds.count_with_tc(), 0u);
}

TEST(BuildDataset, LabelsReproduceFromMetadata) {
    const auto c = load_bundled("case68.txt");
    const auto cfg = sixty_eight_bus_config(30, 0.3);
    const auto ds = data::build_dataset(c, cfg);
    std::mt19937_64 rng(4);
    for (int k = 0; k < 10; ++k) {
        const auto& s = ds.samples[rng() % ds.size()];
        const auto again = data::regenerate_sample(c, cfg, s.meta);
        EXPECT_EQ(again.label, s.label);
        EXPECT_EQ(again.features, s.features);
    }
}

TEST(BuildDataset, BothLabelsPresentAtDefaultRange) {
    const auto ds = data::build_dataset(load_bundled("case68.txt"), sixty_eight_bus_config(40, 0.0));
    EXPECT_GT(ds.count(security::Label::Secure), 0u);
    EXPECT_GT(ds.count(security::Label::Insecure), 0u);
    EXPECT_TRUE(ds.notes.empty());
}

TEST(BuildDataset, WidensRangeWhenEverythingIsSecure) {
    const auto c = powerflow::scale_loads(load_bundled("case9.txt"), 0.5, powerflow::GenerationPolicy::Reschedule);
    auto cfg = nine_bus_config(6, 0.0);
    cfg.scale_range = {0.9, 1.0};
    cfg.csc_list = {grid::BranchRef::parse("8-9")};
    cfg.max_widenings = 2;
    const auto ds = data::build_dataset(c, cfg);
    EXPECT_FALSE(ds.notes.empty());
    EXPECT_GT(ds.scale_range.hi, 1.0);
}

TEST(BuildDataset, ConfigValidation) {
    auto cfg = nine_bus_config(10, 0.3);
    cfg.tc_list.clear();
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = nine_bus_config(10, 0.0);
    cfg.csc_list.clear();
    EXPECT_THROW(data::build_dataset(load_bundled("case9.txt"), cfg), ValidationError);
}

TEST(Split, SixtyFortyAtFourThousand) {
    const auto [train, test] = data::split_dataset(synthetic(4000), 0.6, 1);
    EXPECT_EQ(train.size(), 2400u);
    EXPECT_EQ(test.size(), 1600u);
}

TEST(Split, TwoSamplesHalf) {
    const auto [train, test] = data::split_dataset(synthetic(2), 0.5, 1);
    EXPECT_EQ(train.size(), 1u);
    EXPECT_EQ(test.size(), 1u);
}

TEST(Split, FloorOfFractionForManySizes) {
    for (std::size_t n : {1u, 3u, 7u, 10u, 99u, 100u, 1000u}) {
        for (double f : {0.1, 0.29, 0.3, 0.5, 0.6, 0.7, 0.99}) {
            const auto [train, test] = data::split_dataset(synthetic(n), f, 3);
            // Integer arithmetic on the percentage avoids binary rounding in the oracle.
            const auto pct = static_cast<std::size_t>(std::llround(f * 100));
            EXPECT_EQ(train.size(), n * pct / 100) << n << " " << f;
            EXPECT_EQ(train.size() + test.size(), n);
        }
    }
}

TEST(Split, DisjointAndDeterministic) {
    const auto ds = synthetic(50);
    const auto [train, test] = data::split_dataset(ds, 0.6, 9);
    const auto [train2, test2] = data::split_dataset(ds, 0.6, 9);
    EXPECT_EQ(train.samples, train2.samples);
    EXPECT_EQ(test.samples, test2.samples);
    std::multiset<double> all;
    for (const auto* part : {&train, &test})
        for (const auto& s : part->samples) all.insert(s.features[0]);
    EXPECT_EQ(all.size(), 50u);
    EXPECT_EQ(std::set<double>(all.begin(), all.end()).size(), 50u);
    const auto [train3, test3] = data::split_dataset(ds, 0.6, 10);
    EXPECT_NE(train.samples, train3.samples);
}

TEST(Split, Errors) {
    EXPECT_THROW(data::split_dataset(synthetic(0), 0.5, 1), ValidationError);
    EXPECT_THROW(data::split_dataset(synthetic(5), 1.0, 1), ValidationError);
    EXPECT_THROW(data::split_dataset(synthetic(5), 0.0, 1), ValidationError);
}

TEST(DatasetFile, RoundTrip) {
    const auto c = load_bundled("case9.txt");
    const auto ds = data::build_dataset(c, nine_bus_config(15, 0.3));
    const auto dir = vsa::testing::scratch_dir("dataset_rt");
    data::write_dataset(ds, dir / "ds.csv");
    expect_same(data::read_dataset(dir / "ds.csv"), ds);
}

TEST(DatasetFile, LabelEncoding) {
    auto ds = synthetic(3);
    const auto dir = vsa::testing::scratch_dir("dataset_labels");
    data::write_dataset(ds, dir / "ds.csv");
    std::ifstream in(dir / "ds.csv");
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    EXPECT_EQ(header, "a,b,label");
    EXPECT_EQ(row0.back(), '0');  // sample 0 is Insecure
    EXPECT_EQ(row1.back(), '1');
}

TEST(DatasetFile, BadLabelRejected) {
    const auto dir = vsa::testing::scratch_dir("dataset_bad");
    std::ofstream(dir / "ds.csv") << "a,label\n0.5,2\n";
    EXPECT_THROW(data::read_dataset(dir / "ds.csv"), ParseError);
}
