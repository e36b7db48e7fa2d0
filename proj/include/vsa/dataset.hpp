#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vsa/dispatch.hpp"
#include "vsa/grid_model.hpp"
#include "vsa/powerflow.hpp"
#include "vsa/security.hpp"

namespace vsa::data {

struct ScaleRange {
    double lo = 0.8;
    double hi = 1.05;
};

/// One randomized operating condition before labeling.
struct OperatingCondition {
    grid::NetworkCase scaled_case;
    powerflow::PowerFlowSolution solution;
    std::vector<double> load_scales;  // one factor per load, case.loads() order
    std::uint64_t sample_seed = 0;
    int attempt = 0;  // index of the accepted draw; equals the number of rejected draws
};

struct GenerationOptions {
    powerflow::SolverOptions solver;
    int max_consecutive_rejections = 50;
};

/// Load factors for one draw. Deterministic in (sample_seed, attempt).
std::vector<double> draw_load_scales(std::size_t load_count, std::uint64_t sample_seed, int attempt,
                                     const ScaleRange& range);

/// Builds a single (unsolved) draw: per-load scaling, generation rescheduling, optional TC outage.
grid::NetworkCase make_draw(const grid::NetworkCase& base, const std::vector<double>& load_scales,
                            const std::optional<grid::BranchRef>& tc);

/// Draws until the pre-contingency power flow converges. Throws InfeasibleError after
/// `max_consecutive_rejections` failed draws ("infeasible generation config").
OperatingCondition generate_oc(const grid::NetworkCase& base, std::uint64_t sample_seed, const ScaleRange& range,
                               const std::optional<grid::BranchRef>& tc = std::nullopt,
                               const GenerationOptions& options = {});

/// Fixed measurement layout derived from the base topology:
///   v_mag of every PQ bus (ascending id), v_ang of the same buses,
///   then i_from, p_from and q_from of every branch in service in the base case.
/// M = 2 * N_loadbus + 3 * N_branch.
class FeatureLayout {
  public:
    explicit FeatureLayout(const grid::NetworkCase& base);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    /// Out-of-service branches read as 0.0. Throws InfeasibleError for non-converged solutions.
    std::vector<double> extract(const powerflow::PowerFlowSolution& solution) const;

  private:
    std::vector<std::size_t> load_buses_;
    std::vector<std::size_t> branches_;
    std::vector<std::string> names_;
};

std::vector<double> extract_features(const powerflow::PowerFlowSolution& solution, const grid::NetworkCase& base);

struct SampleMeta {
    std::uint64_t sample_seed = 0;
    int attempt = 0;
    std::optional<grid::BranchRef> tc;

    bool operator==(const SampleMeta&) const = default;
};

struct LabeledSample {
    std::vector<double> features;
    security::Label label = security::Label::Secure;
    SampleMeta meta;

    bool operator==(const LabeledSample&) const = default;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::string> feature_names;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::size_t rejections = 0;
    ScaleRange scale_range;  // range actually used, after any widening
    std::vector<std::string> notes;  // e.g. scale-range widening

    std::size_t size() const { return samples.size(); }
    std::size_t feature_count() const { return feature_names.size(); }
    std::size_t count(security::Label label) const;
    std::size_t count_with_tc() const;
};

struct DatasetConfig {
    std::size_t n_samples = 4000;
    ScaleRange scale_range;
    double tc_fraction = 0.0;
    std::vector<grid::BranchRef> tc_list;
    std::vector<grid::BranchRef> csc_list;
    std::uint64_t seed = 1;
    security::OperatingLimits limits;
    GenerationOptions generation;
    /// If every sample comes out Secure, raise scale_range.hi by widen_step (up to max_widenings)
    /// and regenerate.
    bool ensure_both_labels = true;
    double widen_step = 0.05;
    int max_widenings = 4;
    unsigned threads = 0;  // 0 = hardware concurrency

    void validate() const;
    /// Canonical text form, hashed into Dataset::config_digest.
    std::string canonical() const;
};

/// Which samples carry a topology change: exactly round(fraction * n) of them, chosen by a seeded
/// shuffle, each drawing its TC uniformly from `tc_list`.
std::vector<std::optional<grid::BranchRef>> plan_topology_changes(std::size_t n, double fraction,
                                                                  const std::vector<grid::BranchRef>& tc_list,
                                                                  std::uint64_t seed);

Dataset build_dataset(const grid::NetworkCase& base, const DatasetConfig& config);

/// Regenerates and relabels one sample from its metadata (label spot checks).
LabeledSample regenerate_sample(const grid::NetworkCase& base, const DatasetConfig& config, const SampleMeta& meta);

/// Seeded shuffle, then the first floor(f * N) samples go to the training split.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Delimited text: header of feature names plus "label"; label 1 = Secure, 0 = Insecure.
/// Companion files `<path>.meta` (key-value) and `<path>.samples` (per-sample metadata).
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace vsa::data
