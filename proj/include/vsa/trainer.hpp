#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsa/dataset.hpp"
#include "vsa/mlp.hpp"
#include "vsa/optimizers.hpp"

namespace vsa::train {

/// Column-per-sample feature matrix with class indices (0 = Secure, 1 = Insecure).
struct DesignMatrix {
    Eigen::MatrixXd x;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

DesignMatrix to_design_matrix(const data::Dataset& ds);
DesignMatrix standardized(const DesignMatrix& m, const nn::StandardizationStats& stats);

enum class Phase { Initialization, Update };

std::string_view to_string(Phase p);

struct PhaseData {
    DesignMatrix train;
    DesignMatrix test;
    /// Extra split evaluated at every log row (the initialization test split during the update phase).
    std::optional<DesignMatrix> reference_test;
};

struct PhasePlan {
    Phase phase = Phase::Initialization;
    const PhaseData* data = nullptr;
    std::size_t epochs = 1;
    std::size_t eval_every = 100;

    void validate() const;
};

struct LogRow {
    Phase phase = Phase::Initialization;
    std::size_t epoch = 0;  // 1-based within the phase
    double loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double reference_test_accuracy = 0.0;
    double wall_ms = 0.0;
    bool diverged = false;

    bool operator==(const LogRow&) const = default;
};

struct TrainingLog {
    std::string algorithm;
    std::vector<LogRow> rows;
    std::uint64_t init_end_checksum = 0;
    std::uint64_t update_start_checksum = 0;

    /// Row at `epoch` of `phase`, if it was logged.
    const LogRow* find(Phase phase, std::size_t epoch) const;
    const LogRow* last(Phase phase) const;
    const LogRow* first(Phase phase) const;
};

/// Everything that survives between phases: network, optimizer accumulators, frozen statistics.
struct ModelState {
    nn::Architecture arch;
    nn::ParameterVector theta;
    optim::Optimizer optimizer{optim::OptimizerConfig{}};
    nn::StandardizationStats stats;
    std::size_t epochs_done = 0;
    bool diverged = false;

    static ModelState create(const nn::Architecture& arch, const optim::OptimizerConfig& config,
                             nn::StandardizationStats stats, std::uint64_t init_seed);
};

struct RunOptions {
    std::size_t batch_size = 0;  // 0 = full batch, one optimizer step per epoch
    std::uint64_t shuffle_seed = 0;
    bool record_wall_time = false;
};

/// Runs `plan.epochs` epochs without resetting the optimizer. Rows are logged at epoch 1, every
/// `eval_every` epochs and at the last epoch. A non-finite gradient or loss marks the run as
/// diverged; the remaining scheduled rows are still emitted, flagged and with NaN metrics.
std::vector<LogRow> run_phase(ModelState& model, const PhasePlan& plan, const RunOptions& options = {});

// -- Checkpoints ------------------------------------------------------------------------------

void write_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState read_checkpoint(const std::filesystem::path& path);

// -- Experiments ------------------------------------------------------------------------------

struct ExperimentConfig {
    std::string name = "experiment";
    std::filesystem::path init_dataset;
    std::filesystem::path update_dataset;
    double train_fraction = 0.6;
    std::uint64_t split_seed = 1;
    std::uint64_t seed = 1;  // weight init and mini-batch order, shared by every algorithm
    std::size_t init_epochs = 2000;
    std::size_t update_epochs = 4000;
    std::size_t eval_every = 100;
    std::size_t batch_size = 0;
    std::vector<std::size_t> hidden = {64, 32};
    nn::Activation activation = nn::Activation::ReLU;
    std::vector<optim::OptimizerConfig> algorithms;
    std::vector<std::size_t> init_checkpoints = {1000, 2000};
    std::vector<std::size_t> update_checkpoints = {1000, 2000, 3000, 4000};
    bool record_wall_time = false;
    unsigned threads = 0;

    void validate() const;
};

/// INI-style experiment file. Dataset paths are resolved relative to `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct PhaseDatasets {
    PhaseData init;
    PhaseData update;
    nn::StandardizationStats stats;
};

/// Splits both datasets and standardizes them with statistics of the initialization training split.
PhaseDatasets prepare_phase_data(const data::Dataset& init, const data::Dataset& update, double train_fraction,
                                 std::uint64_t split_seed);

/// Initialization phase followed by the update phase on the same model and optimizer state.
TrainingLog run_online_training(const optim::OptimizerConfig& algorithm, const PhaseDatasets& data,
                                const ExperimentConfig& config);

struct SummaryRow {
    std::string algorithm;
    std::string metric;  // "train" or "test"
    std::vector<double> values;  // init checkpoints, then update checkpoints
};

struct Summary {
    std::vector<std::string> columns;
    std::vector<SummaryRow> rows;
};

Summary summarize(const std::vector<TrainingLog>& logs, const std::vector<std::size_t>& init_checkpoints,
                  const std::vector<std::size_t>& update_checkpoints);

std::string render_log(const TrainingLog& log);
TrainingLog parse_log(std::string_view text);
std::string render_summary(const Summary& summary);

struct ExperimentResult {
    std::vector<TrainingLog> logs;
    Summary summary;
};

/// Runs every configured algorithm with identical initial weights and data order. When `out_dir`
/// is given, writes log_<algorithm>.csv per algorithm and summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir);

}  // namespace vsa::train
