#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace vsa::nn {

using ParameterVector = Eigen::VectorXd;

enum class Activation { ReLU, Tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Fully connected network [M, h_1, ..., h_L, 2] with a softmax output.
/// Parameters are flattened layer by layer: W (out x in, column-major) then b (out).
struct Architecture {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::ReLU;

    void validate() const;
    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return layer_sizes.size() - 1; }
    std::size_t parameter_count() const;
    /// Offset of layer `l`'s weight block inside the flat vector; its bias follows the weights.
    std::size_t weight_offset(std::size_t l) const;

    bool operator==(const Architecture&) const = default;
};

/// Default [M, 64, 32, 2] ReLU network.
Architecture default_architecture(std::size_t input_size);

/// Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ParameterVector init_params(const Architecture& arch, std::uint64_t seed);

Eigen::Map<const Eigen::MatrixXd> layer_weights(const ParameterVector& theta, const Architecture& arch, std::size_t l);
Eigen::Map<const Eigen::VectorXd> layer_bias(const ParameterVector& theta, const Architecture& arch, std::size_t l);

/// Output logits for a batch; columns of `x` are samples.
Eigen::MatrixXd logits(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x);

/// Column-wise softmax with max subtraction.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

/// Class probabilities [p_secure, p_insecure] for one standardized feature vector.
Eigen::VectorXd forward(const ParameterVector& theta, const Architecture& arch, const Eigen::VectorXd& x);

struct LossGradient {
    double loss = 0.0;
    ParameterVector gradient;
};

/// Mean cross-entropy over the batch and its exact gradient. Labels are class indices
/// (0 = Secure, 1 = Insecure).
LossGradient loss_and_gradient(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
                               std::span<const int> labels);

double loss(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
            std::span<const int> labels);

struct Metrics {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Argmax prediction; exact ties go to class 0 (Secure).
Metrics evaluate(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
                 std::span<const int> labels);

std::vector<int> predict(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x);

/// Per-feature mean and population standard deviation of a training split. Constant features get
/// std = 1 so they standardize to 0.
struct StandardizationStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    static StandardizationStats compute(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

    bool operator==(const StandardizationStats& o) const { return mean == o.mean && stddev == o.stddev; }
};

}  // namespace vsa::nn
