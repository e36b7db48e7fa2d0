#include "vsa/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "vsa/error.hpp"

namespace vsa::nn {

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
    if (a == Activation::ReLU) z = z.cwiseMax(0.0);
    else z = z.array().tanh().matrix();
}

/// d(activation)/dz expressed through the activated value.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& activated, Activation a) {
    if (a == Activation::ReLU) return (activated.array() > 0.0).cast<double>().matrix();
    return (1.0 - activated.array().square()).matrix();
}

void check_input(const Architecture& arch, const ParameterVector& theta, const Eigen::MatrixXd& x,
                 std::size_t label_count) {
    arch.validate();
    if (static_cast<std::size_t>(theta.size()) != arch.parameter_count())
        throw DimensionError("parameter vector has " + std::to_string(theta.size()) + " entries, architecture needs " +
                             std::to_string(arch.parameter_count()));
    if (static_cast<std::size_t>(x.rows()) != arch.input_size())
        throw DimensionError("input has " + std::to_string(x.rows()) + " features, network expects " +
                             std::to_string(arch.input_size()));
    if (label_count != static_cast<std::size_t>(x.cols())) throw DimensionError("one label per sample expected");
}

/// Log-probability of the true class for every column.
Eigen::VectorXd true_class_log_prob(const Eigen::MatrixXd& z, std::span<const int> labels) {
    Eigen::VectorXd out(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double zmax = z.col(j).maxCoeff();
        const double lse = zmax + std::log((z.col(j).array() - zmax).exp().sum());
        out[j] = z(labels[static_cast<std::size_t>(j)], j) - lse;
    }
    return out;
}

void check_labels(std::span<const int> labels, std::size_t classes) {
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DimensionError("label out of range");
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
    if (name == "relu" || name == "ReLU") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    throw ValidationError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

void Architecture::validate() const {
    if (layer_sizes.size() < 3) throw ValidationError("network needs at least one hidden layer");
    for (auto s : layer_sizes)
        if (s < 1) throw ValidationError("layer sizes must be >= 1");
}

std::size_t Architecture::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return n;
}

std::size_t Architecture::weight_offset(std::size_t l) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < l; ++k) n += (layer_sizes[k] + 1) * layer_sizes[k + 1];
    return n;
}

Architecture default_architecture(std::size_t input_size) { return {{input_size, 64, 32, 2}, Activation::ReLU}; }

ParameterVector init_params(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    ParameterVector theta = ParameterVector::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const auto fan_in = arch.layer_sizes[l];
        const auto fan_out = arch.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const auto offset = static_cast<Eigen::Index>(arch.weight_offset(l));
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(fan_in * fan_out); ++k) theta[offset + k] = dist(rng);
    }
    return theta;
}

Eigen::Map<const Eigen::MatrixXd> layer_weights(const ParameterVector& theta, const Architecture& arch, std::size_t l) {
    return {theta.data() + arch.weight_offset(l), static_cast<Eigen::Index>(arch.layer_sizes[l + 1]),
            static_cast<Eigen::Index>(arch.layer_sizes[l])};
}

Eigen::Map<const Eigen::VectorXd> layer_bias(const ParameterVector& theta, const Architecture& arch, std::size_t l) {
    const auto offset = arch.weight_offset(l) + arch.layer_sizes[l] * arch.layer_sizes[l + 1];
    return {theta.data() + offset, static_cast<Eigen::Index>(arch.layer_sizes[l + 1])};
}

Eigen::MatrixXd logits(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        Eigen::MatrixXd z = layer_weights(theta, arch, l) * a;
        z.colwise() += layer_bias(theta, arch, l);
        if (l + 1 < arch.layer_count()) activate(z, arch.activation);
        a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd p(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const Eigen::ArrayXd e = (z.col(j).array() - z.col(j).maxCoeff()).exp();
        p.col(j) = (e / e.sum()).matrix();
    }
    return p;
}

Eigen::VectorXd forward(const ParameterVector& theta, const Architecture& arch, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd col = x;
    check_input(arch, theta, col, 1);
    return softmax(logits(theta, arch, col)).col(0);
}

LossGradient loss_and_gradient(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
                               std::span<const int> labels) {
    if (labels.empty()) throw ValidationError("loss needs a non-empty batch");
    check_input(arch, theta, x, labels.size());
    check_labels(labels, arch.output_size());

    const std::size_t layers = arch.layer_count();
    const auto batch = static_cast<double>(x.cols());

    // activations[0] = input, activations[l] = output of layer l-1 (post-activation for hidden layers).
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers + 1);
    activations.push_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = layer_weights(theta, arch, l) * activations.back();
        z.colwise() += layer_bias(theta, arch, l);
        if (l + 1 < layers) activate(z, arch.activation);
        activations.push_back(std::move(z));
    }

    const Eigen::MatrixXd& z_out = activations.back();
    LossGradient out;
    out.loss = -true_class_log_prob(z_out, labels).mean();
    out.gradient = ParameterVector::Zero(theta.size());

    Eigen::MatrixXd delta = softmax(z_out);
    for (Eigen::Index j = 0; j < delta.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    delta /= batch;

    for (std::size_t l = layers; l-- > 0;) {
        const auto rows = static_cast<Eigen::Index>(arch.layer_sizes[l + 1]);
        const auto cols = static_cast<Eigen::Index>(arch.layer_sizes[l]);
        const auto offset = static_cast<Eigen::Index>(arch.weight_offset(l));
        Eigen::Map<Eigen::MatrixXd> grad_w(out.gradient.data() + offset, rows, cols);
        Eigen::Map<Eigen::VectorXd> grad_b(out.gradient.data() + offset + rows * cols, rows);
        grad_w.noalias() = delta * activations[l].transpose();
        grad_b = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = layer_weights(theta, arch, l).transpose() * delta;
            delta = back.cwiseProduct(activation_slope(activations[l], arch.activation));
        }
    }
    return out;
}

double loss(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
            std::span<const int> labels) {
    if (labels.empty()) throw ValidationError("loss needs a non-empty batch");
    check_input(arch, theta, x, labels.size());
    check_labels(labels, arch.output_size());
    return -true_class_log_prob(logits(theta, arch, x), labels).mean();
}

std::vector<int> predict(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x) {
    check_input(arch, theta, x, static_cast<std::size_t>(x.cols()));
    const Eigen::MatrixXd p = softmax(logits(theta, arch, x));
    std::vector<int> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        int best = 0;
        for (Eigen::Index k = 1; k < p.rows(); ++k)
            if (p(k, j) > p(best, j)) best = static_cast<int>(k);
        out[static_cast<std::size_t>(j)] = best;
    }
    return out;
}

Metrics evaluate(const ParameterVector& theta, const Architecture& arch, const Eigen::MatrixXd& x,
                 std::span<const int> labels) {
    if (labels.empty()) return {0.0, 0.0};
    check_input(arch, theta, x, labels.size());
    check_labels(labels, arch.output_size());
    const Eigen::MatrixXd z = logits(theta, arch, x);
    const Eigen::MatrixXd p = softmax(z);
    std::size_t correct = 0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        int best = 0;
        for (Eigen::Index k = 1; k < p.rows(); ++k)
            if (p(k, j) > p(best, j)) best = static_cast<int>(k);
        if (best == labels[static_cast<std::size_t>(j)]) ++correct;
    }
    return {static_cast<double>(correct) / static_cast<double>(labels.size()), -true_class_log_prob(z, labels).mean()};
}

StandardizationStats StandardizationStats::compute(const Eigen::MatrixXd& x) {
    if (x.cols() == 0) throw ValidationError("standardization needs at least one sample");
    StandardizationStats s;
    s.mean = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - s.mean;
    s.stddev = (centered.array().square().rowwise().sum() / static_cast<double>(x.cols())).sqrt().matrix();
    for (Eigen::Index i = 0; i < s.stddev.size(); ++i) {
        const double scale = std::max(1.0, std::abs(s.mean[i]));
        if (!(s.stddev[i] > 1e-12 * scale)) s.stddev[i] = 1.0;
    }
    return s;
}

Eigen::MatrixXd StandardizationStats::apply(const Eigen::MatrixXd& x) const {
    if (x.rows() != mean.size()) throw DimensionError("standardization stats do not match feature count");
    return ((x.colwise() - mean).array().colwise() / stddev.array()).matrix();
}

}  // namespace vsa::nn
