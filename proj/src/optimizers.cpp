#include "vsa/optimizers.hpp"

#include <cmath>
#include <string>

#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::optim {

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::SGD:
            return "SGD";
        case Algorithm::SGDMomentum:
            return "SGD-m";
        case Algorithm::NAG:
            return "NAG";
        case Algorithm::NAGMomentum:
            return "NAG-m";
        case Algorithm::AdaGrad:
            return "AdaGrad";
        case Algorithm::Adam:
            return "Adam";
        case Algorithm::Nadam:
            return "Nadam";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view name) {
    for (auto a : kAllAlgorithms)
        if (to_string(a) == name) return a;
    std::string valid;
    for (auto a : kAllAlgorithms) {
        if (!valid.empty()) valid += ", ";
        valid += to_string(a);
    }
    throw ValidationError("unknown algorithm '" + std::string(name) + "'; valid names: " + valid);
}

OptimizerConfig OptimizerConfig::defaults(Algorithm a) {
    OptimizerConfig c;
    c.algorithm = a;
    if (a == Algorithm::Adam || a == Algorithm::Nadam) c.learning_rate = 0.001;
    return c;
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ValidationError("momentum must lie in [0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must lie in [0, 1)");
    if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
}

void OptimizerState::reset(Eigen::Index size) {
    k = 0;
    prev_delta = Eigen::VectorXd::Zero(size);
    accum = Eigen::VectorXd::Zero(size);
    m = Eigen::VectorXd::Zero(size);
    v = Eigen::VectorXd::Zero(size);
}

std::uint64_t OptimizerState::checksum() const {
    auto h = text::fnv1a(&k, sizeof k);
    for (const auto* vec : {&prev_delta, &accum, &m, &v})
        h = text::fnv1a(vec->data(), static_cast<std::size_t>(vec->size()) * sizeof(double), h);
    return h;
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size) : config_(config) {
    config_.validate();
    state_.reset(size);
}

Eigen::VectorXd Optimizer::step(Eigen::VectorXd& theta, const GradientFn& grad_fn) {
    if (state_.prev_delta.size() != theta.size()) {
        if (state_.k != 0) throw DimensionError("optimizer state does not match parameter vector");
        state_.reset(theta.size());
    }
    const auto& c = config_;
    const bool nesterov = c.algorithm == Algorithm::NAG || c.algorithm == Algorithm::NAGMomentum;

    Eigen::VectorXd g = nesterov ? grad_fn(theta + c.momentum * state_.prev_delta) : grad_fn(theta);
    if (g.size() != theta.size())
        throw DimensionError("gradient has " + std::to_string(g.size()) + " entries, parameters " +
                             std::to_string(theta.size()));
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i])) throw NonFiniteGradientError(static_cast<std::size_t>(i));

    const std::uint64_t k = state_.k + 1;
    Eigen::VectorXd delta;
    switch (c.algorithm) {
        case Algorithm::SGD:
        case Algorithm::NAG:
            delta = -c.learning_rate * g;
            break;
        case Algorithm::SGDMomentum:
        case Algorithm::NAGMomentum:
            delta = c.momentum * state_.prev_delta - c.learning_rate * g;
            break;
        case Algorithm::AdaGrad:
            state_.accum += g.cwiseAbs2();
            delta = (-c.learning_rate * g.array() / (state_.accum.array().sqrt() + c.epsilon)).matrix();
            break;
        case Algorithm::Adam:
        case Algorithm::Nadam: {
            state_.m = c.beta1 * state_.m + (1.0 - c.beta1) * g;
            state_.v = c.beta2 * state_.v + (1.0 - c.beta2) * g.cwiseAbs2();
            const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(k));
            const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(k));
            const Eigen::ArrayXd m_hat = state_.m.array() / bias1;
            const Eigen::ArrayXd v_hat = state_.v.array() / bias2;
            const Eigen::ArrayXd denom = v_hat.sqrt() + c.epsilon;
            if (c.algorithm == Algorithm::Adam) {
                delta = (-c.learning_rate * m_hat / denom).matrix();
            } else {
                const Eigen::ArrayXd inner = c.beta1 * m_hat + ((1.0 - c.beta1) / bias1) * g.array();
                delta = (-c.learning_rate * inner / denom).matrix();
            }
            break;
        }
    }
    theta += delta;
    state_.prev_delta = delta;
    state_.k = k;
    return delta;
}

}  // namespace vsa::optim
