#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace vsa::optim {

enum class Algorithm { SGD, SGDMomentum, NAG, NAGMomentum, AdaGrad, Adam, Nadam };

inline constexpr std::array<Algorithm, 7> kAllAlgorithms = {Algorithm::SGD,         Algorithm::NAG,
                                                             Algorithm::SGDMomentum, Algorithm::NAGMomentum,
                                                             Algorithm::AdaGrad,     Algorithm::Adam,
                                                             Algorithm::Nadam};

/// Display names: SGD, SGD-m, NAG, NAG-m, AdaGrad, Adam, Nadam.
std::string_view to_string(Algorithm a);

/// Throws ValidationError listing the valid names.
Algorithm parse_algorithm(std::string_view name);

struct OptimizerConfig {
    Algorithm algorithm = Algorithm::SGD;
    double learning_rate = 0.01;
    double momentum = 0.9;  // gamma, constant over steps
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// lr 0.01 for the non-adaptive rules and AdaGrad; lr 0.001 for Adam and Nadam.
    static OptimizerConfig defaults(Algorithm a);
    void validate() const;

    bool operator==(const OptimizerConfig&) const = default;
};

/// Zero-initialized accumulators. `k` counts completed steps.
struct OptimizerState {
    std::uint64_t k = 0;
    Eigen::VectorXd prev_delta;  // momentum variants
    Eigen::VectorXd accum;       // AdaGrad: running sum of g^2
    Eigen::VectorXd m;           // Adam/Nadam first raw moment
    Eigen::VectorXd v;           // Adam/Nadam second raw moment

    void reset(Eigen::Index size);
    /// FNV-1a over k and every state vector, used to prove state continuity across phases.
    std::uint64_t checksum() const;

    bool operator==(const OptimizerState& o) const {
        return k == o.k && prev_delta == o.prev_delta && accum == o.accum && m == o.m && v == o.v;
    }
};

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// One update of the chosen rule: theta <- theta + delta. Returns delta.
/// The gradient is requested at theta, or at theta + gamma * prev_delta for the Nesterov rules.
/// Throws NonFiniteGradientError (with the coordinate) before touching theta or the state.
class Optimizer {
  public:
    explicit Optimizer(OptimizerConfig config, Eigen::Index size = 0);

    Eigen::VectorXd step(Eigen::VectorXd& theta, const GradientFn& grad_fn);

    const OptimizerConfig& config() const { return config_; }
    const OptimizerState& state() const { return state_; }
    OptimizerState& state() { return state_; }

  private:
    OptimizerConfig config_;
    OptimizerState state_;
};

}  // namespace vsa::optim
