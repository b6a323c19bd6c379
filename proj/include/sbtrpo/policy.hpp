#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sbtrpo/errors.hpp"
#include "sbtrpo/rng.hpp"

namespace sbtrpo {

enum class Head { DiagonalGaussian, Categorical };

/// Architecture of a stochastic policy: a Tanh MLP producing either the mean
/// of a diagonal Gaussian (with state-independent log-stds held as extra
/// parameters) or the logits of a categorical distribution.
struct PolicySpec {
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<int> hidden_sizes{64, 64};
    Head head = Head::DiagonalGaussian;

    void validate() const;

    /// Total number of parameters: all layer weights and biases, plus act_dim
    /// log-std entries for the Gaussian head.
    int param_count() const;

    /// Columns an action occupies in a batch: act_dim for Gaussian actions,
    /// 1 for a categorical index.
    int action_cols() const;

    bool operator==(const PolicySpec&) const = default;
};

struct ActionDistribution {
    Head head = Head::DiagonalGaussian;
    Eigen::VectorXd mean;     // Gaussian
    Eigen::VectorXd log_std;  // Gaussian
    Eigen::VectorXd logits;   // Categorical

    /// Categorical probabilities (softmax of logits).
    Eigen::VectorXd probs() const;
};

/// Deterministic initialization: per-layer weights uniform in
/// +-sqrt(1/fan_in), biases zero, Gaussian log-stds zero (std exactly 1).
Eigen::VectorXd policy_init(const PolicySpec& spec, uint64_t seed);

/// Forward pass: linear-Tanh through every hidden layer, linear output.
ActionDistribution act_distribution(const Eigen::VectorXd& params, const PolicySpec& spec,
                                    const Eigen::VectorXd& obs);

double log_prob(const ActionDistribution& dist, const Eigen::VectorXd& action);

double log_prob(const Eigen::VectorXd& params, const PolicySpec& spec,
                const Eigen::VectorXd& obs, const Eigen::VectorXd& action);

/// Exact gradient of log_prob with respect to every parameter
/// (backpropagation with the analytic Gaussian/categorical score at the head).
Eigen::VectorXd log_prob_grad(const Eigen::VectorXd& params, const PolicySpec& spec,
                              const Eigen::VectorXd& obs, const Eigen::VectorXd& action);

/// Sample-average closed-form KL(old || new) over a batch of observations.
double kl_mean(const Eigen::VectorXd& params_old, const Eigen::VectorXd& params_new,
               const PolicySpec& spec, const Eigen::MatrixXd& obs_batch);

/// Matrix-free damped Fisher-vector product over sampled (obs, action) pairs:
/// (1/N) * sum_i g_i * (g_i . v) + damping * v, with g_i the score at sample i.
/// Never materializes the d x d matrix.
Eigen::VectorXd fisher_vector_product(const Eigen::VectorXd& params, const PolicySpec& spec,
                                      const Eigen::MatrixXd& obs_batch,
                                      const Eigen::MatrixXd& actions,
                                      const Eigen::VectorXd& v, double damping);

Eigen::VectorXd sample_action(const ActionDistribution& dist, Rng& rng);

} // namespace sbtrpo
