#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sbtrpo/policy.hpp"
#include "sbtrpo/rollout.hpp"

namespace sbtrpo {

enum class Signal { Reward, Cost };

/// Sample-average policy-gradient estimate of the surrogate gradient at the
/// collection policy: (1/N) * sum_t grad log pi(a_t|s_t) * advantage_t.
Eigen::VectorXd surrogate_grad(const Batch& batch, const Eigen::VectorXd& params,
                               const PolicySpec& spec, Signal signal);

/// Sampled surrogate at params_new relative to the collection policy:
/// (1/N) * sum_t exp(logp_new - logp_old)_t * advantage_t. The constant
/// offset J(theta_old) is omitted; only differences matter to the line
/// search. A log-ratio above 30 signals a probe far outside the trust region
/// and raises NumericalError.
double surrogate_value(const Batch& batch, const Eigen::VectorXd& params_old,
                       const Eigen::VectorXd& params_new, const PolicySpec& spec, Signal signal);

/// Per-epoch cache of score vectors grad log pi(a_t|s_t). Rows identical in
/// (obs, action) are stored once with a count, which collapses tabular
/// batches to at most |S| x |A| backprops and makes repeated Fisher-vector
/// products cheap. Exact: grouping keys on byte-equal doubles.
class ScoreCache {
public:
    ScoreCache(const Eigen::VectorXd& params, const PolicySpec& spec,
               const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions);

    /// (1/N) * sum_i g_i (g_i . v) + damping * v.
    Eigen::VectorXd fvp(const Eigen::VectorXd& v, double damping) const;

    /// (1/N) * sum_t w_t * g_t for per-timestep weights w.
    Eigen::VectorXd weighted_grad(const Eigen::VectorXd& weights) const;

    int unique_rows() const { return static_cast<int>(scores_.rows()); }
    int batch_size() const { return n_; }

private:
    Eigen::MatrixXd scores_;   // U x d, one row per distinct (obs, action)
    Eigen::VectorXd counts_;   // U
    std::vector<int> group_;   // N -> U
    int n_ = 0;
};

} // namespace sbtrpo
