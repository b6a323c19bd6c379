#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "sbtrpo/envs.hpp"
#include "sbtrpo/policy.hpp"

namespace sbtrpo {

/// Contiguous stretch of transitions belonging to one episode (or the cut
/// tail of one still in progress at batch end).
struct EpisodeSegment {
    int begin = 0;
    int end = 0;        // exclusive
    bool completed = false;  // terminal reached or horizon truncation
};

/// One on-policy batch of experience with Monte-Carlo returns-to-go.
struct Batch {
    Eigen::MatrixXd obs;        // N x obs_dim
    Eigen::MatrixXd actions;    // N x action_cols
    Eigen::VectorXd rewards;
    Eigen::VectorXd costs;
    Eigen::VectorXd log_prob_old;
    Eigen::VectorXd ret_r, ret_c;
    Eigen::VectorXd adv_r, adv_c;
    std::vector<EpisodeSegment> segments;

    int size() const { return static_cast<int>(rewards.size()); }
};

struct EpisodeStats {
    double total_reward = 0.0;  // undiscounted
    double total_cost = 0.0;
    int length = 0;
};

struct Metrics {
    double mean_reward = 0.0;
    double mean_cost = 0.0;
    double safety_probability = 0.0;
    double safe_reward = 0.0;
    int n_episodes = 0;
};

/// Discounted returns-to-go over a single episode: backward recursion
/// G_t = x_t + gamma * G_{t+1}, with G at the last step equal to x there
/// (truncation bootstraps 0; there is no critic).
Eigen::VectorXd mc_returns(const Eigen::VectorXd& x, double gamma);

/// Collects exactly n_steps transitions, n_steps / envs.size() per worker in
/// fixed worker order, sampling actions from the current policy.
/// Deterministic given (params, seed, worker count); environments are reseeded
/// at the start of every episode from (seed, worker, episode index).
std::pair<Batch, std::vector<EpisodeStats>> collect(std::vector<std::unique_ptr<Env>>& envs,
                                                    const Eigen::VectorXd& params,
                                                    const PolicySpec& spec, int n_steps,
                                                    uint64_t seed, double gamma);

/// Mean-centered advantages from the stored returns. Reward advantages are
/// additionally divided by (population std + 1e-8) when whitening is on; cost
/// advantages are never whitened so the scale of <g_c, delta_c> is preserved.
void compute_advantages(Batch& batch, bool whiten_reward);

/// Safety probability, safe reward, and plain means over completed episodes.
Metrics episode_metrics(const std::vector<EpisodeStats>& stats);

} // namespace sbtrpo
