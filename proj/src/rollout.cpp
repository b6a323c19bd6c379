#include "sbtrpo/rollout.hpp"

#include <cmath>

namespace sbtrpo {

Eigen::VectorXd mc_returns(const Eigen::VectorXd& x, double gamma) {
    if (x.size() < 1) throw InputError("mc_returns: empty sequence");
    Eigen::VectorXd g(x.size());
    double acc = 0.0;
    for (Eigen::Index t = x.size() - 1; t >= 0; --t) {
        acc = x[t] + gamma * acc;
        g[t] = acc;
    }
    return g;
}

std::pair<Batch, std::vector<EpisodeStats>> collect(std::vector<std::unique_ptr<Env>>& envs,
                                                    const Eigen::VectorXd& params,
                                                    const PolicySpec& spec, int n_steps,
                                                    uint64_t seed, double gamma) {
    if (envs.empty()) throw InputError("collect: no environments");
    const int n_envs = static_cast<int>(envs.size());
    if (n_steps < 1 || n_steps % n_envs != 0)
        throw InputError("collect: n_steps must be a positive multiple of the env count");
    const int per_env = n_steps / n_envs;

    Batch batch;
    batch.obs.resize(n_steps, spec.obs_dim);
    batch.actions.resize(n_steps, spec.action_cols());
    batch.rewards.resize(n_steps);
    batch.costs.resize(n_steps);
    batch.log_prob_old.resize(n_steps);
    std::vector<EpisodeStats> stats;

    int row = 0;
    for (int w = 0; w < n_envs; ++w) {
        Env& env = *envs[w];
        Rng act_rng(mix_seed(seed, 0xAC710Bu, static_cast<uint64_t>(w)));
        uint64_t episode = 0;
        Eigen::VectorXd obs = env.reset(mix_seed(seed, static_cast<uint64_t>(w), episode));

        int seg_begin = row;
        EpisodeStats ep;
        for (int t = 0; t < per_env; ++t, ++row) {
            const ActionDistribution dist = act_distribution(params, spec, obs);
            const Eigen::VectorXd action = sample_action(dist, act_rng);
            const StepOutcome out = env.step(action);

            batch.obs.row(row) = obs.transpose();
            batch.actions.row(row) = action.transpose();
            batch.rewards[row] = out.reward;
            batch.costs[row] = out.cost;
            batch.log_prob_old[row] = log_prob(dist, action);

            ep.total_reward += out.reward;
            ep.total_cost += out.cost;
            ++ep.length;
            obs = out.obs;

            if (out.done || out.truncated) {
                batch.segments.push_back({seg_begin, row + 1, true});
                stats.push_back(ep);
                ep = EpisodeStats{};
                seg_begin = row + 1;
                ++episode;
                obs = env.reset(mix_seed(seed, static_cast<uint64_t>(w), episode));
            }
        }
        if (seg_begin < row)  // episode cut by batch end: gradients yes, stats no
            batch.segments.push_back({seg_begin, row, false});
    }

    batch.ret_r.resize(n_steps);
    batch.ret_c.resize(n_steps);
    for (const auto& seg : batch.segments) {
        const int len = seg.end - seg.begin;
        batch.ret_r.segment(seg.begin, len) = mc_returns(batch.rewards.segment(seg.begin, len), gamma);
        batch.ret_c.segment(seg.begin, len) = mc_returns(batch.costs.segment(seg.begin, len), gamma);
    }
    return {std::move(batch), std::move(stats)};
}

namespace {

Eigen::VectorXd center(const Eigen::VectorXd& x) {
    return x.array() - x.mean();
}

} // namespace

void compute_advantages(Batch& batch, bool whiten_reward) {
    if (batch.size() == 0) throw InputError("compute_advantages: empty batch");
    batch.adv_r = center(batch.ret_r);
    batch.adv_c = center(batch.ret_c);
    if (whiten_reward) {
        const double std = std::sqrt(batch.adv_r.squaredNorm() / batch.size());
        batch.adv_r /= std + 1e-8;
    }
}

Metrics episode_metrics(const std::vector<EpisodeStats>& stats) {
    if (stats.empty()) throw InputError("episode_metrics: no completed episodes");
    Metrics m;
    m.n_episodes = static_cast<int>(stats.size());
    for (const auto& ep : stats) {
        m.mean_reward += ep.total_reward;
        m.mean_cost += ep.total_cost;
        if (ep.total_cost == 0.0) {
            m.safety_probability += 1.0;
            m.safe_reward += ep.total_reward;
        }
    }
    m.mean_reward /= m.n_episodes;
    m.mean_cost /= m.n_episodes;
    m.safety_probability /= m.n_episodes;
    m.safe_reward /= m.n_episodes;
    return m;
}

} // namespace sbtrpo
