#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sbtrpo/errors.hpp"
#include "sbtrpo/policy.hpp"
#include "sbtrpo/rng.hpp"

namespace sbtrpo {

struct StepOutcome {
    Eigen::VectorXd obs;
    double reward = 0.0;
    double cost = 0.0;   // always >= 0
    bool done = false;
    bool truncated = false;
};

/// Single-owner environment interface; the rollout engine creates one
/// instance per worker.
class Env {
public:
    virtual ~Env() = default;
    virtual int obs_dim() const = 0;
    virtual int act_dim() const = 0;
    virtual Head action_head() const = 0;
    virtual Eigen::VectorXd reset(uint64_t seed) = 0;
    virtual StepOutcome step(const Eigen::VectorXd& action) = 0;
};

/// Explicit constrained MDP: row-stochastic transitions, state rewards and
/// non-negative state costs. Small enough for exact policy evaluation.
struct TabularCMDP {
    int n_states = 0;
    int n_actions = 0;
    // transition[s][a] is a distribution over next states.
    std::vector<std::vector<Eigen::VectorXd>> transition;
    Eigen::VectorXd reward;
    Eigen::VectorXd cost;
    double gamma = 0.99;
    int initial_state = 0;
    std::vector<uint8_t> terminal;

    void validate() const;  // throws InputError on broken invariants
};

struct PolicyEvalResult {
    double j_r = 0.0;
    double j_c = 0.0;
};

/// Exact discounted reward/cost of a stochastic policy from the initial
/// state, via a dense linear solve. Rewards and costs accrue on state entry,
/// matching the step semantics of the environments; terminal entry ends the
/// accumulation. This is the brute-force oracle behind the tabular checks.
PolicyEvalResult exact_policy_eval(const TabularCMDP& env, const Eigen::MatrixXd& policy_table);

struct SafeOptimum {
    double j_r = 0.0;
    Eigen::MatrixXd policy_table;  // deterministic rows
};

/// Best strictly safe deterministic policy: value iteration restricted to
/// actions whose entire support stays inside the maximal zero-cost invariant
/// set. Throws InfeasibleError when the initial state admits no such policy
/// or positive reward is unreachable without cost.
SafeOptimum constrained_optimum_oracle(const TabularCMDP& env);

/// Grid layout characters: S start, G goal, H hazard, . free, # wall.
struct GridLayout {
    int rows = 0, cols = 0;
    std::vector<std::string> cells;
};

GridLayout parse_grid(const std::string& text);
GridLayout load_grid_file(const std::string& path);

/// Default 5x5 layout: a long safe corridor plus two hazard shortcuts.
extern const char* const kDefaultHazardGrid;

/// Builds the tabular CMDP for a hazard grid: 4 moves (up/down/left/right),
/// walls and borders bounce, hazard entry costs 1, goal entry rewards 1 and
/// terminates.
TabularCMDP make_hazard_cmdp(const GridLayout& layout, double gamma);

/// Episode-capped environment over a TabularCMDP with one-hot observations.
class TabularEnv final : public Env {
public:
    TabularEnv(TabularCMDP cmdp, int episode_cap = 50);

    int obs_dim() const override { return cmdp_.n_states; }
    int act_dim() const override { return cmdp_.n_actions; }
    Head action_head() const override { return Head::Categorical; }
    Eigen::VectorXd reset(uint64_t seed) override;
    StepOutcome step(const Eigen::VectorXd& action) override;

    const TabularCMDP& cmdp() const { return cmdp_; }
    int episode_cap() const { return cap_; }

private:
    Eigen::VectorXd one_hot(int s) const;

    TabularCMDP cmdp_;
    int cap_;
    int state_ = 0;
    int steps_ = 0;
    bool awaiting_reset_ = true;
    Rng rng_{0};
};

/// 2-D navigation toward a goal circle among hazard circles. Actions are
/// velocities in [-1,1]^2 applied with step size 0.1; reward is the decrease
/// in goal distance; hazard occupancy costs 1 per step.
class PointGoalEnv final : public Env {
public:
    struct Circle {
        Eigen::Vector2d center;
        double radius = 0.0;
    };

    PointGoalEnv();

    int obs_dim() const override { return 4; }  // position, goal - position
    int act_dim() const override { return 2; }
    Head action_head() const override { return Head::DiagonalGaussian; }
    Eigen::VectorXd reset(uint64_t seed) override;
    StepOutcome step(const Eigen::VectorXd& action) override;

private:
    Eigen::VectorXd observe() const;
    bool in_hazard(const Eigen::Vector2d& p) const;

    Circle goal_;
    std::vector<Circle> hazards_;
    Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
    int steps_ = 0;
    bool awaiting_reset_ = true;
    Rng rng_{0};

    static constexpr double kStepSize = 0.1;
    static constexpr int kHorizon = 200;
};

/// 2-D circulation task: reward is tangential speed about the origin scaled
/// to favor a target ring; leaving the permitted radial band costs 1 per step.
class PointCircleEnv final : public Env {
public:
    PointCircleEnv();

    int obs_dim() const override { return 3; }  // position, signed ring offset
    int act_dim() const override { return 2; }
    Head action_head() const override { return Head::DiagonalGaussian; }
    Eigen::VectorXd reset(uint64_t seed) override;
    StepOutcome step(const Eigen::VectorXd& action) override;

private:
    Eigen::VectorXd observe() const;

    double ring_radius_ = 1.0;
    double band_inner_ = 0.0;
    double band_outer_ = 1.25;
    Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
    int steps_ = 0;
    bool awaiting_reset_ = true;
    Rng rng_{0};

    static constexpr double kStepSize = 0.1;
    static constexpr int kHorizon = 200;
};

/// Cost-free hazard grid variant used by the zero-cost reduction checks.
extern const char* const kCostFreeGrid;

/// Environment factory. Known names: hazard_grid, point_goal, point_circle.
/// For hazard_grid an optional layout file path replaces the default grid.
std::unique_ptr<Env> make_env(const std::string& name, const std::string& layout_path,
                              double gamma);

} // namespace sbtrpo
