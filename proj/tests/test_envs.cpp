#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sbtrpo/envs.hpp"
#include "support/oracles.hpp"

using namespace sbtrpo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd act(int a) { return VectorXd::Constant(1, static_cast<double>(a)); }
constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;

TabularCMDP absorbing_unit_reward() {
    TabularCMDP env;
    env.n_states = 1;
    env.n_actions = 1;
    env.transition = {{Eigen::VectorXd::Ones(1)}};
    env.reward = VectorXd::Ones(1);
    env.cost = VectorXd::Zero(1);
    env.gamma = 0.99;
    env.initial_state = 0;
    env.terminal = {0};
    return env;
}

TabularCMDP two_state_chain() {
    TabularCMDP env;
    env.n_states = 2;
    env.n_actions = 2;
    env.transition.assign(2, std::vector<VectorXd>(2, VectorXd::Zero(2)));
    env.transition[0][0] << 0.7, 0.3;
    env.transition[0][1] << 0.2, 0.8;
    env.transition[1][0] << 0.4, 0.6;
    env.transition[1][1] << 0.9, 0.1;
    env.reward.resize(2);
    env.reward << 1.0, -0.5;
    env.cost.resize(2);
    env.cost << 0.2, 0.0;
    env.gamma = 0.9;
    env.initial_state = 0;
    env.terminal = {0, 0};
    return env;
}

const char* const kEnclosedGoalGrid =
    "S....\n"
    ".....\n"
    "..HHH\n"
    "..HHG\n"
    "..HHH\n";

} // namespace

TEST_CASE("TabularCMDP validation rejects broken rows") {
    TabularCMDP env = two_state_chain();
    env.transition[0][0][0] = 0.6;  // row sums to 0.9
    CHECK_THROWS_AS(env.validate(), InputError);

    env = two_state_chain();
    env.cost[1] = -0.1;
    CHECK_THROWS_AS(env.validate(), InputError);
}

TEST_CASE("hazard grid semantics: walls bounce, hazards cost, goal terminates") {
    TabularEnv env(make_hazard_cmdp(parse_grid(kDefaultHazardGrid), 0.99));
    VectorXd obs = env.reset(0);

    // one-hot of the start corner
    CHECK(obs.size() == 25);
    CHECK(obs[0] == 1.0);
    CHECK(obs.sum() == 1.0);

    // down from (0,0) hits a wall: position unchanged, nothing gained
    StepOutcome out = env.step(act(kDown));
    CHECK(out.obs[0] == 1.0);
    CHECK(out.reward == 0.0);
    CHECK(out.cost == 0.0);
    CHECK_FALSE(out.done);

    // right then down enters the hazard at (1,1)
    out = env.step(act(kRight));
    CHECK(out.obs[1] == 1.0);
    out = env.step(act(kDown));
    CHECK(out.obs[6] == 1.0);
    CHECK(out.cost == 1.0);
    CHECK(out.reward == 0.0);

    // continue down the shortcut to the goal
    for (int a : {kDown, kRight, kRight, kDown, kDown}) out = env.step(act(a));
    CHECK_FALSE(out.done);
    out = env.step(act(kRight));
    CHECK(out.obs[24] == 1.0);
    CHECK(out.reward == 1.0);
    CHECK(out.cost == 0.0);
    CHECK(out.done);

    CHECK_THROWS_AS(env.step(act(kRight)), StateError);
}

TEST_CASE("trajectories are bit-reproducible under a fixed action sequence") {
    const std::vector<int> actions = {kRight, kDown, kRight, kUp, kDown, kLeft, kDown, kRight};
    auto run = [&] {
        TabularEnv env(make_hazard_cmdp(parse_grid(kDefaultHazardGrid), 0.99));
        std::vector<double> record;
        VectorXd obs = env.reset(99);
        for (int a : actions) {
            const StepOutcome out = env.step(act(a));
            for (int i = 0; i < out.obs.size(); ++i) record.push_back(out.obs[i]);
            record.push_back(out.reward);
            record.push_back(out.cost);
        }
        return record;
    };
    CHECK(run() == run());
}

TEST_CASE("episode cap truncates without terminating") {
    TabularEnv env(make_hazard_cmdp(parse_grid(kDefaultHazardGrid), 0.99), 3);
    env.reset(0);
    StepOutcome out = env.step(act(kUp));
    out = env.step(act(kUp));
    CHECK_FALSE(out.truncated);
    out = env.step(act(kUp));
    CHECK(out.truncated);
    CHECK_FALSE(out.done);
    CHECK_THROWS_AS(env.step(act(kUp)), StateError);
}

TEST_CASE("per-step costs are binary") {
    TabularEnv grid(make_hazard_cmdp(parse_grid(kDefaultHazardGrid), 0.99));
    Rng rng(3);
    grid.reset(1);
    for (int t = 0; t < 200; ++t) {
        const StepOutcome out = grid.step(act(rng.uniform_int(4)));
        CHECK((out.cost == 0.0 || out.cost == 1.0));
        if (out.done || out.truncated) grid.reset(t);
    }

    PointGoalEnv pg;
    pg.reset(1);
    for (int t = 0; t < 200; ++t) {
        VectorXd a(2);
        a << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
        const StepOutcome out = pg.step(a);
        CHECK((out.cost == 0.0 || out.cost == 1.0));
        if (out.done || out.truncated) pg.reset(t);
    }
}

TEST_CASE("exact_policy_eval: geometric series and zero-cost reductions") {
    const TabularCMDP env = absorbing_unit_reward();
    const MatrixXd policy = MatrixXd::Ones(1, 1);
    const auto eval = exact_policy_eval(env, policy);
    CHECK(eval.j_r == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(eval.j_c == 0.0);

    // cost identically zero on the default grid without hazards
    const TabularCMDP grid = make_hazard_cmdp(parse_grid(kCostFreeGrid), 0.99);
    const MatrixXd uniform = MatrixXd::Constant(grid.n_states, grid.n_actions, 0.25);
    CHECK(exact_policy_eval(grid, uniform).j_c == doctest::Approx(0.0));
}

TEST_CASE("exact_policy_eval matches an independent value-iteration solve") {
    const TabularCMDP env = two_state_chain();
    MatrixXd uniform = MatrixXd::Constant(2, 2, 0.5);
    const auto lin = exact_policy_eval(env, uniform);
    const auto iter = oracles::value_iteration_eval(env, uniform);
    CHECK(lin.j_r == doctest::Approx(iter.j_r).epsilon(1e-10));
    CHECK(lin.j_c == doctest::Approx(iter.j_c).epsilon(1e-10));

    MatrixXd bad = uniform;
    bad(0, 0) = 0.8;  // row no longer sums to 1
    CHECK_THROWS_AS(exact_policy_eval(env, bad), InputError);
}

TEST_CASE("uniform-policy Monte Carlo agrees with the exact evaluation") {
    // 1e6 steps of direct tabular simulation, long episode cap so horizon
    // truncation is negligible against the statistical error.
    const TabularCMDP env = make_hazard_cmdp(parse_grid(kDefaultHazardGrid), 0.99);
    const MatrixXd uniform = MatrixXd::Constant(env.n_states, env.n_actions, 0.25);
    const auto exact = exact_policy_eval(env, uniform);

    std::vector<int> next(env.n_states * env.n_actions);
    for (int s = 0; s < env.n_states; ++s)
        for (int a = 0; a < env.n_actions; ++a) {
            int t = 0;
            env.transition[s][a].maxCoeff(&t);
            next[s * env.n_actions + a] = t;
        }

    Rng rng(2024);
    std::vector<double> returns_r, returns_c;
    long total_steps = 0;
    const int cap = 2000;
    while (total_steps < 1000000) {
        int s = env.initial_state;
        double gr = 0.0, gc = 0.0, disc = 1.0;
        for (int t = 0; t < cap; ++t) {
            ++total_steps;
            s = next[s * env.n_actions + rng.uniform_int(env.n_actions)];
            gr += disc * env.reward[s];
            gc += disc * env.cost[s];
            disc *= env.gamma;
            if (env.terminal[s]) break;
        }
        returns_r.push_back(gr);
        returns_c.push_back(gc);
    }

    auto check_within_3se = [&](const std::vector<double>& xs, double target) {
        const double n = static_cast<double>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= n - 1.0;
        const double se = std::sqrt(var / n);
        CHECK(std::abs(mean - target) <= 3.0 * se);
    };
    check_within_3se(returns_r, exact.j_r);
    check_within_3se(returns_c, exact.j_c);
}

TEST_CASE("constrained optimum routes around the hazards") {
    const GridLayout layout = parse_grid(kDefaultHazardGrid);
    const TabularCMDP env = make_hazard_cmdp(layout, 0.99);
    const SafeOptimum opt = constrained_optimum_oracle(env);

    // independent oracle: shortest hazard-free path has length 16
    const int safe_len = oracles::bfs_safe_path_length(layout);
    CHECK(safe_len == 16);
    CHECK(opt.j_r == doctest::Approx(std::pow(0.99, safe_len - 1)).epsilon(1e-10));

    // the safe-optimal policy incurs exactly zero cost
    const auto eval = exact_policy_eval(env, opt.policy_table);
    CHECK(eval.j_c == doctest::Approx(0.0));
    CHECK(eval.j_r == doctest::Approx(opt.j_r).epsilon(1e-12));
}

TEST_CASE("constrained optimum without hazards equals the unconstrained one") {
    const GridLayout layout = parse_grid(kCostFreeGrid);
    const TabularCMDP env = make_hazard_cmdp(layout, 0.99);
    const SafeOptimum opt = constrained_optimum_oracle(env);
    const int len = oracles::bfs_safe_path_length(layout);  // nothing to avoid
    CHECK(len == 8);
    CHECK(opt.j_r == doctest::Approx(std::pow(0.99, len - 1)).epsilon(1e-10));
}

TEST_CASE("fully enclosed goal is infeasible") {
    const TabularCMDP env = make_hazard_cmdp(parse_grid(kEnclosedGoalGrid), 0.99);
    CHECK(oracles::bfs_safe_path_length(parse_grid(kEnclosedGoalGrid)) == -1);
    CHECK_THROWS_AS(constrained_optimum_oracle(env), InfeasibleError);
}

TEST_CASE("point goal: seeded resets repeat, zero action is neutral") {
    PointGoalEnv env;
    const VectorXd o1 = env.reset(42);
    const VectorXd o2 = env.reset(42);
    CHECK(o1 == o2);
    CHECK(env.reset(43) != o1);

    env.reset(42);
    const StepOutcome out = env.step(VectorXd::Zero(2));
    CHECK(out.obs == o1);
    CHECK(out.reward == 0.0);
    CHECK(out.cost == 0.0);
}

TEST_CASE("point circle starts at the origin") {
    PointCircleEnv env;
    const VectorXd obs = env.reset(7);
    CHECK(obs[0] == 0.0);
    CHECK(obs[1] == 0.0);
    CHECK(obs[2] == doctest::Approx(-1.0));

    const StepOutcome still = env.step(VectorXd::Zero(2));
    CHECK(still.reward == 0.0);
    CHECK(still.cost == 0.0);

    // circulating inside the band earns positive tangential reward
    env.reset(7);
    VectorXd east(2);
    east << 1.0, 0.0;
    for (int t = 0; t < 8; ++t) env.step(east);
    VectorXd north(2);
    north << 0.0, 1.0;
    const StepOutcome out = env.step(north);
    CHECK(out.reward > 0.0);
    CHECK(out.cost == 0.0);
}

TEST_CASE("grid files load from disk and reject malformed content") {
    {
        std::ofstream f("tmp_grid_ok.txt");
        f << "S.H\n..G\n";
    }
    const GridLayout g = load_grid_file("tmp_grid_ok.txt");
    CHECK(g.rows == 2);
    CHECK(g.cols == 3);
    const TabularCMDP env = make_hazard_cmdp(g, 0.9);
    CHECK(env.n_states == 6);
    CHECK(env.cost[2] == 1.0);
    CHECK(env.terminal[5] == 1);

    CHECK_THROWS_AS(parse_grid("S.\n..."), InputError);    // ragged
    CHECK_THROWS_AS(parse_grid("..\n..\n"), InputError);   // no S/G
    CHECK_THROWS_AS(parse_grid("SX\n.G\n"), InputError);   // unknown cell
    CHECK_THROWS_AS(load_grid_file("does_not_exist.txt"), InputError);
}

TEST_CASE("make_env factory") {
    CHECK(make_env("hazard_grid", "", 0.99)->act_dim() == 4);
    CHECK(make_env("point_goal", "", 0.99)->action_head() == Head::DiagonalGaussian);
    CHECK(make_env("point_circle", "", 0.99)->obs_dim() == 3);
    CHECK_THROWS_AS(make_env("mujoco", "", 0.99), InputError);
}
