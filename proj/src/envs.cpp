#include "sbtrpo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sbtrpo {

namespace {
constexpr double kRowSumTol = 1e-12;
}

void TabularCMDP::validate() const {
    if (n_states < 1 || n_actions < 1) throw InputError("TabularCMDP: empty state or action space");
    if (gamma < 0.0 || gamma >= 1.0) throw InputError("TabularCMDP: gamma must lie in [0,1)");
    if (initial_state < 0 || initial_state >= n_states) throw InputError("TabularCMDP: bad initial state");
    if (static_cast<int>(transition.size()) != n_states || reward.size() != n_states ||
        cost.size() != n_states || static_cast<int>(terminal.size()) != n_states)
        throw InputError("TabularCMDP: field dimensions disagree");
    for (int s = 0; s < n_states; ++s) {
        if (static_cast<int>(transition[s].size()) != n_actions)
            throw InputError("TabularCMDP: action count mismatch");
        if (cost[s] < 0.0) throw InputError("TabularCMDP: negative cost");
        for (int a = 0; a < n_actions; ++a) {
            const auto& row = transition[s][a];
            if (row.size() != n_states || row.minCoeff() < 0.0)
                throw InputError("TabularCMDP: bad transition row");
            if (std::abs(row.sum() - 1.0) > kRowSumTol)
                throw InputError("TabularCMDP: transition row does not sum to 1");
        }
    }
}

PolicyEvalResult exact_policy_eval(const TabularCMDP& env, const Eigen::MatrixXd& policy_table) {
    env.validate();
    if (policy_table.rows() != env.n_states || policy_table.cols() != env.n_actions)
        throw InputError("exact_policy_eval: policy table shape mismatch");
    for (int s = 0; s < env.n_states; ++s)
        if (std::abs(policy_table.row(s).sum() - 1.0) > 1e-9 || policy_table.row(s).minCoeff() < -1e-15)
            throw InputError("exact_policy_eval: policy row is not a distribution");

    const int n = env.n_states;
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < env.n_actions; ++a)
            p_pi.row(s) += policy_table(s, a) * env.transition[s][a].transpose();

    // v(s) = x(s) + gamma * [s non-terminal] * sum_s' P_pi(s'|s) v(s'),
    // J = sum_s' P_pi(s'|s0) v(s'): rewards/costs accrue on state entry.
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < n; ++s)
        if (!env.terminal[s]) system.row(s) -= env.gamma * p_pi.row(s);

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::VectorXd v_r = lu.solve(env.reward);
    const Eigen::VectorXd v_c = lu.solve(env.cost);
    if (!v_r.allFinite() || !v_c.allFinite())
        throw NumericalError("exact_policy_eval: singular evaluation system");

    PolicyEvalResult res;
    res.j_r = p_pi.row(env.initial_state).dot(v_r);
    res.j_c = p_pi.row(env.initial_state).dot(v_c);
    return res;
}

SafeOptimum constrained_optimum_oracle(const TabularCMDP& env) {
    env.validate();
    const int n = env.n_states;
    const int m = env.n_actions;

    // Maximal invariant set of zero-cost states: a state stays in the set if
    // it is terminal or some action's entire support remains in the set.
    std::vector<uint8_t> safe(n);
    for (int s = 0; s < n; ++s) safe[s] = env.cost[s] == 0.0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < n; ++s) {
            if (!safe[s] || env.terminal[s]) continue;
            bool has_safe_action = false;
            for (int a = 0; a < m && !has_safe_action; ++a) {
                bool ok = true;
                for (int t = 0; t < n; ++t)
                    if (env.transition[s][a][t] > 0.0 && !safe[t]) { ok = false; break; }
                has_safe_action = ok;
            }
            if (!has_safe_action) { safe[s] = 0; changed = true; }
        }
    }
    if (!safe[env.initial_state])
        throw InfeasibleError("constrained_optimum_oracle: no zero-cost policy from the initial state");

    auto action_safe = [&](int s, int a) {
        for (int t = 0; t < n; ++t)
            if (env.transition[s][a][t] > 0.0 && !safe[t]) return false;
        return true;
    };

    // Value iteration over the safe subgraph, entry-reward convention.
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int iter = 0; iter < 100000; ++iter) {
        double max_delta = 0.0;
        for (int s = 0; s < n; ++s) {
            if (!safe[s] || env.terminal[s]) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m; ++a) {
                if (!action_safe(s, a)) continue;
                double q = 0.0;
                for (int t = 0; t < n; ++t) {
                    const double p = env.transition[s][a][t];
                    if (p == 0.0) continue;
                    q += p * (env.reward[t] + (env.terminal[t] ? 0.0 : env.gamma * v[t]));
                }
                best = std::max(best, q);
            }
            if (std::isinf(best)) continue;  // no safe action: unreachable inside the set
            max_delta = std::max(max_delta, std::abs(best - v[s]));
            v[s] = best;
        }
        if (max_delta < 1e-14) break;
    }

    SafeOptimum out;
    out.policy_table = Eigen::MatrixXd::Zero(n, m);
    for (int s = 0; s < n; ++s) {
        int pick = -1;
        if (safe[s] && !env.terminal[s]) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m; ++a) {
                if (!action_safe(s, a)) continue;
                double q = 0.0;
                for (int t = 0; t < n; ++t) {
                    const double p = env.transition[s][a][t];
                    if (p == 0.0) continue;
                    q += p * (env.reward[t] + (env.terminal[t] ? 0.0 : env.gamma * v[t]));
                }
                if (q > best) { best = q; pick = a; }
            }
        }
        if (pick >= 0)
            out.policy_table(s, pick) = 1.0;
        else
            out.policy_table.row(s).setConstant(1.0 / m);  // unreachable under the safe policy
    }

    const auto eval = exact_policy_eval(env, out.policy_table);
    out.j_r = eval.j_r;
    if (out.j_r <= 0.0 && env.reward.maxCoeff() > 0.0)
        throw InfeasibleError("constrained_optimum_oracle: reward unreachable without cost");
    return out;
}

const char* const kDefaultHazardGrid =
    "S....\n"
    "#H##.\n"
    ".....\n"
    ".##HH\n"
    "....G\n";

const char* const kCostFreeGrid =
    "S....\n"
    ".....\n"
    ".....\n"
    ".....\n"
    "....G\n";

GridLayout parse_grid(const std::string& text) {
    GridLayout g;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        g.cells.push_back(line);
    }
    if (g.cells.empty()) throw InputError("parse_grid: empty layout");
    g.rows = static_cast<int>(g.cells.size());
    g.cols = static_cast<int>(g.cells[0].size());
    int starts = 0, goals = 0;
    for (const auto& row : g.cells) {
        if (static_cast<int>(row.size()) != g.cols) throw InputError("parse_grid: ragged rows");
        for (char c : row) {
            if (c != 'S' && c != 'G' && c != 'H' && c != '.' && c != '#')
                throw InputError(std::string("parse_grid: unknown cell '") + c + "'");
            starts += c == 'S';
            goals += c == 'G';
        }
    }
    if (starts != 1 || goals != 1) throw InputError("parse_grid: need exactly one S and one G");
    return g;
}

GridLayout load_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_grid_file: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_grid(buf.str());
}

TabularCMDP make_hazard_cmdp(const GridLayout& layout, double gamma) {
    TabularCMDP env;
    env.n_states = layout.rows * layout.cols;
    env.n_actions = 4;  // up, down, left, right
    env.gamma = gamma;
    env.reward = Eigen::VectorXd::Zero(env.n_states);
    env.cost = Eigen::VectorXd::Zero(env.n_states);
    env.terminal.assign(env.n_states, 0);

    auto idx = [&](int r, int c) { return r * layout.cols + c; };
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};

    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) {
            const char cell = layout.cells[r][c];
            const int s = idx(r, c);
            if (cell == 'S') env.initial_state = s;
            if (cell == 'G') { env.reward[s] = 1.0; env.terminal[s] = 1; }
            if (cell == 'H') env.cost[s] = 1.0;
        }
    }

    env.transition.assign(env.n_states, std::vector<Eigen::VectorXd>(
                                            env.n_actions, Eigen::VectorXd::Zero(env.n_states)));
    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) {
            const int s = idx(r, c);
            for (int a = 0; a < 4; ++a) {
                int nr = r + dr[a], nc = c + dc[a];
                const bool blocked = nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols ||
                                     layout.cells[nr][nc] == '#';
                const int t = blocked ? s : idx(nr, nc);
                env.transition[s][a][t] = 1.0;
            }
        }
    }
    env.validate();
    return env;
}

TabularEnv::TabularEnv(TabularCMDP cmdp, int episode_cap) : cmdp_(std::move(cmdp)), cap_(episode_cap) {
    cmdp_.validate();
    if (cap_ < 1) throw InputError("TabularEnv: episode cap must be >= 1");
}

Eigen::VectorXd TabularEnv::one_hot(int s) const {
    Eigen::VectorXd obs = Eigen::VectorXd::Zero(cmdp_.n_states);
    obs[s] = 1.0;
    return obs;
}

Eigen::VectorXd TabularEnv::reset(uint64_t seed) {
    rng_ = Rng(seed);
    state_ = cmdp_.initial_state;
    steps_ = 0;
    awaiting_reset_ = false;
    return one_hot(state_);
}

StepOutcome TabularEnv::step(const Eigen::VectorXd& action) {
    if (awaiting_reset_) throw StateError("TabularEnv: step before reset / after episode end");
    if (action.size() != 1) throw InputError("TabularEnv: expected a single action index");
    const int a = static_cast<int>(std::llround(action[0]));
    if (a < 0 || a >= cmdp_.n_actions) throw InputError("TabularEnv: action index out of range");

    const Eigen::VectorXd& row = cmdp_.transition[state_][a];
    const double u = rng_.uniform();
    double cum = 0.0;
    int next = cmdp_.n_states - 1;
    for (int t = 0; t < cmdp_.n_states; ++t) {
        cum += row[t];
        if (u < cum) { next = t; break; }
    }

    state_ = next;
    ++steps_;
    StepOutcome out;
    out.obs = one_hot(state_);
    out.reward = cmdp_.reward[state_];
    out.cost = cmdp_.cost[state_];
    out.done = cmdp_.terminal[state_] != 0;
    out.truncated = !out.done && steps_ >= cap_;
    awaiting_reset_ = out.done || out.truncated;
    return out;
}

PointGoalEnv::PointGoalEnv() {
    goal_.center = Eigen::Vector2d(1.5, 1.5);
    goal_.radius = 0.3;
    hazards_.push_back({Eigen::Vector2d(0.75, 0.75), 0.35});
    hazards_.push_back({Eigen::Vector2d(1.2, 0.45), 0.3});
}

Eigen::VectorXd PointGoalEnv::observe() const {
    Eigen::VectorXd obs(4);
    obs << pos_.x(), pos_.y(), goal_.center.x() - pos_.x(), goal_.center.y() - pos_.y();
    return obs;
}

bool PointGoalEnv::in_hazard(const Eigen::Vector2d& p) const {
    for (const auto& h : hazards_)
        if ((p - h.center).norm() <= h.radius) return true;
    return false;
}

Eigen::VectorXd PointGoalEnv::reset(uint64_t seed) {
    rng_ = Rng(seed);
    pos_ = Eigen::Vector2d(rng_.uniform(-0.2, 0.2), rng_.uniform(-0.2, 0.2));
    steps_ = 0;
    awaiting_reset_ = false;
    return observe();
}

StepOutcome PointGoalEnv::step(const Eigen::VectorXd& action) {
    if (awaiting_reset_) throw StateError("PointGoalEnv: step before reset / after episode end");
    if (action.size() != 2) throw InputError("PointGoalEnv: expected a 2-D action");
    if (!action.allFinite()) throw InputError("PointGoalEnv: non-finite action");

    const double prev_dist = (goal_.center - pos_).norm();
    pos_ += kStepSize * action.cwiseMax(-1.0).cwiseMin(1.0);
    const double dist = (goal_.center - pos_).norm();
    ++steps_;

    StepOutcome out;
    out.obs = observe();
    out.reward = prev_dist - dist;
    out.cost = in_hazard(pos_) ? 1.0 : 0.0;
    out.done = dist <= goal_.radius;
    out.truncated = !out.done && steps_ >= kHorizon;
    awaiting_reset_ = out.done || out.truncated;
    return out;
}

PointCircleEnv::PointCircleEnv() = default;

Eigen::VectorXd PointCircleEnv::observe() const {
    Eigen::VectorXd obs(3);
    obs << pos_.x(), pos_.y(), pos_.norm() - ring_radius_;
    return obs;
}

Eigen::VectorXd PointCircleEnv::reset(uint64_t seed) {
    rng_ = Rng(seed);
    pos_.setZero();
    steps_ = 0;
    awaiting_reset_ = false;
    return observe();
}

StepOutcome PointCircleEnv::step(const Eigen::VectorXd& action) {
    if (awaiting_reset_) throw StateError("PointCircleEnv: step before reset / after episode end");
    if (action.size() != 2) throw InputError("PointCircleEnv: expected a 2-D action");
    if (!action.allFinite()) throw InputError("PointCircleEnv: non-finite action");

    const Eigen::Vector2d vel = action.cwiseMax(-1.0).cwiseMin(1.0);
    // Tangential speed about the origin, discounted by distance to the ring.
    const double cross = pos_.x() * vel.y() - pos_.y() * vel.x();
    const double ring_gap = std::abs(pos_.norm() - ring_radius_);
    pos_ += kStepSize * vel;
    ++steps_;

    StepOutcome out;
    out.obs = observe();
    out.reward = kStepSize * cross / (1.0 + ring_gap);
    const double radius = pos_.norm();
    out.cost = (radius < band_inner_ || radius > band_outer_) ? 1.0 : 0.0;
    out.done = false;
    out.truncated = steps_ >= kHorizon;
    awaiting_reset_ = out.truncated;
    return out;
}

std::unique_ptr<Env> make_env(const std::string& name, const std::string& layout_path,
                              double gamma) {
    if (name == "hazard_grid") {
        const GridLayout layout =
            layout_path.empty() ? parse_grid(kDefaultHazardGrid) : load_grid_file(layout_path);
        return std::make_unique<TabularEnv>(make_hazard_cmdp(layout, gamma));
    }
    if (name == "point_goal") return std::make_unique<PointGoalEnv>();
    if (name == "point_circle") return std::make_unique<PointCircleEnv>();
    throw InputError("make_env: unknown environment '" + name + "'");
}

} // namespace sbtrpo
