#pragma once

#include <Eigen/Dense>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "sbtrpo/envs.hpp"
#include "sbtrpo/policy.hpp"
#include "sbtrpo/rollout.hpp"
#include "sbtrpo/trust_step.hpp"

namespace sbtrpo {

struct TrainConfig {
    std::string env_name = "hazard_grid";
    std::string layout_path;  // optional grid file for hazard_grid
    std::vector<int> hidden_sizes{64, 64};
    TrustStepConfig trust;
    double gamma = 0.99;
    int epochs = 300;
    int steps_per_epoch = 2000;
    int n_envs = 4;
    uint64_t seed = 0;
    bool whiten_reward_adv = true;
    std::string log_path;  // per-epoch CSV; empty disables file logging

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// One epoch of solver telemetry. Angles carry NaN when undefined
/// (zero-norm vector); the CSV writer emits an empty field for those.
struct StepReport {
    int epoch = 0;
    double mean_reward = 0.0;
    double mean_cost = 0.0;
    double safety_probability = 0.0;
    double safe_reward = 0.0;
    double mu = 0.0;
    double eps = 0.0;
    double alpha = 0.0;
    bool accepted = false;
    double kl_after = 0.0;
    double gr_dot_delta = 0.0;
    double gc_dot_delta = 0.0;
    double angle_delta_gr_deg = 0.0;
    double angle_delta_gc_deg = 0.0;
    std::string error;  // set when a NumericalError aborted the epoch
};

struct RunLog {
    std::vector<StepReport> reports;
    Eigen::VectorXd final_params;
    PolicySpec spec;
};

/// Trailing window of completed episodes backing the per-epoch metrics.
class MetricsWindow {
public:
    explicit MetricsWindow(int capacity = 50) : capacity_(capacity) {}
    void push(const std::vector<EpisodeStats>& eps);
    bool empty() const { return window_.empty(); }
    Metrics metrics() const;

private:
    int capacity_;
    std::deque<EpisodeStats> window_;
};

/// Angles (degrees) between the update and the reward/cost gradients;
/// NaN sentinel for zero-norm inputs.
std::pair<double, double> angle_diagnostics(const Eigen::VectorXd& delta,
                                            const Eigen::VectorXd& g_r,
                                            const Eigen::VectorXd& g_c);

/// CPO is the beta = 1 special case; nothing else changes.
TrainConfig cpo_mode(TrainConfig cfg);

struct EpochResult {
    Eigen::VectorXd params;
    StepReport report;
};

/// One full update: collect -> advantages -> g_r, g_c -> CG trust steps ->
/// safety-biased mix -> backtracking line search on (empirical KL, sampled
/// cost surrogate). A NumericalError in any stage aborts the epoch with the
/// parameters unchanged and the error recorded in the report.
EpochResult sbtrpo_epoch(const Eigen::VectorXd& params, std::vector<std::unique_ptr<Env>>& envs,
                         const PolicySpec& spec, const TrainConfig& cfg, int epoch,
                         MetricsWindow& window);

/// Full training run; deterministic given cfg. CSV rows are flushed per
/// epoch when log_path is set. I/O failure raises RunError.
RunLog train(const TrainConfig& cfg);

/// Policy spec implied by the environment plus configured hidden sizes.
PolicySpec derive_policy_spec(const TrainConfig& cfg);

/// Action distribution at every tabular state, for exact evaluation of a
/// trained policy.
Eigen::MatrixXd tabular_policy_table(const Eigen::VectorXd& params, const PolicySpec& spec,
                                     int n_states);

std::string report_csv_header();
std::string report_csv_row(const StepReport& r);

} // namespace sbtrpo
