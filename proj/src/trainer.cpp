#include "sbtrpo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sbtrpo/gradients.hpp"

namespace sbtrpo {

void TrainConfig::validate() const {
    trust.validate();
    if (gamma < 0.0 || gamma >= 1.0) throw InputError("TrainConfig: gamma must lie in [0,1)");
    if (epochs < 0) throw InputError("TrainConfig: epochs must be >= 0");
    if (steps_per_epoch < 1) throw InputError("TrainConfig: steps_per_epoch must be >= 1");
    if (n_envs < 1) throw InputError("TrainConfig: n_envs must be >= 1");
    if (steps_per_epoch % n_envs != 0)
        throw InputError("TrainConfig: steps_per_epoch must be divisible by n_envs");
    if (hidden_sizes.empty()) throw InputError("TrainConfig: hidden sizes must be non-empty");
}

void MetricsWindow::push(const std::vector<EpisodeStats>& eps) {
    for (const auto& ep : eps) {
        window_.push_back(ep);
        if (static_cast<int>(window_.size()) > capacity_) window_.pop_front();
    }
}

Metrics MetricsWindow::metrics() const {
    return episode_metrics(std::vector<EpisodeStats>(window_.begin(), window_.end()));
}

std::pair<double, double> angle_diagnostics(const Eigen::VectorXd& delta,
                                            const Eigen::VectorXd& g_r,
                                            const Eigen::VectorXd& g_c) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const double dn = delta.norm();
    auto angle = [&](const Eigen::VectorXd& g) {
        const double gn = g.norm();
        if (dn == 0.0 || gn == 0.0) return nan;
        const double cosv = std::clamp(delta.dot(g) / (dn * gn), -1.0, 1.0);
        return std::acos(cosv) * 180.0 / M_PI;
    };
    return {angle(g_r), angle(g_c)};
}

TrainConfig cpo_mode(TrainConfig cfg) {
    cfg.trust.beta = 1.0;
    return cfg;
}

PolicySpec derive_policy_spec(const TrainConfig& cfg) {
    const auto probe = make_env(cfg.env_name, cfg.layout_path, cfg.gamma);
    PolicySpec spec;
    spec.obs_dim = probe->obs_dim();
    spec.act_dim = probe->act_dim();
    spec.head = probe->action_head();
    spec.hidden_sizes = cfg.hidden_sizes;
    spec.validate();
    return spec;
}

EpochResult sbtrpo_epoch(const Eigen::VectorXd& params, std::vector<std::unique_ptr<Env>>& envs,
                         const PolicySpec& spec, const TrainConfig& cfg, int epoch,
                         MetricsWindow& window) {
    EpochResult res;
    res.params = params;
    res.report.epoch = epoch;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    res.report.angle_delta_gr_deg = nan;
    res.report.angle_delta_gc_deg = nan;

    const uint64_t epoch_seed = mix_seed(cfg.seed, 0x5B7290u, static_cast<uint64_t>(epoch));
    auto [batch, stats] = collect(envs, params, spec, cfg.steps_per_epoch, epoch_seed, cfg.gamma);
    compute_advantages(batch, cfg.whiten_reward_adv);
    window.push(stats);
    if (!window.empty()) {
        const Metrics m = window.metrics();
        res.report.mean_reward = m.mean_reward;
        res.report.mean_cost = m.mean_cost;
        res.report.safety_probability = m.safety_probability;
        res.report.safe_reward = m.safe_reward;
    }

    try {
        const ScoreCache cache(params, spec, batch.obs, batch.actions);
        const Eigen::VectorXd g_r = cache.weighted_grad(batch.adv_r);
        const Eigen::VectorXd g_c = cache.weighted_grad(batch.adv_c);
        const LinearOp fvp = [&](const Eigen::VectorXd& v) {
            return cache.fvp(v, cfg.trust.tikhonov);
        };

        const Eigen::VectorXd delta_r =
            trust_region_step(fvp, g_r, cfg.trust.eps_kl, cfg.trust, StepDirection::Ascent);
        const Eigen::VectorXd delta_c =
            trust_region_step(fvp, g_c, cfg.trust.eps_kl, cfg.trust, StepDirection::Descent);
        const MixResult mix = safety_bias_mix(g_c, delta_r, delta_c, cfg.trust);

        res.report.mu = mix.mu;
        res.report.eps = mix.eps;
        res.report.gr_dot_delta = g_r.dot(mix.delta);
        res.report.gc_dot_delta = mix.gc_dot_delta;
        std::tie(res.report.angle_delta_gr_deg, res.report.angle_delta_gc_deg) =
            angle_diagnostics(mix.delta, g_r, g_c);

        const auto kl_at = [&](double alpha) {
            return kl_mean(params, params + alpha * mix.delta, spec, batch.obs);
        };
        const auto cost_at = [&](double alpha) {
            return surrogate_value(batch, params, params + alpha * mix.delta, spec, Signal::Cost);
        };
        const LineSearchResult ls = line_search(kl_at, cost_at, cfg.trust);

        res.report.accepted = ls.accepted;
        if (ls.accepted) {
            res.report.alpha = ls.alpha;
            res.params = params + ls.alpha * mix.delta;
            res.report.kl_after = kl_mean(params, res.params, spec, batch.obs);
        }
    } catch (const NumericalError& e) {
        res.report.accepted = false;
        res.report.alpha = 0.0;
        res.report.error = e.what();
        res.params = params;  // epoch aborted, parameters unchanged
    }
    return res;
}

namespace {

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_angle(double x) {
    return std::isnan(x) ? std::string() : fmt_double(x);
}

} // namespace

std::string report_csv_header() {
    return "epoch,mean_reward,mean_cost,safety_prob,safe_reward,mu,eps,alpha,accepted,"
           "kl_after,angle_gr_deg,angle_gc_deg";
}

std::string report_csv_row(const StepReport& r) {
    std::ostringstream out;
    out << r.epoch << ',' << fmt_double(r.mean_reward) << ',' << fmt_double(r.mean_cost) << ','
        << fmt_double(r.safety_probability) << ',' << fmt_double(r.safe_reward) << ','
        << fmt_double(r.mu) << ',' << fmt_double(r.eps) << ',' << fmt_double(r.alpha) << ','
        << (r.accepted ? 1 : 0) << ',' << fmt_double(r.kl_after) << ','
        << fmt_angle(r.angle_delta_gr_deg) << ',' << fmt_angle(r.angle_delta_gc_deg);
    return out.str();
}

RunLog train(const TrainConfig& cfg) {
    cfg.validate();
    const PolicySpec spec = derive_policy_spec(cfg);

    std::vector<std::unique_ptr<Env>> envs;
    envs.reserve(cfg.n_envs);
    for (int w = 0; w < cfg.n_envs; ++w) envs.push_back(make_env(cfg.env_name, cfg.layout_path, cfg.gamma));

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        if (!log) throw RunError("train: cannot open log file " + cfg.log_path);
        log << report_csv_header() << '\n';
        log.flush();
    }

    RunLog run;
    run.spec = spec;
    run.final_params = policy_init(spec, cfg.seed);
    MetricsWindow window;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochResult er = sbtrpo_epoch(run.final_params, envs, spec, cfg, epoch, window);
        run.final_params = std::move(er.params);
        run.reports.push_back(er.report);
        if (log.is_open()) {
            log << report_csv_row(er.report) << '\n';
            log.flush();
            if (!log) throw RunError("train: failed writing log file " + cfg.log_path);
        }
    }
    return run;
}

Eigen::MatrixXd tabular_policy_table(const Eigen::VectorXd& params, const PolicySpec& spec,
                                     int n_states) {
    if (spec.head != Head::Categorical || spec.obs_dim != n_states)
        throw InputError("tabular_policy_table: policy does not match a tabular env");
    Eigen::MatrixXd table(n_states, spec.act_dim);
    for (int s = 0; s < n_states; ++s) {
        Eigen::VectorXd obs = Eigen::VectorXd::Zero(n_states);
        obs[s] = 1.0;
        table.row(s) = act_distribution(params, spec, obs).probs().transpose();
    }
    return table;
}

} // namespace sbtrpo
