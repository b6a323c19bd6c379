#include "sbtrpo/gradients.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

namespace sbtrpo {

namespace {

const Eigen::VectorXd& advantage(const Batch& batch, Signal signal) {
    return signal == Signal::Reward ? batch.adv_r : batch.adv_c;
}

} // namespace

Eigen::VectorXd surrogate_grad(const Batch& batch, const Eigen::VectorXd& params,
                               const PolicySpec& spec, Signal signal) {
    const Eigen::VectorXd& adv = advantage(batch, signal);
    if (adv.size() != batch.size()) throw InputError("surrogate_grad: advantages not computed");
    ScoreCache cache(params, spec, batch.obs, batch.actions);
    return cache.weighted_grad(adv);
}

double surrogate_value(const Batch& batch, const Eigen::VectorXd& params_old,
                       const Eigen::VectorXd& params_new, const PolicySpec& spec, Signal signal) {
    const Eigen::VectorXd& adv = advantage(batch, signal);
    if (adv.size() != batch.size()) throw InputError("surrogate_value: advantages not computed");
    double acc = 0.0;
    for (int t = 0; t < batch.size(); ++t) {
        const Eigen::VectorXd obs = batch.obs.row(t);
        const Eigen::VectorXd action = batch.actions.row(t).transpose();
        const double log_ratio =
            log_prob(params_new, spec, obs, action) - log_prob(params_old, spec, obs, action);
        if (log_ratio > 30.0)
            throw NumericalError("surrogate_value: importance ratio overflow");
        acc += std::exp(log_ratio) * adv[t];
    }
    return acc / batch.size();
}

namespace {

struct RowKey {
    const double* data;
    size_t len;  // in doubles
    bool operator==(const RowKey& o) const {
        return len == o.len && std::memcmp(data, o.data, len * sizeof(double)) == 0;
    }
};

struct RowKeyHash {
    size_t operator()(const RowKey& k) const {
        // FNV-1a over the raw bytes
        size_t h = 1469598103934665603ULL;
        const auto* p = reinterpret_cast<const unsigned char*>(k.data);
        for (size_t i = 0; i < k.len * sizeof(double); ++i) h = (h ^ p[i]) * 1099511628211ULL;
        return h;
    }
};

} // namespace

ScoreCache::ScoreCache(const Eigen::VectorXd& params, const PolicySpec& spec,
                       const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions) {
    if (obs.rows() != actions.rows() || obs.rows() == 0)
        throw InputError("ScoreCache: batch shape mismatch");
    n_ = static_cast<int>(obs.rows());
    group_.resize(n_);

    // Row-major staging of (obs, action) pairs so rows are contiguous keys.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> keys(
        n_, obs.cols() + actions.cols());
    keys << obs, actions;

    std::unordered_map<RowKey, int, RowKeyHash> seen;
    seen.reserve(n_);
    std::vector<int> rep_rows;  // first occurrence per group
    for (int i = 0; i < n_; ++i) {
        const RowKey key{keys.row(i).data(), static_cast<size_t>(keys.cols())};
        auto [it, inserted] = seen.emplace(key, static_cast<int>(rep_rows.size()));
        if (inserted) rep_rows.push_back(i);
        group_[i] = it->second;
    }

    const int u = static_cast<int>(rep_rows.size());
    scores_.resize(u, params.size());
    counts_ = Eigen::VectorXd::Zero(u);
    for (int g = 0; g < u; ++g) {
        const int i = rep_rows[g];
        scores_.row(g) =
            log_prob_grad(params, spec, obs.row(i), actions.row(i).transpose()).transpose();
    }
    for (int i = 0; i < n_; ++i) counts_[group_[i]] += 1.0;
}

Eigen::VectorXd ScoreCache::fvp(const Eigen::VectorXd& v, double damping) const {
    if (v.size() != scores_.cols()) throw InputError("ScoreCache::fvp: vector dimension mismatch");
    Eigen::VectorXd t = scores_ * v;
    t.array() *= counts_.array() / static_cast<double>(n_);
    Eigen::VectorXd out = scores_.transpose() * t;
    out.noalias() += damping * v;
    return out;
}

Eigen::VectorXd ScoreCache::weighted_grad(const Eigen::VectorXd& weights) const {
    if (weights.size() != n_) throw InputError("ScoreCache::weighted_grad: weight count mismatch");
    Eigen::VectorXd group_w = Eigen::VectorXd::Zero(scores_.rows());
    for (int i = 0; i < n_; ++i) group_w[group_[i]] += weights[i];
    return scores_.transpose() * group_w / static_cast<double>(n_);
}

} // namespace sbtrpo
