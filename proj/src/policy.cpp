#include "sbtrpo/policy.hpp"

#include <cmath>

namespace sbtrpo {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2*pi)

// Layer sizes including input and output: [obs, h_1, ..., h_k, act].
std::vector<int> layer_sizes(const PolicySpec& spec) {
    std::vector<int> sizes;
    sizes.reserve(spec.hidden_sizes.size() + 2);
    sizes.push_back(spec.obs_dim);
    for (int h : spec.hidden_sizes) sizes.push_back(h);
    sizes.push_back(spec.act_dim);
    return sizes;
}

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajorMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// Flat layout: per layer, weights row-major (out x in) then bias (out);
// Gaussian log-stds occupy the tail.
struct LayerOffsets {
    std::vector<int> w_off, b_off;
    std::vector<int> in_sz, out_sz;
    int log_std_off = -1;
    int total = 0;
};

LayerOffsets layout(const PolicySpec& spec) {
    LayerOffsets lo;
    const auto sizes = layer_sizes(spec);
    int off = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        lo.in_sz.push_back(sizes[l]);
        lo.out_sz.push_back(sizes[l + 1]);
        lo.w_off.push_back(off);
        off += sizes[l] * sizes[l + 1];
        lo.b_off.push_back(off);
        off += sizes[l + 1];
    }
    if (spec.head == Head::DiagonalGaussian) {
        lo.log_std_off = off;
        off += spec.act_dim;
    }
    lo.total = off;
    return lo;
}

// Forward pass keeping post-activation values for backprop.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> acts;  // acts[0] = obs, acts[L] = network output
};

ForwardTrace forward(const Eigen::VectorXd& params, const PolicySpec& spec,
                     const LayerOffsets& lo, const Eigen::VectorXd& obs) {
    ForwardTrace t;
    const int n_layers = static_cast<int>(lo.w_off.size());
    t.acts.reserve(n_layers + 1);
    t.acts.push_back(obs);
    for (int l = 0; l < n_layers; ++l) {
        ConstMatMap W(params.data() + lo.w_off[l], lo.out_sz[l], lo.in_sz[l]);
        ConstVecMap b(params.data() + lo.b_off[l], lo.out_sz[l]);
        Eigen::VectorXd z = W * t.acts.back() + b;
        if (l + 1 < n_layers) z = z.array().tanh();
        t.acts.push_back(std::move(z));
    }
    return t;
}

void check_obs(const PolicySpec& spec, const Eigen::VectorXd& obs) {
    if (obs.size() != spec.obs_dim) throw InputError("observation dimension mismatch");
    if (!obs.allFinite()) throw InputError("non-finite observation");
}

void check_params(const Eigen::VectorXd& params, const PolicySpec& spec) {
    if (params.size() != spec.param_count()) throw InputError("parameter vector dimension mismatch");
}

int categorical_index(const PolicySpec& spec, const Eigen::VectorXd& action) {
    if (action.size() != 1) throw InputError("categorical action must be a single index");
    const int a = static_cast<int>(std::llround(action[0]));
    if (a < 0 || a >= spec.act_dim) throw InputError("categorical action index out of range");
    return a;
}

double log_sum_exp(const Eigen::VectorXd& x) {
    const double m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

} // namespace

void PolicySpec::validate() const {
    if (obs_dim < 1 || act_dim < 1) throw InputError("obs_dim and act_dim must be >= 1");
    if (hidden_sizes.empty()) throw InputError("hidden_sizes must be non-empty");
    for (int h : hidden_sizes)
        if (h < 1) throw InputError("hidden layer sizes must be >= 1");
}

int PolicySpec::param_count() const {
    return layout(*this).total;
}

int PolicySpec::action_cols() const {
    return head == Head::DiagonalGaussian ? act_dim : 1;
}

Eigen::VectorXd ActionDistribution::probs() const {
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    return p / p.sum();
}

Eigen::VectorXd policy_init(const PolicySpec& spec, uint64_t seed) {
    spec.validate();
    const auto lo = layout(spec);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(lo.total);
    Rng rng(seed);
    for (size_t l = 0; l < lo.w_off.size(); ++l) {
        const double scale = std::sqrt(1.0 / lo.in_sz[l]);
        const int n = lo.in_sz[l] * lo.out_sz[l];
        for (int i = 0; i < n; ++i) params[lo.w_off[l] + i] = rng.uniform(-scale, scale);
        // biases stay zero
    }
    // Gaussian log-stds stay zero: initial std exactly 1.
    return params;
}

ActionDistribution act_distribution(const Eigen::VectorXd& params, const PolicySpec& spec,
                                    const Eigen::VectorXd& obs) {
    check_params(params, spec);
    check_obs(spec, obs);
    const auto lo = layout(spec);
    const auto trace = forward(params, spec, lo, obs);
    ActionDistribution dist;
    dist.head = spec.head;
    if (spec.head == Head::DiagonalGaussian) {
        dist.mean = trace.acts.back();
        dist.log_std = params.segment(lo.log_std_off, spec.act_dim);
    } else {
        dist.logits = trace.acts.back();
    }
    return dist;
}

double log_prob(const ActionDistribution& dist, const Eigen::VectorXd& action) {
    if (dist.head == Head::DiagonalGaussian) {
        if (action.size() != dist.mean.size()) throw InputError("action dimension mismatch");
        const Eigen::ArrayXd std = dist.log_std.array().exp();
        const Eigen::ArrayXd z = (action.array() - dist.mean.array()) / std;
        return -0.5 * z.square().sum() - dist.log_std.sum()
               - 0.5 * kLogTwoPi * static_cast<double>(action.size());
    }
    if (action.size() != 1) throw InputError("categorical action must be a single index");
    const int a = static_cast<int>(std::llround(action[0]));
    if (a < 0 || a >= dist.logits.size()) throw InputError("categorical action index out of range");
    return dist.logits[a] - log_sum_exp(dist.logits);
}

double log_prob(const Eigen::VectorXd& params, const PolicySpec& spec,
                const Eigen::VectorXd& obs, const Eigen::VectorXd& action) {
    return log_prob(act_distribution(params, spec, obs), action);
}

Eigen::VectorXd log_prob_grad(const Eigen::VectorXd& params, const PolicySpec& spec,
                              const Eigen::VectorXd& obs, const Eigen::VectorXd& action) {
    check_params(params, spec);
    check_obs(spec, obs);
    const auto lo = layout(spec);
    const auto trace = forward(params, spec, lo, obs);
    const int n_layers = static_cast<int>(lo.w_off.size());

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(lo.total);
    Eigen::VectorXd delta;  // d logp / d(output of current linear layer)

    if (spec.head == Head::DiagonalGaussian) {
        if (action.size() != spec.act_dim) throw InputError("action dimension mismatch");
        const Eigen::ArrayXd log_std = params.segment(lo.log_std_off, spec.act_dim).array();
        const Eigen::ArrayXd inv_var = (-2.0 * log_std).exp();
        const Eigen::ArrayXd diff = action.array() - trace.acts.back().array();
        delta = (diff * inv_var).matrix();                                        // d/d mean
        grad.segment(lo.log_std_off, spec.act_dim) = (diff.square() * inv_var - 1.0).matrix();
    } else {
        const int a = categorical_index(spec, action);
        const Eigen::VectorXd logits = trace.acts.back();
        Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
        p /= p.sum();
        delta = -p;
        delta[a] += 1.0;                                                          // d/d logits
    }

    for (int l = n_layers - 1; l >= 0; --l) {
        const Eigen::VectorXd& input = trace.acts[l];
        Eigen::Map<RowMajorMat> gW(grad.data() + lo.w_off[l], lo.out_sz[l], lo.in_sz[l]);
        gW = delta * input.transpose();
        grad.segment(lo.b_off[l], lo.out_sz[l]) = delta;
        if (l > 0) {
            ConstMatMap W(params.data() + lo.w_off[l], lo.out_sz[l], lo.in_sz[l]);
            delta = W.transpose() * delta;
            // tanh'(z) expressed through the stored activation
            delta.array() *= 1.0 - input.array().square();
        }
    }
    return grad;
}

namespace {

double kl_single(const ActionDistribution& p, const ActionDistribution& q) {
    if (p.head == Head::DiagonalGaussian) {
        // sum_k [ log(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2 ], written in
        // log-std differences so the identity pair gives exactly zero
        const Eigen::ArrayXd dls = q.log_std.array() - p.log_std.array();
        const Eigen::ArrayXd inv_var2 = (-2.0 * q.log_std.array()).exp();
        const Eigen::ArrayXd md = p.mean.array() - q.mean.array();
        return (dls + 0.5 * (-2.0 * dls).exp() + 0.5 * md.square() * inv_var2 - 0.5).sum();
    }
    const Eigen::ArrayXd lp1 = p.logits.array() - log_sum_exp(p.logits);
    const Eigen::ArrayXd lp2 = q.logits.array() - log_sum_exp(q.logits);
    return (lp1.exp() * (lp1 - lp2)).sum();
}

} // namespace

double kl_mean(const Eigen::VectorXd& params_old, const Eigen::VectorXd& params_new,
               const PolicySpec& spec, const Eigen::MatrixXd& obs_batch) {
    if (obs_batch.rows() == 0) throw InputError("kl_mean: empty observation batch");
    if (obs_batch.cols() != spec.obs_dim) throw InputError("kl_mean: observation dimension mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < obs_batch.rows(); ++i) {
        const Eigen::VectorXd obs = obs_batch.row(i);
        acc += kl_single(act_distribution(params_old, spec, obs),
                         act_distribution(params_new, spec, obs));
    }
    return acc / static_cast<double>(obs_batch.rows());
}

Eigen::VectorXd fisher_vector_product(const Eigen::VectorXd& params, const PolicySpec& spec,
                                      const Eigen::MatrixXd& obs_batch,
                                      const Eigen::MatrixXd& actions,
                                      const Eigen::VectorXd& v, double damping) {
    check_params(params, spec);
    if (v.size() != params.size()) throw InputError("fisher_vector_product: vector dimension mismatch");
    if (obs_batch.rows() != actions.rows() || obs_batch.rows() == 0)
        throw InputError("fisher_vector_product: batch shape mismatch");
    if (damping < 0.0) throw InputError("fisher_vector_product: negative damping");
    const Eigen::Index n = obs_batch.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(params.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd g =
            log_prob_grad(params, spec, obs_batch.row(i), actions.row(i).transpose());
        out.noalias() += g * (g.dot(v));
    }
    out /= static_cast<double>(n);
    out.noalias() += damping * v;
    return out;
}

Eigen::VectorXd sample_action(const ActionDistribution& dist, Rng& rng) {
    if (dist.head == Head::DiagonalGaussian) {
        Eigen::VectorXd a(dist.mean.size());
        for (Eigen::Index k = 0; k < a.size(); ++k)
            a[k] = dist.mean[k] + std::exp(dist.log_std[k]) * rng.normal();
        return a;
    }
    const Eigen::VectorXd p = dist.probs();
    const double u = rng.uniform();
    double cum = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        cum += p[k];
        if (u < cum) return Eigen::VectorXd::Constant(1, static_cast<double>(k));
    }
    return Eigen::VectorXd::Constant(1, static_cast<double>(p.size() - 1));
}

} // namespace sbtrpo
