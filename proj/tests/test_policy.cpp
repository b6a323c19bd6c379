#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbtrpo/policy.hpp"
#include "support/oracles.hpp"

using namespace sbtrpo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

PolicySpec gaussian_spec(int obs, std::vector<int> hidden, int act) {
    PolicySpec s;
    s.obs_dim = obs;
    s.act_dim = act;
    s.hidden_sizes = std::move(hidden);
    s.head = Head::DiagonalGaussian;
    return s;
}

PolicySpec categorical_spec(int obs, std::vector<int> hidden, int act) {
    PolicySpec s = gaussian_spec(obs, std::move(hidden), act);
    s.head = Head::Categorical;
    return s;
}

// Offset of the output-layer bias in the flat layout (weights then bias per
// layer, log-stds at the tail).
int output_bias_offset(const PolicySpec& s) {
    int off = 0;
    int in = s.obs_dim;
    for (int h : s.hidden_sizes) {
        off += in * h + h;
        in = h;
    }
    return off + in * s.act_dim;
}

} // namespace

TEST_CASE("parameter count matches the layer arithmetic") {
    const PolicySpec s = gaussian_spec(4, {64, 64}, 2);
    CHECK(s.param_count() == 4 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2 + 2);  // 4612
    CHECK(s.param_count() == 4612);
    CHECK(policy_init(s, 7).size() == 4612);

    const PolicySpec c = categorical_spec(25, {64, 64}, 4);
    CHECK(c.param_count() == 25 * 64 + 64 + 64 * 64 + 64 + 64 * 4 + 4);
}

TEST_CASE("policy_init is deterministic and starts with unit std") {
    const PolicySpec s = gaussian_spec(3, {8, 8}, 2);
    const VectorXd a = policy_init(s, 123);
    const VectorXd b = policy_init(s, 123);
    CHECK(a == b);  // bit-identical
    CHECK(policy_init(s, 124) != a);

    // log-std entries are the final act_dim parameters and start at zero
    CHECK(a.tail(2).isZero(0.0));
    const VectorXd obs = VectorXd::Zero(3);
    const auto dist = act_distribution(a, s, obs);
    CHECK(dist.log_std.isZero(0.0));
}

TEST_CASE("zero network gives zero mean / uniform categorical") {
    const PolicySpec g = gaussian_spec(3, {4}, 2);
    VectorXd params = VectorXd::Zero(g.param_count());
    auto dist = act_distribution(params, g, VectorXd::Constant(3, 0.7));
    CHECK(dist.mean.isZero(0.0));
    CHECK(dist.log_std.isZero(0.0));

    const PolicySpec c = categorical_spec(3, {4}, 4);
    auto cdist = act_distribution(VectorXd::Zero(c.param_count()), c, VectorXd::Constant(3, 0.7));
    const VectorXd p = cdist.probs();
    for (int k = 0; k < 4; ++k) CHECK(p[k] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
}

TEST_CASE("two-hidden-layer toy net composes tanh twice") {
    // 1-1-1-1 net, all weights 1, biases 0, obs 0.5: linear-tanh-linear-tanh-linear
    const PolicySpec s = gaussian_spec(1, {1, 1}, 1);
    VectorXd params = VectorXd::Zero(s.param_count());
    params[0] = 1.0;  // W1
    params[2] = 1.0;  // W2
    params[4] = 1.0;  // W3
    const auto dist = act_distribution(params, s, VectorXd::Constant(1, 0.5));
    CHECK(dist.mean[0] == doctest::Approx(std::tanh(std::tanh(0.5))).epsilon(1e-12));
}

TEST_CASE("act_distribution rejects non-finite observations") {
    const PolicySpec s = gaussian_spec(2, {4}, 1);
    const VectorXd params = policy_init(s, 0);
    VectorXd obs(2);
    obs << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(act_distribution(params, s, obs), InputError);
}

TEST_CASE("log_prob closed forms") {
    const PolicySpec s = gaussian_spec(1, {2}, 1);
    VectorXd params = VectorXd::Zero(s.param_count());

    // standard normal at a = 0
    CHECK(log_prob(params, s, VectorXd::Zero(1), VectorXd::Zero(1)) ==
          doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

    // mean 1, std 2 at a = 1: -ln 2 - 0.5 ln(2 pi)
    params[output_bias_offset(s)] = 1.0;
    params[s.param_count() - 1] = std::log(2.0);
    CHECK(log_prob(params, s, VectorXd::Zero(1), VectorXd::Constant(1, 1.0)) ==
          doctest::Approx(-std::log(2.0) - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

    // uniform categorical over 4
    const PolicySpec c = categorical_spec(2, {3}, 4);
    const VectorXd cp = VectorXd::Zero(c.param_count());
    CHECK(log_prob(cp, c, VectorXd::Zero(2), VectorXd::Constant(1, 2.0)) ==
          doctest::Approx(std::log(0.25)).epsilon(1e-12));

    CHECK_THROWS_AS(log_prob(cp, c, VectorXd::Zero(2), VectorXd::Constant(1, 4.0)), InputError);
    CHECK_THROWS_AS(log_prob(cp, c, VectorXd::Zero(2), VectorXd::Constant(1, -1.0)), InputError);
}

TEST_CASE("Gaussian score with the mean held directly in the output bias") {
    // zero weights and zero obs make the output bias the mean itself
    const PolicySpec s = gaussian_spec(1, {3}, 1);
    const VectorXd params = VectorXd::Zero(s.param_count());
    const VectorXd g = log_prob_grad(params, s, VectorXd::Zero(1), VectorXd::Constant(1, 2.0));
    CHECK(g[output_bias_offset(s)] == doctest::Approx(2.0).epsilon(1e-14));  // (a - mu) / sigma^2
    CHECK(g[s.param_count() - 1] == doctest::Approx(3.0).epsilon(1e-14));    // (a-mu)^2/s^2 - 1
}

TEST_CASE("log_prob_grad matches central finite differences") {
    Rng rng(42);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const bool gaussian = trial % 2 == 0;
        const PolicySpec s = gaussian ? gaussian_spec(3, {6, 5}, 2) : categorical_spec(3, {6, 5}, 4);
        const VectorXd params = policy_init(s, 1000 + trial);
        const VectorXd obs = oracles::random_vector(3, rng);
        VectorXd action;
        if (gaussian) {
            action = oracles::random_vector(2, rng);
        } else {
            action = VectorXd::Constant(1, static_cast<double>(rng.uniform_int(4)));
        }
        const VectorXd g = log_prob_grad(params, s, obs, action);
        const VectorXd fd = oracles::fd_gradient(
            [&](const VectorXd& p) { return log_prob(p, s, obs, action); }, params, 1e-5);
        CHECK((g - fd).norm() / fd.norm() < 1e-5);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("kl_mean closed forms and invariants") {
    const PolicySpec s = gaussian_spec(2, {4}, 1);
    const VectorXd params = policy_init(s, 5);
    MatrixXd obs(3, 2);
    obs << 0.1, -0.2, 0.5, 0.3, -1.0, 0.7;

    CHECK(kl_mean(params, params, s, obs) == 0.0);

    // (0,1) vs (1,1): 0.5 * (mu1 - mu2)^2
    VectorXd p0 = VectorXd::Zero(s.param_count());
    VectorXd p1 = p0;
    p1[output_bias_offset(s)] = 1.0;
    CHECK(kl_mean(p0, p1, s, obs) == doctest::Approx(0.5).epsilon(1e-12));

    // (0,1) vs (0,2): ln 2 + 1/8 - 1/2
    VectorXd p2 = p0;
    p2[s.param_count() - 1] = std::log(2.0);
    CHECK(kl_mean(p0, p2, s, obs) ==
          doctest::Approx(std::log(2.0) + 0.125 - 0.5).epsilon(1e-12));

    CHECK_THROWS_AS(kl_mean(p0, p1, s, MatrixXd(0, 2)), InputError);

    // non-negativity across random pairs, both heads
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        const PolicySpec spec = t % 2 == 0 ? s : categorical_spec(2, {4}, 3);
        const VectorXd a = policy_init(spec, 2 * t);
        const VectorXd b = policy_init(spec, 2 * t + 1);
        CHECK(kl_mean(a, b, spec, obs) >= 0.0);
        CHECK(kl_mean(a, a, spec, obs) == 0.0);
    }
}

TEST_CASE("gradient of kl_mean vanishes at the identity") {
    const PolicySpec s = gaussian_spec(2, {5}, 2);
    const VectorXd theta = policy_init(s, 11);
    MatrixXd obs(4, 2);
    obs << 0.3, -0.4, 1.0, 0.2, -0.6, 0.9, 0.05, -1.2;
    const VectorXd fd = oracles::fd_gradient(
        [&](const VectorXd& p) { return kl_mean(theta, p, s, obs); }, theta, 1e-5);
    CHECK(fd.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("Gaussian density normalization checked at mean +- k std") {
    const PolicySpec s = gaussian_spec(2, {4}, 2);
    const VectorXd params = policy_init(s, 3);
    const VectorXd obs = VectorXd::Constant(2, 0.4);
    const auto dist = act_distribution(params, s, obs);
    for (int k = 0; k <= 2; ++k) {
        const VectorXd a = dist.mean + k * dist.log_std.array().exp().matrix();
        const double expected =
            -0.5 * k * k * 2 - dist.log_std.sum() - std::log(2.0 * M_PI);
        CHECK(log_prob(dist, a) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("fisher_vector_product: trivial and single-sample cases") {
    const PolicySpec s = gaussian_spec(2, {3}, 1);
    const VectorXd params = policy_init(s, 9);
    MatrixXd obs(1, 2);
    obs << 0.5, -0.25;
    MatrixXd actions(1, 1);
    actions << 0.8;

    const int d = s.param_count();
    CHECK(fisher_vector_product(params, s, obs, actions, VectorXd::Zero(d), 0.02).isZero(0.0));

    // single sample: FVP(v) = g (g . v) + damping v with g the sample score
    const VectorXd g = log_prob_grad(params, s, obs.row(0), actions.row(0).transpose());
    for (int k = 0; k < 3; ++k) {
        VectorXd v = VectorXd::Zero(d);
        v[k] = 1.0;
        const VectorXd expected = g * g[k] + 0.02 * v;
        CHECK((fisher_vector_product(params, s, obs, actions, v, 0.02) - expected).norm() < 1e-14);
    }

    CHECK_THROWS_AS(fisher_vector_product(params, s, obs, actions, VectorXd::Zero(d + 1), 0.0),
                    InputError);
}

TEST_CASE("fisher_vector_product: PSD, linearity, symmetry") {
    const PolicySpec s = categorical_spec(3, {5}, 3);
    const VectorXd params = policy_init(s, 21);
    const int d = s.param_count();
    Rng rng(77);
    MatrixXd obs(6, 3);
    MatrixXd actions(6, 1);
    for (int i = 0; i < 6; ++i) {
        obs.row(i) = oracles::random_vector(3, rng).transpose();
        actions(i, 0) = rng.uniform_int(3);
    }
    auto fvp = [&](const VectorXd& v) {
        return fisher_vector_product(params, s, obs, actions, v, 0.02);
    };
    for (int t = 0; t < 10; ++t) {
        const VectorXd u = oracles::random_vector(d, rng);
        const VectorXd v = oracles::random_vector(d, rng);
        CHECK(v.dot(fvp(v)) >= 0.0);
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        CHECK((fvp(a * u + b * v) - (a * fvp(u) + b * fvp(v))).norm() < 1e-10);
        CHECK(std::abs(u.dot(fvp(v)) - v.dot(fvp(u))) < 1e-10);
    }
}

TEST_CASE("sampled actions follow the distribution head") {
    const PolicySpec c = categorical_spec(2, {4}, 3);
    const VectorXd params = policy_init(c, 2);
    const auto dist = act_distribution(params, c, VectorXd::Constant(2, 0.1));
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const VectorXd a = sample_action(dist, rng);
        CHECK(a.size() == 1);
        CHECK(a[0] >= 0.0);
        CHECK(a[0] <= 2.0);
    }
}

TEST_CASE("spec validation rejects broken shapes") {
    PolicySpec s;
    s.obs_dim = 0;
    s.act_dim = 1;
    CHECK_THROWS_AS(s.validate(), InputError);
    s.obs_dim = 1;
    s.hidden_sizes.clear();
    CHECK_THROWS_AS(s.validate(), InputError);
}
