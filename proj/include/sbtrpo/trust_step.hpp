#pragma once

#include <Eigen/Dense>
#include <functional>

#include "sbtrpo/errors.hpp"

namespace sbtrpo {

struct TrustStepConfig {
    double eps_kl = 0.01;        // target KL
    int cg_iters = 50;
    double cg_tol = 1e-10;       // relative residual
    double tikhonov = 0.02;      // additive Fisher damping
    double beta = 0.75;          // safety bias in (0, 1]
    double eps_div = 1e-8;       // guard against division by zero in mu
    int max_backtracks = 100;
    double step_fraction = 0.8;

    void validate() const;
    bool operator==(const TrustStepConfig&) const = default;
};

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Solves op(x) = g for a symmetric positive definite matrix-free operator.
/// Stops at residual <= cg_tol * max(1, |g|) or after cg_iters iterations.
Eigen::VectorXd conjugate_gradient(const LinearOp& op, const Eigen::VectorXd& g,
                                   const TrustStepConfig& cfg);

enum class StepDirection { Ascent, Descent };

/// KL-budgeted natural-gradient step: x = F^-1 g via CG, scaled so that
/// (1/2) delta^T F delta = eps_kl, signed +1 for reward ascent and -1 for
/// cost descent. Returns the zero vector when g is zero.
Eigen::VectorXd trust_region_step(const LinearOp& fvp, const Eigen::VectorXd& g, double eps_kl,
                                  const TrustStepConfig& cfg, StepDirection direction);

struct MixResult {
    double mu = 0.0;          // convex-combination weight in [0, 1]
    double eps = 0.0;         // required cost decrease, -beta * <g_c, delta_c>
    Eigen::VectorXd delta;    // (1 - mu) * delta_r + mu * delta_c
    double gc_dot_dr = 0.0;
    double gc_dot_dc = 0.0;
    double gc_dot_delta = 0.0;
};

/// The smallest convex-combination weight securing the cost-decrease demand
/// eps = -beta * <g_c, delta_c>:
///   mu = max{0, (<g_c,delta_r> + eps) / (<g_c,delta_r> - <g_c,delta_c> + eps_div)}
/// clamped to [0, 1] so the convex-combination KL guarantee always holds.
MixResult safety_bias_mix(const Eigen::VectorXd& g_c, const Eigen::VectorXd& delta_r,
                          const Eigen::VectorXd& delta_c, const TrustStepConfig& cfg);

/// Exact optimum of  max <g_r, delta>  s.t.  <g_c, delta> <= -eps,
/// (1/2) delta^T F delta <= eps_kl,  for small dense F. A test and
/// small-problem oracle, not the production update path. Requires the
/// non-degenerate case: g_r, g_c nonzero and non-parallel, F positive
/// definite, eps strictly attainable; otherwise throws DegenerateInstance.
Eigen::VectorXd analytic_qp(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c,
                            const Eigen::MatrixXd& fisher, double eps, double eps_kl);

struct LineSearchResult {
    bool accepted = false;
    double alpha = 0.0;
    int attempts = 0;
};

/// Geometric backtracking over alpha = 1, f, f^2, ... for max_backtracks
/// attempts; accepts the first alpha with empirical KL <= eps_kl and sampled
/// cost surrogate no worse than its alpha = 0 value. A NumericalError from
/// either evaluator rejects that alpha and shrinking continues.
LineSearchResult line_search(const std::function<double(double)>& kl_at,
                             const std::function<double(double)>& cost_surrogate_at,
                             const TrustStepConfig& cfg);

} // namespace sbtrpo
