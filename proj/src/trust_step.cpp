#include "sbtrpo/trust_step.hpp"

#include <algorithm>
#include <cmath>

namespace sbtrpo {

void TrustStepConfig::validate() const {
    if (eps_kl <= 0.0) throw InputError("TrustStepConfig: eps_kl must be > 0");
    if (cg_iters < 1) throw InputError("TrustStepConfig: cg_iters must be >= 1");
    if (cg_tol <= 0.0) throw InputError("TrustStepConfig: cg_tol must be > 0");
    if (tikhonov < 0.0) throw InputError("TrustStepConfig: tikhonov must be >= 0");
    if (beta <= 0.0 || beta > 1.0) throw InputError("TrustStepConfig: beta must lie in (0, 1]");
    if (eps_div <= 0.0) throw InputError("TrustStepConfig: eps_div must be > 0");
    if (max_backtracks < 1) throw InputError("TrustStepConfig: max_backtracks must be >= 1");
    if (step_fraction <= 0.0 || step_fraction >= 1.0)
        throw InputError("TrustStepConfig: step_fraction must lie in (0, 1)");
}

Eigen::VectorXd conjugate_gradient(const LinearOp& op, const Eigen::VectorXd& g,
                                   const TrustStepConfig& cfg) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(g.size());
    Eigen::VectorXd r = g;  // residual for x = 0
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    const double tol = cfg.cg_tol * std::max(1.0, g.norm());
    const double tol2 = tol * tol;

    for (int it = 0; it < cfg.cg_iters && rs > tol2; ++it) {
        const Eigen::VectorXd ap = op(p);
        if (!ap.allFinite()) throw NumericalError("conjugate_gradient: non-finite operator output");
        const double p_ap = p.dot(ap);
        if (p_ap <= 0.0 || !std::isfinite(p_ap))
            throw NumericalError("conjugate_gradient: operator is not positive definite");
        const double alpha = rs / p_ap;
        x.noalias() += alpha * p;
        r.noalias() -= alpha * ap;
        const double rs_next = r.squaredNorm();
        p = r + (rs_next / rs) * p;
        rs = rs_next;
    }
    if (!x.allFinite()) throw NumericalError("conjugate_gradient: non-finite iterate");
    return x;
}

Eigen::VectorXd trust_region_step(const LinearOp& fvp, const Eigen::VectorXd& g, double eps_kl,
                                  const TrustStepConfig& cfg, StepDirection direction) {
    if (!g.allFinite()) throw InputError("trust_region_step: non-finite gradient");
    if (g.isZero(0.0)) return Eigen::VectorXd::Zero(g.size());

    const Eigen::VectorXd x = conjugate_gradient(fvp, g, cfg);
    const double quad = g.dot(x);  // approx g^T F^-1 g
    if (quad <= 0.0 || !std::isfinite(quad))
        throw NumericalError("trust_region_step: non-positive curvature from CG solve");

    const double sign = direction == StepDirection::Ascent ? 1.0 : -1.0;
    return sign * std::sqrt(2.0 * eps_kl / quad) * x;
}

MixResult safety_bias_mix(const Eigen::VectorXd& g_c, const Eigen::VectorXd& delta_r,
                          const Eigen::VectorXd& delta_c, const TrustStepConfig& cfg) {
    MixResult out;
    out.gc_dot_dr = g_c.dot(delta_r);
    out.gc_dot_dc = g_c.dot(delta_c);
    out.eps = std::max(0.0, -cfg.beta * out.gc_dot_dc);

    const double numer = out.gc_dot_dr + out.eps;
    const double denom = out.gc_dot_dr - out.gc_dot_dc + cfg.eps_div;
    out.mu = std::clamp(std::max(0.0, numer / denom), 0.0, 1.0);

    out.delta = (1.0 - out.mu) * delta_r + out.mu * delta_c;
    out.gc_dot_delta = g_c.dot(out.delta);
    return out;
}

Eigen::VectorXd analytic_qp(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c,
                            const Eigen::MatrixXd& fisher, double eps, double eps_kl) {
    if (eps <= 0.0 || eps_kl <= 0.0) throw InputError("analytic_qp: eps and eps_kl must be > 0");
    const double gr_norm = g_r.norm();
    const double gc_norm = g_c.norm();
    if (gr_norm == 0.0 || gc_norm == 0.0)
        throw DegenerateInstance("analytic_qp: zero gradient");

    const Eigen::LLT<Eigen::MatrixXd> llt(fisher);
    if (llt.info() != Eigen::Success)
        throw DegenerateInstance("analytic_qp: metric is not positive definite");
    const Eigen::VectorXd fr = llt.solve(g_r);
    const Eigen::VectorXd fc = llt.solve(g_c);

    const double a = g_r.dot(fr);
    const double b = g_r.dot(fc);
    const double c = g_c.dot(fc);
    // b^2 = a*c exactly when g_r and g_c are parallel in the F^-1 metric.
    if (b * b >= a * c * (1.0 - 1e-12))
        throw DegenerateInstance("analytic_qp: gradients are parallel");
    // eps beyond the best attainable cost decrease sqrt(2 eps_kl c) has no
    // interior KKT point.
    if (eps >= std::sqrt(2.0 * eps_kl * c) * (1.0 - 1e-12))
        throw DegenerateInstance("analytic_qp: tangential or infeasible cost demand");

    // Unconstrained-in-cost branch: lambda = 0 already satisfies the demand.
    if (std::sqrt(2.0 * eps_kl / a) * b <= -eps) return std::sqrt(2.0 * eps_kl / a) * fr;

    const double qa = 2.0 * eps_kl * c * c - eps * eps * c;
    const double qb = -4.0 * eps_kl * b * c + 2.0 * eps * eps * b;
    const double qc = 2.0 * eps_kl * b * b - eps * eps * a;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (qa <= 0.0 || disc < 0.0)
        throw DegenerateInstance("analytic_qp: quadratic for lambda has no positive root");
    // The valid KKT root must satisfy b - lambda c < 0; that is the larger one.
    const double lambda = (-qb + std::sqrt(disc)) / (2.0 * qa);
    if (lambda <= 0.0)
        throw DegenerateInstance("analytic_qp: quadratic for lambda has no positive root");

    const double denom = a - 2.0 * lambda * b + lambda * lambda * c;
    return std::sqrt(2.0 * eps_kl / denom) * (fr - lambda * fc);
}

LineSearchResult line_search(const std::function<double(double)>& kl_at,
                             const std::function<double(double)>& cost_surrogate_at,
                             const TrustStepConfig& cfg) {
    const double cost_ref = cost_surrogate_at(0.0);
    LineSearchResult res;
    double alpha = 1.0;
    for (int k = 0; k < cfg.max_backtracks; ++k, alpha *= cfg.step_fraction) {
        ++res.attempts;
        try {
            if (kl_at(alpha) <= cfg.eps_kl && cost_surrogate_at(alpha) <= cost_ref) {
                res.accepted = true;
                res.alpha = alpha;
                return res;
            }
        } catch (const NumericalError&) {
            // far out of the trust region: treat as a failed alpha
        }
    }
    return res;
}

} // namespace sbtrpo
