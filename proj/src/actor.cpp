#include "acflow/actor.hpp"

#include "acflow/dp.hpp"
#include "acflow/kernels.hpp"

namespace acflow {

namespace {

AdvantageTable center(const MatrixXd& raw, const MatrixXd& density) {
  AdvantageTable out;
  out.a = kernels::center_rows(raw, density);
  out.raw_residual = 0.0;
  for (int s = 0; s < raw.rows(); ++s) {
    double mean = 0.0;
    for (int a = 0; a < raw.cols(); ++a) mean += density(s, a) * raw(s, a);
    out.raw_residual = std::max(out.raw_residual, std::abs(mean));
  }
  return out;
}

}  // namespace

AdvantageTable exact_advantage(const Policy& pi, const FiniteMdp& mdp) {
  const ValueFunctions vf = evaluate_policy(pi, mdp);
  MatrixXd raw(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      raw(s, a) = vf.q(s, a) + mdp.tau * pi.log_density(s, a) - vf.v(s);
  // V is already the pi-mean of Q + tau*l, so raw is centered up to roundoff;
  // re-center anyway so downstream invariants hold exactly.
  return center(raw, pi.density(mdp.mu));
}

AdvantageTable approx_advantage(const VectorXd& theta, const Policy& pi,
                                const FiniteMdp& mdp,
                                const FeatureMap& features) {
  const MatrixXd q = q_of_theta(theta, features, mdp.n_states, mdp.n_actions);
  MatrixXd raw = q + mdp.tau * pi.log_density;
  return center(raw, pi.density(mdp.mu));
}

Policy mirror_descent_step(const Policy& pi, const AdvantageTable& advantage,
                           double lambda, const VectorXd& mu) {
  if (lambda < 0.0) throw Error("mirror_descent_step: negative step size");
  return policy_from_logits(pi.log_density - lambda * advantage.a, mu);
}

MatrixXd fisher_rao_rhs(const VectorXd& theta, const Policy& pi,
                        const FiniteMdp& mdp, const FeatureMap& features) {
  return -approx_advantage(theta, pi, mdp, features).a;
}

}  // namespace acflow
