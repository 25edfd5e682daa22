#include "acflow/critic.hpp"

#include <cmath>

#include "acflow/kernels.hpp"
#include "acflow/occupancy.hpp"

namespace acflow {

namespace {

VectorXd flatten(const MatrixXd& table) {
  const int S = static_cast<int>(table.rows());
  const int A = static_cast<int>(table.cols());
  VectorXd out(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out(s * A + a) = table(s, a);
  return out;
}

}  // namespace

GramData gram_data(const FiniteMdp& mdp, const FeatureMap& features) {
  GramData out;
  out.sigma_beta = kernels::weighted_gram(features.phi, flatten(mdp.beta));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out.sigma_beta);
  out.lambda_beta = eig.eigenvalues().minCoeff();
  if (out.lambda_beta <= 1e-12)
    throw SingularGram("feature Gram matrix has minimum eigenvalue " +
                       std::to_string(out.lambda_beta));
  out.gamma_const =
      out.lambda_beta * (1.0 - mdp.gamma) * (1.0 - std::sqrt(mdp.gamma));
  return out;
}

MatrixXd q_of_theta(const VectorXd& theta, const FeatureMap& features,
                    int n_states, int n_actions) {
  if (theta.size() != features.dim)
    throw Error("q_of_theta: parameter dimension mismatch");
  if (features.phi.rows() != static_cast<Eigen::Index>(n_states) * n_actions)
    throw Error("q_of_theta: feature row count mismatch");
  VectorXd flat = features.phi * theta;
  MatrixXd out(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) out(s, a) = flat(s * n_actions + a);
  return out;
}

double msbe(const VectorXd& theta, const Policy& pi, const FiniteMdp& mdp,
            const FeatureMap& features) {
  const MatrixXd q = q_of_theta(theta, features, mdp.n_states, mdp.n_actions);
  const MatrixXd resid = q - bellman_apply(q, pi, mdp);
  const MatrixXd d_sa = occupancy_sa_from(mdp.beta, pi, mdp);
  return 0.5 * (d_sa.array() * resid.array().square()).sum();
}

VectorXd semi_gradient(const VectorXd& theta, const Policy& pi,
                       const FiniteMdp& mdp, const FeatureMap& features) {
  const MatrixXd q = q_of_theta(theta, features, mdp.n_states, mdp.n_actions);
  const MatrixXd resid = q - bellman_apply(q, pi, mdp);
  const MatrixXd d_sa = occupancy_sa_from(mdp.beta, pi, mdp);
  return kernels::weighted_feature_sum(features.phi,
                                       flatten(d_sa.cwiseProduct(resid)));
}

std::pair<double, VectorXd> squared_loss_and_grad(const VectorXd& theta,
                                                  const Policy& pi,
                                                  const FiniteMdp& mdp,
                                                  const FeatureMap& features,
                                                  const MatrixXd& zeta) {
  const MatrixXd q = q_of_theta(theta, features, mdp.n_states, mdp.n_actions);
  const MatrixXd diff = q - evaluate_policy(pi, mdp).q;
  const double loss = 0.5 * (zeta.array() * diff.array().square()).sum();
  VectorXd grad = kernels::weighted_feature_sum(features.phi,
                                                flatten(zeta.cwiseProduct(diff)));
  return {loss, grad};
}

BestParameters best_parameters(const Policy& pi, const FiniteMdp& mdp,
                               const FeatureMap& features) {
  const GramData gram = gram_data(mdp, features);
  const MatrixXd q_pi = evaluate_policy(pi, mdp).q;
  const VectorXd rhs = kernels::weighted_feature_sum(
      features.phi, flatten(mdp.beta.cwiseProduct(q_pi)));

  BestParameters out;
  out.theta_pi = Eigen::LDLT<MatrixXd>(gram.sigma_beta).solve(rhs);
  if (!out.theta_pi.allFinite())
    throw SingularGram("least-squares solve for theta_pi failed");
  const MatrixXd fit =
      q_of_theta(out.theta_pi, features, mdp.n_states, mdp.n_actions);
  out.residual = (fit - q_pi).cwiseAbs().maxCoeff();
  return out;
}

std::pair<double, double> geometry_inequality_check(const VectorXd& theta,
                                                    const Policy& pi,
                                                    const FiniteMdp& mdp,
                                                    const FeatureMap& features) {
  const BestParameters bp = best_parameters(pi, mdp, features);
  if (bp.residual > 1e-8)
    throw NotRealisable("realisability residual " +
                        std::to_string(bp.residual) + " above 1e-8");
  const VectorXd diff = theta - bp.theta_pi;
  const VectorXd g = semi_gradient(theta, pi, mdp, features);
  const VectorXd grad_l =
      squared_loss_and_grad(theta, pi, mdp, features, mdp.beta).second;
  const double scale = (1.0 - std::sqrt(mdp.gamma)) * (1.0 - mdp.gamma);
  return {-g.dot(diff), -scale * grad_l.dot(diff)};
}

}  // namespace acflow
