#pragma once

#include "acflow/dp.hpp"
#include "acflow/mdp.hpp"

namespace acflow {

struct GramData {
  MatrixXd sigma_beta;  // N x N
  double lambda_beta;   // smallest eigenvalue
  double gamma_const;   // lambda_beta * (1-gamma) * (1-sqrt(gamma))
};

GramData gram_data(const FiniteMdp& mdp, const FeatureMap& features);

// Q(s,a;theta) = <theta, phi(s,a)> as an S x A table.
MatrixXd q_of_theta(const VectorXd& theta, const FeatureMap& features,
                    int n_states, int n_actions);

// (1/2) int (Q_theta - T^pi Q_theta)^2 d^pi_beta.
double msbe(const VectorXd& theta, const Policy& pi, const FiniteMdp& mdp,
            const FeatureMap& features);

// g(theta,pi) = int (Q_theta - T^pi Q_theta) phi d^pi_beta.
VectorXd semi_gradient(const VectorXd& theta, const Policy& pi,
                       const FiniteMdp& mdp, const FeatureMap& features);

// L = (1/2) int (<theta,phi> - Q^pi_tau)^2 dzeta and its exact gradient.
std::pair<double, VectorXd> squared_loss_and_grad(const VectorXd& theta,
                                                  const Policy& pi,
                                                  const FiniteMdp& mdp,
                                                  const FeatureMap& features,
                                                  const MatrixXd& zeta);

struct BestParameters {
  VectorXd theta_pi;
  double residual;  // max_{s,a} |<theta_pi,phi> - Q^pi_tau|
};

// theta_pi = Sigma_beta^{-1} int phi Q^pi_tau dbeta; residual <= 1e-8
// certifies realisability for this policy.
BestParameters best_parameters(const Policy& pi, const FiniteMdp& mdp,
                               const FeatureMap& features);

// lhs = -<g(theta,pi), theta-theta_pi>,
// rhs = -(1-sqrt(gamma))(1-gamma) <grad L(theta,pi;beta), theta-theta_pi>;
// contract lhs <= rhs. Throws NotRealisable if theta_pi does not fit Q^pi.
std::pair<double, double> geometry_inequality_check(const VectorXd& theta,
                                                    const Policy& pi,
                                                    const FiniteMdp& mdp,
                                                    const FeatureMap& features);

}  // namespace acflow
