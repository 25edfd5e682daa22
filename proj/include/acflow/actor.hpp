#pragma once

#include "acflow/critic.hpp"
#include "acflow/mdp.hpp"

namespace acflow {

struct AdvantageTable {
  MatrixXd a;  // S x A, pi-mean zero per state
  bool centered = true;
  double raw_residual = 0.0;  // |pi-mean| before re-centering
};

// A^pi_tau = Q^pi_tau + tau*l - V^pi_tau from exact evaluation.
AdvantageTable exact_advantage(const Policy& pi, const FiniteMdp& mdp);

// A(s,a;theta) = Q_theta + tau*l - E_pi[Q_theta + tau*l].
AdvantageTable approx_advantage(const VectorXd& theta, const Policy& pi,
                                const FiniteMdp& mdp,
                                const FeatureMap& features);

// l_{n+1} = l_n - lambda*A, renormalised per state in log domain.
Policy mirror_descent_step(const Policy& pi, const AdvantageTable& advantage,
                           double lambda, const VectorXd& mu);

// dl/dt = -A(s,a;theta), the pre-normalisation flow right-hand side.
MatrixXd fisher_rao_rhs(const VectorXd& theta, const Policy& pi,
                        const FiniteMdp& mdp, const FeatureMap& features);

}  // namespace acflow
