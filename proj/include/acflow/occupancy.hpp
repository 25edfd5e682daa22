#pragma once

#include "acflow/mdp.hpp"

namespace acflow {

struct OccupancyBundle {
  MatrixXd d_state;      // S x S, row s is d^pi(.|s) started from delta_s
  VectorXd d_state_rho;  // S, started from rho
  MatrixXd d_sa;         // S x A, state-action occupancy from beta
};

// (J_pi b)(s',a') = sum_{s,a} P(s'|s,a) pi(a'|s') b(s,a).
MatrixXd j_apply(const MatrixXd& beta_in, const Policy& pi,
                 const FiniteMdp& mdp);

// Direct linear solves of d = (1-gamma) + gamma * J_pi^T-style systems.
OccupancyBundle occupancy_measures(const Policy& pi, const FiniteMdp& mdp);

// State-action occupancy for an arbitrary source distribution.
MatrixXd occupancy_sa_from(const MatrixXd& beta_in, const Policy& pi,
                           const FiniteMdp& mdp);

struct OccupancyIdentityReport {
  double residual_push;  // |d^pi_{J b} - J d^pi_b|_inf
  double residual_geo;   // |d^pi_b - gamma d^pi_{J b} - (1-gamma) b|_inf
};

OccupancyIdentityReport check_occupancy_identities(const Policy& pi,
                                                   const FiniteMdp& mdp,
                                                   const MatrixXd& beta_in);

// lhs = int f(s,a) f(s',a') P^pi(ds',da'|s,a) d^pi_beta(ds,da),
// rhs = gamma^{-1/2} int f^2 d^pi_beta; contract lhs <= rhs.
std::pair<double, double> holder_integral_bound_check(const MatrixXd& f,
                                                      const Policy& pi,
                                                      const FiniteMdp& mdp);

}  // namespace acflow
