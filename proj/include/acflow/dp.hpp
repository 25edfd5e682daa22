#pragma once

#include "acflow/mdp.hpp"

namespace acflow {

struct ValueFunctions {
  MatrixXd q;  // S x A
  VectorXd v;  // S
  VectorXd kl; // S, KL(pi(.|s)|mu)
  Policy policy;
};

struct OptimalSolution {
  MatrixXd q_star;
  VectorXd v_star;
  Policy pi_star;
  int iterations = 0;
  double residual = 0.0;
};

// Soft Bellman operator: (T^pi f)(s,a) =
//   c(s,a) + gamma E_{P^pi}[f] + tau*gamma E_P[KL(pi|mu)].
MatrixXd bellman_apply(const MatrixXd& f, const Policy& pi,
                       const FiniteMdp& mdp);

// Fixed point of T^pi by direct linear solve (default) or iteration.
ValueFunctions evaluate_policy(const Policy& pi, const FiniteMdp& mdp,
                               double tol = 1e-10, bool iterative = false);

// Soft value iteration: V(s) = -tau ln sum_a exp(-Q(s,a)/tau) mu(a).
OptimalSolution solve_optimal(const FiniteMdp& mdp, double tol = 1e-10,
                              int max_iter = 1'000'000);

struct PerformanceDifference {
  double lhs;           // V^pi(rho) - V^pi'(rho) by direct evaluation
  double rhs;           // occupancy-weighted integral form
  VectorXd per_state;   // integrand per state, before 1/(1-gamma)
};

PerformanceDifference performance_difference(const Policy& pi,
                                             const Policy& pi_prime,
                                             const FiniteMdp& mdp);

}  // namespace acflow
