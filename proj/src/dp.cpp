#include "acflow/dp.hpp"

#include <cmath>

#include "acflow/kernels.hpp"
#include "acflow/occupancy.hpp"

namespace acflow {

MatrixXd bellman_apply(const MatrixXd& f, const Policy& pi,
                       const FiniteMdp& mdp) {
  if (f.rows() != mdp.n_states || f.cols() != mdp.n_actions)
    throw Error("bellman_apply: Q-table dimension mismatch");
  return kernels::bellman_table(mdp.transition, mdp.cost, mdp.gamma, mdp.tau,
                                pi.density(mdp.mu), kl_to_reference(pi, mdp.mu),
                                f);
}

ValueFunctions evaluate_policy(const Policy& pi, const FiniteMdp& mdp,
                               double tol, bool iterative) {
  const int S = mdp.n_states, A = mdp.n_actions, SA = S * A;
  const MatrixXd density = pi.density(mdp.mu);
  const VectorXd kl = kl_to_reference(pi, mdp.mu);

  MatrixXd q(S, A);
  if (!iterative) {
    // (I - gamma M) q = c + tau*gamma P.kl with M = P^pi on state-actions.
    MatrixXd system = MatrixXd::Identity(SA, SA);
    VectorXd b(SA);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const int i = mdp.sa(s, a);
        double drift = 0.0;
        for (int sp = 0; sp < S; ++sp) {
          drift += mdp.transition(i, sp) * kl(sp);
          for (int ap = 0; ap < A; ++ap)
            system(i, mdp.sa(sp, ap)) -=
                mdp.gamma * mdp.transition(i, sp) * density(sp, ap);
        }
        b(i) = mdp.cost(s, a) + mdp.tau * mdp.gamma * drift;
      }
    }
    Eigen::PartialPivLU<MatrixXd> lu(system);
    VectorXd qflat = lu.solve(b);
    if (!qflat.allFinite())
      throw SolveFailure("policy evaluation system is singular");
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) q(s, a) = qflat(mdp.sa(s, a));
    double residual = (q - bellman_apply(q, pi, mdp)).cwiseAbs().maxCoeff();
    if (residual > tol)
      throw SolveFailure("policy evaluation residual " +
                         std::to_string(residual) + " exceeds tolerance");
  } else {
    q.setZero();
    const int budget =
        std::max(64, static_cast<int>(std::log(tol * (1.0 - mdp.gamma) /
                                               (1.0 + mdp.cost.cwiseAbs()
                                                          .maxCoeff())) /
                                      std::log(mdp.gamma)) +
                         64);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < budget && residual > tol; ++it) {
      MatrixXd next = bellman_apply(q, pi, mdp);
      residual = (next - q).cwiseAbs().maxCoeff();
      q = next;
    }
    if (residual > tol)
      throw NonConvergence("policy evaluation iteration stalled at residual " +
                           std::to_string(residual));
  }

  ValueFunctions out;
  out.q = q;
  out.kl = kl;
  out.policy = pi;
  out.v.resize(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a)
      acc += density(s, a) * (q(s, a) + mdp.tau * pi.log_density(s, a));
    out.v(s) = acc;
  }
  return out;
}

OptimalSolution solve_optimal(const FiniteMdp& mdp, double tol, int max_iter) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const VectorXd log_mu = mdp.mu.array().log();
  VectorXd v = VectorXd::Zero(S);
  MatrixXd q(S, A);

  auto backup = [&](const VectorXd& vin, MatrixXd& qout) {
    VectorXd vout(S);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double acc = 0.0;
        for (int sp = 0; sp < S; ++sp)
          acc += mdp.transition(mdp.sa(s, a), sp) * vin(sp);
        qout(s, a) = mdp.cost(s, a) + mdp.gamma * acc;
      }
      // V(s) = -tau * logsumexp_a(-Q(s,a)/tau + ln mu(a))
      double m = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a)
        m = std::max(m, -qout(s, a) / mdp.tau + log_mu(a));
      double acc = 0.0;
      for (int a = 0; a < A; ++a)
        acc += std::exp(-qout(s, a) / mdp.tau + log_mu(a) - m);
      vout(s) = -mdp.tau * (m + std::log(acc));
    }
    return vout;
  };

  OptimalSolution out;
  double diff = std::numeric_limits<double>::infinity();
  int it = 0;
  const double stop = tol * (1.0 - mdp.gamma) / 2.0;
  for (; it < max_iter && diff > stop; ++it) {
    VectorXd vnext = backup(v, q);
    diff = (vnext - v).cwiseAbs().maxCoeff();
    v = vnext;
  }
  MatrixXd q_check(S, A);
  out.residual = (backup(v, q_check) - v).cwiseAbs().maxCoeff();
  if (out.residual > tol)
    throw NonConvergence("soft value iteration residual " +
                         std::to_string(out.residual) +
                         " above tolerance after " + std::to_string(it) +
                         " sweeps");
  out.iterations = it;
  backup(v, q);
  out.q_star = q;
  out.v_star = v;
  out.pi_star = policy_from_logits(-q / mdp.tau, mdp.mu);
  return out;
}

PerformanceDifference performance_difference(const Policy& pi,
                                             const Policy& pi_prime,
                                             const FiniteMdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions;
  ValueFunctions vf = evaluate_policy(pi, mdp);
  ValueFunctions vf_prime = evaluate_policy(pi_prime, mdp);
  const MatrixXd d = pi.density(mdp.mu);
  const MatrixXd d_prime = pi_prime.density(mdp.mu);
  const OccupancyBundle occ = occupancy_measures(pi, mdp);

  PerformanceDifference out;
  out.per_state.resize(S);
  for (int s = 0; s < S; ++s) {
    double integral = 0.0;
    double kl_cross = 0.0;
    for (int a = 0; a < A; ++a) {
      const double target = vf_prime.q(s, a) +
                            mdp.tau * pi_prime.log_density(s, a);
      integral += target * (d(s, a) - d_prime(s, a));
      kl_cross += d(s, a) *
                  (pi.log_density(s, a) - pi_prime.log_density(s, a));
    }
    out.per_state(s) = integral + mdp.tau * kl_cross;
  }
  out.rhs = occ.d_state_rho.dot(out.per_state) / (1.0 - mdp.gamma);
  out.lhs = mdp.rho.dot(vf.v) - mdp.rho.dot(vf_prime.v);
  return out;
}

}  // namespace acflow
