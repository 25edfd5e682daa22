#include "acflow/occupancy.hpp"

#include <cmath>

namespace acflow {

namespace {

// Row-stochastic transition on states: P_pi(s,s') = sum_a pi(a|s) P(s'|s,a).
MatrixXd state_kernel(const MatrixXd& density, const FiniteMdp& mdp) {
  MatrixXd p(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int sp = 0; sp < mdp.n_states; ++sp) {
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a)
        acc += density(s, a) * mdp.transition(mdp.sa(s, a), sp);
      p(s, sp) = acc;
    }
  return p;
}

}  // namespace

MatrixXd j_apply(const MatrixXd& beta_in, const Policy& pi,
                 const FiniteMdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions;
  if (beta_in.rows() != S || beta_in.cols() != A)
    throw Error("j_apply: source distribution dimension mismatch");
  const MatrixXd density = pi.density(mdp.mu);
  VectorXd mass(S);
  for (int sp = 0; sp < S; ++sp) {
    double acc = 0.0;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        acc += beta_in(s, a) * mdp.transition(mdp.sa(s, a), sp);
    mass(sp) = acc;
  }
  MatrixXd out(S, A);
  for (int sp = 0; sp < S; ++sp)
    for (int ap = 0; ap < A; ++ap) out(sp, ap) = mass(sp) * density(sp, ap);
  return out;
}

MatrixXd occupancy_sa_from(const MatrixXd& beta_in, const Policy& pi,
                           const FiniteMdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions, SA = S * A;
  const MatrixXd density = pi.density(mdp.mu);
  // d solves d = (1-gamma) beta + gamma J_pi d; flatten to SA and solve
  // (I - gamma J^T)^T-free form directly on the transposed system.
  MatrixXd system = MatrixXd::Identity(SA, SA);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const int i = mdp.sa(s, a);
      for (int sp = 0; sp < S; ++sp)
        for (int ap = 0; ap < A; ++ap)
          system(mdp.sa(sp, ap), i) -=
              mdp.gamma * mdp.transition(i, sp) * density(sp, ap);
    }
  VectorXd b(SA);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) b(mdp.sa(s, a)) = (1.0 - mdp.gamma) * beta_in(s, a);
  VectorXd d = Eigen::PartialPivLU<MatrixXd>(system).solve(b);
  if (!d.allFinite()) throw SolveFailure("occupancy system is singular");
  MatrixXd out(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out(s, a) = d(mdp.sa(s, a));
  return out;
}

OccupancyBundle occupancy_measures(const Policy& pi, const FiniteMdp& mdp) {
  const int S = mdp.n_states;
  const MatrixXd density = pi.density(mdp.mu);
  const MatrixXd p_state = state_kernel(density, mdp);

  OccupancyBundle out;
  // Row s of d_state solves row = (1-gamma) e_s^T + gamma row P_pi, i.e.
  // d_state = (1-gamma)(I - gamma P_pi)^{-1} read off row by row.
  MatrixXd system = MatrixXd::Identity(S, S) - mdp.gamma * p_state.transpose();
  Eigen::PartialPivLU<MatrixXd> lu(system);
  MatrixXd rows = lu.solve(MatrixXd::Identity(S, S) * (1.0 - mdp.gamma));
  if (!rows.allFinite()) throw SolveFailure("state occupancy system is singular");
  out.d_state = rows.transpose();
  out.d_state_rho = out.d_state.transpose() * mdp.rho;
  out.d_sa = occupancy_sa_from(mdp.beta, pi, mdp);
  return out;
}

OccupancyIdentityReport check_occupancy_identities(const Policy& pi,
                                                   const FiniteMdp& mdp,
                                                   const MatrixXd& beta_in) {
  const MatrixXd pushed = j_apply(beta_in, pi, mdp);
  const MatrixXd d_beta = occupancy_sa_from(beta_in, pi, mdp);
  const MatrixXd d_pushed = occupancy_sa_from(pushed, pi, mdp);

  OccupancyIdentityReport out;
  out.residual_push =
      (d_pushed - j_apply(d_beta, pi, mdp)).cwiseAbs().maxCoeff();
  out.residual_geo =
      (d_beta - mdp.gamma * d_pushed - (1.0 - mdp.gamma) * beta_in)
          .cwiseAbs()
          .maxCoeff();
  return out;
}

std::pair<double, double> holder_integral_bound_check(const MatrixXd& f,
                                                      const Policy& pi,
                                                      const FiniteMdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions;
  if (!f.allFinite()) throw Error("holder_integral_bound_check: f not finite");
  const MatrixXd density = pi.density(mdp.mu);
  const MatrixXd d_sa = occupancy_sa_from(mdp.beta, pi, mdp);

  // (P^pi f)(s,a) = sum_{s',a'} P(s'|s,a) pi(a'|s') f(s',a')
  double lhs = 0.0, rhs = 0.0;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double pushed = 0.0;
      for (int sp = 0; sp < S; ++sp) {
        double inner = 0.0;
        for (int ap = 0; ap < A; ++ap) inner += density(sp, ap) * f(sp, ap);
        pushed += mdp.transition(mdp.sa(s, a), sp) * inner;
      }
      lhs += d_sa(s, a) * f(s, a) * pushed;
      rhs += d_sa(s, a) * f(s, a) * f(s, a);
    }
  rhs /= std::sqrt(mdp.gamma);
  return {lhs, rhs};
}

}  // namespace acflow
