#pragma once

#include <functional>
#include <vector>

#include "acflow/actor.hpp"
#include "acflow/critic.hpp"
#include "acflow/mdp.hpp"

namespace acflow {

enum class ScheduleKind { Constant, Exponential, Polynomial };

// eta: [0,inf) -> [1,inf), non-decreasing.
//   constant:     eta(t) = eta0
//   exponential:  eta(t) = eta0 * exp(k1 t)
//   polynomial:   eta(t) = t^p + eta0
struct TimescaleSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double eta0 = 1.0;
  double k1 = 0.0;
  double p = 0.5;

  double eta(double t) const;
  // Smallest alpha with d(eta)/dt <= alpha*eta for all t, when one exists.
  std::optional<double> growth_alpha() const;
};

TimescaleSchedule make_schedule(ScheduleKind kind, double eta0, double k1 = 0.0,
                                double p = 0.5);
ScheduleKind parse_schedule_kind(const std::string& name);

struct FlowState {
  double t = 0.0;
  VectorXd theta;
  Policy policy;
};

struct SnapshotDiagnostics {
  double theta_norm;
  double k_t;        // max_s KL(pi_t|mu)
  double v_rho;      // V^{pi_t}_tau(rho)
  double gap;        // V^{pi_t}_tau(rho) - V*(rho)
  double theta_err;  // |theta - theta_{pi_t}|
  double msbe;
  double drift_lhs;  // -<g(theta,pi), theta>
  double drift_rhs;  // -(Gamma/2)|theta|^2 + tau^2 gamma^2 K^2/Gamma + |c|^2/Gamma
};

struct Snapshot {
  double t;
  VectorXd theta;
  MatrixXd log_density;
  SnapshotDiagnostics diag;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
};

enum class Integrator { Rk4, ExponentialEuler };
Integrator parse_integrator(const std::string& name);

struct FlowOptions {
  Integrator method = Integrator::ExponentialEuler;
  double dt = 1e-3;
  double t_end = 10.0;
  std::vector<double> output_times;
  double theta_guard = 1e6;  // BlowupDetected beyond these
  double kl_guard = 1e4;
};

// Right-hand side of the coupled dynamics at a state:
// dtheta/dt = -eta(t) g(theta,pi), dl/dt = -A(s,a;theta).
std::pair<VectorXd, MatrixXd> flow_rhs(const FlowState& state,
                                       const FiniteMdp& mdp,
                                       const FeatureMap& features,
                                       const TimescaleSchedule& schedule);

// Integrates theta jointly with the unnormalised log-density u,
// du/dt = -(Q_theta + tau u); the policy is recovered by per-state
// log-sum-exp normalisation (the offset is a gauge freedom).
// Exponential-Euler applies the stiff -tau*u part exactly.
Trajectory integrate(const FlowState& initial, const FiniteMdp& mdp,
                     const FeatureMap& features,
                     const TimescaleSchedule& schedule,
                     const FlowOptions& options);

struct TwoTimescaleOptions {
  double dt = 1e-3;    // actor step lambda_n; critic step h_n = eta(t_n)*dt
  double t_end = 10.0;
  std::vector<double> output_times;
  bool policy_uses_updated_critic = true;
  double theta_guard = 1e6;
  double kl_guard = 1e4;
};

// theta^{n+1} = theta^n - h_n g(theta^n, pi^n);
// pi^{n+1} = mirror_descent_step(pi^n, A(.;theta^{n+1}), lambda_n)
// (or A(.;theta^n) when policy_uses_updated_critic is false).
Trajectory run_two_timescale(const VectorXd& theta0, const Policy& pi0,
                             const FiniteMdp& mdp, const FeatureMap& features,
                             const TimescaleSchedule& schedule,
                             const TwoTimescaleOptions& options);

// Evenly spaced output grid helper: count points over [t_min, t_end].
std::vector<double> linear_output_grid(double t_min, double t_end, int count);

}  // namespace acflow
