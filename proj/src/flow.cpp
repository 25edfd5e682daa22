#include "acflow/flow.hpp"

#include <algorithm>
#include <cmath>

#include "acflow/dp.hpp"
#include "acflow/occupancy.hpp"

namespace acflow {

double TimescaleSchedule::eta(double t) const {
  switch (kind) {
    case ScheduleKind::Constant:
      return eta0;
    case ScheduleKind::Exponential:
      return eta0 * std::exp(k1 * t);
    case ScheduleKind::Polynomial:
      return std::pow(t, p) + eta0;
  }
  return eta0;
}

std::optional<double> TimescaleSchedule::growth_alpha() const {
  switch (kind) {
    case ScheduleKind::Constant:
      return 0.0;
    case ScheduleKind::Exponential:
      return k1;
    case ScheduleKind::Polynomial:
      // d(eta)/dt = p t^{p-1}; bounded against eta only when p = 1
      // (worst case at t = 0 gives alpha = 1/eta0). For p < 1 the
      // derivative is unbounded relative to eta near t = 0.
      if (p == 1.0) return 1.0 / eta0;
      return std::nullopt;
  }
  return std::nullopt;
}

TimescaleSchedule make_schedule(ScheduleKind kind, double eta0, double k1,
                                double p) {
  if (!(eta0 >= 1.0))
    throw ConfigError("schedule requires eta0 >= 1, got " +
                      std::to_string(eta0));
  if (kind == ScheduleKind::Exponential && k1 < 0.0)
    throw ConfigError("exponential schedule requires k1 >= 0");
  if (kind == ScheduleKind::Polynomial && !(p > 0.0 && p <= 1.0))
    throw ConfigError("polynomial schedule requires p in (0,1]");
  TimescaleSchedule s;
  s.kind = kind;
  s.eta0 = eta0;
  s.k1 = k1;
  s.p = p;
  return s;
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "exponential") return ScheduleKind::Exponential;
  if (name == "polynomial") return ScheduleKind::Polynomial;
  throw ConfigError("unknown schedule kind '" + name + "'");
}

Integrator parse_integrator(const std::string& name) {
  if (name == "rk4") return Integrator::Rk4;
  if (name == "exponential-euler") return Integrator::ExponentialEuler;
  throw ConfigError("unknown integrator '" + name + "'");
}

std::vector<double> linear_output_grid(double t_min, double t_end, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) {
    out.push_back(t_end);
    return out;
  }
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(t_min + (t_end - t_min) * static_cast<double>(i) /
                              static_cast<double>(count - 1));
  out.back() = t_end;
  return out;
}

namespace {

struct GridPoint {
  double t;
  bool output;
};

// Union of the dt lattice and the requested output times; snapshots are taken
// exactly at the flagged points, so requested times are hit without
// interpolation.
std::vector<GridPoint> build_grid(double t_end, double dt,
                                  std::vector<double> outputs) {
  if (!(dt > 0.0) || !(t_end > 0.0))
    throw ConfigError("integration requires dt > 0 and t_end > 0");
  if (outputs.empty()) outputs = {0.0, t_end};
  std::vector<GridPoint> grid;
  const auto n_steps = static_cast<long long>(std::ceil(t_end / dt - 1e-9));
  grid.reserve(static_cast<size_t>(n_steps) + outputs.size() + 2);
  for (long long k = 0; k <= n_steps; ++k)
    grid.push_back({std::min(static_cast<double>(k) * dt, t_end), false});
  grid.push_back({t_end, false});
  for (double t : outputs) {
    if (t < 0.0 || t > t_end + 1e-12)
      throw ConfigError("output time outside [0, t_end]");
    grid.push_back({std::min(t, t_end), true});
  }
  std::sort(grid.begin(), grid.end(),
            [](const GridPoint& a, const GridPoint& b) { return a.t < b.t; });
  std::vector<GridPoint> merged;
  const double eps = 1e-12 * std::max(1.0, t_end);
  for (const GridPoint& g : grid) {
    if (!merged.empty() && g.t - merged.back().t <= eps)
      merged.back().output = merged.back().output || g.output;
    else
      merged.push_back(g);
  }
  return merged;
}

struct DiagContext {
  const FiniteMdp& mdp;
  const FeatureMap& features;
  double gamma_const;
  double c_inf;
  double v_star_rho;
};

DiagContext make_context(const FiniteMdp& mdp, const FeatureMap& features) {
  const GramData gram = gram_data(mdp, features);
  const OptimalSolution opt = solve_optimal(mdp);
  double v_star_rho = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    v_star_rho += mdp.rho(s) * opt.v_star(s);
  return DiagContext{mdp, features, gram.gamma_const,
                     mdp.cost.cwiseAbs().maxCoeff(), v_star_rho};
}

SnapshotDiagnostics diagnostics(const VectorXd& theta, const Policy& pi,
                                const DiagContext& ctx) {
  const FiniteMdp& mdp = ctx.mdp;
  SnapshotDiagnostics d;
  d.theta_norm = theta.norm();
  d.k_t = kl_to_reference(pi, mdp.mu).maxCoeff();
  const ValueFunctions vf = evaluate_policy(pi, mdp);
  d.v_rho = mdp.rho.dot(vf.v);
  d.gap = d.v_rho - ctx.v_star_rho;
  d.theta_err = (theta - best_parameters(pi, mdp, ctx.features).theta_pi).norm();
  d.msbe = msbe(theta, pi, mdp, ctx.features);
  d.drift_lhs = -semi_gradient(theta, pi, mdp, ctx.features).dot(theta);
  const double g2 = ctx.gamma_const;
  d.drift_rhs = -0.5 * g2 * theta.squaredNorm() +
                mdp.tau * mdp.tau * mdp.gamma * mdp.gamma * d.k_t * d.k_t / g2 +
                ctx.c_inf * ctx.c_inf / g2;
  return d;
}

void guard_state(double t, const VectorXd& theta, const Policy& pi,
                 const FiniteMdp& mdp, double theta_guard, double kl_guard) {
  if (!theta.allFinite() || !pi.log_density.allFinite())
    throw StepSizeTooLarge("non-finite state at t = " + std::to_string(t));
  const double tn = theta.norm();
  if (tn > theta_guard)
    throw BlowupDetected("|theta| = " + std::to_string(tn) + " at t = " +
                         std::to_string(t));
  const double k = kl_to_reference(pi, mdp.mu).maxCoeff();
  if (k > kl_guard)
    throw BlowupDetected("K_t = " + std::to_string(k) + " at t = " +
                         std::to_string(t));
}

}  // namespace

std::pair<VectorXd, MatrixXd> flow_rhs(const FlowState& state,
                                       const FiniteMdp& mdp,
                                       const FeatureMap& features,
                                       const TimescaleSchedule& schedule) {
  VectorXd dtheta = -schedule.eta(state.t) *
                    semi_gradient(state.theta, state.policy, mdp, features);
  MatrixXd dl = fisher_rao_rhs(state.theta, state.policy, mdp, features);
  return {std::move(dtheta), std::move(dl)};
}

Trajectory integrate(const FlowState& initial, const FiniteMdp& mdp,
                     const FeatureMap& features,
                     const TimescaleSchedule& schedule,
                     const FlowOptions& options) {
  const DiagContext ctx = make_context(mdp, features);
  const std::vector<GridPoint> grid =
      build_grid(options.t_end, options.dt, options.output_times);

  VectorXd theta = initial.theta;
  MatrixXd u = initial.policy.log_density;  // gauge representative of l

  // du/dt = -(Q_theta + tau*u); dtheta/dt = -eta(t) g(theta, policy(u)).
  auto rhs = [&](double t, const VectorXd& th, const MatrixXd& uu,
                 VectorXd& dth, MatrixXd& du) {
    const Policy pi = policy_from_logits(uu, mdp.mu);
    dth = -schedule.eta(t) * semi_gradient(th, pi, mdp, features);
    du = -(q_of_theta(th, features, mdp.n_states, mdp.n_actions) +
           mdp.tau * uu);
  };

  Trajectory traj;
  traj.snapshots.reserve(options.output_times.size() + 2);
  for (size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k].t;
    if (k > 0) {
      const double h = t - grid[k - 1].t;
      const double t0 = grid[k - 1].t;
      if (options.method == Integrator::Rk4) {
        VectorXd k1t, k2t, k3t, k4t;
        MatrixXd k1u, k2u, k3u, k4u;
        rhs(t0, theta, u, k1t, k1u);
        rhs(t0 + 0.5 * h, theta + 0.5 * h * k1t, u + 0.5 * h * k1u, k2t, k2u);
        rhs(t0 + 0.5 * h, theta + 0.5 * h * k2t, u + 0.5 * h * k2u, k3t, k3u);
        rhs(t0 + h, theta + h * k3t, u + h * k3u, k4t, k4u);
        theta += (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        u += (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
      } else {
        // Exact decay of the stiff -tau*u part, explicit Euler in theta.
        const Policy pi = policy_from_logits(u, mdp.mu);
        const VectorXd g = semi_gradient(theta, pi, mdp, features);
        const MatrixXd q =
            q_of_theta(theta, features, mdp.n_states, mdp.n_actions);
        const double decay = std::exp(-mdp.tau * h);
        u = decay * u - q * ((1.0 - decay) / mdp.tau);
        theta -= h * schedule.eta(t0) * g;
      }
      if (!theta.allFinite() || !u.allFinite())
        throw StepSizeTooLarge("non-finite state after step to t = " +
                               std::to_string(t));
    }
    const Policy pi = policy_from_logits(u, mdp.mu);
    guard_state(t, theta, pi, mdp, options.theta_guard, options.kl_guard);
    if (grid[k].output) {
      Snapshot snap;
      snap.t = t;
      snap.theta = theta;
      snap.log_density = pi.log_density;
      snap.diag = diagnostics(theta, pi, ctx);
      traj.snapshots.push_back(std::move(snap));
    }
  }
  return traj;
}

Trajectory run_two_timescale(const VectorXd& theta0, const Policy& pi0,
                             const FiniteMdp& mdp, const FeatureMap& features,
                             const TimescaleSchedule& schedule,
                             const TwoTimescaleOptions& options) {
  const DiagContext ctx = make_context(mdp, features);
  const std::vector<GridPoint> grid =
      build_grid(options.t_end, options.dt, options.output_times);

  VectorXd theta = theta0;
  Policy pi = pi0;

  Trajectory traj;
  traj.snapshots.reserve(options.output_times.size() + 2);
  for (size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k].t;
    if (k > 0) {
      // lambda_n is the wall-clock step; h_n = eta(t_n) * lambda_n keeps the
      // critic on the fast clock.
      const double lambda = t - grid[k - 1].t;
      const double h = schedule.eta(grid[k - 1].t) * lambda;
      const VectorXd g = semi_gradient(theta, pi, mdp, features);
      const VectorXd theta_next = theta - h * g;
      const AdvantageTable adv = approx_advantage(
          options.policy_uses_updated_critic ? theta_next : theta, pi, mdp,
          features);
      pi = mirror_descent_step(pi, adv, lambda, mdp.mu);
      theta = theta_next;
      if (!theta.allFinite())
        throw StepSizeTooLarge("non-finite parameters after step to t = " +
                               std::to_string(t));
    }
    guard_state(t, theta, pi, mdp, options.theta_guard, options.kl_guard);
    if (grid[k].output) {
      Snapshot snap;
      snap.t = t;
      snap.theta = theta;
      snap.log_density = pi.log_density;
      snap.diag = diagnostics(theta, pi, ctx);
      traj.snapshots.push_back(std::move(snap));
    }
  }
  return traj;
}

}  // namespace acflow
