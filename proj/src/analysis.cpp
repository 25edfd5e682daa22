#include "acflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "acflow/dp.hpp"
#include "acflow/kernels.hpp"
#include "acflow/occupancy.hpp"

namespace acflow {

namespace {

constexpr double kSlackScale = 1e-8;

VectorXd flatten(const MatrixXd& table) {
  const int s_n = static_cast<int>(table.rows());
  const int a_n = static_cast<int>(table.cols());
  VectorXd out(s_n * a_n);
  for (int s = 0; s < s_n; ++s)
    for (int a = 0; a < a_n; ++a) out(s * a_n + a) = table(s, a);
  return out;
}

std::string format_short(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

CertificateEntry not_applicable(const std::string& name,
                                const std::string& note) {
  CertificateEntry e;
  e.name = name;
  e.status = CheckStatus::NotApplicable;
  e.note = note;
  return e;
}

// Two-sided check lhs <= rhs per snapshot; margin is the worst rhs-lhs.
CertificateEntry two_sided(const std::string& name,
                           const std::vector<double>& t,
                           const std::vector<double>& lhs,
                           const std::vector<double>& rhs,
                           const std::string& note = "") {
  if (t.empty()) return not_applicable(name, "no snapshots in check window");
  CertificateEntry e;
  e.name = name;
  e.note = note;
  bool ok = true;
  double worst = std::numeric_limits<double>::infinity();
  double t_worst = t.front();
  for (size_t i = 0; i < t.size(); ++i) {
    const double slack = rhs[i] - lhs[i];
    if (slack < worst) {
      worst = slack;
      t_worst = t[i];
    }
    if (slack < -kSlackScale * (1.0 + std::abs(rhs[i]))) ok = false;
  }
  e.margin = worst;
  e.t_worst = t_worst;
  e.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return e;
}

CertificateEntry report_value(const std::string& name, double value,
                              double t_mark, const std::string& note) {
  CertificateEntry e;
  e.name = name;
  e.status = CheckStatus::Report;
  e.margin = value;
  e.t_worst = t_mark;
  e.note = note;
  return e;
}

}  // namespace

std::string to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::NotApplicable:
      return "not-applicable";
    case CheckStatus::Report:
      return "report";
  }
  return "unknown";
}

bool CertificateReport::any_failed() const {
  for (const CertificateEntry& e : entries)
    if (e.status == CheckStatus::Fail) return true;
  return false;
}

const CertificateEntry* CertificateReport::find(const std::string& name) const {
  for (const CertificateEntry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

BoundConstants compute_constants_lenient(const FiniteMdp& mdp,
                                         const FeatureMap& features,
                                         const VectorXd& theta0,
                                         const Policy& pi0,
                                         const TimescaleSchedule& schedule) {
  const GramData gram = gram_data(mdp, features);
  BoundConstants c;
  c.gamma_const = gram.gamma_const;
  c.lambda_beta = gram.lambda_beta;
  c.c_inf = mdp.cost.cwiseAbs().maxCoeff();
  c.c1 = std::max(1.0, pi0.log_density.cwiseAbs().maxCoeff());
  c.gamma = mdp.gamma;
  c.tau = mdp.tau;
  c.eta0 = schedule.eta(0.0);
  c.theta0_norm = theta0.norm();
  c.alpha = schedule.growth_alpha();

  const double g2 = c.gamma_const;
  c.eta0_admissible = c.eta0 > c.tau / g2;
  c.eta0_admissible_conv = c.eta0 > 1.0 / g2;

  if (c.eta0_admissible) {
    const double denom = 1.0 - c.tau / (g2 * c.eta0);
    c.sigma1 = c.theta0_norm * c.theta0_norm / (g2 * c.eta0 * denom) +
               2.0 * c.c_inf * c.c_inf / (g2 * g2 * c.tau * denom);
    c.sigma2 = 2.0 * c.tau * c.tau * c.gamma * c.gamma / (g2 * g2 * denom);
    c.a1 = 8.0 * c.c1 * c.c1 + 32.0 * c.sigma1 / c.tau;
    c.a2 = 32.0 * c.sigma2 / c.tau;
    c.small_gamma_flag =
        64.0 * c.gamma * c.gamma / (g2 * g2 - g2 * c.tau / c.eta0) < 1.0;
    if (c.small_gamma_flag) {
      c.k_sq_bound = c.a1 * c.tau / (c.tau - c.a2);
      const double b_drift =
          c.tau * c.tau * c.gamma * c.gamma * c.k_sq_bound + c.c_inf * c.c_inf;
      c.theta_bound = std::sqrt(std::max(c.theta0_norm * c.theta0_norm,
                                         2.0 * b_drift / (g2 * g2)));
    }
    if (c.alpha) {
      const double rate = *c.alpha + c.a2;
      c.r2 = 0.5 * rate;
      c.r1 = std::sqrt(c.theta0_norm * c.theta0_norm +
                       2.0 * c.eta0 *
                           (c.tau * c.tau * c.gamma * c.gamma * c.a1 +
                            c.c_inf * c.c_inf) /
                           (g2 * rate));
    }
  }

  // Weighted critic-error inequality constants; denominators positive
  // whenever eta0 > tau/(2 Gamma), recorded regardless of the tau < 1 gate.
  if (c.eta0 > c.tau / (2.0 * g2)) {
    const double denom = 1.0 - c.tau / (2.0 * g2 * c.eta0);
    const BestParameters bp = best_parameters(pi0, mdp, features);
    const double err0 = (theta0 - bp.theta_pi).squaredNorm();
    c.b1 = err0 / (g2 * c.eta0 * denom);
    c.b2 = 1.0 / (g2 * denom);
  }
  return c;
}

BoundConstants compute_constants(const FiniteMdp& mdp,
                                 const FeatureMap& features,
                                 const VectorXd& theta0, const Policy& pi0,
                                 const TimescaleSchedule& schedule) {
  BoundConstants c =
      compute_constants_lenient(mdp, features, theta0, pi0, schedule);
  if (!c.eta0_admissible)
    throw InadmissibleEta("eta0 = " + std::to_string(c.eta0) +
                          " <= tau/Gamma = " +
                          std::to_string(c.tau / c.gamma_const));
  return c;
}

std::vector<double> exp_weighted_convolution(const std::vector<double>& t,
                                             const std::vector<double>& f,
                                             double c) {
  std::vector<double> out(t.size(), 0.0);
  for (size_t k = 1; k < t.size(); ++k) {
    const double dt = t[k] - t[k - 1];
    if (dt <= 0.0) {
      out[k] = out[k - 1];
      continue;
    }
    const double x = c * dt;
    double w0, w1;
    if (x < 1e-4) {
      // series for x - 1 + e^{-x} and 1 - e^{-x} to avoid cancellation
      w1 = dt * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0);
      w0 = dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0) - w1;
    } else {
      const double em = std::exp(-x);
      w1 = (x - (1.0 - em)) / (c * c * dt);
      w0 = (1.0 - em) / c - w1;
    }
    out[k] = std::exp(-x) * out[k - 1] + w0 * f[k - 1] + w1 * f[k];
  }
  return out;
}

CertificateEntry check_lyapunov_drift(const Trajectory& trajectory,
                                      const BoundConstants& constants) {
  (void)constants;  // both sides already carried by the snapshots
  std::vector<double> t, lhs, rhs;
  for (const Snapshot& s : trajectory.snapshots) {
    t.push_back(s.t);
    lhs.push_back(s.diag.drift_lhs);
    rhs.push_back(s.diag.drift_rhs);
  }
  return two_sided("lyapunov-drift", t, lhs, rhs,
                   "-<g,theta> vs quadratic drift bound");
}

std::vector<CertificateEntry> check_gronwall_kl(
    const Trajectory& trajectory, const BoundConstants& constants) {
  std::vector<CertificateEntry> out;
  if (!constants.eta0_admissible) {
    const std::string note = "requires eta0 > tau/Gamma";
    out.push_back(not_applicable("gronwall-integral", note));
    out.push_back(not_applicable("gronwall-envelope", note));
    return out;
  }
  std::vector<double> t, ksq;
  for (const Snapshot& s : trajectory.snapshots) {
    t.push_back(s.t);
    ksq.push_back(s.diag.k_t * s.diag.k_t);
  }
  const std::vector<double> conv =
      exp_weighted_convolution(t, ksq, constants.tau);
  std::vector<double> rhs(t.size());
  for (size_t i = 0; i < t.size(); ++i)
    rhs[i] = constants.a1 + constants.a2 * conv[i];
  out.push_back(two_sided("gronwall-integral", t, ksq, rhs,
                          "K_t^2 vs a1 + a2 * weighted integral"));

  // Envelope a1 e^{a2 t} overflows for moderate a2*t; compare logs instead.
  std::vector<double> lhs_log, rhs_log, t_log;
  for (size_t i = 0; i < t.size(); ++i) {
    t_log.push_back(t[i]);
    lhs_log.push_back(ksq[i] > 0.0 ? std::log(ksq[i])
                                   : -std::numeric_limits<double>::infinity());
    rhs_log.push_back(std::log(constants.a1) + constants.a2 * t[i]);
  }
  out.push_back(two_sided("gronwall-envelope", t_log, lhs_log, rhs_log,
                          "log K_t^2 vs log a1 + a2 t"));
  return out;
}

std::vector<CertificateEntry> check_uniform_bounds(
    const Trajectory& trajectory, const BoundConstants& constants) {
  std::vector<CertificateEntry> out;
  if (!constants.small_gamma_flag) {
    const std::string note = "requires 64 gamma^2/(Gamma^2 - Gamma tau/eta0) < 1";
    out.push_back(not_applicable("uniform-kl", note));
    out.push_back(not_applicable("uniform-theta", note));
    return out;
  }
  if (!(constants.a2 < constants.tau))
    throw Error("constants inconsistency: small-gamma flag set but a2 >= tau");
  std::vector<double> t, ksq, theta, kb, tb;
  for (const Snapshot& s : trajectory.snapshots) {
    t.push_back(s.t);
    ksq.push_back(s.diag.k_t * s.diag.k_t);
    theta.push_back(s.diag.theta_norm);
    kb.push_back(constants.k_sq_bound);
    tb.push_back(constants.theta_bound);
  }
  out.push_back(two_sided("uniform-kl", t, ksq, kb,
                          "K_t^2 vs a1 tau/(tau - a2)"));
  out.push_back(two_sided("uniform-theta", t, theta, tb,
                          "|theta_t| vs uniform radius R"));
  return out;
}

CertificateEntry check_theta_growth(const Trajectory& trajectory,
                                    const BoundConstants& constants) {
  if (!constants.eta0_admissible)
    return not_applicable("theta-growth", "requires eta0 > tau/Gamma");
  if (!constants.alpha)
    return not_applicable(
        "theta-growth",
        "no finite alpha with d(eta)/dt <= alpha eta for this schedule");
  std::vector<double> t, lhs, rhs;
  for (const Snapshot& s : trajectory.snapshots) {
    t.push_back(s.t);
    lhs.push_back(s.diag.theta_norm > 0.0
                      ? std::log(s.diag.theta_norm)
                      : -std::numeric_limits<double>::infinity());
    rhs.push_back(std::log(constants.r1) + constants.r2 * s.t);
  }
  return two_sided("theta-growth", t, lhs, rhs,
                   "log |theta_t| vs log r1 + r2 t");
}

std::vector<CertificateEntry> check_bounds_along_flow(
    const Trajectory& trajectory, const BoundConstants& constants,
    const FiniteMdp& mdp, const FeatureMap& features) {
  std::vector<double> t;
  std::vector<double> tangent_lhs, tangent_rhs;
  std::vector<double> adv_lhs, adv_rhs;
  std::vector<double> qpi_lhs, qpi_rhs;
  std::vector<double> l_lhs, l_rhs;

  double sup_theta = 0.0, sup_k = 0.0;
  for (const Snapshot& snap : trajectory.snapshots) {
    Policy pi;
    pi.log_density = snap.log_density;
    const MatrixXd density = pi.density(mdp.mu);
    const AdvantageTable adv = approx_advantage(snap.theta, pi, mdp, features);
    const double a_inf = adv.a.cwiseAbs().maxCoeff();
    const double q_theta_inf =
        q_of_theta(snap.theta, features, mdp.n_states, mdp.n_actions)
            .cwiseAbs()
            .maxCoeff();
    const double l_inf = snap.log_density.cwiseAbs().maxCoeff();
    const double k_t = snap.diag.k_t;
    sup_theta = std::max(sup_theta, snap.diag.theta_norm);
    sup_k = std::max(sup_k, k_t);

    double tangent = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a)
        acc += density(s, a) * std::abs(adv.a(s, a));
      tangent = std::max(tangent, acc);
    }
    const double q_pi_inf =
        evaluate_policy(pi, mdp).q.cwiseAbs().maxCoeff();

    t.push_back(snap.t);
    tangent_lhs.push_back(tangent);
    tangent_rhs.push_back(a_inf);
    adv_lhs.push_back(a_inf);
    adv_rhs.push_back(2.0 * q_theta_inf + 2.0 * mdp.tau * l_inf);
    qpi_lhs.push_back((1.0 - mdp.gamma) * q_pi_inf);
    qpi_rhs.push_back(constants.c_inf + mdp.tau * mdp.gamma * k_t);
    l_lhs.push_back(l_inf);
    l_rhs.push_back(constants.c1 + (2.0 / mdp.tau) * sup_theta + sup_k);
  }

  std::vector<CertificateEntry> out;
  out.push_back(two_sided("flow-tangent-l1", t, tangent_lhs, tangent_rhs,
                          "sup_s |d(pi)/dt|_1 vs |A_t|_inf"));
  out.push_back(two_sided("advantage-sup", t, adv_lhs, adv_rhs,
                          "|A_t|_inf vs 2|Q_theta|_inf + 2 tau |l_t|_inf"));
  out.push_back(two_sided("q-pi-sup", t, qpi_lhs, qpi_rhs,
                          "(1-gamma)|Q^pi|_inf vs |c|_inf + tau gamma K_t"));
  out.push_back(two_sided("log-density-sup", t, l_lhs, l_rhs,
                          "|l_t|_inf vs C1 + (2/tau) sup|theta| + sup K"));
  return out;
}

MatrixXd dq_dt_oracle(const Policy& pi, const MatrixXd& dpi_dt,
                      const FiniteMdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions;
  if (dpi_dt.rows() != S || dpi_dt.cols() != A)
    throw Error("dq_dt_oracle: tangent dimension mismatch");
  for (int s = 0; s < S; ++s) {
    const double row_sum = dpi_dt.row(s).sum();
    if (std::abs(row_sum) > 1e-10 * (1.0 + dpi_dt.cwiseAbs().maxCoeff()))
      throw NotTangent("dpi_dt row " + std::to_string(s) + " sums to " +
                       std::to_string(row_sum));
  }
  const AdvantageTable adv = exact_advantage(pi, mdp);
  const OccupancyBundle occ = occupancy_measures(pi, mdp);

  // inner(s') = int A^pi(s'',a'') dpi_dt(da''|s'') d^pi(ds''|s')
  VectorXd inner(S);
  for (int sp = 0; sp < S; ++sp) {
    double acc = 0.0;
    for (int spp = 0; spp < S; ++spp) {
      double act = 0.0;
      for (int app = 0; app < A; ++app)
        act += adv.a(spp, app) * dpi_dt(spp, app);
      acc += occ.d_state(sp, spp) * act;
    }
    inner(sp) = acc;
  }
  MatrixXd out(S, A);
  const double scale = mdp.gamma / (1.0 - mdp.gamma);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double acc = 0.0;
      for (int sp = 0; sp < S; ++sp)
        acc += mdp.transition(mdp.sa(s, a), sp) * inner(sp);
      out(s, a) = scale * acc;
    }
  return out;
}

VectorXd dtheta_pi_dt(const Policy& pi, const MatrixXd& dpi_dt,
                      const FiniteMdp& mdp, const FeatureMap& features) {
  const GramData gram = gram_data(mdp, features);
  const MatrixXd dq = dq_dt_oracle(pi, dpi_dt, mdp);
  const VectorXd rhs = kernels::weighted_feature_sum(
      features.phi, flatten(mdp.beta.cwiseProduct(dq)));
  VectorXd out = Eigen::LDLT<MatrixXd>(gram.sigma_beta).solve(rhs);
  if (!out.allFinite()) throw SingularGram("dtheta_pi_dt solve failed");
  return out;
}

double fit_exponential_rate(const std::vector<double>& t,
                            const std::vector<double>& y, double t_lo,
                            double t_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(y[i] > 0.0)) continue;
    const double x = t[i], z = std::log(y[i]);
    sx += x;
    sy += z;
    sxx += x * x;
    sxy += x * z;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -(n * sxy - sx * sy) / denom;
}

double fit_loglog_slope(const std::vector<double>& t,
                        const std::vector<double>& y, double t_lo,
                        double t_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(t[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double x = std::log(t[i]), z = std::log(y[i]);
    sx += x;
    sy += z;
    sxx += x * x;
    sxy += x * z;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / denom;
}

std::vector<CertificateEntry> check_convergence_envelopes(
    const Trajectory& trajectory, const BoundConstants& constants,
    const FiniteMdp& mdp, const FeatureMap& features,
    const TimescaleSchedule& schedule, double t_min) {
  std::vector<CertificateEntry> out;
  if (trajectory.snapshots.empty()) {
    out.push_back(not_applicable("gap-envelope", "empty trajectory"));
    return out;
  }

  const double tau = mdp.tau;
  const double t_end = trajectory.snapshots.back().t;

  // KL(pi* | pi_0) integrated against the optimal state occupancy.
  const OptimalSolution opt = solve_optimal(mdp);
  const VectorXd d_star = occupancy_measures(opt.pi_star, mdp).d_state_rho;
  const MatrixXd& l0 = trajectory.snapshots.front().log_density;
  const MatrixXd star_density = opt.pi_star.density(mdp.mu);
  double kl0 = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a)
      acc += star_density(s, a) *
             (opt.pi_star.log_density(s, a) - l0(s, a));
    kl0 += d_star(s) * acc;
  }

  std::vector<double> t_all, gap_min_all, err_sq, inv_eta;
  double running = std::numeric_limits<double>::infinity();
  for (const Snapshot& s : trajectory.snapshots) {
    running = std::min(running, s.diag.gap);
    t_all.push_back(s.t);
    gap_min_all.push_back(running);
    err_sq.push_back(s.diag.theta_err * s.diag.theta_err);
    inv_eta.push_back(1.0 / schedule.eta(s.t));
  }
  const std::vector<double> conv_err =
      exp_weighted_convolution(t_all, err_sq, 0.5 * tau);
  const std::vector<double> conv_eta =
      exp_weighted_convolution(t_all, inv_eta, 0.5 * tau);

  auto prefactor = [&](double t) {
    return tau / (2.0 * (1.0 - mdp.gamma) * (1.0 - std::exp(-0.5 * tau * t)));
  };

  // (i) running-min gap vs weighted KL + critic-error envelope.
  {
    std::vector<double> t, lhs, rhs;
    for (size_t i = 0; i < t_all.size(); ++i) {
      if (t_all[i] < t_min) continue;
      t.push_back(t_all[i]);
      lhs.push_back(gap_min_all[i]);
      rhs.push_back(prefactor(t_all[i]) *
                    (std::exp(-0.5 * tau * t_all[i]) * kl0 +
                     conv_err[i] / (2.0 * tau)));
    }
    out.push_back(two_sided("gap-envelope", t, lhs, rhs,
                            "min gap vs KL decay + critic-error integral"));
  }

  // (ii) exponential-schedule envelope with fully derived constants.
  if (schedule.kind != ScheduleKind::Exponential) {
    out.push_back(
        not_applicable("gap-exponential-rate", "exponential schedule only"));
  } else if (!constants.eta0_admissible_conv || !(constants.tau < 1.0)) {
    out.push_back(not_applicable("gap-exponential-rate",
                                 "requires eta0 > 1/Gamma and tau < 1"));
  } else if (!constants.eta0_admissible || !constants.alpha) {
    out.push_back(
        not_applicable("gap-exponential-rate", "requires eta0 > tau/Gamma"));
  } else {
    const double mu_rate = std::max(constants.r2, 0.5 * constants.a2);
    const double alpha2 = 4.0 * mu_rate;
    const double sqrt_a1 = std::sqrt(constants.a1);
    const double l_sum =
        constants.c1 + (2.0 / tau) * constants.r1 + sqrt_a1;
    const double coef_a =
        2.0 * ((constants.c_inf + tau * mdp.gamma * sqrt_a1) /
                   (1.0 - mdp.gamma) +
               tau * l_sum);
    const double coef_b = 2.0 * (constants.r1 + tau * l_sum);
    const double kappa = mdp.gamma /
                         (constants.lambda_beta * (1.0 - mdp.gamma)) *
                         coef_a * coef_b;
    const double alpha1 = kappa * kappa;
    const double needed = 0.5 * tau + alpha2;
    if (!(schedule.k1 > needed)) {
      out.push_back(not_applicable(
          "gap-exponential-rate",
          "requires k1 > tau/2 + alpha2 = " + format_short(needed) +
              " (k1 = " + format_short(schedule.k1) +
              "); derived alpha2 grows with a2 and the gate is vacuous "
              "for these constants"));
    } else {
      const double k2 =
          constants.b1 +
          constants.b2 * alpha1 /
              (constants.eta0 * (schedule.k1 - 0.5 * tau - alpha2));
      std::vector<double> t, lhs, rhs;
      for (size_t i = 0; i < t_all.size(); ++i) {
        if (t_all[i] < t_min) continue;
        t.push_back(t_all[i]);
        lhs.push_back(gap_min_all[i]);
        rhs.push_back(prefactor(t_all[i]) * std::exp(-0.5 * tau * t_all[i]) *
                      (kl0 + k2 / (2.0 * tau)));
      }
      out.push_back(two_sided("gap-exponential-rate", t, lhs, rhs,
                              "min gap vs derived exponential envelope"));
    }
  }

  // Rate fit on exponential schedules: decay of log min-gap past the
  // transient (first 20% of the horizon dropped). Report only.
  if (schedule.kind != ScheduleKind::Exponential) {
    out.push_back(not_applicable("gap-rate-fit", "exponential schedule only"));
  } else {
    const double t_lo = std::max(t_min, 0.2 * t_end);
    const double rate =
        fit_exponential_rate(t_all, gap_min_all, t_lo, t_end);
    if (std::isfinite(rate))
      out.push_back(report_value(
          "gap-rate-fit", rate, t_lo,
          "fitted exp decay rate of min gap on [" + format_short(t_lo) +
              ", " + format_short(t_end) + "]; tau/2 = " +
              format_short(0.5 * tau)));
    else
      out.push_back(not_applicable("gap-rate-fit",
                                   "insufficient positive gap samples"));
  }

  // (iii) polynomial schedules in the small-gamma regime: tail log-log
  // slope (report) and the 1/eta_t weighted envelope.
  if (schedule.kind != ScheduleKind::Polynomial) {
    out.push_back(not_applicable("gap-tail-slope", "polynomial schedule only"));
  } else if (!constants.small_gamma_flag) {
    out.push_back(not_applicable(
        "gap-tail-slope",
        "requires 64 gamma^2/(Gamma^2 - Gamma tau/eta0) < 1"));
  } else {
    const double t_lo = std::max(t_min, 0.2 * t_end);
    const double slope = fit_loglog_slope(t_all, gap_min_all, t_lo, t_end);
    if (std::isfinite(slope))
      out.push_back(report_value(
          "gap-tail-slope", slope, t_lo,
          "log-log slope of min gap on [" + format_short(t_lo) + ", " +
              format_short(t_end) + "]; envelope slope is -p = " +
              format_short(-schedule.p)));
    else
      out.push_back(not_applicable("gap-tail-slope",
                                   "insufficient positive gap samples"));
  }
  if (!constants.small_gamma_flag || !constants.eta0_admissible_conv ||
      !(constants.tau < 1.0)) {
    out.push_back(not_applicable(
        "gap-envelope-eta",
        "requires the small-gamma flag, eta0 > 1/Gamma and tau < 1"));
  } else {
    const double kb = std::sqrt(constants.k_sq_bound);
    const double r_bound = constants.theta_bound;
    const double lb = constants.c1 + (2.0 / tau) * r_bound + kb;
    const double exact_adv_sup =
        2.0 * (constants.c_inf + tau * mdp.gamma * kb) / (1.0 - mdp.gamma) +
        2.0 * tau * lb;
    const double approx_adv_sup = 2.0 * r_bound + 2.0 * tau * lb;
    const double d1_root = mdp.gamma /
                           (constants.lambda_beta * (1.0 - mdp.gamma)) *
                           exact_adv_sup * approx_adv_sup;
    const double d1 = d1_root * d1_root;
    std::vector<double> t, lhs, rhs;
    for (size_t i = 0; i < t_all.size(); ++i) {
      if (t_all[i] < t_min) continue;
      const double decay = std::exp(-0.5 * tau * t_all[i]);
      t.push_back(t_all[i]);
      lhs.push_back(gap_min_all[i]);
      rhs.push_back(prefactor(t_all[i]) *
                    (decay * kl0 +
                     (constants.b1 * decay + constants.b2 * d1 * conv_eta[i]) /
                         (2.0 * tau)));
    }
    out.push_back(two_sided("gap-envelope-eta", t, lhs, rhs,
                            "min gap vs 1/eta_t weighted envelope"));
  }
  return out;
}

}  // namespace acflow
