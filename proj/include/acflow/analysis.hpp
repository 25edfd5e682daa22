#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acflow/flow.hpp"

namespace acflow {

// Closed-form constants of the stability and convergence statements,
// computed once per run from (mdp, features, theta0, pi0, schedule).
struct BoundConstants {
  double gamma_const = 0.0;  // Gamma = lambda_beta (1-gamma)(1-sqrt(gamma))
  double lambda_beta = 0.0;
  double c_inf = 0.0;        // |c|_inf
  double c1 = 1.0;           // max(1, |l_0|_inf)
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  bool small_gamma_flag = false;    // 64 gamma^2 / (Gamma^2 - Gamma tau/eta0) < 1
  bool eta0_admissible = false;     // eta0 > tau/Gamma (stability)
  bool eta0_admissible_conv = false;  // eta0 > 1/Gamma (convergence)

  // Inputs the formulas were evaluated at.
  double gamma = 0.0;
  double tau = 0.0;
  double eta0 = 0.0;
  double theta0_norm = 0.0;

  // Derived explicit values for the existential constants; recorded for
  // diagnostics, meaningful only when their gates hold.
  double k_sq_bound = 0.0;   // a1 tau/(tau - a2), small-gamma regime
  double theta_bound = 0.0;  // uniform R, small-gamma regime
  std::optional<double> alpha;  // d(eta)/dt <= alpha eta when it exists
  double r1 = 0.0, r2 = 0.0;    // |theta_t| <= r1 e^{r2 t} when alpha exists
  double b1 = 0.0, b2 = 0.0;    // weighted critic-error inequality (tau < 1)
};

// Throws InadmissibleEta when eta0 <= tau/Gamma. The lenient variant keeps
// going with the admissibility flags recording which hypotheses failed.
BoundConstants compute_constants(const FiniteMdp& mdp,
                                 const FeatureMap& features,
                                 const VectorXd& theta0, const Policy& pi0,
                                 const TimescaleSchedule& schedule);
BoundConstants compute_constants_lenient(const FiniteMdp& mdp,
                                         const FeatureMap& features,
                                         const VectorXd& theta0,
                                         const Policy& pi0,
                                         const TimescaleSchedule& schedule);

enum class CheckStatus { Pass, Fail, NotApplicable, Report };
std::string to_string(CheckStatus status);

struct CertificateEntry {
  std::string name;
  CheckStatus status = CheckStatus::NotApplicable;
  double margin = 0.0;   // min over time of rhs-lhs (sign convention: >=0 pass)
  double t_worst = 0.0;  // snapshot time of the worst margin
  std::string note;
};

struct CertificateReport {
  std::vector<CertificateEntry> entries;

  bool any_failed() const;
  const CertificateEntry* find(const std::string& name) const;
};

// Individual inequality checks; each produces one or more entries.

// (1/(2 eta_t)) d|theta|^2/dt <= -(Gamma/2)|theta|^2
//   + tau^2 gamma^2 K_t^2 / Gamma + |c|^2 / Gamma, with the left side
// evaluated analytically as -<g(theta,pi), theta>.
CertificateEntry check_lyapunov_drift(const Trajectory& trajectory,
                                      const BoundConstants& constants);

// Integral inequality K_t^2 <= a1 + a2 conv(K^2) and the envelope
// K_t^2 <= a1 e^{a2 t} (checked in log form). Gated on eta0 > tau/Gamma.
std::vector<CertificateEntry> check_gronwall_kl(const Trajectory& trajectory,
                                                const BoundConstants& constants);

// sup K_t^2 <= a1 tau/(tau-a2) and |theta_t| <= R; gated on the
// small-gamma flag, otherwise not-applicable.
std::vector<CertificateEntry> check_uniform_bounds(
    const Trajectory& trajectory, const BoundConstants& constants);

// |theta_t| <= r1 e^{r2 t}; gated on the existence of the eta growth rate.
CertificateEntry check_theta_growth(const Trajectory& trajectory,
                                    const BoundConstants& constants);

// Per-snapshot norm bounds along the flow:
//   sup_s |d(pi)/dt(.|s)|_1 <= |A_t|_inf,
//   |A_t|_inf <= 2|Q_theta|_inf + 2 tau |l_t|_inf,
//   (1-gamma)|Q^{pi_t}|_inf <= |c|_inf + tau gamma K_t,
//   |l_t|_inf <= C1 + (2/tau) sup_{r<=t}|theta_r| + sup_{r<=t} K_r.
std::vector<CertificateEntry> check_bounds_along_flow(
    const Trajectory& trajectory, const BoundConstants& constants,
    const FiniteMdp& mdp, const FeatureMap& features);

// dQ^pi/dt for a given policy-tangent direction (rows of dpi_dt sum to 0).
MatrixXd dq_dt_oracle(const Policy& pi, const MatrixXd& dpi_dt,
                      const FiniteMdp& mdp);

VectorXd dtheta_pi_dt(const Policy& pi, const MatrixXd& dpi_dt,
                      const FiniteMdp& mdp, const FeatureMap& features);

// Convergence certificates:
//  (i)  running-min gap vs the weighted KL + critic-error envelope,
//  (ii) exponential-schedule envelope built from derived constants
//       (gated on k1 > tau/2 + alpha2, which the derived constants may
//        leave unsatisfiable; reported not-applicable then),
//  (iii) tail log-log slope of the running-min gap for polynomial
//        schedules in the small-gamma regime (report-only), plus the
//        1/eta_t upper envelope.
std::vector<CertificateEntry> check_convergence_envelopes(
    const Trajectory& trajectory, const BoundConstants& constants,
    const FiniteMdp& mdp, const FeatureMap& features,
    const TimescaleSchedule& schedule, double t_min = 0.1);

// Least-squares fit of ln(y) = c - rate * t over the window [t_lo, t_hi];
// returns the decay rate. Skips non-positive samples.
double fit_exponential_rate(const std::vector<double>& t,
                            const std::vector<double>& y, double t_lo,
                            double t_hi);

// Least-squares fit of ln(y) vs ln(t) over [t_lo, t_hi]; returns the slope.
double fit_loglog_slope(const std::vector<double>& t,
                        const std::vector<double>& y, double t_lo,
                        double t_hi);

// Exponentially weighted trapezoid: I(t_k) with
// I(t) = int_0^t exp(-c (t-r)) f(r) dr on the given grid.
std::vector<double> exp_weighted_convolution(const std::vector<double>& t,
                                             const std::vector<double>& f,
                                             double c);

}  // namespace acflow
