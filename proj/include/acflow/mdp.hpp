#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "acflow/types.hpp"

namespace acflow {

// Finite entropy-regularised MDP. The transition tensor is stored flat:
// row s*n_actions+a of `transition` is P(.|s,a) over next states.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  MatrixXd transition;  // (S*A) x S, rows stochastic
  MatrixXd cost;        // S x A
  double gamma = 0.0;
  double tau = 0.0;
  VectorXd mu;    // A, full support
  MatrixXd beta;  // S x A, full support, sums to 1
  VectorXd rho;   // S, state marginal of beta

  int sa(int s, int a) const { return s * n_actions + a; }
};

// Per-(s,a) feature rows, |phi(s,a)|_2 <= 1 after construction. If any raw
// row exceeds unit norm the whole map is divided by the largest row norm and
// that factor is kept in `scale`.
struct FeatureMap {
  int dim = 0;
  MatrixXd phi;  // (S*A) x N
  double scale = 1.0;
};

// Policy as explicit log-density l(s,a) = ln(dpi/dmu), normalised so that
// sum_a exp(l(s,a)) mu(a) = 1 per state.
struct Policy {
  MatrixXd log_density;  // S x A

  // Density table pi(a|s); rows sum to 1.
  MatrixXd density(const VectorXd& mu) const;
};

struct LinearMdpSpec {
  VectorXd w;    // N cost weights
  MatrixXd psi;  // N x S, row i is the measure psi_i
};

enum class MdpStructure { TabularOnehot, LinearMdp, DenseRandom };

struct SampledMdp {
  FiniteMdp mdp;
  FeatureMap features;
  std::optional<LinearMdpSpec> linear;
};

// Validates all invariants (tolerance 1e-12), then renormalises probability
// rows exactly so downstream solves see exactly stochastic matrices.
FiniteMdp build_mdp(const MatrixXd& transition, const MatrixXd& cost,
                    double gamma, double tau, const VectorXd& mu,
                    const MatrixXd& beta);

// Feature map from raw rows; rescales to satisfy the unit-norm bound and
// fails with SingularGram if the Gram matrix under beta is singular.
FeatureMap build_features(const MatrixXd& phi, const FiniteMdp& mdp);

// l(s,a) = f(s,a) - logsumexp_a(f(s,.) + ln mu). Log-domain, max-subtracted.
Policy policy_from_logits(const MatrixXd& f, const VectorXd& mu);

Policy uniform_policy(int n_states, int n_actions);

// Per-state KL(pi(.|s)|mu) = sum_a l(s,a) pi(a|s).
VectorXd kl_to_reference(const Policy& pi, const VectorXd& mu);

SampledMdp sample_random_mdp(std::uint64_t seed, int n_states, int n_actions,
                             double gamma, double tau, MdpStructure structure,
                             int n_features = 0);

MdpStructure parse_structure(const std::string& name);

}  // namespace acflow
