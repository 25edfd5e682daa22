#include "acflow/mdp.hpp"

#include <cmath>
#include <random>

#include "acflow/kernels.hpp"

namespace acflow {

namespace {

constexpr double kProbTol = 1e-12;

void validate_probability_row(MatrixXd& m, int row, const std::string& what) {
  double sum = 0.0;
  for (int i = 0; i < m.cols(); ++i) {
    if (m(row, i) < -kProbTol)
      throw NonStochasticRow(what + ": negative entry at index " +
                             std::to_string(i));
    if (m(row, i) < 0.0) m(row, i) = 0.0;
    sum += m(row, i);
  }
  if (std::abs(sum - 1.0) > kProbTol)
    throw NonStochasticRow(what + ": row sums to " + std::to_string(sum));
  m.row(row) /= sum;  // exact renormalisation for downstream solves
}

MatrixXd dirichlet_rows(std::mt19937_64& rng, int rows, int cols) {
  std::gamma_distribution<double> g(1.0, 1.0);
  MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      double v = std::max(g(rng), 1e-300);
      out(r, c) = v;
      sum += v;
    }
    out.row(r) /= sum;
  }
  return out;
}

}  // namespace

MatrixXd Policy::density(const VectorXd& mu) const {
  const int S = static_cast<int>(log_density.rows());
  const int A = static_cast<int>(log_density.cols());
  MatrixXd out(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      out(s, a) = std::exp(log_density(s, a)) * mu(a);
  return out;
}

FiniteMdp build_mdp(const MatrixXd& transition, const MatrixXd& cost,
                    double gamma, double tau, const VectorXd& mu,
                    const MatrixXd& beta) {
  const int S = static_cast<int>(cost.rows());
  const int A = static_cast<int>(cost.cols());
  if (S < 1 || A < 1) throw Error("cost matrix must be non-empty");
  if (transition.rows() != S * A || transition.cols() != S)
    throw Error("transition must be (n_states*n_actions) x n_states");
  if (mu.size() != A) throw Error("mu must have one entry per action");
  if (beta.rows() != S || beta.cols() != A)
    throw Error("beta must be n_states x n_actions");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw BadDiscount("gamma must lie in (0,1), got " + std::to_string(gamma));
  if (!(tau > 0.0))
    throw BadDiscount("tau must be positive, got " + std::to_string(tau));

  FiniteMdp mdp;
  mdp.n_states = S;
  mdp.n_actions = A;
  mdp.transition = transition;
  mdp.cost = cost;
  mdp.gamma = gamma;
  mdp.tau = tau;
  mdp.mu = mu;
  mdp.beta = beta;

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      validate_probability_row(mdp.transition, mdp.sa(s, a),
                               "P[" + std::to_string(s) + "][" +
                                   std::to_string(a) + "]");

  double mu_sum = mdp.mu.sum();
  if (std::abs(mu_sum - 1.0) > kProbTol)
    throw Error("mu sums to " + std::to_string(mu_sum));
  for (int a = 0; a < A; ++a)
    if (!(mdp.mu(a) > 0.0))
      throw Error("mu[" + std::to_string(a) + "] must be positive");
  mdp.mu /= mu_sum;

  double beta_sum = mdp.beta.sum();
  if (std::abs(beta_sum - 1.0) > kProbTol)
    throw NonFullSupportBeta("beta sums to " + std::to_string(beta_sum));
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      if (!(mdp.beta(s, a) > 0.0))
        throw NonFullSupportBeta("beta[" + std::to_string(s) + "][" +
                                 std::to_string(a) + "] must be positive");
  mdp.beta /= beta_sum;

  mdp.rho = mdp.beta.rowwise().sum();
  return mdp;
}

FeatureMap build_features(const MatrixXd& phi, const FiniteMdp& mdp) {
  if (phi.rows() != mdp.n_states * mdp.n_actions)
    throw Error("feature map must have one row per (state,action)");
  FeatureMap features;
  features.dim = static_cast<int>(phi.cols());
  features.phi = phi;
  double max_norm = 0.0;
  for (int i = 0; i < phi.rows(); ++i)
    max_norm = std::max(max_norm, phi.row(i).norm());
  if (max_norm > 1.0 + kProbTol) {
    features.scale = max_norm;
    features.phi /= max_norm;
  }
  VectorXd weights(phi.rows());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      weights(mdp.sa(s, a)) = mdp.beta(s, a);
  MatrixXd gram = kernels::weighted_gram(features.phi, weights);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  if (es.eigenvalues().minCoeff() <= 1e-12)
    throw SingularGram("Gram matrix under beta has smallest eigenvalue " +
                       std::to_string(es.eigenvalues().minCoeff()));
  return features;
}

Policy policy_from_logits(const MatrixXd& f, const VectorXd& mu) {
  const int S = static_cast<int>(f.rows());
  const int A = static_cast<int>(f.cols());
  if (mu.size() != A) throw Error("logits/mu dimension mismatch");
  if (!f.allFinite()) throw NonFiniteLogit("logits contain non-finite values");
  Policy pi;
  pi.log_density.resize(S, A);
  for (int s = 0; s < S; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
      m = std::max(m, f(s, a) + std::log(mu(a)));
    double acc = 0.0;
    for (int a = 0; a < A; ++a)
      acc += std::exp(f(s, a) + std::log(mu(a)) - m);
    const double lse = m + std::log(acc);
    for (int a = 0; a < A; ++a) pi.log_density(s, a) = f(s, a) - lse;
  }
  return pi;
}

Policy uniform_policy(int n_states, int n_actions) {
  Policy pi;
  pi.log_density = MatrixXd::Zero(n_states, n_actions);
  return pi;
}

VectorXd kl_to_reference(const Policy& pi, const VectorXd& mu) {
  const int S = static_cast<int>(pi.log_density.rows());
  const int A = static_cast<int>(pi.log_density.cols());
  VectorXd kl(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a)
      acc += std::exp(pi.log_density(s, a)) * mu(a) * pi.log_density(s, a);
    kl(s) = acc;
  }
  return kl;
}

MdpStructure parse_structure(const std::string& name) {
  if (name == "tabular-onehot") return MdpStructure::TabularOnehot;
  if (name == "linear-mdp") return MdpStructure::LinearMdp;
  if (name == "dense-random") return MdpStructure::DenseRandom;
  throw ConfigError("unknown mdp structure '" + name + "'");
}

SampledMdp sample_random_mdp(std::uint64_t seed, int n_states, int n_actions,
                             double gamma, double tau, MdpStructure structure,
                             int n_features) {
  if (n_states < 1 || n_actions < 1)
    throw Error("sample_random_mdp needs positive sizes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int S = n_states, A = n_actions, SA = S * A;
  VectorXd mu = VectorXd::Constant(A, 1.0 / A);
  MatrixXd beta = MatrixXd::Constant(S, A, 1.0 / SA);

  SampledMdp out;
  switch (structure) {
    case MdpStructure::TabularOnehot: {
      MatrixXd P = dirichlet_rows(rng, SA, S);
      MatrixXd cost(S, A);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) cost(s, a) = unit(rng);
      out.mdp = build_mdp(P, cost, gamma, tau, mu, beta);
      out.features = build_features(MatrixXd::Identity(SA, SA), out.mdp);
      break;
    }
    case MdpStructure::LinearMdp: {
      const int N = n_features > 0 ? n_features : std::min(SA, S + 1);
      constexpr int kMaxRetries = 64;
      for (int attempt = 0;; ++attempt) {
        if (attempt >= kMaxRetries)
          throw InfeasibleSpec("linear-mdp sampling failed after " +
                               std::to_string(kMaxRetries) + " attempts");
        MatrixXd phi = dirichlet_rows(rng, SA, N);
        MatrixXd psi = dirichlet_rows(rng, N, S);
        MatrixXd P = phi * psi;  // stochastic: convex mixture of psi rows
        VectorXd w(N);
        for (int i = 0; i < N; ++i) w(i) = 2.0 * unit(rng) - 1.0;
        MatrixXd cost_flat = phi * w;
        MatrixXd cost(S, A);
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) cost(s, a) = cost_flat(s * A + a, 0);
        FiniteMdp mdp;
        try {
          mdp = build_mdp(P, cost, gamma, tau, mu, beta);
          out.features = build_features(phi, mdp);
        } catch (const SingularGram&) {
          continue;
        }
        out.mdp = std::move(mdp);
        out.linear = LinearMdpSpec{w, psi};
        break;
      }
      break;
    }
    case MdpStructure::DenseRandom: {
      const int N = n_features > 0 ? n_features : SA;
      MatrixXd P = dirichlet_rows(rng, SA, S);
      MatrixXd cost(S, A);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) cost(s, a) = unit(rng);
      out.mdp = build_mdp(P, cost, gamma, tau, mu, beta);
      MatrixXd phi(SA, N);
      for (int i = 0; i < SA; ++i)
        for (int j = 0; j < N; ++j) phi(i, j) = normal(rng);
      out.features = build_features(phi, out.mdp);
      break;
    }
  }
  return out;
}

}  // namespace acflow
