#include "acflow/kernels.hpp"

namespace acflow::kernels {

namespace {
// Parallel regions pay off only once the element count is past the
// scheduling overhead; the cutoff changes nothing numerically.
constexpr int kParallelCutoff = 256;
}  // namespace

MatrixXd bellman_table_serial(const MatrixXd& transition, const MatrixXd& cost,
                              double gamma, double tau,
                              const MatrixXd& pi_density, const VectorXd& kl,
                              const MatrixXd& f) {
  const int S = static_cast<int>(cost.rows());
  const int A = static_cast<int>(cost.cols());
  VectorXd vf(S);
  for (int sp = 0; sp < S; ++sp) {
    double acc = 0.0;
    for (int ap = 0; ap < A; ++ap) acc += pi_density(sp, ap) * f(sp, ap);
    vf(sp) = acc;
  }
  MatrixXd out(S, A);
  for (int idx = 0; idx < S * A; ++idx) {
    const int s = idx / A, a = idx % A;
    double acc = 0.0;
    for (int sp = 0; sp < S; ++sp)
      acc += transition(idx, sp) * (vf(sp) + tau * kl(sp));
    out(s, a) = cost(s, a) + gamma * acc;
  }
  return out;
}

MatrixXd bellman_table(const MatrixXd& transition, const MatrixXd& cost,
                       double gamma, double tau, const MatrixXd& pi_density,
                       const VectorXd& kl, const MatrixXd& f) {
  const int S = static_cast<int>(cost.rows());
  const int A = static_cast<int>(cost.cols());
  VectorXd vf(S);
#pragma omp parallel for if (S >= kParallelCutoff)
  for (int sp = 0; sp < S; ++sp) {
    double acc = 0.0;
    for (int ap = 0; ap < A; ++ap) acc += pi_density(sp, ap) * f(sp, ap);
    vf(sp) = acc;
  }
  MatrixXd out(S, A);
#pragma omp parallel for if (S * A >= kParallelCutoff)
  for (int idx = 0; idx < S * A; ++idx) {
    const int s = idx / A, a = idx % A;
    double acc = 0.0;
    for (int sp = 0; sp < S; ++sp)
      acc += transition(idx, sp) * (vf(sp) + tau * kl(sp));
    out(s, a) = cost(s, a) + gamma * acc;
  }
  return out;
}

MatrixXd center_rows_serial(const MatrixXd& raw, const MatrixXd& pi_density) {
  const int S = static_cast<int>(raw.rows());
  const int A = static_cast<int>(raw.cols());
  MatrixXd out(S, A);
  for (int s = 0; s < S; ++s) {
    double mean = 0.0;
    for (int a = 0; a < A; ++a) mean += raw(s, a) * pi_density(s, a);
    for (int a = 0; a < A; ++a) out(s, a) = raw(s, a) - mean;
  }
  return out;
}

MatrixXd center_rows(const MatrixXd& raw, const MatrixXd& pi_density) {
  const int S = static_cast<int>(raw.rows());
  const int A = static_cast<int>(raw.cols());
  MatrixXd out(S, A);
#pragma omp parallel for if (S >= kParallelCutoff)
  for (int s = 0; s < S; ++s) {
    double mean = 0.0;
    for (int a = 0; a < A; ++a) mean += raw(s, a) * pi_density(s, a);
    for (int a = 0; a < A; ++a) out(s, a) = raw(s, a) - mean;
  }
  return out;
}

VectorXd weighted_feature_sum_serial(const MatrixXd& phi,
                                     const VectorXd& weights) {
  const int rows = static_cast<int>(phi.rows());
  const int N = static_cast<int>(phi.cols());
  VectorXd out(N);
  for (int j = 0; j < N; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) acc += weights(i) * phi(i, j);
    out(j) = acc;
  }
  return out;
}

VectorXd weighted_feature_sum(const MatrixXd& phi, const VectorXd& weights) {
  const int rows = static_cast<int>(phi.rows());
  const int N = static_cast<int>(phi.cols());
  VectorXd out(N);
#pragma omp parallel for if (N >= 32 && rows >= 64)
  for (int j = 0; j < N; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) acc += weights(i) * phi(i, j);
    out(j) = acc;
  }
  return out;
}

MatrixXd weighted_gram_serial(const MatrixXd& phi, const VectorXd& weights) {
  const int rows = static_cast<int>(phi.rows());
  const int N = static_cast<int>(phi.cols());
  MatrixXd out(N, N);
  for (int j = 0; j < N; ++j) {
    for (int k = j; k < N; ++k) {
      double acc = 0.0;
      for (int i = 0; i < rows; ++i) acc += weights(i) * phi(i, j) * phi(i, k);
      out(j, k) = acc;
      out(k, j) = acc;
    }
  }
  return out;
}

MatrixXd weighted_gram(const MatrixXd& phi, const VectorXd& weights) {
  const int rows = static_cast<int>(phi.rows());
  const int N = static_cast<int>(phi.cols());
  MatrixXd out(N, N);
#pragma omp parallel for if (N >= 32 && rows >= 64)
  for (int j = 0; j < N; ++j) {
    for (int k = j; k < N; ++k) {
      double acc = 0.0;
      for (int i = 0; i < rows; ++i) acc += weights(i) * phi(i, j) * phi(i, k);
      out(j, k) = acc;
      out(k, j) = acc;
    }
  }
  return out;
}

}  // namespace acflow::kernels
