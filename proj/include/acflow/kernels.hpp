#pragma once

#include "acflow/types.hpp"

namespace acflow::kernels {

// Element-parallel kernels. Each output element is accumulated in a fixed
// serial order, so the OpenMP versions are bit-identical to the serial
// references for any thread count. The *_serial functions are the reference
// implementations used by tests and benchmarks.

// out(s,a) = cost(s,a) + gamma * sum_s' P(sa,s') [vf(s') + tau*kl(s')]
// where vf(s') = sum_a' pi(a'|s') f(s',a').
MatrixXd bellman_table(const MatrixXd& transition, const MatrixXd& cost,
                       double gamma, double tau, const MatrixXd& pi_density,
                       const VectorXd& kl, const MatrixXd& f);
MatrixXd bellman_table_serial(const MatrixXd& transition, const MatrixXd& cost,
                              double gamma, double tau,
                              const MatrixXd& pi_density, const VectorXd& kl,
                              const MatrixXd& f);

// out(s,a) = raw(s,a) - sum_a' raw(s,a') pi(a'|s).
MatrixXd center_rows(const MatrixXd& raw, const MatrixXd& pi_density);
MatrixXd center_rows_serial(const MatrixXd& raw, const MatrixXd& pi_density);

// out(j) = sum_i weights(i) * phi(i,j).
VectorXd weighted_feature_sum(const MatrixXd& phi, const VectorXd& weights);
VectorXd weighted_feature_sum_serial(const MatrixXd& phi,
                                     const VectorXd& weights);

// out = sum_i weights(i) * phi.row(i)^T phi.row(i), exploiting symmetry.
MatrixXd weighted_gram(const MatrixXd& phi, const VectorXd& weights);
MatrixXd weighted_gram_serial(const MatrixXd& phi, const VectorXd& weights);

}  // namespace acflow::kernels
