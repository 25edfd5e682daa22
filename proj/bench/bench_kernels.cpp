// Serial reference vs OpenMP kernels on synthetic tables. The parallel
// versions only engage above the size cutoff, so the small sizes double as
// overhead measurements.
#include <benchmark/benchmark.h>

#include <random>

#include "acflow/kernels.hpp"

namespace {

using acflow::MatrixXd;
using acflow::VectorXd;

struct Tables {
  MatrixXd transition;  // SA x S
  MatrixXd cost;        // S x A
  MatrixXd density;     // S x A
  VectorXd kl;          // S
  MatrixXd f;           // S x A
  MatrixXd phi;         // SA x N
  VectorXd weights;     // SA
};

Tables make_tables(int s_n, int a_n, int n_feat) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tables t;
  t.transition.resize(s_n * a_n, s_n);
  for (int i = 0; i < s_n * a_n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < s_n; ++j) {
      t.transition(i, j) = unif(rng) + 1e-3;
      sum += t.transition(i, j);
    }
    t.transition.row(i) /= sum;
  }
  t.cost.resize(s_n, a_n);
  t.density.resize(s_n, a_n);
  t.f.resize(s_n, a_n);
  for (int s = 0; s < s_n; ++s) {
    double sum = 0.0;
    for (int a = 0; a < a_n; ++a) {
      t.cost(s, a) = unif(rng);
      t.f(s, a) = unif(rng);
      t.density(s, a) = unif(rng) + 1e-3;
      sum += t.density(s, a);
    }
    t.density.row(s) /= sum;
  }
  t.kl = VectorXd::NullaryExpr(s_n, [&](Eigen::Index) { return unif(rng); });
  t.phi.resize(s_n * a_n, n_feat);
  for (int i = 0; i < s_n * a_n; ++i)
    for (int j = 0; j < n_feat; ++j) t.phi(i, j) = unif(rng) - 0.5;
  t.weights =
      VectorXd::NullaryExpr(s_n * a_n, [&](Eigen::Index) { return unif(rng); });
  return t;
}

void bench_bellman_serial(benchmark::State& state) {
  const int s_n = static_cast<int>(state.range(0));
  Tables t = make_tables(s_n, 8, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(acflow::kernels::bellman_table_serial(
        t.transition, t.cost, 0.9, 0.5, t.density, t.kl, t.f));
  }
}

void bench_bellman_omp(benchmark::State& state) {
  const int s_n = static_cast<int>(state.range(0));
  Tables t = make_tables(s_n, 8, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(acflow::kernels::bellman_table(
        t.transition, t.cost, 0.9, 0.5, t.density, t.kl, t.f));
  }
}

void bench_gram_serial(benchmark::State& state) {
  const int n_feat = static_cast<int>(state.range(0));
  Tables t = make_tables(64, 8, n_feat);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        acflow::kernels::weighted_gram_serial(t.phi, t.weights));
  }
}

void bench_gram_omp(benchmark::State& state) {
  const int n_feat = static_cast<int>(state.range(0));
  Tables t = make_tables(64, 8, n_feat);
  for (auto _ : state) {
    benchmark::DoNotOptimize(acflow::kernels::weighted_gram(t.phi, t.weights));
  }
}

void bench_feature_sum_serial(benchmark::State& state) {
  const int n_feat = static_cast<int>(state.range(0));
  Tables t = make_tables(64, 8, n_feat);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        acflow::kernels::weighted_feature_sum_serial(t.phi, t.weights));
  }
}

void bench_feature_sum_omp(benchmark::State& state) {
  const int n_feat = static_cast<int>(state.range(0));
  Tables t = make_tables(64, 8, n_feat);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        acflow::kernels::weighted_feature_sum(t.phi, t.weights));
  }
}

}  // namespace

BENCHMARK(bench_bellman_serial)->Arg(8)->Arg(64)->Arg(256);
BENCHMARK(bench_bellman_omp)->Arg(8)->Arg(64)->Arg(256);
BENCHMARK(bench_gram_serial)->Arg(16)->Arg(128)->Arg(512);
BENCHMARK(bench_gram_omp)->Arg(16)->Arg(128)->Arg(512);
BENCHMARK(bench_feature_sum_serial)->Arg(16)->Arg(128)->Arg(512);
BENCHMARK(bench_feature_sum_omp)->Arg(16)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
