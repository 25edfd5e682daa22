#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "acflow/critic.hpp"
#include "acflow/kernels.hpp"
#include "acflow/occupancy.hpp"
#include "testutil.hpp"

using namespace acflow;

namespace {

VectorXd flatten(const MatrixXd& table) {
  VectorXd out(table.rows() * table.cols());
  for (int s = 0; s < table.rows(); ++s)
    for (int a = 0; a < table.cols(); ++a)
      out(s * table.cols() + a) = table(s, a);
  return out;
}

}  // namespace

TEST_CASE("j_apply is the identity on the single-point environment") {
  const FiniteMdp mdp = testutil::single_point_mdp();
  MatrixXd b(1, 1);
  b << 1.0;
  CHECK(j_apply(b, uniform_policy(1, 1), mdp)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("j_apply transports mass deterministically on the two-cycle") {
  const FiniteMdp mdp = testutil::two_cycle_mdp(0.5, 1.0);
  std::mt19937_64 rng(1);
  const Policy pi = testutil::random_policy(rng, mdp);
  const MatrixXd density = pi.density(mdp.mu);
  MatrixXd point = MatrixXd::Zero(2, 2);
  point(0, 0) = 1.0;  // all mass at (state 0, action 0)
  const MatrixXd moved = j_apply(point, pi, mdp);
  CHECK(moved.row(0).sum() == doctest::Approx(0.0));
  for (int a = 0; a < 2; ++a)
    CHECK(moved(1, a) == doctest::Approx(density(1, a)).epsilon(1e-14));
}

TEST_CASE("j_apply conserves mass") {
  const SampledMdp sm = sample_random_mdp(41, 4, 3, 0.7, 0.5,
                                          MdpStructure::TabularOnehot);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Policy pi = testutil::random_policy(rng, sm.mdp);
    const MatrixXd b = testutil::random_distribution(rng, 4, 3);
    const MatrixXd out = j_apply(b, pi, sm.mdp);
    CHECK(std::abs(out.sum() - 1.0) < 1e-12);
    CHECK(out.minCoeff() >= 0.0);
  }
}

TEST_CASE("occupancy measures on the single-point environment") {
  const FiniteMdp mdp = testutil::single_point_mdp();
  const OccupancyBundle occ = occupancy_measures(uniform_policy(1, 1), mdp);
  CHECK(occ.d_state(0, 0) == doctest::Approx(1.0));
  CHECK(occ.d_state_rho(0) == doctest::Approx(1.0));
  CHECK(occ.d_sa(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("gamma to zero collapses the occupancy onto beta") {
  const SampledMdp sm = sample_random_mdp(42, 3, 2, 0.5, 1.0,
                                          MdpStructure::TabularOnehot);
  // Rebuild at an extreme discount; only the n = 0 term survives.
  const FiniteMdp mdp = build_mdp(sm.mdp.transition, sm.mdp.cost, 1e-12, 1.0,
                                  sm.mdp.mu, sm.mdp.beta);
  std::mt19937_64 rng(3);
  const Policy pi = testutil::random_policy(rng, mdp);
  const OccupancyBundle occ = occupancy_measures(pi, mdp);
  CHECK(testutil::max_abs(occ.d_sa - mdp.beta) < 1e-10);
}

TEST_CASE("occupancy matches the truncated geometric series") {
  const SampledMdp sm = sample_random_mdp(43, 4, 2, 0.8, 0.5,
                                          MdpStructure::TabularOnehot);
  const FiniteMdp& mdp = sm.mdp;
  std::mt19937_64 rng(4);
  const Policy pi = testutil::random_policy(rng, mdp);
  const OccupancyBundle occ = occupancy_measures(pi, mdp);
  MatrixXd term = mdp.beta;
  MatrixXd series = MatrixXd::Zero(4, 2);
  double weight = 1.0 - mdp.gamma;
  for (int n = 0; n < 200; ++n) {
    series += weight * term;
    term = j_apply(term, pi, mdp);
    weight *= mdp.gamma;
  }
  CHECK(testutil::max_abs(series - occ.d_sa) < 1e-10);
}

TEST_CASE("occupancy objects are probability measures dominating (1-gamma)beta") {
  const SampledMdp sm = sample_random_mdp(44, 5, 3, 0.9, 1.0,
                                          MdpStructure::TabularOnehot);
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Policy pi = testutil::random_policy(rng, sm.mdp);
    const OccupancyBundle occ = occupancy_measures(pi, sm.mdp);
    for (int s = 0; s < 5; ++s)
      CHECK(std::abs(occ.d_state.row(s).sum() - 1.0) < 1e-10);
    CHECK(std::abs(occ.d_state_rho.sum() - 1.0) < 1e-10);
    CHECK(std::abs(occ.d_sa.sum() - 1.0) < 1e-10);
    const MatrixXd floor = (1.0 - sm.mdp.gamma) * sm.mdp.beta;
    CHECK(((occ.d_sa - floor).array() >= -1e-12).all());
  }
}

TEST_CASE("occupancy identities") {
  SUBCASE("single point: exact zeros") {
    const FiniteMdp mdp = testutil::single_point_mdp();
    MatrixXd b(1, 1);
    b << 1.0;
    const OccupancyIdentityReport rep =
        check_occupancy_identities(uniform_policy(1, 1), mdp, b);
    CHECK(rep.residual_push == 0.0);
    CHECK(rep.residual_geo == 0.0);
  }
  SUBCASE("random policy and source pairs") {
    const SampledMdp sm = sample_random_mdp(45, 5, 3, 0.85, 0.7,
                                            MdpStructure::TabularOnehot);
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 100; ++rep) {
      const Policy pi = testutil::random_policy(rng, sm.mdp);
      const MatrixXd b = testutil::random_distribution(rng, 5, 3);
      const OccupancyIdentityReport r =
          check_occupancy_identities(pi, sm.mdp, b);
      CHECK(r.residual_push < 1e-10);
      CHECK(r.residual_geo < 1e-10);
    }
  }
  SUBCASE("two-cycle geometric weights by hand") {
    // From beta = delta_{(0,0)} the chain visits states 0,1,0,1,...;
    // d alternates (1-g)(1, g, g^2, ...) split between the two states.
    const FiniteMdp mdp = testutil::two_cycle_mdp(0.5, 1.0);
    const Policy pi = uniform_policy(2, 2);
    MatrixXd b = MatrixXd::Zero(2, 2);
    b(0, 0) = 1.0;
    const MatrixXd d = occupancy_sa_from(b, pi, mdp);
    const double g = mdp.gamma;
    const double even = (1.0 - g) / (1.0 - g * g);       // state 0 mass
    const double odd = (1.0 - g) * g / (1.0 - g * g);    // state 1 mass
    const MatrixXd density = pi.density(mdp.mu);
    // n = 0 has the point action mass; later visits spread via pi.
    CHECK(d(0, 0) == doctest::Approx((1.0 - g) +
                                     (even - (1.0 - g)) * density(0, 0))
                         .epsilon(1e-12));
    CHECK(d(0, 1) ==
          doctest::Approx((even - (1.0 - g)) * density(0, 1)).epsilon(1e-12));
    for (int a = 0; a < 2; ++a)
      CHECK(d(1, a) == doctest::Approx(odd * density(1, a)).epsilon(1e-12));
    const OccupancyIdentityReport r = check_occupancy_identities(pi, mdp, b);
    CHECK(r.residual_push < 1e-12);
    CHECK(r.residual_geo < 1e-12);
  }
}

TEST_CASE("product source reproduces the classical occupancy factorisation") {
  const SampledMdp sm = sample_random_mdp(46, 4, 3, 0.8, 0.5,
                                          MdpStructure::TabularOnehot);
  const FiniteMdp& mdp = sm.mdp;
  std::mt19937_64 rng(7);
  const Policy pi = testutil::random_policy(rng, mdp);
  const MatrixXd density = pi.density(mdp.mu);
  MatrixXd rho_pi(4, 3);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a) rho_pi(s, a) = mdp.rho(s) * density(s, a);
  const MatrixXd d = occupancy_sa_from(rho_pi, pi, mdp);
  const OccupancyBundle occ = occupancy_measures(pi, mdp);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a)
      CHECK(std::abs(d(s, a) - occ.d_state_rho(s) * density(s, a)) < 1e-10);
}

TEST_CASE("holder integral bound") {
  SUBCASE("constant one") {
    const SampledMdp sm = sample_random_mdp(47, 3, 2, 0.49, 1.0,
                                            MdpStructure::TabularOnehot);
    std::mt19937_64 rng(8);
    const Policy pi = testutil::random_policy(rng, sm.mdp);
    const auto [lhs, rhs] = holder_integral_bound_check(
        MatrixXd::Ones(3, 2), pi, sm.mdp);
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rhs == doctest::Approx(1.0 / std::sqrt(sm.mdp.gamma)).epsilon(1e-12));
  }
  SUBCASE("zero function") {
    const SampledMdp sm = sample_random_mdp(48, 3, 2, 0.5, 1.0,
                                            MdpStructure::TabularOnehot);
    std::mt19937_64 rng(9);
    const Policy pi = testutil::random_policy(rng, sm.mdp);
    const auto [lhs, rhs] = holder_integral_bound_check(
        MatrixXd::Zero(3, 2), pi, sm.mdp);
    CHECK(lhs == 0.0);
    CHECK(rhs == 0.0);
  }
  SUBCASE("lhs agrees with a direct double sum") {
    const SampledMdp sm = sample_random_mdp(49, 3, 3, 0.7, 1.0,
                                            MdpStructure::TabularOnehot);
    const FiniteMdp& mdp = sm.mdp;
    std::mt19937_64 rng(10);
    const Policy pi = testutil::random_policy(rng, mdp);
    const MatrixXd f = testutil::random_table(rng, 3, 3);
    const auto [lhs, rhs] = holder_integral_bound_check(f, pi, mdp);
    const OccupancyBundle occ = occupancy_measures(pi, mdp);
    const MatrixXd density = pi.density(mdp.mu);
    double direct = 0.0;
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 3; ++a)
        for (int sp = 0; sp < 3; ++sp)
          for (int ap = 0; ap < 3; ++ap)
            direct += occ.d_sa(s, a) * f(s, a) *
                      mdp.transition(mdp.sa(s, a), sp) * density(sp, ap) *
                      f(sp, ap);
    CHECK(std::abs(lhs - direct) < 1e-12);
    double sq = 0.0;
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 3; ++a) sq += occ.d_sa(s, a) * f(s, a) * f(s, a);
    CHECK(rhs == doctest::Approx(sq / std::sqrt(mdp.gamma)).epsilon(1e-12));
  }
  SUBCASE("holds on random functions across discounts") {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (double gamma : {0.1, 0.5, 0.9}) {
      const SampledMdp sm = sample_random_mdp(
          50 + static_cast<std::uint64_t>(gamma * 10), 4, 2, gamma, 1.0,
          MdpStructure::TabularOnehot);
      for (int rep = 0; rep < 100; ++rep) {
        const Policy pi = testutil::random_policy(rng, sm.mdp);
        const MatrixXd f = testutil::random_table(rng, 4, 2, 2.0);
        const auto [lhs, rhs] = holder_integral_bound_check(f, pi, sm.mdp);
        CHECK(lhs <= rhs + 1e-10);
        ++checked;
      }
    }
    CHECK(checked == 300);
  }
}

TEST_CASE("occupancy gram dominates the beta gram in the psd order") {
  const SampledMdp sm = sample_random_mdp(52, 4, 3, 0.8, 0.5,
                                          MdpStructure::DenseRandom, 5);
  const FiniteMdp& mdp = sm.mdp;
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Policy pi = testutil::random_policy(rng, mdp);
    const OccupancyBundle occ = occupancy_measures(pi, mdp);
    const MatrixXd gram_d =
        kernels::weighted_gram(sm.features.phi, flatten(occ.d_sa));
    const MatrixXd gram_b =
        kernels::weighted_gram(sm.features.phi, flatten(mdp.beta));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram_d -
                                               (1.0 - mdp.gamma) * gram_b);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}
