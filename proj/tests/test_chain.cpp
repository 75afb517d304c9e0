#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "asyncq/chain.hpp"
#include "asyncq/random.hpp"

using namespace asyncq;
using Eigen::VectorXd;

namespace {

RowMatrixXd mat2(double a, double b, double c, double d) {
  RowMatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

RowMatrixXd random_stochastic(Eigen::Index n, Rng& rng) {
  RowMatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd row = sample_simplex(n, rng);
    p.row(i) = 0.8 * row.transpose() + RowMatrixXd::Constant(1, n, 0.2 / n);
  }
  return p;
}

// Oracle: solve mu^T (P - I) = 0 with sum(mu) = 1 as a least squares system.
VectorXd stationary_by_solve(const RowMatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd a(n + 1, n);
  a.topRows(n) = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n).setOnes();
  VectorXd b = VectorXd::Zero(n + 1);
  b(n) = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

// Oracle: first t with worst-start TV <= 1/4, by explicit powers.
std::int64_t mixing_by_powers(const RowMatrixXd& p, const VectorXd& mu) {
  RowMatrixXd pt = p;
  for (std::int64_t t = 1; t < 10000; ++t) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
      worst = std::max(worst, 0.5 * (pt.row(s).transpose() - mu).cwiseAbs().sum());
    }
    if (worst <= 0.25) return t;
    pt = pt * p;
  }
  return -1;
}

}  // namespace

TEST_CASE("chain validation") {
  CHECK_THROWS_AS(MarkovChain(RowMatrixXd(2, 3)), DimensionError);
  CHECK_THROWS_AS(MarkovChain(mat2(0.5, 0.6, 0.5, 0.5)), InputError);
  CHECK_THROWS_AS(MarkovChain(mat2(1.5, -0.5, 0.5, 0.5)), InputError);
  CHECK_THROWS_AS(MarkovChain(mat2(0.5, 0.5, 0.5, 0.5), {"a"}), DimensionError);
  CHECK_NOTHROW(MarkovChain(mat2(0.5, 0.5, 0.5, 0.5), {"a", "b"}));
}

TEST_CASE("stationary distribution examples") {
  const VectorXd u = stationary_distribution(MarkovChain(mat2(0.5, 0.5, 0.5, 0.5)));
  CHECK(u(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u(1) == doctest::Approx(0.5).epsilon(1e-12));
  const VectorXd m = stationary_distribution(MarkovChain(mat2(0.8, 0.2, 0.3, 0.7)));
  CHECK(std::abs(m(0) - 0.6) <= 1e-12);
  CHECK(std::abs(m(1) - 0.4) <= 1e-12);
}

TEST_CASE("stationary distribution matches a linear solve") {
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    const RowMatrixXd p = random_stochastic(6, rng);
    const MarkovChain c(p);
    const VectorXd mu = stationary_distribution(c);
    const VectorXd oracle = stationary_by_solve(p);
    CHECK((mu - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((p.transpose() * mu - mu).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(mu.sum() - 1.0) <= 1e-12);
    CHECK(mu.minCoeff() > 0.0);
  }
}

TEST_CASE("tv_distance examples") {
  CHECK(tv_distance(vec({1, 0}), vec({0, 1})) == 1.0);
  CHECK(tv_distance(vec({0.5, 0.5}), vec({0.5, 0.5})) == 0.0);
  CHECK(tv_distance(vec({0.6, 0.4}), vec({0.5, 0.5})) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_AS(tv_distance(vec({1, 0}), vec({1, 0, 0})), InputError);
  CHECK_THROWS_AS(tv_distance(vec({0.7, 0.7}), vec({0.5, 0.5})), InputError);
}

TEST_CASE("mixing time examples") {
  const MarkovChain flat(mat2(0.5, 0.5, 0.5, 0.5));
  CHECK(mixing_time(flat, stationary_distribution(flat)) == 1);
  const MarkovChain sticky(mat2(0.9, 0.1, 0.1, 0.9));
  const VectorXd mu = stationary_distribution(sticky);
  CHECK(mixing_time(sticky, mu) == 4);
  // TV after t steps is 0.5 * 0.8^t.
  CHECK(worst_tv_at(sticky, mu, 3) == doctest::Approx(0.5 * 0.512).epsilon(1e-12));
  CHECK(worst_tv_at(sticky, mu, 4) == doctest::Approx(0.5 * 0.4096).epsilon(1e-12));
  MixingOptions tight;
  tight.threshold = 0.01;
  CHECK(mixing_time(sticky, mu, tight) == 18);  // 0.5 * 0.8^18 = 0.0090
}

TEST_CASE("mixing time matches explicit powers") {
  Rng rng(22);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 5);
    RowMatrixXd p(n, n);
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) = sample_simplex(n, rng).transpose();
    // Lazy chains mix slowly enough to make the check meaningful.
    p = 0.5 * p + 0.5 * RowMatrixXd::Identity(n, n);
    const MarkovChain c(p);
    const VectorXd mu = stationary_distribution(c);
    CHECK(mixing_time(c, mu) == mixing_by_powers(p, mu));
  }
}

TEST_CASE("exploration constants") {
  const MarkovChain sticky(mat2(0.9, 0.1, 0.1, 0.9));
  const ExplorationParams ex = exploration_params(sticky);
  CHECK(ex.mu_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ex.sigma == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ex.t_mix == 4);
  CHECK(ex.tau == 8);

  CHECK(exploration_tau(0.5, 1) == 2);
  CHECK(exploration_tau(0.1, 5) == 25);
  CHECK(exploration_tau(1.0, 3) == 3);
  CHECK_THROWS_AS(exploration_tau(0.0, 1), InputError);
  CHECK_THROWS_AS(exploration_tau(0.5, 0), InputError);

  CHECK(ceil_log2(1.0) == 0);
  CHECK(ceil_log2(4.0) == 2);
  CHECK(ceil_log2(4.000001) == 3);
  CHECK(ceil_log2(20.0) == 5);
}

TEST_CASE("exploration_check") {
  RowMatrixXd u = RowMatrixXd::Constant(3, 3, 1.0 / 3.0);
  const ExplorationWitness ok = exploration_check(MarkovChain(u), 1.0 / 6.0, 1);
  CHECK(ok.holds);
  CHECK(ok.value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const MarkovChain cycle(mat2(0, 1, 1, 0));
  const ExplorationWitness bad = exploration_check(cycle, 0.25, 2);
  CHECK_FALSE(bad.holds);
  CHECK(bad.value == 0.0);
  CHECK(bad.start != bad.target);

  const MarkovChain sticky(mat2(0.9, 0.1, 0.1, 0.9));
  const ExplorationParams ex = exploration_params(sticky);
  CHECK(exploration_check(sticky, ex.sigma, ex.tau).holds);
}

TEST_CASE("exploration constants verify the lower bound on random chains") {
  Rng rng(23);
  for (int k = 0; k < 30; ++k) {
    const MarkovChain c(random_stochastic(5, rng));
    const ExplorationParams ex = exploration_params(c);
    CHECK(ex.sigma > 0.0);
    CHECK(ex.tau >= ex.t_mix);
    CHECK(exploration_check(c, ex.sigma, ex.tau).holds);
  }
}

TEST_CASE("non-ergodic chains are rejected") {
  const MarkovChain cycle(mat2(0, 1, 1, 0));
  CHECK(is_irreducible(cycle));
  CHECK_THROWS_AS(stationary_distribution(cycle), ErgodicityError);
  CHECK_THROWS_AS(exploration_params(cycle), ErgodicityError);

  const MarkovChain reducible(mat2(1, 0, 0, 1));
  CHECK_FALSE(is_irreducible(reducible));
  CHECK_THROWS_AS(exploration_params(reducible), ErgodicityError);

  RowMatrixXd absorbing(3, 3);
  absorbing << 0.5, 0.5, 0, 0, 1, 0, 0.2, 0.3, 0.5;
  CHECK_FALSE(is_irreducible(MarkovChain(absorbing)));
  CHECK_THROWS_AS(exploration_params(MarkovChain(absorbing)), ErgodicityError);
}

TEST_CASE("matrix_power") {
  const RowMatrixXd p = mat2(0.9, 0.1, 0.1, 0.9);
  CHECK(matrix_power(p, 0).isIdentity(0.0));
  CHECK((matrix_power(p, 5) - p * p * p * p * p).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(matrix_power(p, -1), InputError);
}
