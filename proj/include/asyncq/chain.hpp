#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asyncq/errors.hpp"

namespace asyncq {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Finite time-homogeneous Markov chain given by a row-stochastic matrix.
class MarkovChain {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  explicit MarkovChain(RowMatrixXd transition,
                       std::vector<std::string> labels = {});

  const RowMatrixXd& transition() const noexcept { return p_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  Eigen::Index size() const noexcept { return p_.rows(); }

 private:
  RowMatrixXd p_;
  std::vector<std::string> labels_;
};

struct ExplorationParams {
  double sigma = 0.0;
  std::int64_t tau = 0;
  double mu_min = 0.0;
  std::int64_t t_mix = 0;
};

struct StationaryOptions {
  double tol = 1e-13;
  std::int64_t max_iterations = 1'000'000;
};

struct MixingOptions {
  double threshold = 0.25;
  std::int64_t max_iterations = 1'000'000;
};

// Power iteration from a point mass on state 0. A point-mass start makes
// periodic chains oscillate, so they surface as a convergence failure.
// Throws ErgodicityError when ||mu_{k+1} - mu_k||_1 > tol after the cap.
Eigen::VectorXd stationary_distribution(const MarkovChain& chain,
                                        const StationaryOptions& opts = {});

// (1/2) sum_i |p_i - q_i|.
double tv_distance(const Eigen::Ref<const Eigen::VectorXd>& p,
                   const Eigen::Ref<const Eigen::VectorXd>& q);

// Smallest t >= 1 with max_s TV(P^t(s, .), mu) <= threshold.
std::int64_t mixing_time(const MarkovChain& chain, const Eigen::VectorXd& mu,
                         const MixingOptions& opts = {});

// Worst-start TV distance max_s TV(P^t(s, .), mu) for a single t.
double worst_tv_at(const MarkovChain& chain, const Eigen::VectorXd& mu,
                   std::int64_t t);

// Graph check: every state reaches every other state.
bool is_irreducible(const MarkovChain& chain);

// ceil(log2(x)) for x >= 1, computed exactly as the smallest k with 2^k >= x.
std::int64_t ceil_log2(double x);

// sigma = mu_min / 2, tau = ceil(log2(2 / mu_min)) * t_mix.
ExplorationParams exploration_params(const MarkovChain& chain,
                                     const StationaryOptions& sopts = {},
                                     const MixingOptions& mopts = {});

// tau from (mu_min, t_mix) alone. 2 / mu_min within a relative 1e-9 of a
// power of two rounds down to it.
std::int64_t exploration_tau(double mu_min, std::int64_t t_mix);

struct ExplorationWitness {
  bool holds = false;
  Eigen::Index start = 0;
  Eigen::Index target = 0;
  double value = 0.0;  // smallest entry of P^tau (attained at start, target)
};

// For a Markov visitation process, P(i_t = i | F_{t - tau}) >= sigma for all
// histories iff every entry of P^tau is >= sigma.
ExplorationWitness exploration_check(const MarkovChain& chain, double sigma,
                                     std::int64_t tau);

RowMatrixXd matrix_power(const RowMatrixXd& p, std::int64_t k);

}  // namespace asyncq
