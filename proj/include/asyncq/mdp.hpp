#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "asyncq/chain.hpp"
#include "asyncq/random.hpp"

namespace asyncq {

// Q(s, a) stored row-major so that data() is the s-major flattening used for
// state-action indices (index = s * n_actions + a).
using QTable = RowMatrixXd;

enum class NoiseKind { kDeterministic, kUniform, kTwoPoint };

struct RewardNoise {
  NoiseKind kind = NoiseKind::kDeterministic;
  double half_width = 0.0;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

// Finite discounted MDP. Immutable after construction; the constructor
// enforces row-stochastic kernels, gamma in [0, 1) and
// |r(s, a)| + half_width <= r_bar.
class MdpModel {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  // transition: (n_states * n_actions) x n_states, row s * n_actions + a
  // holds P(. | s, a).
  MdpModel(Eigen::Index n_states, Eigen::Index n_actions, RowMatrixXd transition,
           RowMatrixXd mean_reward, RewardNoise noise, double gamma,
           double r_bar);

  Eigen::Index n_states() const noexcept { return n_states_; }
  Eigen::Index n_actions() const noexcept { return n_actions_; }
  Eigen::Index n_pairs() const noexcept { return n_states_ * n_actions_; }
  const RowMatrixXd& transition() const noexcept { return transition_; }
  const RowMatrixXd& mean_reward() const noexcept { return mean_reward_; }
  const RewardNoise& noise() const noexcept { return noise_; }
  double gamma() const noexcept { return gamma_; }
  double r_bar() const noexcept { return r_bar_; }

  Eigen::Index pair_index(Eigen::Index s, Eigen::Index a) const noexcept {
    return s * n_actions_ + a;
  }

  // Row view of P(. | s, a).
  auto next_state_probs(Eigen::Index s, Eigen::Index a) const {
    return transition_.row(pair_index(s, a));
  }

  double sample_reward(Eigen::Index s, Eigen::Index a, Rng& rng) const;
  Eigen::Index sample_next_state(Eigen::Index s, Eigen::Index a, Rng& rng) const {
    return static_cast<Eigen::Index>(
        next_state_[static_cast<std::size_t>(pair_index(s, a))].sample(rng));
  }

 private:
  Eigen::Index n_states_;
  Eigen::Index n_actions_;
  RowMatrixXd transition_;
  RowMatrixXd mean_reward_;
  RewardNoise noise_;
  double gamma_;
  double r_bar_;
  std::vector<CategoricalTable> next_state_;
};

// Behavior policy pi(a | s), one probability row per state.
class BehaviorPolicy {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  explicit BehaviorPolicy(RowMatrixXd pi);

  static BehaviorPolicy uniform(Eigen::Index n_states, Eigen::Index n_actions);

  const RowMatrixXd& probabilities() const noexcept { return pi_; }
  Eigen::Index n_states() const noexcept { return pi_.rows(); }
  Eigen::Index n_actions() const noexcept { return pi_.cols(); }

  Eigen::Index sample_action(Eigen::Index s, Rng& rng) const {
    return static_cast<Eigen::Index>(
        action_[static_cast<std::size_t>(s)].sample(rng));
  }

 private:
  RowMatrixXd pi_;
  std::vector<CategoricalTable> action_;
};

// F(Q)(s, a) = r(s, a) + gamma * sum_{s'} P(s' | s, a) max_{a'} Q(s', a').
QTable bellman(const QTable& q, const MdpModel& mdp);

// Bellman operator on the s-major flattening of Q.
Eigen::VectorXd bellman_flat(const Eigen::VectorXd& q, const MdpModel& mdp);

struct QStarSolution {
  QTable q;
  std::int64_t iterations = 0;
  double residual = 0.0;  // ||F(Q) - Q||_inf of the returned table
};

// Value iteration stopped once ||Q_{k+1} - Q_k||_inf <= tol (1 - gamma) / gamma,
// which guarantees ||Q - Q*||_inf <= tol. Iteration then continues while the
// update still shrinks, so the returned table is usually exact to rounding.
QStarSolution solve_qstar_detailed(const MdpModel& mdp, double tol);
QTable solve_qstar(const MdpModel& mdp, double tol);

// Chain on S x A, ((s, a) -> (s', a')) = P(s' | s, a) pi(a' | s'), s-major.
MarkovChain induced_chain(const MdpModel& mdp, const BehaviorPolicy& policy);

struct Transition {
  double reward;
  Eigen::Index next_state;
  Eigen::Index next_action;
};

Transition sample_step(const MdpModel& mdp, const BehaviorPolicy& policy,
                       Eigen::Index s, Eigen::Index a, Rng& rng);

struct RandomMdpOptions {
  NoiseKind noise_kind = NoiseKind::kUniform;
  // Reward-noise half-width as a fraction of r_bar; mean rewards are drawn
  // from [0, r_bar * (1 - noise_fraction)].
  double noise_fraction = 0.2;
};

// Transition rows: uniform simplex draws blended with the uniform kernel by
// mix_eps. Policy rows likewise. Every induced-chain entry is then at least
// mix_eps^2 / (S A), so the chain is ergodic.
std::pair<MdpModel, BehaviorPolicy> random_mdp(Eigen::Index n_states,
                                               Eigen::Index n_actions,
                                               double gamma, double r_bar,
                                               double mix_eps, Rng& rng,
                                               const RandomMdpOptions& opts = {});

// JSON model file: n_states, n_actions, gamma, r_bar, transition[s][a][s'],
// mean_reward[s][a], reward_noise {kind, half_width}, policy[s][a].
struct MdpFile {
  MdpModel mdp;
  BehaviorPolicy policy;
};

MdpFile mdp_from_json(const nlohmann::json& j);
nlohmann::json mdp_to_json(const MdpModel& mdp, const BehaviorPolicy& policy);
MdpFile load_mdp_file(const std::string& path);

}  // namespace asyncq
