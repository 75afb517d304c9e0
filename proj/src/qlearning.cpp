#include "asyncq/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asyncq/errors.hpp"

namespace asyncq {

namespace {

void require_pair(const QTable& q, Eigen::Index s, Eigen::Index a,
                  Eigen::Index s_next) {
  if (s < 0 || s >= q.rows() || s_next < 0 || s_next >= q.rows()) {
    throw IndexError("state index out of range");
  }
  if (a < 0 || a >= q.cols()) throw IndexError("action index out of range");
}

double expected_greedy(const MdpModel& mdp, Eigen::Index s, Eigen::Index a,
                       const Eigen::VectorXd& greedy) {
  return mdp.next_state_probs(s, a).dot(greedy);
}

std::shared_ptr<const QTable> oracle(const MdpModel& mdp, const QRunOptions& opts) {
  if (opts.qstar) {
    if (opts.qstar->rows() != mdp.n_states() || opts.qstar->cols() != mdp.n_actions()) {
      throw DimensionError("shared Q* has the wrong shape");
    }
    return opts.qstar;
  }
  return std::make_shared<const QTable>(solve_qstar(mdp, opts.qstar_tol));
}

std::string at_step(std::int64_t t) { return " at step " + std::to_string(t); }

}  // namespace

void apply_q_async_step(QTable& q, Eigen::Index s, Eigen::Index a, double r,
                        Eigen::Index s_next, double alpha, double gamma) {
  require_pair(q, s, a, s_next);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in (0, 1]");
  const double target = r + gamma * q.row(s_next).maxCoeff();
  q(s, a) = alpha == 1.0 ? target : (1.0 - alpha) * q(s, a) + alpha * target;
}

QTable q_async_step(QTable q, Eigen::Index s, Eigen::Index a, double r,
                    Eigen::Index s_next, double alpha, double gamma) {
  apply_q_async_step(q, s, a, r, s_next, alpha, gamma);
  return q;
}

double q_noise(const QTable& q, const MdpModel& mdp, Eigen::Index s,
               Eigen::Index a, double r, Eigen::Index s_next) {
  require_pair(q, s, a, s_next);
  const Eigen::VectorXd greedy = q.rowwise().maxCoeff();
  return (r - mdp.mean_reward()(s, a)) +
         mdp.gamma() * (greedy(s_next) - expected_greedy(mdp, s, a, greedy));
}

SafetyBounds q_safety_bounds(double r_bar, double gamma) {
  if (!(gamma < 1.0)) throw InputError("gamma must be < 1");
  return {r_bar / (1.0 - gamma), 2.0 * r_bar / (1.0 - gamma)};
}

QRunResult run_q_async(const MdpModel& mdp, const BehaviorPolicy& policy,
                       const StepSchedule& schedule, std::int64_t horizon,
                       const std::vector<std::int64_t>& checkpoints,
                       std::uint64_t seed, const QRunOptions& opts) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw DimensionError("policy shape does not match the MDP");
  }
  validate_checkpoints(checkpoints, horizon);
  const auto qstar = oracle(mdp, opts);
  const SafetyBounds bounds = q_safety_bounds(mdp.r_bar(), mdp.gamma());
  const double gamma = mdp.gamma();
  const Eigen::Index na = mdp.n_actions();

  Rng rng(seed);
  QTable q = QTable::Zero(mdp.n_states(), na);
  // greedy(s) = max_a Q(s, a), kept in step with q.
  Eigen::VectorXd greedy = Eigen::VectorXd::Zero(mdp.n_states());
  std::vector<std::int64_t> visits(static_cast<std::size_t>(mdp.n_pairs()), 0);

  Eigen::Index s = static_cast<Eigen::Index>(
      uniform01(rng) * static_cast<double>(mdp.n_states()));
  Eigen::Index a = policy.sample_action(s, rng);

  QRunResult out;
  std::size_t next_cp = 0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    const Transition tr = sample_step(mdp, policy, s, a, rng);
    auto& n = visits[static_cast<std::size_t>(mdp.pair_index(s, a))];
    const double alpha = schedule.at(t, n);
    ++n;

    if (opts.check_invariants) {
      const double w = (tr.reward - mdp.mean_reward()(s, a)) +
                       gamma * (greedy(tr.next_state) - expected_greedy(mdp, s, a, greedy));
      out.max_abs_noise = std::max(out.max_abs_noise, std::abs(w));
      if (!(std::abs(w) <= bounds.w_bar + opts.invariant_tolerance)) {
        throw InvariantViolation("|w(t)| = " + std::to_string(std::abs(w)) +
                                 " exceeds w_bar" + at_step(t));
      }
    }

    const double target = tr.reward + gamma * greedy(tr.next_state);
    double& qsa = q(s, a);
    qsa = alpha == 1.0 ? target : (1.0 - alpha) * qsa + alpha * target;
    greedy(s) = q.row(s).maxCoeff();

    if (opts.check_invariants) {
      const double norm = std::abs(qsa);
      out.max_q_norm = std::max(out.max_q_norm, norm);
      if (!(norm <= bounds.x_bar + opts.invariant_tolerance)) {
        throw InvariantViolation("||Q(t)||_inf = " + std::to_string(norm) +
                                 " exceeds x_bar" + at_step(t + 1));
      }
      ++out.steps_checked;
    }

    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t + 1) {
      out.trace.points.push_back({t + 1, (q - *qstar).cwiseAbs().maxCoeff(), alpha});
      ++next_cp;
    }
    s = tr.next_state;
    a = tr.next_action;
  }
  return out;
}

QRunResult run_q_sync(const MdpModel& mdp, const StepSchedule& schedule,
                      std::int64_t horizon,
                      const std::vector<std::int64_t>& checkpoints,
                      std::uint64_t seed, const QRunOptions& opts) {
  validate_checkpoints(checkpoints, horizon);
  const auto qstar = oracle(mdp, opts);
  const SafetyBounds bounds = q_safety_bounds(mdp.r_bar(), mdp.gamma());
  const double gamma = mdp.gamma();

  Rng rng(seed);
  QTable q = QTable::Zero(mdp.n_states(), mdp.n_actions());
  QTable next = q;
  QRunResult out;
  std::size_t next_cp = 0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    const double alpha = schedule.at(t, t);
    const Eigen::VectorXd greedy = q.rowwise().maxCoeff();
    for (Eigen::Index s = 0; s < mdp.n_states(); ++s) {
      for (Eigen::Index a = 0; a < mdp.n_actions(); ++a) {
        const double r = mdp.sample_reward(s, a, rng);
        const Eigen::Index s2 = mdp.sample_next_state(s, a, rng);
        if (opts.check_invariants) {
          const double w = (r - mdp.mean_reward()(s, a)) +
                           gamma * (greedy(s2) - expected_greedy(mdp, s, a, greedy));
          out.max_abs_noise = std::max(out.max_abs_noise, std::abs(w));
          if (!(std::abs(w) <= bounds.w_bar + opts.invariant_tolerance)) {
            throw InvariantViolation("|w(t)| exceeds w_bar" + at_step(t));
          }
        }
        const double target = r + gamma * greedy(s2);
        next(s, a) = alpha == 1.0 ? target : (1.0 - alpha) * q(s, a) + alpha * target;
      }
    }
    q.swap(next);
    if (opts.check_invariants) {
      const double norm = q.cwiseAbs().maxCoeff();
      out.max_q_norm = std::max(out.max_q_norm, norm);
      if (!(norm <= bounds.x_bar + opts.invariant_tolerance)) {
        throw InvariantViolation("||Q(t)||_inf exceeds x_bar" + at_step(t + 1));
      }
      ++out.steps_checked;
    }
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t + 1) {
      out.trace.points.push_back({t + 1, (q - *qstar).cwiseAbs().maxCoeff(), alpha});
      ++next_cp;
    }
  }
  return out;
}

}  // namespace asyncq
