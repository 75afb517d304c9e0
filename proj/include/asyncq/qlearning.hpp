#pragma once

// Tabular Q-learning along a single trajectory, and a synchronous variant
// that resamples every (s, a) each round from a generative model.

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "asyncq/mdp.hpp"
#include "asyncq/sa.hpp"

namespace asyncq {

// Q(s, a) <- (1 - alpha) Q(s, a) + alpha (r + gamma max_a' Q(s_next, a')).
// Every other entry is left untouched.
void apply_q_async_step(QTable& q, Eigen::Index s, Eigen::Index a, double r,
                        Eigen::Index s_next, double alpha, double gamma);
QTable q_async_step(QTable q, Eigen::Index s, Eigen::Index a, double r,
                    Eigen::Index s_next, double alpha, double gamma);

// w = (r - r(s, a)) + gamma (max_a' Q(s_next, a') - E_{s'} max_a' Q(s', a')).
// Uses the model; the learner itself never calls this.
double q_noise(const QTable& q, const MdpModel& mdp, Eigen::Index s,
               Eigen::Index a, double r, Eigen::Index s_next);

struct SafetyBounds {
  double x_bar;  // bound on ||Q(t)||_inf
  double w_bar;  // bound on |w(t)|
};

SafetyBounds q_safety_bounds(double r_bar, double gamma);

struct QRunOptions {
  // Check ||Q(t)||_inf <= x_bar and |w(t)| <= w_bar at every step.
  bool check_invariants = true;
  double invariant_tolerance = 1e-12;
  double qstar_tol = 1e-10;
  // Shared oracle; solved on demand when null.
  std::shared_ptr<const QTable> qstar;
};

struct QRunResult {
  ErrorTrace trace;
  double max_q_norm = 0.0;
  double max_abs_noise = 0.0;
  std::int64_t steps_checked = 0;
};

// Q(0) = 0, s_0 uniform, a_0 ~ pi(. | s_0). Error at checkpoints is
// ||Q(t) - Q*||_inf. Throws InvariantViolation naming the step on a bound
// violation.
QRunResult run_q_async(const MdpModel& mdp, const BehaviorPolicy& policy,
                       const StepSchedule& schedule, std::int64_t horizon,
                       const std::vector<std::int64_t>& checkpoints,
                       std::uint64_t seed, const QRunOptions& opts = {});

// All pairs updated each round from the previous table, each with its own
// reward and next-state draw. The visit count passed to the schedule is t.
QRunResult run_q_sync(const MdpModel& mdp, const StepSchedule& schedule,
                      std::int64_t horizon,
                      const std::vector<std::int64_t>& checkpoints,
                      std::uint64_t seed, const QRunOptions& opts = {});

}  // namespace asyncq
