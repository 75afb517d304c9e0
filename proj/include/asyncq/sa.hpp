#pragma once

// Asynchronous stochastic approximation
//   x_i(t+1) = x_i(t) + alpha_t (F_i(x(t)) - x_i(t) + w(t))   for i = i_t
//   x_j(t+1) = x_j(t)                                          for j != i_t
// started from x(0) = 0.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "asyncq/chain.hpp"
#include "asyncq/norms.hpp"
#include "asyncq/random.hpp"

namespace asyncq {

// alpha_t = h / (t + t0). When `theorem_compliant` is set the constructor
// additionally enforces t0 >= 4h.
struct RescaledLinear {
  double h = 1.0;
  double t0 = 1.0;
  bool theorem_compliant = false;
};
// alpha_t = 1 / (t + 1)^omega, omega in (0, 1].
struct Polynomial {
  double omega = 1.0;
};
// alpha_t = 1 / (t + 1).
struct Linear {};
struct Constant {
  double alpha = 0.1;
};
// alpha_t = h / (N_{i_t}(t) + t0), N counting prior visits to the coordinate.
struct PerCoordinate {
  double h = 1.0;
  double t0 = 1.0;
};

class StepSchedule {
 public:
  using Variant =
      std::variant<RescaledLinear, Polynomial, Linear, Constant, PerCoordinate>;

  // Throws ScheduleError if any produced step could leave (0, 1].
  StepSchedule(Variant v);  // NOLINT(google-explicit-constructor)
  template <typename S>
    requires std::is_constructible_v<Variant, S> && (!std::is_same_v<std::decay_t<S>, Variant>)
  StepSchedule(S s)  // NOLINT(google-explicit-constructor)
      : StepSchedule(Variant(std::move(s))) {}

  double at(std::int64_t t, std::int64_t visit_count) const {
    switch (kind_) {
      case Kind::kRescaled:
        return a_ / (static_cast<double>(t) + b_);
      case Kind::kPolynomial:
        return std::pow(static_cast<double>(t) + 1.0, -a_);
      case Kind::kLinear:
        return 1.0 / (static_cast<double>(t) + 1.0);
      case Kind::kConstant:
        return a_;
      case Kind::kPerCoordinate:
        return a_ / (static_cast<double>(visit_count) + b_);
    }
    return 0.0;
  }

  const Variant& variant() const noexcept { return v_; }
  bool uses_visit_counts() const noexcept { return kind_ == Kind::kPerCoordinate; }
  std::string describe() const;

 private:
  enum class Kind { kRescaled, kPolynomial, kLinear, kConstant, kPerCoordinate };
  Variant v_;
  Kind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
};

double step_size_at(const StepSchedule& schedule, std::int64_t t,
                    Eigen::Index coordinate, std::int64_t visit_count);

struct SaState {
  Eigen::VectorXd x;
  std::int64_t t = 0;
  std::vector<std::int64_t> visit_counts;

  static SaState zeros(Eigen::Index n);
};

// In-place form of sa_step. Only coordinate i of x changes.
void apply_sa_step(SaState& state, Eigen::Index i, double f_i, double w,
                   double alpha);
SaState sa_step(SaState state, Eigen::Index i, double f_i, double w, double alpha);

class SaProblem {
 public:
  using Operator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  SaProblem(Operator op, double gamma, double c, WeightVector weights,
            double w_bar, std::optional<Eigen::VectorXd> fixed_point = {});

  const Operator& op() const noexcept { return op_; }
  double gamma() const noexcept { return gamma_; }
  double c() const noexcept { return c_; }
  const WeightVector& weights() const noexcept { return weights_; }
  double w_bar() const noexcept { return w_bar_; }
  Eigen::Index dimension() const noexcept { return weights_.size(); }
  const std::optional<Eigen::VectorXd>& fixed_point() const noexcept {
    return fixed_point_;
  }

 private:
  Operator op_;
  double gamma_;
  double c_;
  WeightVector weights_;
  double w_bar_;
  std::optional<Eigen::VectorXd> fixed_point_;
};

// Banach iteration from 0 until the a-posteriori error is below tol.
Eigen::VectorXd compute_fixed_point(const SaProblem& problem, double tol = 1e-13,
                                    std::int64_t max_iterations = 10'000'000);

// Index process i_t.
class VisitSource {
 public:
  virtual ~VisitSource() = default;
  virtual Eigen::Index next(Rng& rng) = 0;
};

// Sample path of a Markov chain started at `start`; the first call returns
// `start`.
class MarkovVisits final : public VisitSource {
 public:
  MarkovVisits(const MarkovChain& chain, Eigen::Index start);
  Eigen::Index next(Rng& rng) override;

 private:
  std::vector<CategoricalTable> rows_;
  Eigen::Index current_;
  bool started_ = false;
};

class IidVisits final : public VisitSource {
 public:
  explicit IidVisits(const Eigen::VectorXd& probs);
  Eigen::Index next(Rng& rng) override;

 private:
  CategoricalTable table_;
};

class RoundRobinVisits final : public VisitSource {
 public:
  explicit RoundRobinVisits(Eigen::Index n);
  Eigen::Index next(Rng& rng) override;

 private:
  Eigen::Index n_;
  Eigen::Index next_ = 0;
};

// Noise w(t). Implementations must be bounded and conditionally zero-mean.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double sample(const Eigen::VectorXd& x, Eigen::Index i, Rng& rng) = 0;
};

class ZeroNoise final : public NoiseSource {
 public:
  double sample(const Eigen::VectorXd&, Eigen::Index, Rng&) override { return 0.0; }
};

class UniformNoise final : public NoiseSource {
 public:
  explicit UniformNoise(double bound) : bound_(bound) {}
  double sample(const Eigen::VectorXd&, Eigen::Index, Rng& rng) override {
    return uniform(rng, -bound_, bound_);
  }

 private:
  double bound_;
};

class RademacherNoise final : public NoiseSource {
 public:
  explicit RademacherNoise(double bound) : bound_(bound) {}
  double sample(const Eigen::VectorXd&, Eigen::Index, Rng& rng) override {
    return bound_ * rademacher(rng);
  }

 private:
  double bound_;
};

struct TracePoint {
  std::int64_t t = 0;
  double error = 0.0;
  // Step size of the update that produced x(t).
  double alpha = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

// Checkpointed error of one run.
struct ErrorTrace {
  std::vector<TracePoint> points;
};

// 1, 2, 4, ... below T, then T.
std::vector<std::int64_t> geometric_checkpoints(std::int64_t horizon);

// Validates 1 <= t_1 < t_2 < ... <= T.
void validate_checkpoints(const std::vector<std::int64_t>& checkpoints,
                          std::int64_t horizon);

// (1 / (1 - gamma)) ((1 + gamma) ||x*||_v + w_bar / v_min).
double prop3_bound(double gamma, double xstar_norm, double w_bar, double v_min);

struct SaRunOptions {
  bool assert_trajectory_bound = true;
  double bound_tolerance = 1e-9;
};

struct SaRunResult {
  ErrorTrace trace;
  double max_norm = 0.0;         // max_t ||x(t)||_v
  double trajectory_bound = 0.0;  // prop3_bound for the problem
};

// Throws InvariantViolation naming the step if ||x(t)||_v exceeds the
// trajectory bound (a broken operator or noise contract).
SaRunResult run_sa(const SaProblem& problem, VisitSource& visits,
                   NoiseSource& noise, const StepSchedule& schedule,
                   std::int64_t horizon, const std::vector<std::int64_t>& checkpoints,
                   Rng& rng, const SaRunOptions& opts = {});

}  // namespace asyncq
