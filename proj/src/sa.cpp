#include "asyncq/sa.hpp"

#include <cmath>
#include <sstream>

#include "asyncq/errors.hpp"

namespace asyncq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive_finite(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw ScheduleError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

StepSchedule::StepSchedule(Variant v) : v_(std::move(v)) {
  std::visit(
      overloaded{
          [this](const RescaledLinear& s) {
            require_positive_finite(s.h, "rescaled-linear h");
            if (!(s.t0 >= s.h) || !std::isfinite(s.t0)) {
              throw ScheduleError("rescaled-linear needs t0 >= h so alpha_0 <= 1");
            }
            if (s.theorem_compliant && !(s.t0 >= 4.0 * s.h)) {
              throw ScheduleError("theorem-compliant rescaled-linear needs t0 >= 4h");
            }
            kind_ = Kind::kRescaled;
            a_ = s.h;
            b_ = s.t0;
          },
          [this](const Polynomial& s) {
            if (!(s.omega > 0.0 && s.omega <= 1.0)) {
              throw ScheduleError("polynomial omega must lie in (0, 1]");
            }
            kind_ = Kind::kPolynomial;
            a_ = s.omega;
          },
          [this](const Linear&) { kind_ = Kind::kLinear; },
          [this](const Constant& s) {
            if (!(s.alpha > 0.0 && s.alpha <= 1.0)) {
              throw ScheduleError("constant alpha must lie in (0, 1]");
            }
            kind_ = Kind::kConstant;
            a_ = s.alpha;
          },
          [this](const PerCoordinate& s) {
            require_positive_finite(s.h, "per-coordinate h");
            if (!(s.t0 >= s.h) || !std::isfinite(s.t0)) {
              throw ScheduleError("per-coordinate needs t0 >= h so alpha <= 1");
            }
            kind_ = Kind::kPerCoordinate;
            a_ = s.h;
            b_ = s.t0;
          },
      },
      v_);
}

std::string StepSchedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const RescaledLinear& s) {
                   os << "rescaled_linear(h=" << s.h << ",t0=" << s.t0 << ")";
                 },
                 [&](const Polynomial& s) { os << "polynomial(omega=" << s.omega << ")"; },
                 [&](const Linear&) { os << "linear"; },
                 [&](const Constant& s) { os << "constant(alpha=" << s.alpha << ")"; },
                 [&](const PerCoordinate& s) {
                   os << "per_coordinate(h=" << s.h << ",t0=" << s.t0 << ")";
                 },
             },
             v_);
  return os.str();
}

double step_size_at(const StepSchedule& schedule, std::int64_t t,
                    Eigen::Index /*coordinate*/, std::int64_t visit_count) {
  if (t < 0 || visit_count < 0) {
    throw InputError("step_size_at: t and visit_count must be nonnegative");
  }
  return schedule.at(t, visit_count);
}

SaState SaState::zeros(Eigen::Index n) {
  SaState s;
  s.x = Eigen::VectorXd::Zero(n);
  s.visit_counts.assign(static_cast<std::size_t>(n), 0);
  return s;
}

void apply_sa_step(SaState& state, Eigen::Index i, double f_i, double w,
                   double alpha) {
  if (i < 0 || i >= state.x.size()) throw IndexError("sa_step: coordinate out of range");
  if (!std::isfinite(f_i) || !std::isfinite(w) || !std::isfinite(alpha)) {
    throw NumericError("sa_step: non-finite input at step " + std::to_string(state.t));
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("sa_step: alpha must lie in (0, 1]");
  const double target = f_i + w;
  double& xi = state.x(i);
  // alpha = 1 is a full replacement; the incremental form would round.
  xi = alpha == 1.0 ? target : xi + alpha * (target - xi);
  if (!std::isfinite(xi)) {
    throw NumericError("sa_step: iterate overflowed at step " + std::to_string(state.t));
  }
  ++state.t;
  ++state.visit_counts[static_cast<std::size_t>(i)];
}

SaState sa_step(SaState state, Eigen::Index i, double f_i, double w, double alpha) {
  apply_sa_step(state, i, f_i, w, alpha);
  return state;
}

SaProblem::SaProblem(Operator op, double gamma, double c, WeightVector weights,
                     double w_bar, std::optional<Eigen::VectorXd> fixed_point)
    : op_(std::move(op)),
      gamma_(gamma),
      c_(c),
      weights_(std::move(weights)),
      w_bar_(w_bar),
      fixed_point_(std::move(fixed_point)) {
  if (!op_) throw InputError("SaProblem: operator is empty");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw InputError("SaProblem: gamma must lie in (0, 1)");
  if (!(c_ >= 0.0)) throw InputError("SaProblem: C must be >= 0");
  if (!(w_bar_ >= 0.0)) throw InputError("SaProblem: w_bar must be >= 0");
  if (fixed_point_ && fixed_point_->size() != weights_.size()) {
    throw DimensionError("SaProblem: fixed point has the wrong length");
  }
}

Eigen::VectorXd compute_fixed_point(const SaProblem& problem, double tol,
                                    std::int64_t max_iterations) {
  const WeightVector& w = problem.weights();
  const double stop = tol * (1.0 - problem.gamma()) / problem.gamma();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.dimension());
  for (std::int64_t k = 0; k < max_iterations; ++k) {
    Eigen::VectorXd next = problem.op()(x);
    if (next.size() != x.size()) throw DimensionError("operator changed the dimension");
    const double d = weighted_norm(next - x, w);
    x.swap(next);
    if (d <= stop) return x;
  }
  throw NumericError("fixed-point iteration did not converge");
}

MarkovVisits::MarkovVisits(const MarkovChain& chain, Eigen::Index start)
    : current_(start) {
  if (start < 0 || start >= chain.size()) throw IndexError("MarkovVisits: bad start");
  rows_.reserve(static_cast<std::size_t>(chain.size()));
  for (Eigen::Index i = 0; i < chain.size(); ++i) {
    rows_.emplace_back(chain.transition().row(i));
  }
}

Eigen::Index MarkovVisits::next(Rng& rng) {
  if (started_) {
    current_ = static_cast<Eigen::Index>(
        rows_[static_cast<std::size_t>(current_)].sample(rng));
  }
  started_ = true;
  return current_;
}

IidVisits::IidVisits(const Eigen::VectorXd& probs) : table_(probs) {
  if (probs.size() == 0 || (probs.array() < 0.0).any() ||
      std::abs(probs.sum() - 1.0) > 1e-12) {
    throw InputError("IidVisits: probabilities must be a distribution");
  }
}

Eigen::Index IidVisits::next(Rng& rng) {
  return static_cast<Eigen::Index>(table_.sample(rng));
}

RoundRobinVisits::RoundRobinVisits(Eigen::Index n) : n_(n) {
  if (n < 1) throw InputError("RoundRobinVisits: n must be >= 1");
}

Eigen::Index RoundRobinVisits::next(Rng& /*rng*/) {
  const Eigen::Index i = next_;
  next_ = (next_ + 1) % n_;
  return i;
}

std::vector<std::int64_t> geometric_checkpoints(std::int64_t horizon) {
  if (horizon < 1) throw InputError("horizon must be >= 1");
  std::vector<std::int64_t> out;
  for (std::int64_t t = 1; t < horizon; t *= 2) out.push_back(t);
  out.push_back(horizon);
  return out;
}

void validate_checkpoints(const std::vector<std::int64_t>& checkpoints,
                          std::int64_t horizon) {
  if (checkpoints.empty()) throw InputError("checkpoint list is empty");
  std::int64_t prev = 0;
  for (std::int64_t t : checkpoints) {
    if (t <= prev || t > horizon) {
      throw InputError("checkpoints must be strictly increasing within [1, T]");
    }
    prev = t;
  }
}

double prop3_bound(double gamma, double xstar_norm, double w_bar, double v_min) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("prop3_bound: gamma must lie in [0, 1)");
  if (!(v_min > 0.0)) throw InputError("prop3_bound: v_min must be positive");
  return ((1.0 + gamma) * xstar_norm + w_bar / v_min) / (1.0 - gamma);
}

SaRunResult run_sa(const SaProblem& problem, VisitSource& visits,
                   NoiseSource& noise, const StepSchedule& schedule,
                   std::int64_t horizon, const std::vector<std::int64_t>& checkpoints,
                   Rng& rng, const SaRunOptions& opts) {
  validate_checkpoints(checkpoints, horizon);
  const WeightVector& w = problem.weights();
  const Eigen::VectorXd xstar =
      problem.fixed_point() ? *problem.fixed_point() : compute_fixed_point(problem);

  SaRunResult result;
  result.trajectory_bound =
      prop3_bound(problem.gamma(), weighted_norm(xstar, w), problem.w_bar(), w.min());
  const double limit = result.trajectory_bound + opts.bound_tolerance;

  SaState state = SaState::zeros(problem.dimension());
  std::size_t next_cp = 0;
  double last_alpha = 0.0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    const Eigen::Index i = visits.next(rng);
    if (i < 0 || i >= problem.dimension()) throw IndexError("visit source out of range");
    const double fi = problem.op()(state.x)(i);
    const double wt = noise.sample(state.x, i, rng);
    const double alpha =
        schedule.at(t, state.visit_counts[static_cast<std::size_t>(i)]);
    apply_sa_step(state, i, fi, wt, alpha);
    last_alpha = alpha;

    const double scaled = std::abs(state.x(i)) / w(i);
    result.max_norm = std::max(result.max_norm, scaled);
    if (opts.assert_trajectory_bound && !(scaled <= limit)) {
      throw InvariantViolation("trajectory bound violated at step " +
                               std::to_string(t + 1) + ": ||x||_v >= " +
                               std::to_string(scaled) + " > " +
                               std::to_string(result.trajectory_bound));
    }
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t + 1) {
      result.trace.points.push_back(
          {t + 1, weighted_norm(state.x - xstar, w), last_alpha});
      ++next_cp;
    }
  }
  return result;
}

}  // namespace asyncq
