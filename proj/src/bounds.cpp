#include "asyncq/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asyncq/chain.hpp"
#include "asyncq/errors.hpp"

namespace asyncq {

namespace {

ConditionCheck at_least(std::string name, double lhs, double rhs) {
  return {std::move(name), lhs, rhs, lhs >= rhs};
}

StepsizeReport report(std::vector<ConditionCheck> conds) {
  StepsizeReport r;
  r.pass = std::all_of(conds.begin(), conds.end(),
                       [](const ConditionCheck& c) { return c.holds; });
  r.conditions = std::move(conds);
  return r;
}

double finite_or_throw(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string(what) + " is not finite");
  return x;
}

void check_common(double gamma, double delta, double h, double t0, double T) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  if (!(h > 0.0)) throw InputError("h must be positive");
  if (!(t0 > 0.0)) throw InputError("t0 must be positive");
  if (!(T >= 1.0)) throw InputError("T must be >= 1");
}

void check_t1(const Theorem1Inputs& in) {
  check_common(in.gamma, in.delta, in.h, in.t0, in.T);
  if (!(in.sigma > 0.0 && in.sigma <= 1.0)) throw InputError("sigma must lie in (0, 1]");
  if (!(in.tau >= 0.0)) throw InputError("tau must be >= 0");
  if (!(in.n >= 1.0)) throw InputError("n must be >= 1");
  if (!(in.C >= 0.0)) throw InputError("C must be >= 0");
  if (!(in.w_bar >= 0.0)) throw InputError("w_bar must be >= 0");
  if (!(in.v_min > 0.0)) throw InputError("v_min must be positive");
  if (!(in.x_bar >= 0.0)) throw InputError("x_bar must be >= 0");
}

void check_t2(const Theorem2Inputs& in) {
  check_common(in.gamma, in.delta, in.h, in.t0, in.T);
  if (!(in.r_bar > 0.0)) throw InputError("r_bar must be positive");
  if (!(in.mu_min > 0.0 && in.mu_min <= 1.0)) throw InputError("mu_min must lie in (0, 1]");
  if (in.t_mix < 1) throw InputError("t_mix must be >= 1");
  if (!(in.n_sa >= 1.0)) throw InputError("n_sa must be >= 1");
}

}  // namespace

StepsizeReport validate_stepsize_t1(const Theorem1Inputs& in) {
  return report({
      at_least("h >= 2/(sigma(1-gamma))", in.h, 2.0 / (in.sigma * (1.0 - in.gamma))),
      at_least("t0 >= max(4h, tau)", in.t0, std::max(4.0 * in.h, in.tau)),
  });
}

BoundValue theorem1_rhs(const Theorem1Inputs& in) {
  check_t1(in);
  const double g1 = 1.0 - in.gamma;
  const double eps_bar = 2.0 * in.x_bar + in.C + in.w_bar / in.v_min;
  const double log_arg = 2.0 * (in.tau + 1.0) * in.T * in.T * in.n / in.delta;
  const double first = 12.0 * eps_bar / g1 * std::sqrt((in.tau + 1.0) * in.h / in.sigma) *
                       std::sqrt(std::log(log_arg) / (in.T + in.t0));
  const double second =
      4.0 / g1 *
      std::max(16.0 * eps_bar * in.h * in.tau / in.sigma, 2.0 * in.x_bar * (in.tau + in.t0)) /
      (in.T + in.t0);
  return {finite_or_throw(first + second, "theorem1_rhs"), !validate_stepsize_t1(in).pass};
}

StepsizeReport validate_stepsize_t2(const Theorem2Inputs& in) {
  const double tau = static_cast<double>(exploration_tau(in.mu_min, in.t_mix));
  return report({
      at_least("h >= 4/(mu_min(1-gamma))", in.h, 4.0 / (in.mu_min * (1.0 - in.gamma))),
      at_least("t0 >= max(4h, tau)", in.t0, std::max(4.0 * in.h, tau)),
  });
}

BoundValue theorem2_rhs(const Theorem2Inputs& in) {
  check_t2(in);
  const double tau = static_cast<double>(exploration_tau(in.mu_min, in.t_mix));
  const double g1 = 1.0 - in.gamma;
  const double log_arg = 2.0 * (tau + 1.0) * in.T * in.T * in.n_sa / in.delta;
  const double first = 60.0 * in.r_bar / (g1 * g1) *
                       std::sqrt(2.0 * (tau + 1.0) * in.h / in.mu_min) *
                       std::sqrt(std::log(log_arg) / (in.T + in.t0));
  const double second = 4.0 * in.r_bar / (g1 * g1) *
                        std::max(160.0 * in.h * tau / in.mu_min, 2.0 * (tau + in.t0)) /
                        (in.T + in.t0);
  return {finite_or_throw(first + second, "theorem2_rhs"), !validate_stepsize_t2(in).pass};
}

SampleComplexity sample_complexity_t2(const Theorem2Inputs& in, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InputError("epsilon must be positive and finite");
  }
  Theorem2Inputs q = in;
  auto rhs = [&](std::int64_t T) {
    q.T = static_cast<double>(T);
    return theorem2_rhs(q).value;
  };
  SampleComplexity out;
  const double g1 = 1.0 - in.gamma;
  out.asymptotic = in.r_bar * in.r_bar * static_cast<double>(in.t_mix) /
                   (std::pow(g1, 5) * in.mu_min * in.mu_min * epsilon * epsilon);
  if (rhs(1) <= epsilon) {
    out.T = 1;
    return out;
  }
  constexpr std::int64_t kCap = std::int64_t{1} << 60;
  std::int64_t lo = 1;  // rhs(lo) > epsilon
  std::int64_t hi = 2;
  while (rhs(hi) > epsilon) {
    if (hi >= kCap) {
      throw UnattainableError("epsilon is below the bound at T = 2^60");
    }
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (rhs(mid) <= epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.T = hi;
  return out;
}

BetaPair beta(std::int64_t k, std::int64_t t, double h, double t0, double sigma) {
  if (k < 0 || k > t) throw InputError("beta needs 0 <= k <= t");
  if (!(h > 0.0) || !(t0 > 0.0) || !(sigma > 0.0)) {
    throw InputError("beta needs positive h, t0 and sigma");
  }
  double prod = 1.0;
  for (std::int64_t l = k + 1; l <= t; ++l) {
    const double sa = sigma * h / (static_cast<double>(l) + t0);
    if (!(sa < 1.0)) {
      throw ScheduleError("sigma * alpha_" + std::to_string(l) + " >= 1");
    }
    prod *= 1.0 - sa;
  }
  return {h / (static_cast<double>(k) + t0) * prod, prod};
}

Lemma3Report lemma3_check(double h, double t0, double sigma, std::int64_t tau,
                          const std::vector<std::int64_t>& t_values) {
  Lemma3Report rep;
  if (!(sigma > 0.0 && sigma <= 1.0)) {
    rep.reason = "sigma must lie in (0, 1]";
    return rep;
  }
  if (!(h > 2.0 / sigma)) {
    rep.reason = "h > 2/sigma does not hold";
    return rep;
  }
  if (tau < 1) {
    rep.reason = "tau must be >= 1";
    return rep;
  }
  if (!(t0 >= std::max(4.0 * h, static_cast<double>(tau)))) {
    rep.reason = "t0 >= max(4h, tau) does not hold";
    return rep;
  }
  rep.preconditions_met = true;
  rep.pass = true;
  rep.worst_a_margin = rep.worst_b_margin = rep.worst_c_margin =
      std::numeric_limits<double>::infinity();
  const double sh = sigma * h;
  auto alpha = [&](std::int64_t l) { return h / (static_cast<double>(l) + t0); };

  for (std::int64_t t : t_values) {
    if (t < 1) throw InputError("lemma3_check: t values must be >= 1");
    Lemma3Row row;
    row.t = t;
    row.a_margin = std::numeric_limits<double>::infinity();
    const double tt = static_cast<double>(t) + 1.0 + t0;
    bool ok = true;

    // Walk k from t down to 0, carrying beta_tilde_{k,t}.
    double bt = 1.0;
    double sum_sq = 0.0;
    double sum_c = 0.0;
    // window(k) = sum_{l=k-tau+1}^{k} alpha_{l-1} = alpha_{k-tau} + ... + alpha_{k-1}
    double window = 0.0;
    const std::int64_t k_top = t;
    if (k_top >= tau) {
      for (std::int64_t l = k_top - tau; l <= k_top - 1; ++l) window += alpha(l);
    }
    for (std::int64_t k = t; k >= 0; --k) {
      if (k < t) bt *= 1.0 - sigma * alpha(k + 1);
      const double b = alpha(k) * bt;
      const double ratio_pow = std::pow((static_cast<double>(k) + 1.0 + t0) / tt, sh);
      const double bound_b = alpha(k) * ratio_pow;
      const double bound_bt = ratio_pow;
      if (k == t) {
        ok = ok && b <= bound_b && bt <= bound_bt;
      } else {
        row.a_margin = std::min(row.a_margin, (bound_b - b) / bound_b);
        row.a_margin = std::min(row.a_margin, (bound_bt - bt) / bound_bt);
      }
      if (k >= 1) sum_sq += b * b;
      if (k >= tau) {
        sum_c += b * window;
        // slide to k - 1: add alpha_{k-1-tau}, drop alpha_{k-1}
        if (k - 1 >= tau) window += alpha(k - 1 - tau) - alpha(k - 1);
      }
    }
    row.b_lhs = sum_sq;
    row.b_rhs = 2.0 * h / sigma / tt;
    row.c_lhs = sum_c;
    row.c_rhs = 8.0 * h * static_cast<double>(tau) / sigma / tt;
    ok = ok && row.a_margin > 0.0 && row.b_lhs < row.b_rhs && row.c_lhs < row.c_rhs;
    row.holds = ok;
    rep.pass = rep.pass && ok;
    rep.worst_a_margin = std::min(rep.worst_a_margin, row.a_margin);
    rep.worst_b_margin = std::min(rep.worst_b_margin, (row.b_rhs - row.b_lhs) / row.b_rhs);
    rep.worst_c_margin = std::min(rep.worst_c_margin, (row.c_rhs - row.c_lhs) / row.c_rhs);
    rep.rows.push_back(row);
  }
  return rep;
}

double lemma7_lhs(const Lemma7Params& p, const Eigen::VectorXd& d, std::int64_t t) {
  if (t < p.tau) return 0.0;
  if (d.size() <= t) throw DimensionError("d sequence shorter than t + 1");
  double e = 0.0;
  for (std::int64_t k = p.tau; k <= t; ++k) {
    const double kt = static_cast<double>(k) + p.t0;
    const double ad = p.h / kt * d(k);
    e = (1.0 - ad) * e + ad * std::pow(kt, -p.omega);
  }
  return e;
}

double lemma7_rhs(const Lemma7Params& p, std::int64_t t) {
  return 1.0 / (std::sqrt(p.gamma) *
                std::pow(static_cast<double>(t) + 1.0 + p.t0, p.omega));
}

Lemma7Report lemma7_check(const Lemma7Params& p,
                          const std::vector<Eigen::VectorXd>& d_seqs,
                          const std::vector<std::int64_t>& t_values) {
  Lemma7Report rep;
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) {
    rep.reason = "gamma must lie in (0, 1)";
    return rep;
  }
  if (!(p.sigma > 0.0 && p.sigma <= 1.0)) {
    rep.reason = "sigma must lie in (0, 1]";
    return rep;
  }
  if (!(p.sigma * p.h * (1.0 - std::sqrt(p.gamma)) >= 1.0)) {
    rep.reason = "sigma h (1 - sqrt(gamma)) >= 1 does not hold";
    return rep;
  }
  if (!(p.t0 >= 1.0)) {
    rep.reason = "t0 >= 1 does not hold";
    return rep;
  }
  if (!(p.h / p.t0 <= 0.5)) {
    rep.reason = "alpha_0 <= 1/2 does not hold";
    return rep;
  }
  if (!(p.omega > 0.0 && p.omega <= 1.0)) {
    rep.reason = "omega must lie in (0, 1]";
    return rep;
  }
  if (p.tau < 0) {
    rep.reason = "tau must be >= 0";
    return rep;
  }
  if (t_values.empty()) throw InputError("lemma7_check: no t values");
  std::vector<std::int64_t> ts = t_values;
  std::sort(ts.begin(), ts.end());
  const std::int64_t t_max = ts.back();
  rep.preconditions_met = true;

  for (const Eigen::VectorXd& d : d_seqs) {
    if (d.size() <= t_max) throw DimensionError("d sequence shorter than max t + 1");
    if ((d.array() < p.sigma).any() || (d.array() > 1.0).any()) {
      throw InputError("d sequence entries must lie in [sigma, 1]");
    }
    // One pass, reading off the partial recurrence at each requested t.
    double e = 0.0;
    std::size_t next = 0;
    // The sum is empty for t < tau.
    while (next < ts.size() && ts[next] < p.tau) ++next;
    for (std::int64_t k = p.tau; k <= t_max && next < ts.size(); ++k) {
      const double kt = static_cast<double>(k) + p.t0;
      const double ad = p.h / kt * d(k);
      e = (1.0 - ad) * e + ad * std::pow(kt, -p.omega);
      while (next < ts.size() && ts[next] == k) {
        rep.max_ratio = std::max(rep.max_ratio, e / lemma7_rhs(p, k));
        ++next;
      }
    }
    ++rep.sequences;
  }
  rep.pass = rep.max_ratio < 1.0;
  return rep;
}

std::vector<Eigen::VectorXd> sample_d_sequences(double sigma, std::int64_t length,
                                                std::int64_t count, Rng& rng) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw InputError("sigma must lie in (0, 1]");
  if (length < 1 || count < 0) throw InputError("bad d-sequence shape");
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t j = 0; j < count; ++j) {
    Eigen::VectorXd d(length);
    for (Eigen::Index k = 0; k < length; ++k) d(k) = uniform(rng, sigma, 1.0);
    out.push_back(std::move(d));
  }
  return out;
}

std::string to_string(AzumaProcess p) {
  switch (p) {
    case AzumaProcess::kZero:
      return "zero";
    case AzumaProcess::kRademacher:
      return "rademacher";
    case AzumaProcess::kInterleaved:
      return "interleaved";
    case AzumaProcess::kPeriodicReveal:
      return "periodic_reveal";
    case AzumaProcess::kMovingAverage:
      return "moving_average";
  }
  return "zero";
}

AzumaProcess azuma_process_from_string(const std::string& name) {
  for (AzumaProcess p : all_azuma_processes()) {
    if (to_string(p) == name) return p;
  }
  throw InputError("unknown process spec '" + name + "'");
}

std::vector<AzumaProcess> all_azuma_processes() {
  return {AzumaProcess::kZero, AzumaProcess::kRademacher, AzumaProcess::kInterleaved,
          AzumaProcess::kPeriodicReveal, AzumaProcess::kMovingAverage};
}

namespace {

// Sum of X_0..X_t for one trial. Every process here has |X_k| <= 1.
double azuma_trial(AzumaProcess process, std::int64_t tau, std::int64_t t, Rng& rng,
                   std::vector<double>& scratch) {
  double sum = 0.0;
  switch (process) {
    case AzumaProcess::kZero:
      return 0.0;
    case AzumaProcess::kRademacher:
      for (std::int64_t k = 0; k <= t; ++k) sum += rademacher(rng);
      return sum;
    case AzumaProcess::kInterleaved: {
      scratch.assign(static_cast<std::size_t>(tau), 0.0);
      for (std::int64_t k = 0; k <= t; ++k) {
        double& stream = scratch[static_cast<std::size_t>(k % tau)];
        const double scale = stream >= 0.0 ? 1.0 : 0.5;
        const double x = scale * rademacher(rng);
        stream += x;
        sum += x;
      }
      return sum;
    }
    case AzumaProcess::kPeriodicReveal: {
      double sign = 0.0;
      for (std::int64_t k = 0; k <= t; ++k) {
        if (k % tau == 0) sign = rademacher(rng);
        sum += sign;
      }
      return sum;
    }
    case AzumaProcess::kMovingAverage: {
      // Ring buffer of the last tau signs; before k = tau - 1 the missing
      // terms count as 0.
      scratch.assign(static_cast<std::size_t>(tau), 0.0);
      double window = 0.0;
      for (std::int64_t k = 0; k <= t; ++k) {
        double& slot = scratch[static_cast<std::size_t>(k % tau)];
        const double e = rademacher(rng);
        window += e - slot;
        slot = e;
        sum += window / static_cast<double>(tau);
      }
      return sum;
    }
  }
  return sum;
}

}  // namespace

AzumaResult shifted_azuma_mc(std::int64_t tau, AzumaProcess process, std::int64_t t,
                             double delta, std::int64_t trials, std::uint64_t seed) {
  if (tau < 1) throw InputError("tau must be >= 1");
  if (t < 0) throw InputError("t must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  if (trials < 1) throw InputError("trials must be >= 1");
  AzumaResult out;
  out.trials = trials;
  const double sum_sq = static_cast<double>(t + 1);  // Xbar_k = 1
  out.threshold = std::sqrt(2.0 * static_cast<double>(tau) * sum_sq *
                            std::log(2.0 * static_cast<double>(tau) / delta));
  out.limit = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
  std::vector<double> scratch;
  for (std::int64_t j = 0; j < trials; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    const double s = azuma_trial(process, tau, t, rng, scratch);
    if (std::abs(s) > out.threshold) ++out.exceedances;
  }
  out.rate = static_cast<double>(out.exceedances) / static_cast<double>(trials);
  out.holds = out.rate <= out.limit;
  return out;
}

}  // namespace asyncq
