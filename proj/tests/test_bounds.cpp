#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "asyncq/bounds.hpp"
#include "asyncq/chain.hpp"
#include "asyncq/errors.hpp"

using namespace asyncq;

namespace {

Theorem1Inputs t1_reference() {
  Theorem1Inputs in;
  in.gamma = 0.5;
  in.sigma = 0.25;
  in.tau = 2;
  in.h = 16;
  in.t0 = 64;
  in.delta = 0.05;
  in.n = 4;
  in.C = 1;
  in.w_bar = 4;
  in.v_min = 1;
  in.x_bar = 2;
  in.T = 1e6;
  return in;
}

Theorem2Inputs t2_reference() {
  Theorem2Inputs in;
  in.r_bar = 1;
  in.gamma = 0.5;
  in.mu_min = 0.5;
  in.t_mix = 4;
  in.h = 16;
  in.t0 = 64;
  in.delta = 0.05;
  in.n_sa = 4;
  in.T = 1e6;
  return in;
}

// General bound with the Q-learning constants plugged in.
Theorem1Inputs substituted(const Theorem2Inputs& q) {
  Theorem1Inputs in;
  in.gamma = q.gamma;
  in.sigma = q.mu_min / 2;
  in.tau = static_cast<double>(exploration_tau(q.mu_min, q.t_mix));
  in.h = q.h;
  in.t0 = q.t0;
  in.delta = q.delta;
  in.n = q.n_sa;
  in.C = q.r_bar;
  in.x_bar = q.r_bar / (1 - q.gamma);
  in.w_bar = 2 * q.r_bar / (1 - q.gamma);
  in.v_min = 1;
  in.T = q.T;
  return in;
}

bool has_failing(const StepsizeReport& r, const std::string& fragment) {
  for (const auto& c : r.conditions)
    if (!c.holds && c.name.find(fragment) != std::string::npos) return true;
  return false;
}

// sum_{k=tau}^t alpha_k d_k prod_{l=k+1}^t (1 - alpha_l d_l) (k + t0)^-omega by
// explicit products.
double lemma7_direct(const Lemma7Params& p, const Eigen::VectorXd& d, std::int64_t t) {
  double total = 0.0;
  for (std::int64_t k = p.tau; k <= t; ++k) {
    double b = p.h / (k + p.t0) * d(k);
    for (std::int64_t l = k + 1; l <= t; ++l) b *= 1 - p.h / (l + p.t0) * d(l);
    total += b * std::pow(k + p.t0, -p.omega);
  }
  return total;
}

}  // namespace

TEST_CASE("general bound reference value") {
  const BoundValue v = theorem1_rhs(t1_reference());
  CHECK_FALSE(v.advisory);
  CHECK(v.value == doctest::Approx(17.5486666668203163).epsilon(1e-12));
}

TEST_CASE("Q-learning bound reference value") {
  const BoundValue v = theorem2_rhs(t2_reference());
  CHECK_FALSE(v.advisory);
  CHECK(v.value == doctest::Approx(34.6837999987469887).epsilon(1e-12));
}

TEST_CASE("step-size conditions for the general bound") {
  Theorem1Inputs in = t1_reference();
  in.tau = 8;
  CHECK(validate_stepsize_t1(in).pass);

  in.h = 1;
  in.t0 = 64;
  const StepsizeReport bad_h = validate_stepsize_t1(in);
  CHECK_FALSE(bad_h.pass);
  CHECK(has_failing(bad_h, "h"));
  CHECK(theorem1_rhs(in).advisory);

  in = t1_reference();
  in.t0 = 4 * in.h - 1;
  const StepsizeReport bad_t0 = validate_stepsize_t1(in);
  CHECK_FALSE(bad_t0.pass);
  CHECK(has_failing(bad_t0, "t0"));
  for (const auto& c : bad_t0.conditions) CHECK(c.holds == (c.margin() >= 0));
}

TEST_CASE("step-size conditions for the Q-learning bound") {
  Theorem2Inputs in = t2_reference();
  CHECK(validate_stepsize_t2(in).pass);
  in.h = 15.9;
  CHECK_FALSE(validate_stepsize_t2(in).pass);
  in = t2_reference();
  in.t_mix = 40;  // tau = 80 > 4h
  CHECK_FALSE(validate_stepsize_t2(in).pass);
  CHECK(theorem2_rhs(in).advisory);
}

TEST_CASE("input validation") {
  Theorem1Inputs in = t1_reference();
  in.delta = 1.0;
  CHECK_THROWS_AS(theorem1_rhs(in), InputError);
  in = t1_reference();
  in.T = 0.5;
  CHECK_THROWS_AS(theorem1_rhs(in), InputError);
  in = t1_reference();
  in.x_bar = -1;
  CHECK_THROWS_AS(theorem1_rhs(in), InputError);
  Theorem2Inputs q = t2_reference();
  q.mu_min = 0.0;
  CHECK_THROWS_AS(theorem2_rhs(q), InputError);
  q = t2_reference();
  q.delta = 0.0;
  CHECK_THROWS_AS(theorem2_rhs(q), InputError);
}

TEST_CASE("general bound: monotone in T, delta and tau") {
  Theorem1Inputs in = t1_reference();
  double prev = INFINITY;
  for (double T = 1e4; T <= 1e12; T *= 1.5) {
    in.T = T;
    const double v = theorem1_rhs(in).value;
    CHECK(v < prev);
    prev = v;
  }
  in = t1_reference();
  for (double delta : {0.5, 0.2, 0.05, 0.01, 1e-4}) {
    in.delta = delta;
    const double v = theorem1_rhs(in).value;
    in.delta = delta / 2;
    CHECK(theorem1_rhs(in).value > v);
  }
  in = t1_reference();
  prev = 0.0;
  for (double tau = 1; tau <= 64; tau += 1) {
    in.tau = tau;
    const double v = theorem1_rhs(in).value;
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("Q-learning bound: linear in r_bar, vanishing in T") {
  Theorem2Inputs in = t2_reference();
  const double v = theorem2_rhs(in).value;
  in.r_bar = 2;
  CHECK(theorem2_rhs(in).value == 2 * v);
  in = t2_reference();
  double prev = INFINITY;
  for (double T = 1e3; T <= 1e20; T *= 10) {
    in.T = T;
    const double x = theorem2_rhs(in).value;
    CHECK(x < prev);
    prev = x;
  }
  CHECK(prev < 1e-4 * v);
}

TEST_CASE("Q-learning bound dominates the substituted general bound") {
  for (double gamma : {0.0, 0.5, 0.9, 0.99}) {
    for (double mu : {0.05, 0.2, 0.5, 1.0}) {
      for (double T : {1e3, 1e6, 1e9}) {
        Theorem2Inputs q = t2_reference();
        q.gamma = gamma;
        q.mu_min = mu;
        q.t_mix = 3;
        q.h = 4 / (mu * (1 - gamma));
        q.t0 = std::max(4 * q.h, double(exploration_tau(mu, q.t_mix)));
        q.T = T;
        q.n_sa = 12;
        const double v2 = theorem2_rhs(q).value;
        const double v1 = theorem1_rhs(substituted(q)).value;
        CHECK(v2 >= v1);
        // The gap is only the rounding of the constants: (5 - gamma) vs 5.
        CHECK(v2 <= v1 * 5.0 / (5.0 - gamma) * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("sample complexity") {
  Theorem2Inputs in = t2_reference();
  const SampleComplexity one = sample_complexity_t2(in, 1.0);
  CHECK(one.T == 1650955010);
  in.T = static_cast<double>(one.T);
  CHECK(theorem2_rhs(in).value <= 1.0);
  in.T = static_cast<double>(one.T - 1);
  CHECK(theorem2_rhs(in).value > 1.0);
  // r^2 t_mix / ((1 - gamma)^5 mu^2 eps^2) = 4 * 32 * 4
  CHECK(one.asymptotic == doctest::Approx(512.0).epsilon(1e-14));

  in = t2_reference();
  const double eps = theorem2_rhs(in).value;
  CHECK(sample_complexity_t2(in, eps).T <= 1000000);

  const SampleComplexity a = sample_complexity_t2(in, 0.5);
  const SampleComplexity b = sample_complexity_t2(in, 0.25);
  const double ratio = double(b.T) / double(a.T);
  MESSAGE("T(eps/2) / T(eps) = " << ratio);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);

  in.T = 1;
  const double at_one = theorem2_rhs(in).value;
  CHECK(sample_complexity_t2(in, at_one * 2).T == 1);

  CHECK_THROWS_AS(sample_complexity_t2(in, 1e-12), UnattainableError);
  CHECK_THROWS_AS(sample_complexity_t2(in, 0.0), InputError);
}

TEST_CASE("beta examples") {
  const BetaPair diag = beta(7, 7, 4, 16, 0.5);
  CHECK(diag.beta == 4.0 / 23.0);
  CHECK(diag.beta_tilde == 1.0);
  const BetaPair b = beta(4, 5, 4, 16, 0.5);
  CHECK(b.beta == doctest::Approx(0.180952380952381).epsilon(1e-14));
  CHECK_THROWS_AS(beta(6, 5, 4, 16, 0.5), InputError);
  CHECK_THROWS_AS(beta(0, 5, 4, 1, 0.5), ScheduleError);  // sigma alpha_1 = 1
}

TEST_CASE("beta: telescoping, range and the per-term bound") {
  Rng rng(71);
  for (int n = 0; n < 300; ++n) {
    const double sigma = uniform(rng, 0.05, 0.9);
    const double h = uniform(rng, 2.01, 10.0) / sigma;
    const double t0 = 4 * h + uniform(rng, 0.0, 50.0);
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng() % 2000);
    const std::int64_t k = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(t));
    const BetaPair p = beta(k, t, h, t0, sigma);
    const BetaPair q = beta(k - 1, t, h, t0, sigma);
    CHECK(p.beta_tilde > 0.0);
    CHECK(p.beta_tilde <= 1.0);
    CHECK(q.beta_tilde == doctest::Approx(p.beta_tilde * (1 - h / (k + t0) * sigma)).epsilon(1e-12));
    const double bound =
        h / (k + t0) * std::pow((k + 1 + t0) / (t + 1 + t0), sigma * h);
    CHECK(p.beta <= bound * (1 + 1e-12));
  }
}

TEST_CASE("step-size product inequalities: examples") {
  const Lemma3Report r = lemma3_check(16, 64, 0.25, 2, {100, 1000, 10000});
  CHECK(r.preconditions_met);
  CHECK(r.pass);
  CHECK(r.worst_a_margin >= 0.0);
  CHECK(r.worst_b_margin > 0.0);
  CHECK(r.worst_c_margin > 0.0);
  REQUIRE(r.rows.size() == 3);
  const Lemma3Row& at100 = r.rows[0];
  MESSAGE("part (b) at t=100: lhs " << at100.b_lhs << " rhs " << at100.b_rhs);
  CHECK(at100.b_lhs == doctest::Approx(0.224778849256422902).epsilon(1e-12));
  CHECK(at100.b_rhs == doctest::Approx(0.775757575757575758).epsilon(1e-14));
  CHECK(at100.b_lhs <= at100.b_rhs);

  const Lemma3Report edge = lemma3_check(8, 64, 0.25, 2, {100});
  CHECK_FALSE(edge.preconditions_met);
  CHECK_FALSE(edge.pass);
  CHECK(edge.reason.find("h") != std::string::npos);

  const Lemma3Report small_t0 = lemma3_check(16, 63, 0.25, 2, {100});
  CHECK_FALSE(small_t0.preconditions_met);
}

TEST_CASE("step-size product inequalities on a parameter grid") {
  for (double sigma : {0.1, 0.25, 0.5}) {
    for (double scale : {2.1, 3.0, 6.0}) {
      for (std::int64_t tau : {1, 5, 20}) {
        const double h = scale / sigma;
        const double t0 = std::max(4 * h, double(tau));
        const Lemma3Report r = lemma3_check(h, t0, sigma, tau, {50, 500, 3000});
        CHECK(r.pass);
      }
    }
  }
}

TEST_CASE("weighted step-size sum recurrence matches explicit products") {
  Rng rng(72);
  Lemma7Params p;
  p.sigma = 0.25;
  p.gamma = 0.3;
  p.h = 10;
  p.t0 = 40;
  p.tau = 4;
  for (double omega : {0.5, 1.0}) {
    p.omega = omega;
    for (const auto& d : sample_d_sequences(p.sigma, 301, 20, rng)) {
      for (std::int64_t t : {4, 10, 300}) {
        CHECK(lemma7_lhs(p, d, t) == doctest::Approx(lemma7_direct(p, d, t)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("weighted step-size sum checks") {
  Lemma7Params p;
  p.sigma = 0.25;
  p.gamma = 0.3;
  p.h = 10;  // sigma h (1 - sqrt(gamma)) = 1.13
  p.t0 = 40;
  p.tau = 4;
  const std::vector<std::int64_t> ts = {100, 1000};
  Rng rng(73);
  for (double omega : {0.5, 1.0}) {
    p.omega = omega;
    const Lemma7Report c =
        lemma7_check(p, {Eigen::VectorXd::Constant(1001, p.sigma), Eigen::VectorXd::Ones(1001)}, ts);
    CHECK(c.preconditions_met);
    CHECK(c.pass);
    const Lemma7Report r = lemma7_check(p, sample_d_sequences(p.sigma, 1001, 1000, rng), ts);
    CHECK(r.pass);
    CHECK(r.sequences == 1000);
    CHECK(r.max_ratio < 1.0);
    CHECK(lemma7_rhs(p, 100) == doctest::Approx(1 / (std::sqrt(0.3) * std::pow(141.0, omega))));
  }

  Lemma7Params weak = p;
  weak.h = 0.5 / (weak.sigma * (1 - std::sqrt(weak.gamma)));
  const Lemma7Report w = lemma7_check(weak, {Eigen::VectorXd::Ones(101)}, {100});
  CHECK_FALSE(w.preconditions_met);
  CHECK_FALSE(w.pass);

  Lemma7Params big_step = p;
  big_step.t0 = 15;  // alpha_0 = 2/3
  CHECK_FALSE(lemma7_check(big_step, {Eigen::VectorXd::Ones(101)}, {100}).preconditions_met);

  CHECK_THROWS_AS(lemma7_check(p, {Eigen::VectorXd::Constant(1001, 0.1)}, ts), InputError);
  CHECK_THROWS_AS(lemma7_check(p, {Eigen::VectorXd::Ones(50)}, ts), DimensionError);
}

TEST_CASE("shifted Azuma examples") {
  const AzumaResult zero = shifted_azuma_mc(3, AzumaProcess::kZero, 1000, 0.05, 1000, 1);
  CHECK(zero.exceedances == 0);
  CHECK(zero.holds);

  const AzumaResult iid = shifted_azuma_mc(1, AzumaProcess::kRademacher, 1000, 0.05, 10000, 2);
  CHECK(iid.rate <= 0.05);
  CHECK(iid.threshold == doctest::Approx(std::sqrt(2 * 1001 * std::log(40.0))).epsilon(1e-14));
  MESSAGE("i.i.d. Rademacher exceedance rate " << iid.rate);

  const AzumaResult inter = shifted_azuma_mc(5, AzumaProcess::kInterleaved, 1000, 0.05, 10000, 3);
  CHECK(inter.rate <= 0.05);
}

TEST_CASE("shifted Azuma contract for every built-in process") {
  for (AzumaProcess proc : all_azuma_processes()) {
    CHECK(azuma_process_from_string(to_string(proc)) == proc);
    for (std::int64_t tau : {1, 2, 5}) {
      const AzumaResult r = shifted_azuma_mc(tau, proc, 500, 0.05, 4000, 17);
      CHECK(r.holds);
      CHECK(r.rate <= r.limit);
    }
  }
  CHECK_THROWS_AS(azuma_process_from_string("brownian"), InputError);
  const AzumaResult a = shifted_azuma_mc(2, AzumaProcess::kMovingAverage, 200, 0.1, 500, 9);
  const AzumaResult b = shifted_azuma_mc(2, AzumaProcess::kMovingAverage, 200, 0.1, 500, 9);
  CHECK(a.exceedances == b.exceedances);
}
