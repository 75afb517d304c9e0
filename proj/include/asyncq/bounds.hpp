#pragma once

// Finite-time error bounds for rescaled-linear step sizes, the step-size
// sequence lemmas they rest on, and a Monte Carlo check of the shifted
// Azuma-Hoeffding inequality.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asyncq/random.hpp"

namespace asyncq {

struct ConditionCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double margin() const { return lhs - rhs; }  // >= 0 when `lhs >= rhs` holds
};

struct StepsizeReport {
  std::vector<ConditionCheck> conditions;
  bool pass = false;
};

struct BoundValue {
  double value = 0.0;
  // Set when the step-size conditions fail; the number is then only the
  // formula evaluated outside its hypotheses.
  bool advisory = false;
};

// Generic contraction setting.
struct Theorem1Inputs {
  double gamma = 0.5;
  double sigma = 0.25;
  double tau = 1.0;
  double h = 1.0;
  double t0 = 1.0;
  double delta = 0.05;
  double n = 1.0;
  double C = 0.0;
  double w_bar = 0.0;
  double v_min = 1.0;
  double x_bar = 0.0;
  double T = 1.0;
};

// h >= 2 / (sigma (1 - gamma)) and t0 >= max(4h, tau).
StepsizeReport validate_stepsize_t1(const Theorem1Inputs& in);
BoundValue theorem1_rhs(const Theorem1Inputs& in);

// Q-learning setting.
struct Theorem2Inputs {
  double r_bar = 1.0;
  double gamma = 0.5;
  double mu_min = 0.5;
  std::int64_t t_mix = 1;
  double h = 1.0;
  double t0 = 1.0;
  double delta = 0.05;
  double n_sa = 1.0;
  double T = 1.0;
};

// h >= 4 / (mu_min (1 - gamma)) and t0 >= max(4h, ceil(log2(2/mu_min)) t_mix).
StepsizeReport validate_stepsize_t2(const Theorem2Inputs& in);
BoundValue theorem2_rhs(const Theorem2Inputs& in);

struct SampleComplexity {
  std::int64_t T = 1;      // first T found with theorem2_rhs(T) <= epsilon
  double asymptotic = 0.0;  // r_bar^2 t_mix / ((1 - gamma)^5 mu_min^2 eps^2)
};

// Ignores in.T. Doubling then bisection; theorem2_rhs decreases in T past
// its early transient. Throws UnattainableError past T = 2^60.
SampleComplexity sample_complexity_t2(const Theorem2Inputs& in, double epsilon);

struct BetaPair {
  double beta = 0.0;        // alpha_k prod_{l=k+1}^t (1 - alpha_l sigma)
  double beta_tilde = 0.0;  // prod_{l=k+1}^t (1 - alpha_l sigma)
};

// Direct products with alpha_l = h / (l + t0). Throws ScheduleError if some
// sigma alpha_l >= 1 in the product.
BetaPair beta(std::int64_t k, std::int64_t t, double h, double t0, double sigma);

struct Lemma3Row {
  std::int64_t t = 0;
  // Smallest relative slack (rhs - lhs) / rhs of the per-(k, t) bounds over
  // k < t. At k = t both bounds are equalities and are only checked for <=.
  double a_margin = 0.0;
  double b_lhs = 0.0, b_rhs = 0.0;
  double c_lhs = 0.0, c_rhs = 0.0;
  bool holds = false;
};

struct Lemma3Report {
  bool preconditions_met = false;
  std::string reason;  // which hypothesis failed
  std::vector<Lemma3Row> rows;
  double worst_a_margin = 0.0;
  double worst_b_margin = 0.0;  // relative
  double worst_c_margin = 0.0;  // relative
  bool pass = false;
};

// Needs h > 2 / sigma strictly and t0 >= max(4h, tau).
Lemma3Report lemma3_check(double h, double t0, double sigma, std::int64_t tau,
                          const std::vector<std::int64_t>& t_values);

struct Lemma7Params {
  double h = 1.0;
  double t0 = 1.0;
  double sigma = 0.5;
  double gamma = 0.5;
  std::int64_t tau = 1;
  double omega = 1.0;
};

struct Lemma7Report {
  bool preconditions_met = false;
  std::string reason;
  std::int64_t sequences = 0;
  double max_ratio = 0.0;  // max LHS / RHS over sequences and t values
  bool pass = false;
};

// sum_{k=tau}^t alpha_k d_k prod_{l=k+1}^t (1 - alpha_l d_l) (k + t0)^-omega,
// by the recurrence e_k = (1 - alpha_k d_k) e_{k-1} + alpha_k d_k (k + t0)^-omega.
// d must hold indices 0..t.
double lemma7_lhs(const Lemma7Params& p, const Eigen::VectorXd& d, std::int64_t t);
double lemma7_rhs(const Lemma7Params& p, std::int64_t t);

// Each sequence must have length >= max(t_values) + 1 with entries in
// [sigma, 1]. Needs sigma h (1 - sqrt(gamma)) >= 1, t0 >= 1, h / t0 <= 1/2 and
// omega in (0, 1].
Lemma7Report lemma7_check(const Lemma7Params& p,
                          const std::vector<Eigen::VectorXd>& d_seqs,
                          const std::vector<std::int64_t>& t_values);

// `count` i.i.d. sequences, entries uniform on [sigma, 1].
std::vector<Eigen::VectorXd> sample_d_sequences(double sigma, std::int64_t length,
                                                std::int64_t count, Rng& rng);

enum class AzumaProcess {
  kZero,
  kRademacher,
  // tau independent streams k = l mod tau; each step is a fresh sign scaled
  // by a magnitude that depends on its own stream's running sum.
  kInterleaved,
  // One sign per block of tau consecutive steps, revealed at the block start.
  kPeriodicReveal,
  // Mean of the last tau i.i.d. signs.
  kMovingAverage,
};

std::string to_string(AzumaProcess p);
AzumaProcess azuma_process_from_string(const std::string& name);
std::vector<AzumaProcess> all_azuma_processes();

struct AzumaResult {
  std::int64_t trials = 0;
  std::int64_t exceedances = 0;
  double rate = 0.0;
  double threshold = 0.0;  // sqrt(2 tau sum Xbar_k^2 log(2 tau / delta))
  double limit = 0.0;      // delta + 3 sqrt(delta (1 - delta) / trials)
  bool holds = false;
};

// Sums X_0..X_t in each trial; trial j uses a generator seeded with
// derive_seed(seed, j).
AzumaResult shifted_azuma_mc(std::int64_t tau, AzumaProcess process, std::int64_t t,
                             double delta, std::int64_t trials, std::uint64_t seed);

}  // namespace asyncq
