// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asyncq/bounds.hpp"
#include "asyncq/chain.hpp"
#include "asyncq/harness.hpp"
#include "asyncq/mdp.hpp"
#include "asyncq/norms.hpp"
#include "asyncq/qlearning.hpp"

using namespace asyncq;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %-28s %s  %s (%.1fs)\n", id, name.c_str(), o.pass ? "PASS" : "FAIL",
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

template <typename... Args>
std::string fmt(Args&&... args) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << args);
  return os.str();
}

// Dense log-spaced checkpoints 10^(k/10), k = 0..60.
std::vector<std::int64_t> log_checkpoints() {
  std::vector<std::int64_t> out;
  for (int k = 0; k <= 60; ++k) {
    const auto t = static_cast<std::int64_t>(std::llround(std::pow(10.0, k / 10.0)));
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

json main_config(std::int64_t replications) {
  json cps = log_checkpoints();
  return {{"mdp",
           {{"generator",
             {{"n_states", 3},
              {"n_actions", 2},
              {"gamma", 0.8},
              {"r_bar", 1.0},
              {"mix_eps", 0.5},
              {"noise_fraction", 0.2},
              {"noise_kind", "uniform"},
              {"seed", 7}}}}},
          {"schedule", {{"kind", "theorem"}}},
          {"T", 1000000},
          {"checkpoints", cps},
          {"replications", replications},
          {"base_seed", 1},
          {"delta", 0.05}};
}

json blowup_config() {
  return {{"mdp",
           {{"generator",
             {{"n_states", 3},
              {"n_actions", 2},
              {"gamma", 0.95},
              {"r_bar", 1.0},
              {"mix_eps", 0.5},
              {"seed", 7}}}}},
          {"schedules", {{{"kind", "linear"}}, {{"kind", "theorem"}}}},
          {"T", 100000},
          {"replications", 11},
          {"base_seed", 3}};
}

double sup(const QTable& q) { return q.cwiseAbs().maxCoeff(); }

// Generated MDPs used by the oracle and contraction criteria.
std::vector<MdpModel> generated_mdps() {
  std::vector<MdpModel> out;
  for (const json& cfg : {main_config(1), blowup_config()}) {
    out.push_back(prepare_experiment(parse_config(cfg)).mdp);
  }
  Rng rng(2024);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index ns = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index na = 1 + static_cast<Eigen::Index>(rng() % 4);
    const double gamma = uniform(rng, 0.0, 0.99);
    auto [m, pi] = random_mdp(ns, na, gamma, uniform(rng, 0.5, 3.0), uniform(rng, 0.05, 1.0), rng);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

int main() {
  const std::vector<MdpModel> mdps = generated_mdps();

  // Criteria 1-3 share one 200-replication run; the first 21 give the rate.
  // The sweep feeds criteria 3 and 10.
  ExperimentResult big;
  SweepResult sweep;
  std::string big_error;
  try {
    ExperimentConfig c = parse_config(main_config(200));
    big = run_experiment(c);
  } catch (const std::exception& e) {
    big_error = e.what();
  }
  std::string sweep_error;
  try {
    sweep = sweep_stepsizes(parse_config(blowup_config()));
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }

  report(1, "convergence rate", [&]() -> Outcome {
    if (!big_error.empty()) return {false, big_error};
    std::vector<TraceRow> first;
    for (const TraceRow& r : big.rows)
      if (r.replication < 21) first.push_back(r);
    const RateFit f = fit_rate(first, 1e4, 1e6);
    return {f.slope >= -0.70 && f.slope <= -0.30,
            fmt("slope ", f.slope, " over [1e4, 1e6], ", f.points, " checkpoints, 21 reps")};
  });

  report(2, "high-probability bound", [&]() -> Outcome {
    if (!big_error.empty()) return {false, big_error};
    const double rhs = bound_overlay(big.meta).back();
    std::int64_t above = 0, total = 0;
    double worst = 0.0;
    for (const TraceRow& r : big.rows) {
      if (r.t != 1000000) continue;
      ++total;
      worst = std::max(worst, r.error);
      if (r.error > rhs) ++above;
    }
    const double frac = double(above) / double(total);
    return {total == 200 && frac <= 0.05,
            fmt(above, "/", total, " above bound ", rhs, " (largest error ", worst, ")")};
  });

  report(3, "trajectory invariants", [&]() -> Outcome {
    if (!big_error.empty()) return {false, big_error};
    // Runs throw on the first violating step; reaching here means none.
    bool ok = big.max_q_norm <= 5.0 + 1e-12 && big.max_abs_noise <= 10.0 + 1e-12;
    std::int64_t steps = big.steps_checked;
    double q_ratio = big.max_q_norm / 5.0, w_ratio = big.max_abs_noise / 10.0;
    for (const ExperimentResult& r : sweep.runs) {
      ok = ok && r.max_q_norm <= 20.0 + 1e-12 && r.max_abs_noise <= 40.0 + 1e-12;
      steps += r.steps_checked;
      q_ratio = std::max(q_ratio, r.max_q_norm / 20.0);
      w_ratio = std::max(w_ratio, r.max_abs_noise / 40.0);
    }
    return {ok && !sweep.runs.empty(),
            fmt(steps, " steps checked, max ||Q||/x_bar ", q_ratio, ", max |w|/w_bar ", w_ratio)};
  });

  report(4, "induced matrix norm", [&]() -> Outcome {
    Rng rng(4);
    double worst_excess = -INFINITY, worst_rel = 0.0;
    for (int m = 0; m < 100; ++m) {
      Eigen::VectorXd v(5);
      for (Eigen::Index i = 0; i < 5; ++i) v(i) = uniform(rng, 0.1, 5.0);
      const WeightVector w(v);
      Eigen::MatrixXd a(5, 5);
      for (Eigen::Index i = 0; i < 25; ++i) a.data()[i] = uniform(rng, -3.0, 3.0);
      const double norm = induced_matrix_norm(a, w);
      for (int k = 0; k < 10000; ++k) {
        Eigen::VectorXd x(5);
        for (Eigen::Index i = 0; i < 5; ++i) x(i) = v(i) * uniform(rng, -1.0, 1.0);
        x /= weighted_norm(x, w);
        worst_excess = std::max(worst_excess, weighted_norm(Eigen::VectorXd(a * x), w) - norm);
      }
      const Eigen::VectorXd s = norm_achieving_vector(a, w);
      worst_rel = std::max(worst_rel,
                           std::abs(weighted_norm(Eigen::VectorXd(a * s), w) - norm) / norm);
    }
    return {worst_excess <= 1e-9 && worst_rel <= 1e-12,
            fmt("max sampled excess ", worst_excess, ", sign-vector rel. gap ", worst_rel)};
  });

  report(5, "Q* oracle", [&]() -> Outcome {
    double worst_closed = 0.0;
    for (double r : {1.0, -0.5, 2.0})
      for (double gamma : {0.0, 0.5, 0.9, 0.99}) {
        const MdpModel m(1, 1, RowMatrixXd::Ones(1, 1), RowMatrixXd::Constant(1, 1, r), {}, gamma,
                         std::abs(r));
        worst_closed = std::max(worst_closed, std::abs(solve_qstar(m, 1e-10)(0, 0) - r / (1 - gamma)));
      }
    double worst_residual = 0.0;
    for (const MdpModel& m : mdps) {
      const QTable q = solve_qstar(m, 1e-10);
      worst_residual = std::max(worst_residual, sup(bellman(q, m) - q));
    }
    return {worst_closed <= 1e-10 && worst_residual <= 1e-10,
            fmt("closed-form gap ", worst_closed, ", max residual ", worst_residual, " over ",
                mdps.size(), " MDPs")};
  });

  report(6, "Bellman contraction", [&]() -> Outcome {
    Rng rng(6);
    double worst_c = -INFINITY, worst_a = -INFINITY;
    for (const MdpModel& m : mdps) {
      const double g = m.gamma();
      const double scale = 2 * m.r_bar() / (1 - g);
      auto draw = [&] {
        QTable q(m.n_states(), m.n_actions());
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = uniform(rng, -scale, scale);
        return q;
      };
      for (int k = 0; k < 1000; ++k) {
        const QTable q1 = draw(), q2 = draw();
        const QTable f1 = bellman(q1, m), f2 = bellman(q2, m);
        worst_c = std::max(worst_c, sup(f1 - f2) - g * sup(q1 - q2));
        worst_a = std::max(worst_a, sup(f1) - (m.r_bar() + g * sup(q1)));
      }
    }
    return {worst_c <= 1e-12 && worst_a <= 1e-12,
            fmt("max contraction excess ", worst_c, ", max growth excess ", worst_a)};
  });

  report(7, "step-size inequality grids", [&]() -> Outcome {
    const json l3 = verify_lemma3_grid(false);
    const json l7 = verify_lemma7_grid(false, 1000, 7);
    return {l3.at("pass").get<bool>() && l7.at("pass").get<bool>(),
            fmt(l3.at("points").size(), " product-inequality points, worst margin ",
                l3.at("worst_margin").get<double>(), "; ", l7.at("points").size(),
                " weighted-sum points, max ratio ", l7.at("max_ratio").get<double>())};
  });

  report(8, "shifted Azuma", [&]() -> Outcome {
    const json az = verify_azuma_grid(false, 10000, 8);
    double worst = 0.0;
    for (const json& p : az.at("points"))
      worst = std::max(worst, p.at("rate").get<double>() / p.at("limit").get<double>());
    return {az.at("pass").get<bool>(),
            fmt(az.at("points").size(), " (tau, process) pairs, max rate/limit ", worst)};
  });

  report(9, "mixing-time oracle", [&]() -> Outcome {
    RowMatrixXd p(2, 2);
    p << 0.9, 0.1, 0.1, 0.9;
    const MarkovChain c(p);
    const ExplorationParams ex = exploration_params(c);
    const bool ok = ex.t_mix == 4 && std::abs(ex.sigma - 0.25) <= 1e-12 && ex.tau == 8;
    return {ok, fmt("t_mix ", ex.t_mix, ", sigma ", ex.sigma, ", tau ", ex.tau)};
  });

  report(10, "step-size blow-up", [&]() -> Outcome {
    if (!sweep_error.empty()) return {false, sweep_error};
    const double lin = sweep.rows[0].final_median_error;
    const double thm = sweep.rows[1].final_median_error;
    const double ratio = lin / thm;
    return {sweep.rows[1].compliant && lin > thm && ratio >= 2.0,
            fmt("linear ", lin, " vs rescaled ", thm, ", ratio ", ratio)};
  });

  report(11, "determinism", [&]() -> Outcome {
    json small = main_config(8);
    small["T"] = 20000;
    small.erase("checkpoints");
    ExperimentConfig c = parse_config(small);
    const std::string a = trace_csv(run_experiment(c).rows);
    c.workers = 4;
    const std::string b = trace_csv(run_experiment(c).rows);
    json sw = blowup_config();
    sw["T"] = 20000;
    const ExperimentConfig sc = parse_config(sw);
    const SweepResult s1 = sweep_stepsizes(sc);
    const SweepResult s2 = sweep_stepsizes(sc);
    bool same = a == b && sweep_csv(s1.rows) == sweep_csv(s2.rows);
    for (std::size_t i = 0; i < s1.runs.size(); ++i)
      same = same && trace_csv(s1.runs[i].rows) == trace_csv(s2.runs[i].rows);
    return {same, fmt("run (1 vs 4 workers) and sweep traces byte-identical: ", same)};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
