// asyncq command line: solve, chain, run, bound, rate, sweep, verify.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "asyncq/bounds.hpp"
#include "asyncq/chain.hpp"
#include "asyncq/errors.hpp"
#include "asyncq/harness.hpp"
#include "asyncq/mdp.hpp"

using nlohmann::json;
namespace aq = asyncq;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string output;
};

json matrix_json(const aq::RowMatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json report_json(const aq::StepsizeReport& r) {
  json conds = json::array();
  for (const auto& c : r.conditions) {
    conds.push_back({{"condition", c.name},
                     {"lhs", c.lhs},
                     {"rhs", c.rhs},
                     {"margin", c.margin()},
                     {"holds", c.holds}});
  }
  return {{"pass", r.pass}, {"conditions", conds}};
}

aq::ExperimentConfig config_with_overrides(const std::string& path, const Globals& g) {
  aq::ExperimentConfig c = aq::load_config(path);
  if (g.seed) c.base_seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  if (!g.output.empty()) c.output = g.output;
  if (c.output.empty()) throw aq::InputError("no output prefix: set 'output' or --output");
  return c;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous Q-learning and stochastic approximation experiments"};
  app.require_subcommand(1);
  // Global flags may follow the subcommand.
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--workers", g.workers, "Replication worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Output prefix (overrides the config)");

  std::string mdp_path;
  auto* solve = app.add_subcommand("solve", "Solve Q* for an MDP file by value iteration");
  solve->add_option("mdp", mdp_path, "MDP JSON file")->required();
  double solve_tol = 1e-10;
  solve->add_option("--tol", solve_tol, "Guaranteed ||Q - Q*||_inf");

  auto* chain = app.add_subcommand("chain", "Exploration constants of the induced chain");
  chain->add_option("mdp", mdp_path, "MDP JSON file")->required();

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "Compare step-size schedules on one config");
  sweep->add_option("config", config_path, "Experiment JSON")->required();

  auto* bound = app.add_subcommand("bound", "Evaluate a finite-time bound");
  bound->require_subcommand(1);
  aq::Theorem1Inputs t1;
  auto* bt1 = bound->add_subcommand("t1", "Contraction SA bound");
  bt1->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  bt1->add_option("--gamma", t1.gamma)->required();
  bt1->add_option("--sigma", t1.sigma)->required();
  bt1->add_option("--tau", t1.tau)->required();
  bt1->add_option("--h", t1.h)->required();
  bt1->add_option("--t0", t1.t0)->required();
  bt1->add_option("--delta", t1.delta)->required();
  bt1->add_option("--n", t1.n)->required();
  bt1->add_option("--C", t1.C)->required();
  bt1->add_option("--w-bar,--w_bar", t1.w_bar)->required();
  bt1->add_option("--v-min,--v_min", t1.v_min)->required();
  bt1->add_option("--x-bar,--x_bar", t1.x_bar)->required();
  bt1->add_option("--T", t1.T)->required();
  aq::Theorem2Inputs t2;
  std::optional<double> epsilon;
  auto* bt2 = bound->add_subcommand("t2", "Q-learning bound");
  bt2->set_help_flag("--help", "Print this help message and exit");
  bt2->add_option("--r-bar,--r_bar", t2.r_bar)->required();
  bt2->add_option("--gamma", t2.gamma)->required();
  bt2->add_option("--mu-min,--mu_min", t2.mu_min)->required();
  bt2->add_option("--t-mix,--t_mix", t2.t_mix)->required();
  bt2->add_option("--h", t2.h)->required();
  bt2->add_option("--t0", t2.t0)->required();
  bt2->add_option("--delta", t2.delta)->required();
  bt2->add_option("--n-sa,--n_sa", t2.n_sa)->required();
  bt2->add_option("--T", t2.T, "Horizon (ignored with --epsilon)");
  bt2->add_option("--epsilon", epsilon, "Also report the T needed for this accuracy");

  std::string trace_path;
  std::optional<double> t_min;
  std::optional<double> t_max;
  auto* rate = app.add_subcommand("rate", "Fit the log-log convergence slope of a trace");
  rate->add_option("trace", trace_path, "Trace CSV")->required();
  rate->add_option("--t-min", t_min);
  rate->add_option("--t-max", t_max);

  auto* verify = app.add_subcommand("verify", "Numerically check the step-size and Azuma lemmas");
  std::string which;
  std::string grid = "default";
  std::int64_t sequences = 1000;
  std::int64_t trials = 10000;
  verify->add_option("what", which, "lemma3 | lemma7 | azuma")
      ->required()
      ->check(CLI::IsMember({"lemma3", "lemma7", "azuma"}));
  verify->add_option("--grid", grid, "default | small")
      ->check(CLI::IsMember({"default", "small"}));
  verify->add_option("--sequences", sequences, "Random d-sequences per grid point");
  verify->add_option("--trials", trials, "Monte Carlo trials per process");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve) {
      const aq::MdpFile f = aq::load_mdp_file(mdp_path);
      const aq::QStarSolution s = aq::solve_qstar_detailed(f.mdp, solve_tol);
      print({{"q_star", matrix_json(s.q)},
             {"iterations", s.iterations},
             {"residual", s.residual}});
    } else if (*chain) {
      const aq::MdpFile f = aq::load_mdp_file(mdp_path);
      const aq::MarkovChain c = aq::induced_chain(f.mdp, f.policy);
      const Eigen::VectorXd mu = aq::stationary_distribution(c);
      const aq::ExplorationParams ex = aq::exploration_params(c);
      print({{"stationary", std::vector<double>(mu.data(), mu.data() + mu.size())},
             {"mu_min", ex.mu_min},
             {"t_mix", ex.t_mix},
             {"sigma", ex.sigma},
             {"tau", ex.tau}});
    } else if (*run) {
      const aq::ExperimentConfig c = config_with_overrides(config_path, g);
      const aq::ExperimentResult r = aq::run_experiment(c);
      aq::write_experiment(r, c.output);
      json summary = {{"csv", c.output + ".csv"},
                      {"meta", c.output + ".meta.json"},
                      {"rows", r.rows.size()},
                      {"final_median_error", aq::final_median_error(r.rows)},
                      {"max_q_norm", r.max_q_norm},
                      {"max_abs_noise", r.max_abs_noise}};
      print(summary);
    } else if (*sweep) {
      const aq::ExperimentConfig c = config_with_overrides(config_path, g);
      const aq::SweepResult s = aq::sweep_stepsizes(c);
      aq::write_sweep(s, c.output);
      std::cout << aq::sweep_csv(s.rows);
    } else if (*bound) {
      if (*bt1) {
        const aq::BoundValue v = aq::theorem1_rhs(t1);
        print({{"value", v.value},
               {"advisory", v.advisory},
               {"stepsize", report_json(aq::validate_stepsize_t1(t1))}});
      } else {
        json out;
        if (epsilon) {
          const aq::SampleComplexity sc = aq::sample_complexity_t2(t2, *epsilon);
          out["epsilon"] = *epsilon;
          out["T"] = sc.T;
          out["asymptotic"] = sc.asymptotic;
        } else {
          const aq::BoundValue v = aq::theorem2_rhs(t2);
          out["value"] = v.value;
          out["advisory"] = v.advisory;
        }
        out["tau"] = aq::exploration_tau(t2.mu_min, t2.t_mix);
        out["stepsize"] = report_json(aq::validate_stepsize_t2(t2));
        print(out);
      }
    } else if (*rate) {
      const auto rows = aq::read_trace_csv(trace_path);
      const aq::RateFit f = aq::fit_rate(rows, t_min, t_max);
      print({{"slope", f.slope},
             {"intercept", f.intercept},
             {"residual", f.residual},
             {"points", f.points}});
    } else if (*verify) {
      const bool small = grid == "small";
      const std::uint64_t seed = g.seed.value_or(0);
      json r;
      if (which == "lemma3") {
        r = aq::verify_lemma3_grid(small);
      } else if (which == "lemma7") {
        r = aq::verify_lemma7_grid(small, sequences, seed);
      } else {
        r = aq::verify_azuma_grid(small, trials, seed);
      }
      print(r);
      // A failed numeric check of a proven inequality is a broken invariant.
      if (!r.at("pass").get<bool>()) return 3;
    }
  } catch (const aq::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const aq::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const aq::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
