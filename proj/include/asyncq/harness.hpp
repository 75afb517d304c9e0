#pragma once

// Experiment configuration, replication runner, trace persistence, rate
// fitting and step-size sweeps.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asyncq/bounds.hpp"
#include "asyncq/chain.hpp"
#include "asyncq/mdp.hpp"
#include "asyncq/qlearning.hpp"
#include "asyncq/sa.hpp"

namespace asyncq {

struct GeneratorSpec {
  Eigen::Index n_states = 3;
  Eigen::Index n_actions = 2;
  double gamma = 0.8;
  double r_bar = 1.0;
  double mix_eps = 0.5;
  double noise_fraction = 0.2;
  NoiseKind noise_kind = NoiseKind::kUniform;
  std::uint64_t seed = 0;
};

// "kind" is one of theorem, rescaled_linear, linear, polynomial, constant,
// per_coordinate. "theorem" resolves to h = 2 / (sigma (1 - gamma)),
// t0 = max(4h, tau) once the MDP is known.
struct ScheduleSpec {
  std::string kind = "theorem";
  double h = 0.0;
  double t0 = 0.0;
  double omega = 1.0;
  double alpha = 0.1;
  std::string label;  // defaults to kind
};

enum class RunMode { kAsync, kSync };

struct ExperimentConfig {
  nlohmann::json source;  // echo of the parsed document
  // Exactly one of these is set.
  std::optional<std::string> mdp_file;
  std::optional<nlohmann::json> mdp_inline;
  std::optional<GeneratorSpec> mdp_generator;

  std::vector<ScheduleSpec> schedules;  // at least one
  std::int64_t T = 1;
  bool use_geometric_checkpoints = true;
  std::vector<std::int64_t> checkpoints;  // used when not geometric
  std::int64_t replications = 1;
  std::uint64_t base_seed = 0;
  double delta = 0.05;
  RunMode mode = RunMode::kAsync;
  std::string output;
  int workers = 1;

  std::vector<std::int64_t> resolved_checkpoints() const;
};

// Rejects unknown fields at every level.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Everything derived from the MDP once per experiment and shared read-only
// by the replications.
struct ExperimentSetup {
  MdpModel mdp;
  BehaviorPolicy policy;
  ExplorationParams exploration;
  QStarSolution qstar;
  std::shared_ptr<const QTable> qstar_table;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& config);

StepSchedule resolve_schedule(const ScheduleSpec& spec, const ExperimentSetup& setup);

// True for a rescaled-linear schedule meeting both step-size conditions of
// the Q-learning bound.
bool schedule_is_compliant(const StepSchedule& schedule, const ExperimentSetup& setup);

struct TraceRow {
  std::int64_t replication = 0;
  std::int64_t t = 0;
  double error = 0.0;
  double alpha = 0.0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct ExperimentResult {
  std::vector<TraceRow> rows;  // replication-major, t increasing
  nlohmann::json meta;
  double max_q_norm = 0.0;
  double max_abs_noise = 0.0;
  std::int64_t steps_checked = 0;
};

// Runs config.replications independent runs with seed
// derive_seed(base_seed, index). Replications may run on several threads;
// rows are always in replication order. A failing replication aborts the
// experiment and the error names its index.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::size_t schedule_index = 0);
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentSetup& setup,
                                std::size_t schedule_index = 0);

// <prefix>.csv and <prefix>.meta.json. Removes both if either write fails.
void write_experiment(const ExperimentResult& result, const std::string& prefix);

std::string trace_csv(const std::vector<TraceRow>& rows);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path);
std::vector<TraceRow> parse_trace_csv(const std::string& text);
std::vector<TraceRow> read_trace_csv(const std::string& path);
nlohmann::json read_json_file(const std::string& path);

// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

// Q-learning bound right-hand side at each checkpoint, recomputed from a metadata
// sidecar rather than read from it.
std::vector<double> bound_overlay(const nlohmann::json& meta);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS residual of the log-log fit
  std::size_t points = 0;
};

// Median error per checkpoint across replications, then least squares of
// log(error) on log(t) over t in [t_min, t_max]. Missing bounds default to
// [T/100, T] with T the last checkpoint.
RateFit fit_rate(const std::vector<TraceRow>& rows,
                 std::optional<double> t_min = std::nullopt,
                 std::optional<double> t_max = std::nullopt);

// Median across replications of the error at the last checkpoint.
double final_median_error(const std::vector<TraceRow>& rows);

struct SweepRow {
  std::string label;
  std::string schedule;  // StepSchedule::describe()
  double final_median_error = 0.0;
  double slope = 0.0;  // NaN when the fit is degenerate
  bool compliant = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<ExperimentResult> runs;  // one per schedule
};

// Every schedule runs on the same MDP and the same replication seeds.
SweepResult sweep_stepsizes(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);
// <prefix>.sweep.csv plus <prefix>.<i>.csv / .meta.json per schedule.
void write_sweep(const SweepResult& sweep, const std::string& prefix);

// Verification grids. Each report carries "pass" and one entry per grid
// point. The default grids are h in {2.5, 4, 8} / sigma, sigma in
// {0.1, 0.25}, tau in {1, 4, 16}, t in {1e2, 1e3, 1e4} (the weighted-sum check adds
// gamma = 0.3 and omega in {0.5, 1}), and tau in {1, 2, 5}, t = 1e3,
// delta = 0.05 for the Azuma check. `small` shrinks them for smoke tests.
nlohmann::json verify_lemma3_grid(bool small);
nlohmann::json verify_lemma7_grid(bool small, std::int64_t sequences, std::uint64_t seed);
nlohmann::json verify_azuma_grid(bool small, std::int64_t trials, std::uint64_t seed);

}  // namespace asyncq
