#include "asyncq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "asyncq/errors.hpp"

namespace asyncq {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw InputError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("config: unknown field '" + where + key + "'");
    }
  }
}

double num(const json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number()) {
    throw InputError("config: '" + where + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

std::int64_t integer(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw InputError("config: '" + where + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::uint64_t seed_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw InputError("config: '" + where + key + "' must be a nonnegative integer");
}

std::string str(const json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_string()) {
    throw InputError("config: '" + where + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

GeneratorSpec parse_generator(const json& j) {
  const std::string w = "mdp.generator.";
  reject_unknown(j,
                 {"n_states", "n_actions", "gamma", "r_bar", "mix_eps", "noise_fraction",
                  "noise_kind", "seed"},
                 w);
  GeneratorSpec g;
  if (j.contains("n_states")) g.n_states = integer(j, "n_states", w);
  if (j.contains("n_actions")) g.n_actions = integer(j, "n_actions", w);
  if (j.contains("gamma")) g.gamma = num(j, "gamma", w);
  if (j.contains("r_bar")) g.r_bar = num(j, "r_bar", w);
  if (j.contains("mix_eps")) g.mix_eps = num(j, "mix_eps", w);
  if (j.contains("noise_fraction")) g.noise_fraction = num(j, "noise_fraction", w);
  if (j.contains("noise_kind")) g.noise_kind = noise_kind_from_string(str(j, "noise_kind", w));
  if (j.contains("seed")) g.seed = seed_field(j, "seed", w);
  if (g.n_states < 1 || g.n_actions < 1) {
    throw InputError("config: generator needs n_states, n_actions >= 1");
  }
  return g;
}

ScheduleSpec parse_schedule(const json& j, const std::string& where) {
  reject_unknown(j, {"kind", "h", "t0", "omega", "alpha", "label"}, where);
  if (!j.contains("kind")) throw InputError("config: '" + where + "kind' is required");
  ScheduleSpec s;
  s.kind = str(j, "kind", where);
  static const std::vector<std::string> kinds = {
      "theorem", "rescaled_linear", "linear", "polynomial", "constant", "per_coordinate"};
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) {
    throw InputError("config: unknown schedule kind '" + s.kind + "'");
  }
  auto need = [&](const char* key) {
    if (!j.contains(key)) {
      throw InputError("config: schedule '" + s.kind + "' needs '" + key + "'");
    }
    return num(j, key, where);
  };
  if (s.kind == "rescaled_linear" || s.kind == "per_coordinate") {
    s.h = need("h");
    s.t0 = need("t0");
  } else if (s.kind == "polynomial") {
    s.omega = need("omega");
  } else if (s.kind == "constant") {
    s.alpha = need("alpha");
  }
  s.label = j.contains("label") ? str(j, "label", where) : s.kind;
  return s;
}

std::string schedule_kind_of(const StepSchedule& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, RescaledLinear>) return "rescaled_linear";
        if constexpr (std::is_same_v<V, Polynomial>) return "polynomial";
        if constexpr (std::is_same_v<V, Linear>) return "linear";
        if constexpr (std::is_same_v<V, Constant>) return "constant";
        return "per_coordinate";
      },
      s.variant());
}

double theorem_h(const ExperimentSetup& setup) {
  return 2.0 / (setup.exploration.sigma * (1.0 - setup.mdp.gamma()));
}

double theorem_t0(const ExperimentSetup& setup, double h) {
  return std::max(4.0 * h, static_cast<double>(setup.exploration.tau));
}

json schedule_json(const StepSchedule& s) {
  json j;
  j["kind"] = schedule_kind_of(s);
  j["describe"] = s.describe();
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, RescaledLinear> || std::is_same_v<V, PerCoordinate>) {
          j["h"] = v.h;
          j["t0"] = v.t0;
        } else if constexpr (std::is_same_v<V, Polynomial>) {
          j["omega"] = v.omega;
        } else if constexpr (std::is_same_v<V, Constant>) {
          j["alpha"] = v.alpha;
        }
      },
      s.variant());
  return j;
}

Theorem2Inputs overlay_inputs(const json& meta) {
  Theorem2Inputs in;
  in.r_bar = meta.at("r_bar").get<double>();
  in.gamma = meta.at("gamma").get<double>();
  in.mu_min = meta.at("mu_min").get<double>();
  in.t_mix = meta.at("t_mix").get<std::int64_t>();
  in.h = meta.at("bound_h").get<double>();
  in.t0 = meta.at("bound_t0").get<double>();
  in.delta = meta.at("delta").get<double>();
  in.n_sa = meta.at("n_sa").get<double>();
  return in;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// (t, median error) per checkpoint, t increasing.
std::vector<std::pair<std::int64_t, double>> median_by_t(const std::vector<TraceRow>& rows) {
  std::vector<std::pair<std::int64_t, double>> sorted;
  sorted.reserve(rows.size());
  for (const TraceRow& r : rows) sorted.emplace_back(r.t, r.error);
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<std::int64_t, double>> out;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::vector<double> errs;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      errs.push_back(sorted[j].second);
      ++j;
    }
    out.emplace_back(sorted[i].first, median(std::move(errs)));
    i = j;
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.close();
  if (!f) throw IoError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

std::vector<std::int64_t> ExperimentConfig::resolved_checkpoints() const {
  if (use_geometric_checkpoints) return geometric_checkpoints(T);
  return checkpoints;
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j,
                 {"mdp", "schedule", "schedules", "T", "checkpoints", "replications",
                  "base_seed", "delta", "mode", "output", "workers"},
                 "");
  ExperimentConfig c;
  c.source = j;

  if (!j.contains("mdp")) throw InputError("config: 'mdp' is required");
  const json& m = j.at("mdp");
  reject_unknown(m, {"file", "inline", "generator"}, "mdp.");
  if (m.size() != 1) {
    throw InputError("config: 'mdp' needs exactly one of file, inline, generator");
  }
  if (m.contains("file")) c.mdp_file = str(m, "file", "mdp.");
  if (m.contains("inline")) c.mdp_inline = m.at("inline");
  if (m.contains("generator")) c.mdp_generator = parse_generator(m.at("generator"));

  if (j.contains("schedule") == j.contains("schedules")) {
    throw InputError("config: give exactly one of 'schedule' or 'schedules'");
  }
  if (j.contains("schedule")) {
    c.schedules.push_back(parse_schedule(j.at("schedule"), "schedule."));
  } else {
    const json& list = j.at("schedules");
    if (!list.is_array() || list.empty()) {
      throw InputError("config: 'schedules' must be a non-empty array");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.schedules.push_back(
          parse_schedule(list[i], "schedules[" + std::to_string(i) + "]."));
    }
  }

  if (!j.contains("T")) throw InputError("config: 'T' is required");
  c.T = integer(j, "T", "");
  if (c.T < 1) throw InputError("config: T must be >= 1");

  if (j.contains("checkpoints")) {
    const json& cp = j.at("checkpoints");
    if (cp.is_string()) {
      if (cp.get<std::string>() != "geometric") {
        throw InputError("config: checkpoints must be \"geometric\" or a list");
      }
    } else if (cp.is_array()) {
      c.use_geometric_checkpoints = false;
      for (const json& v : cp) {
        if (!v.is_number_integer()) throw InputError("config: checkpoints must be integers");
        c.checkpoints.push_back(v.get<std::int64_t>());
      }
      validate_checkpoints(c.checkpoints, c.T);
    } else {
      throw InputError("config: checkpoints must be \"geometric\" or a list");
    }
  }
  if (j.contains("replications")) c.replications = integer(j, "replications", "");
  if (c.replications < 1) throw InputError("config: replications must be >= 1");
  if (j.contains("base_seed")) c.base_seed = seed_field(j, "base_seed", "");
  if (j.contains("delta")) c.delta = num(j, "delta", "");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw InputError("config: delta must lie in (0, 1)");
  if (j.contains("mode")) {
    const std::string mode = str(j, "mode", "");
    if (mode == "async") {
      c.mode = RunMode::kAsync;
    } else if (mode == "sync") {
      c.mode = RunMode::kSync;
    } else {
      throw InputError("config: mode must be async or sync");
    }
  }
  if (j.contains("output")) c.output = str(j, "output", "");
  if (j.contains("workers")) {
    const std::int64_t w = integer(j, "workers", "");
    if (w < 1) throw InputError("config: workers must be >= 1");
    c.workers = static_cast<int>(w);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  if (c.mdp_file) {
    const std::filesystem::path p(*c.mdp_file);
    if (p.is_relative()) {
      c.mdp_file = (std::filesystem::path(path).parent_path() / p).string();
    }
  }
  return c;
}

ExperimentSetup prepare_experiment(const ExperimentConfig& config) {
  auto finish = [&](MdpModel mdp, BehaviorPolicy policy) {
    const MarkovChain chain = induced_chain(mdp, policy);
    const ExplorationParams ex = exploration_params(chain);
    QStarSolution qs = solve_qstar_detailed(mdp, 1e-10);
    auto table = std::make_shared<const QTable>(qs.q);
    return ExperimentSetup{std::move(mdp), std::move(policy), ex, std::move(qs),
                           std::move(table)};
  };
  if (config.mdp_generator) {
    const GeneratorSpec& g = *config.mdp_generator;
    Rng rng(g.seed);
    auto [mdp, policy] = random_mdp(g.n_states, g.n_actions, g.gamma, g.r_bar, g.mix_eps,
                                    rng, {g.noise_kind, g.noise_fraction});
    return finish(std::move(mdp), std::move(policy));
  }
  MdpFile f = config.mdp_file ? load_mdp_file(*config.mdp_file)
                              : mdp_from_json(*config.mdp_inline);
  return finish(std::move(f.mdp), std::move(f.policy));
}

StepSchedule resolve_schedule(const ScheduleSpec& spec, const ExperimentSetup& setup) {
  if (spec.kind == "theorem") {
    const double h = theorem_h(setup);
    return StepSchedule(RescaledLinear{h, theorem_t0(setup, h), true});
  }
  if (spec.kind == "rescaled_linear") return StepSchedule(RescaledLinear{spec.h, spec.t0});
  if (spec.kind == "linear") return StepSchedule(Linear{});
  if (spec.kind == "polynomial") return StepSchedule(Polynomial{spec.omega});
  if (spec.kind == "constant") return StepSchedule(Constant{spec.alpha});
  if (spec.kind == "per_coordinate") return StepSchedule(PerCoordinate{spec.h, spec.t0});
  throw InputError("unknown schedule kind '" + spec.kind + "'");
}

bool schedule_is_compliant(const StepSchedule& schedule, const ExperimentSetup& setup) {
  const auto* r = std::get_if<RescaledLinear>(&schedule.variant());
  if (r == nullptr) return false;
  Theorem2Inputs in;
  in.gamma = setup.mdp.gamma();
  in.mu_min = setup.exploration.mu_min;
  in.t_mix = setup.exploration.t_mix;
  in.h = r->h;
  in.t0 = r->t0;
  return validate_stepsize_t2(in).pass;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t schedule_index) {
  return run_experiment(config, prepare_experiment(config), schedule_index);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentSetup& setup,
                                std::size_t schedule_index) {
  if (schedule_index >= config.schedules.size()) {
    throw InputError("schedule index out of range");
  }
  const StepSchedule schedule = resolve_schedule(config.schedules[schedule_index], setup);
  const std::vector<std::int64_t> checkpoints = config.resolved_checkpoints();
  validate_checkpoints(checkpoints, config.T);

  QRunOptions opts;
  opts.qstar = setup.qstar_table;
  const auto n = static_cast<std::size_t>(config.replications);
  std::vector<QRunResult> results(n);

  // First failure by replication index wins, so the reported error does not
  // depend on thread timing.
  enum class Fail { kNone, kValidation, kInvariant, kIo, kOther };
  std::vector<Fail> fail(n, Fail::kNone);
  std::vector<std::string> message(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&]() {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const std::uint64_t seed = derive_seed(config.base_seed, i);
      try {
        results[i] = config.mode == RunMode::kAsync
                         ? run_q_async(setup.mdp, setup.policy, schedule, config.T,
                                       checkpoints, seed, opts)
                         : run_q_sync(setup.mdp, schedule, config.T, checkpoints, seed, opts);
        continue;
      } catch (const InvariantViolation& e) {
        fail[i] = Fail::kInvariant;
        message[i] = e.what();
      } catch (const ValidationError& e) {
        fail[i] = Fail::kValidation;
        message[i] = e.what();
      } catch (const IoError& e) {
        fail[i] = Fail::kIo;
        message[i] = e.what();
      } catch (const std::exception& e) {
        fail[i] = Fail::kOther;
        message[i] = e.what();
      }
      abort.store(true);
    }
  };
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (fail[i] == Fail::kNone) continue;
    const std::string what = "replication " + std::to_string(i) + ": " + message[i];
    switch (fail[i]) {
      case Fail::kInvariant:
        throw InvariantViolation(what);
      case Fail::kValidation:
        throw ValidationError(what);
      case Fail::kIo:
        throw IoError(what);
      default:
        throw std::runtime_error(what);
    }
  }

  ExperimentResult out;
  out.rows.reserve(n * checkpoints.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const TracePoint& p : results[i].trace.points) {
      out.rows.push_back({static_cast<std::int64_t>(i), p.t, p.error, p.alpha});
    }
    out.max_q_norm = std::max(out.max_q_norm, results[i].max_q_norm);
    out.max_abs_noise = std::max(out.max_abs_noise, results[i].max_abs_noise);
    out.steps_checked += results[i].steps_checked;
  }

  json& meta = out.meta;
  meta["config"] = config.source;
  meta["sigma"] = setup.exploration.sigma;
  meta["tau"] = setup.exploration.tau;
  meta["mu_min"] = setup.exploration.mu_min;
  meta["t_mix"] = setup.exploration.t_mix;
  meta["qstar_residual"] = setup.qstar.residual;
  meta["gamma"] = setup.mdp.gamma();
  meta["r_bar"] = setup.mdp.r_bar();
  meta["n_sa"] = setup.mdp.n_pairs();
  meta["delta"] = config.delta;
  meta["checkpoints"] = checkpoints;
  meta["schedule"] = schedule_json(schedule);
  meta["schedule"]["label"] = config.schedules[schedule_index].label;
  meta["schedule"]["compliant"] = schedule_is_compliant(schedule, setup);
  // The bound is stated for rescaled-linear steps; any other schedule gets
  // the overlay of the theorem-compliant one.
  if (const auto* r = std::get_if<RescaledLinear>(&schedule.variant())) {
    meta["bound_h"] = r->h;
    meta["bound_t0"] = r->t0;
  } else {
    const double h = theorem_h(setup);
    meta["bound_h"] = h;
    meta["bound_t0"] = theorem_t0(setup, h);
  }
  meta["bound_rhs"] = bound_overlay(meta);
  meta["bound_advisory"] = !validate_stepsize_t2(overlay_inputs(meta)).pass;
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string s = "replication,t,error,alpha\n";
  s.reserve(rows.size() * 48 + s.size());
  for (const TraceRow& r : rows) {
    s += std::to_string(r.replication);
    s += ',';
    s += std::to_string(r.t);
    s += ',';
    s += format_double(r.error);
    s += ',';
    s += format_double(r.alpha);
    s += '\n';
  }
  return s;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
  write_text(path, trace_csv(rows));
}

std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "replication,t,error,alpha") {
    throw InputError("trace CSV: header must be 'replication,t,error,alpha'");
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TraceRow r;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto field = [&](auto& value, bool last) {
      const auto res = std::from_chars(p, end, value);
      if (res.ec != std::errc() || (last ? res.ptr != end : (res.ptr == end || *res.ptr != ','))) {
        throw InputError("trace CSV: malformed line " + std::to_string(lineno));
      }
      p = last ? res.ptr : res.ptr + 1;
    };
    field(r.replication, false);
    field(r.t, false);
    field(r.error, false);
    field(r.alpha, true);
    if (!rows.empty() && rows.back().replication == r.replication && r.t <= rows.back().t) {
      throw InputError("trace CSV: t not increasing at line " + std::to_string(lineno));
    }
    if (!(r.error >= 0.0)) {
      throw InputError("trace CSV: negative error at line " + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  return parse_trace_csv(read_text(path));
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

void write_experiment(const ExperimentResult& result, const std::string& prefix) {
  const std::string csv = prefix + ".csv";
  const std::string meta = prefix + ".meta.json";
  try {
    write_trace_csv(result.rows, csv);
    write_text(meta, result.meta.dump(2) + "\n");
  } catch (...) {
    std::remove(csv.c_str());
    std::remove(meta.c_str());
    throw;
  }
}

std::vector<double> bound_overlay(const json& meta) {
  Theorem2Inputs in;
  std::vector<std::int64_t> checkpoints;
  try {
    in = overlay_inputs(meta);
    checkpoints = meta.at("checkpoints").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("metadata: ") + e.what());
  }
  std::vector<double> out;
  out.reserve(checkpoints.size());
  for (std::int64_t t : checkpoints) {
    in.T = static_cast<double>(t);
    out.push_back(theorem2_rhs(in).value);
  }
  return out;
}

RateFit fit_rate(const std::vector<TraceRow>& rows, std::optional<double> t_min,
                 std::optional<double> t_max) {
  const auto med = median_by_t(rows);
  if (med.empty()) throw InputError("fit_rate: empty trace");
  const double T = static_cast<double>(med.back().first);
  const double lo = t_min.value_or(T / 100.0);
  const double hi = t_max.value_or(T);
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [t, e] : med) {
    const double td = static_cast<double>(t);
    if (td < lo || td > hi) continue;
    if (!(e > 0.0)) {
      throw DegenerateFitError("median error is exactly 0 at t = " + std::to_string(t) +
                               " (exact convergence)");
    }
    xs.push_back(std::log(td));
    ys.push_back(std::log(e));
  }
  if (xs.size() < 3) {
    throw InputError("fit_rate: fewer than 3 checkpoints in the window");
  }
  const auto m = static_cast<Eigen::Index>(xs.size());
  const Eigen::Map<const Eigen::VectorXd> x(xs.data(), m);
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), m);
  const double xm = x.mean();
  const double ym = y.mean();
  const Eigen::VectorXd dx = x.array() - xm;
  const double sxx = dx.squaredNorm();
  if (!(sxx > 0.0)) throw InputError("fit_rate: window has a single distinct t");
  RateFit fit;
  fit.slope = dx.dot(y.array().matrix() - Eigen::VectorXd::Constant(m, ym)) / sxx;
  fit.intercept = ym - fit.slope * xm;
  const Eigen::VectorXd resid =
      y - (Eigen::VectorXd::Constant(m, fit.intercept) + fit.slope * x);
  fit.residual = std::sqrt(resid.squaredNorm() / static_cast<double>(m));
  fit.points = xs.size();
  return fit;
}

double final_median_error(const std::vector<TraceRow>& rows) {
  const auto med = median_by_t(rows);
  if (med.empty()) throw InputError("final_median_error: empty trace");
  return med.back().second;
}

SweepResult sweep_stepsizes(const ExperimentConfig& config) {
  if (config.schedules.empty()) throw InputError("sweep: no schedules");
  const ExperimentSetup setup = prepare_experiment(config);
  SweepResult out;
  for (std::size_t i = 0; i < config.schedules.size(); ++i) {
    ExperimentResult run = run_experiment(config, setup, i);
    SweepRow row;
    row.label = config.schedules[i].label;
    row.schedule = run.meta.at("schedule").at("describe").get<std::string>();
    row.compliant = run.meta.at("schedule").at("compliant").get<bool>();
    row.final_median_error = final_median_error(run.rows);
    try {
      row.slope = fit_rate(run.rows).slope;
    } catch (const ValidationError&) {
      row.slope = std::numeric_limits<double>::quiet_NaN();
    }
    out.rows.push_back(std::move(row));
    out.runs.push_back(std::move(run));
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "label,schedule,final_median_error,slope,compliant\n";
  for (const SweepRow& r : rows) {
    s += r.label + ",\"" + r.schedule + "\"," + format_double(r.final_median_error) + "," +
         (std::isnan(r.slope) ? std::string("nan") : format_double(r.slope)) + "," +
         (r.compliant ? "true" : "false") + "\n";
  }
  return s;
}

void write_sweep(const SweepResult& sweep, const std::string& prefix) {
  std::vector<std::string> written;
  try {
    const std::string table = prefix + ".sweep.csv";
    written.push_back(table);
    write_text(table, sweep_csv(sweep.rows));
    for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
      const std::string p = prefix + "." + std::to_string(i);
      written.push_back(p + ".csv");
      written.push_back(p + ".meta.json");
      write_experiment(sweep.runs[i], p);
    }
  } catch (...) {
    for (const auto& f : written) std::remove(f.c_str());
    throw;
  }
}

namespace {

struct GridPoint {
  double sigma;
  double h;
  std::int64_t tau;
};

std::vector<GridPoint> lemma_grid(bool small) {
  const std::vector<double> sigmas = small ? std::vector<double>{0.25}
                                           : std::vector<double>{0.1, 0.25};
  const std::vector<double> scales = small ? std::vector<double>{2.5}
                                           : std::vector<double>{2.5, 4.0, 8.0};
  const std::vector<std::int64_t> taus = small ? std::vector<std::int64_t>{4}
                                               : std::vector<std::int64_t>{1, 4, 16};
  std::vector<GridPoint> out;
  for (double s : sigmas) {
    for (double c : scales) {
      for (std::int64_t tau : taus) out.push_back({s, c / s, tau});
    }
  }
  return out;
}

std::vector<std::int64_t> lemma_t_values(bool small) {
  return small ? std::vector<std::int64_t>{100, 1000}
               : std::vector<std::int64_t>{100, 1000, 10000};
}

}  // namespace

json verify_lemma3_grid(bool small) {
  json out;
  out["points"] = json::array();
  bool pass = true;
  double worst = std::numeric_limits<double>::infinity();
  for (const GridPoint& g : lemma_grid(small)) {
    const double t0 = std::max(4.0 * g.h, static_cast<double>(g.tau));
    const Lemma3Report r = lemma3_check(g.h, t0, g.sigma, g.tau, lemma_t_values(small));
    const bool ok = r.preconditions_met && r.pass;
    pass = pass && ok;
    json p = {{"sigma", g.sigma}, {"h", g.h}, {"t0", t0}, {"tau", g.tau}, {"pass", ok}};
    if (r.preconditions_met) {
      p["worst_a_margin"] = r.worst_a_margin;
      p["worst_b_margin"] = r.worst_b_margin;
      p["worst_c_margin"] = r.worst_c_margin;
      worst = std::min({worst, r.worst_a_margin, r.worst_b_margin, r.worst_c_margin});
    } else {
      p["reason"] = r.reason;
    }
    out["points"].push_back(std::move(p));
  }
  out["worst_margin"] = worst;
  out["pass"] = pass;
  return out;
}

json verify_lemma7_grid(bool small, std::int64_t sequences, std::uint64_t seed) {
  if (sequences < 0) throw InputError("sequences must be >= 0");
  json out;
  out["points"] = json::array();
  bool pass = true;
  double worst = 0.0;
  const std::vector<std::int64_t> ts = lemma_t_values(small);
  const std::int64_t length = ts.back() + 1;
  std::uint64_t point = 0;
  for (const GridPoint& g : lemma_grid(small)) {
    Rng rng(derive_seed(seed, point++));
    std::vector<Eigen::VectorXd> d = sample_d_sequences(g.sigma, length, sequences, rng);
    d.push_back(Eigen::VectorXd::Constant(length, g.sigma));
    d.push_back(Eigen::VectorXd::Constant(length, 1.0));
    for (double omega : {0.5, 1.0}) {
      Lemma7Params p;
      p.h = g.h;
      p.t0 = std::max(4.0 * g.h, static_cast<double>(g.tau));
      p.sigma = g.sigma;
      p.gamma = 0.3;
      p.tau = g.tau;
      p.omega = omega;
      const Lemma7Report r = lemma7_check(p, d, ts);
      const bool ok = r.preconditions_met && r.pass;
      pass = pass && ok;
      worst = std::max(worst, r.max_ratio);
      json jp = {{"sigma", g.sigma}, {"h", g.h},         {"t0", p.t0},
                 {"tau", g.tau},     {"omega", omega},   {"gamma", p.gamma},
                 {"sequences", r.sequences}, {"max_ratio", r.max_ratio}, {"pass", ok}};
      if (!r.preconditions_met) jp["reason"] = r.reason;
      out["points"].push_back(std::move(jp));
    }
  }
  out["max_ratio"] = worst;
  out["pass"] = pass;
  return out;
}

json verify_azuma_grid(bool small, std::int64_t trials, std::uint64_t seed) {
  json out;
  out["points"] = json::array();
  bool pass = true;
  const std::vector<std::int64_t> taus = small ? std::vector<std::int64_t>{1, 5}
                                               : std::vector<std::int64_t>{1, 2, 5};
  const std::int64_t t = small ? 200 : 1000;
  std::uint64_t point = 0;
  for (std::int64_t tau : taus) {
    for (AzumaProcess proc : all_azuma_processes()) {
      const AzumaResult r =
          shifted_azuma_mc(tau, proc, t, 0.05, trials, derive_seed(seed, point++));
      pass = pass && r.holds;
      out["points"].push_back({{"tau", tau},
                               {"process", to_string(proc)},
                               {"t", t},
                               {"delta", 0.05},
                               {"trials", r.trials},
                               {"exceedances", r.exceedances},
                               {"rate", r.rate},
                               {"limit", r.limit},
                               {"threshold", r.threshold},
                               {"pass", r.holds}});
    }
  }
  out["pass"] = pass;
  return out;
}

}  // namespace asyncq
