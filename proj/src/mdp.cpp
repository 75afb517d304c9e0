#include "asyncq/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "asyncq/errors.hpp"

namespace asyncq {

namespace {

std::string idx(Eigen::Index i) { return "[" + std::to_string(i) + "]"; }

void require_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                             double tol, const std::string& where) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (!(row(j) >= 0.0 && row(j) <= 1.0)) {
      throw InputError(where + idx(j) + " is not a probability");
    }
  }
  if (std::abs(row.sum() - 1.0) > tol) {
    throw InputError(where + " does not sum to 1");
  }
}

}  // namespace

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kDeterministic:
      return "deterministic";
    case NoiseKind::kUniform:
      return "uniform";
    case NoiseKind::kTwoPoint:
      return "two_point";
  }
  return "deterministic";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "deterministic") return NoiseKind::kDeterministic;
  if (name == "uniform") return NoiseKind::kUniform;
  if (name == "two_point") return NoiseKind::kTwoPoint;
  throw InputError("unknown reward noise kind '" + name + "'");
}

MdpModel::MdpModel(Eigen::Index n_states, Eigen::Index n_actions,
                   RowMatrixXd transition, RowMatrixXd mean_reward,
                   RewardNoise noise, double gamma, double r_bar)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      mean_reward_(std::move(mean_reward)),
      noise_(noise),
      gamma_(gamma),
      r_bar_(r_bar) {
  if (n_states_ < 1 || n_actions_ < 1) {
    throw DimensionError("MDP needs at least one state and one action");
  }
  if (transition_.rows() != n_pairs() || transition_.cols() != n_states_) {
    throw DimensionError("transition must be (n_states * n_actions) x n_states");
  }
  if (mean_reward_.rows() != n_states_ || mean_reward_.cols() != n_actions_) {
    throw DimensionError("mean_reward must be n_states x n_actions");
  }
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
    throw InputError("gamma must lie in [0, 1)");
  }
  if (!(r_bar_ > 0.0) || !std::isfinite(r_bar_)) {
    throw InputError("r_bar must be positive and finite");
  }
  if (!(noise_.half_width >= 0.0) || !std::isfinite(noise_.half_width)) {
    throw InputError("reward_noise.half_width must be finite and >= 0");
  }
  if (noise_.kind == NoiseKind::kDeterministic) noise_.half_width = 0.0;
  for (Eigen::Index s = 0; s < n_states_; ++s) {
    for (Eigen::Index a = 0; a < n_actions_; ++a) {
      require_probability_row(transition_.row(pair_index(s, a)), kRowSumTolerance,
                              "transition" + idx(s) + idx(a));
      const double r = mean_reward_(s, a);
      // Relative slack of a few ulps: generated rewards hit the edge exactly.
      if (!std::isfinite(r) ||
          std::abs(r) + noise_.half_width > r_bar_ * (1.0 + 1e-12)) {
        throw InputError("mean_reward" + idx(s) + idx(a) +
                         " plus noise half-width exceeds r_bar");
      }
    }
  }
  next_state_.reserve(static_cast<std::size_t>(n_pairs()));
  for (Eigen::Index k = 0; k < n_pairs(); ++k) {
    next_state_.emplace_back(transition_.row(k));
  }
}

double MdpModel::sample_reward(Eigen::Index s, Eigen::Index a, Rng& rng) const {
  const double mean = mean_reward_(s, a);
  double r = mean;
  switch (noise_.kind) {
    case NoiseKind::kDeterministic:
      return mean;
    case NoiseKind::kUniform:
      r = mean + noise_.half_width * (2.0 * uniform01(rng) - 1.0);
      break;
    case NoiseKind::kTwoPoint:
      r = mean + noise_.half_width * rademacher(rng);
      break;
  }
  return std::clamp(r, -r_bar_, r_bar_);
}

BehaviorPolicy::BehaviorPolicy(RowMatrixXd pi) : pi_(std::move(pi)) {
  if (pi_.rows() < 1 || pi_.cols() < 1) {
    throw DimensionError("policy must have at least one state and one action");
  }
  action_.reserve(static_cast<std::size_t>(pi_.rows()));
  for (Eigen::Index s = 0; s < pi_.rows(); ++s) {
    require_probability_row(pi_.row(s), kRowSumTolerance, "policy" + idx(s));
    action_.emplace_back(pi_.row(s));
  }
}

BehaviorPolicy BehaviorPolicy::uniform(Eigen::Index n_states,
                                       Eigen::Index n_actions) {
  return BehaviorPolicy(RowMatrixXd::Constant(
      n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
}

namespace {

void require_q_shape(const QTable& q, const MdpModel& mdp) {
  if (q.rows() != mdp.n_states() || q.cols() != mdp.n_actions()) {
    throw DimensionError("Q table shape does not match the MDP");
  }
}

}  // namespace

QTable bellman(const QTable& q, const MdpModel& mdp) {
  require_q_shape(q, mdp);
  const Eigen::VectorXd greedy = q.rowwise().maxCoeff();
  const Eigen::VectorXd expected = mdp.transition() * greedy;
  return mdp.mean_reward() +
         mdp.gamma() * Eigen::Map<const QTable>(expected.data(), mdp.n_states(),
                                                mdp.n_actions());
}

Eigen::VectorXd bellman_flat(const Eigen::VectorXd& q, const MdpModel& mdp) {
  if (q.size() != mdp.n_pairs()) {
    throw DimensionError("flattened Q has the wrong length");
  }
  const QTable table =
      Eigen::Map<const QTable>(q.data(), mdp.n_states(), mdp.n_actions());
  const QTable f = bellman(table, mdp);
  return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
}

QStarSolution solve_qstar_detailed(const MdpModel& mdp, double tol) {
  if (!(tol > 0.0)) throw InputError("solve_qstar: tol must be positive");
  const double gamma = mdp.gamma();
  const double stop = gamma == 0.0 ? std::numeric_limits<double>::infinity()
                                   : tol * (1.0 - gamma) / gamma;
  QStarSolution out;
  QTable q = QTable::Zero(mdp.n_states(), mdp.n_actions());
  double diff = std::numeric_limits<double>::infinity();
  while (true) {
    QTable next = bellman(q, mdp);
    diff = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    ++out.iterations;
    if (diff <= stop) break;
  }
  // The guarantee already holds; keep going while updates do not grow. Near
  // the fixed point successive updates are a few ulps and often tie.
  const std::int64_t polish_cap = std::max<std::int64_t>(1000, out.iterations);
  for (std::int64_t k = 0; k < polish_cap && diff > 0.0; ++k) {
    QTable next = bellman(q, mdp);
    const double d = (next - q).cwiseAbs().maxCoeff();
    if (!(d <= diff)) break;
    q.swap(next);
    diff = d;
    ++out.iterations;
  }
  out.residual = (bellman(q, mdp) - q).cwiseAbs().maxCoeff();
  out.q = std::move(q);
  return out;
}

QTable solve_qstar(const MdpModel& mdp, double tol) {
  return solve_qstar_detailed(mdp, tol).q;
}

MarkovChain induced_chain(const MdpModel& mdp, const BehaviorPolicy& policy) {
  if (policy.n_states() != mdp.n_states() ||
      policy.n_actions() != mdp.n_actions()) {
    throw DimensionError("policy shape does not match the MDP");
  }
  const Eigen::Index na = mdp.n_actions();
  const Eigen::Index n = mdp.n_pairs();
  RowMatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index s2 = 0; s2 < mdp.n_states(); ++s2) {
      const double ps = mdp.transition()(i, s2);
      for (Eigen::Index a2 = 0; a2 < na; ++a2) {
        p(i, s2 * na + a2) = ps * policy.probabilities()(s2, a2);
      }
    }
  }
  // Products of rows that sum to 1 within 1e-12 can drift past the chain's
  // own tolerance only by rounding; renormalize to keep it exact.
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= p.row(i).sum();
  return MarkovChain(std::move(p));
}

Transition sample_step(const MdpModel& mdp, const BehaviorPolicy& policy,
                       Eigen::Index s, Eigen::Index a, Rng& rng) {
  Transition tr;
  tr.reward = mdp.sample_reward(s, a, rng);
  tr.next_state = mdp.sample_next_state(s, a, rng);
  tr.next_action = policy.sample_action(tr.next_state, rng);
  return tr;
}

std::pair<MdpModel, BehaviorPolicy> random_mdp(Eigen::Index n_states,
                                               Eigen::Index n_actions,
                                               double gamma, double r_bar,
                                               double mix_eps, Rng& rng,
                                               const RandomMdpOptions& opts) {
  if (!(mix_eps > 0.0 && mix_eps <= 1.0)) {
    throw InputError("random_mdp: mix_eps must lie in (0, 1]");
  }
  if (!(opts.noise_fraction >= 0.0 && opts.noise_fraction < 1.0)) {
    throw InputError("random_mdp: noise_fraction must lie in [0, 1)");
  }
  const double half_width = opts.noise_kind == NoiseKind::kDeterministic
                                ? 0.0
                                : opts.noise_fraction * r_bar;
  const Eigen::Index n_pairs = n_states * n_actions;
  RowMatrixXd transition(n_pairs, n_states);
  for (Eigen::Index k = 0; k < n_pairs; ++k) {
    const Eigen::VectorXd row = sample_simplex(n_states, rng);
    transition.row(k) =
        ((1.0 - mix_eps) * row.array() + mix_eps / static_cast<double>(n_states))
            .transpose();
  }
  RowMatrixXd reward(n_states, n_actions);
  for (Eigen::Index s = 0; s < n_states; ++s) {
    for (Eigen::Index a = 0; a < n_actions; ++a) {
      reward(s, a) = uniform(rng, 0.0, r_bar - half_width);
    }
  }
  RowMatrixXd pi(n_states, n_actions);
  for (Eigen::Index s = 0; s < n_states; ++s) {
    const Eigen::VectorXd row = sample_simplex(n_actions, rng);
    pi.row(s) = ((1.0 - mix_eps) * row.array() +
                 mix_eps / static_cast<double>(n_actions))
                    .transpose();
  }
  MdpModel mdp(n_states, n_actions, std::move(transition), std::move(reward),
               RewardNoise{opts.noise_kind, half_width}, gamma, r_bar);
  return {std::move(mdp), BehaviorPolicy(std::move(pi))};
}

namespace {

double get_number(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw InputError("MDP file: missing field '" + key + "'");
  if (!j.at(key).is_number()) {
    throw InputError("MDP file: field '" + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

Eigen::Index get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number_integer() ||
      j.at(key).get<std::int64_t>() < 1) {
    throw InputError("MDP file: '" + key + "' must be a positive integer");
  }
  return static_cast<Eigen::Index>(j.at(key).get<std::int64_t>());
}

const nlohmann::json& get_array(const nlohmann::json& j, const std::string& where,
                                Eigen::Index expected) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected) {
    throw InputError("MDP file: " + where + " must be an array of length " +
                     std::to_string(expected));
  }
  return j;
}

double get_entry(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw InputError("MDP file: " + where + " must be a number");
  return j.get<double>();
}

}  // namespace

MdpFile mdp_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("MDP file: top level must be an object");
  static const std::vector<std::string> known = {
      "n_states", "n_actions",   "gamma",        "r_bar",
      "transition", "mean_reward", "reward_noise", "policy"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("MDP file: unknown field '" + key + "'");
    }
  }
  const Eigen::Index ns = get_count(j, "n_states");
  const Eigen::Index na = get_count(j, "n_actions");
  const double gamma = get_number(j, "gamma");
  const double r_bar = get_number(j, "r_bar");

  if (!j.contains("transition")) throw InputError("MDP file: missing 'transition'");
  RowMatrixXd transition(ns * na, ns);
  const auto& tj = get_array(j.at("transition"), "transition", ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const auto& ts = get_array(tj[s], "transition" + idx(s), na);
    for (Eigen::Index a = 0; a < na; ++a) {
      const auto& tsa = get_array(ts[a], "transition" + idx(s) + idx(a), ns);
      for (Eigen::Index s2 = 0; s2 < ns; ++s2) {
        transition(s * na + a, s2) =
            get_entry(tsa[s2], "transition" + idx(s) + idx(a) + idx(s2));
      }
    }
  }

  if (!j.contains("mean_reward")) throw InputError("MDP file: missing 'mean_reward'");
  RowMatrixXd reward(ns, na);
  const auto& rj = get_array(j.at("mean_reward"), "mean_reward", ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const auto& rs = get_array(rj[s], "mean_reward" + idx(s), na);
    for (Eigen::Index a = 0; a < na; ++a) {
      reward(s, a) = get_entry(rs[a], "mean_reward" + idx(s) + idx(a));
    }
  }

  RewardNoise noise;
  if (j.contains("reward_noise")) {
    const auto& nj = j.at("reward_noise");
    if (!nj.is_object() || !nj.contains("kind") || !nj.at("kind").is_string()) {
      throw InputError("MDP file: reward_noise needs a string 'kind'");
    }
    for (const auto& [key, value] : nj.items()) {
      if (key != "kind" && key != "half_width") {
        throw InputError("MDP file: unknown field 'reward_noise." + key + "'");
      }
    }
    noise.kind = noise_kind_from_string(nj.at("kind").get<std::string>());
    noise.half_width = nj.contains("half_width")
                           ? get_entry(nj.at("half_width"), "reward_noise.half_width")
                           : 0.0;
  }

  RowMatrixXd pi;
  if (j.contains("policy")) {
    pi.resize(ns, na);
    const auto& pj = get_array(j.at("policy"), "policy", ns);
    for (Eigen::Index s = 0; s < ns; ++s) {
      const auto& ps = get_array(pj[s], "policy" + idx(s), na);
      for (Eigen::Index a = 0; a < na; ++a) {
        pi(s, a) = get_entry(ps[a], "policy" + idx(s) + idx(a));
      }
    }
  } else {
    pi = RowMatrixXd::Constant(ns, na, 1.0 / static_cast<double>(na));
  }

  return MdpFile{MdpModel(ns, na, std::move(transition), std::move(reward), noise,
                          gamma, r_bar),
                 BehaviorPolicy(std::move(pi))};
}

nlohmann::json mdp_to_json(const MdpModel& mdp, const BehaviorPolicy& policy) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states();
  j["n_actions"] = mdp.n_actions();
  j["gamma"] = mdp.gamma();
  j["r_bar"] = mdp.r_bar();
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  nlohmann::json pi = nlohmann::json::array();
  for (Eigen::Index s = 0; s < mdp.n_states(); ++s) {
    nlohmann::json ts = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    nlohmann::json ps = nlohmann::json::array();
    for (Eigen::Index a = 0; a < mdp.n_actions(); ++a) {
      nlohmann::json tsa = nlohmann::json::array();
      for (Eigen::Index s2 = 0; s2 < mdp.n_states(); ++s2) {
        tsa.push_back(mdp.transition()(mdp.pair_index(s, a), s2));
      }
      ts.push_back(std::move(tsa));
      rs.push_back(mdp.mean_reward()(s, a));
      ps.push_back(policy.probabilities()(s, a));
    }
    transition.push_back(std::move(ts));
    reward.push_back(std::move(rs));
    pi.push_back(std::move(ps));
  }
  j["transition"] = std::move(transition);
  j["mean_reward"] = std::move(reward);
  j["reward_noise"] = {{"kind", to_string(mdp.noise().kind)},
                       {"half_width", mdp.noise().half_width}};
  j["policy"] = std::move(pi);
  return j;
}

MdpFile load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open MDP file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("MDP file '" + path + "' is not valid JSON: " + e.what());
  }
  return mdp_from_json(j);
}

}  // namespace asyncq
