#include "asyncq/chain.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "asyncq/errors.hpp"

namespace asyncq {

MarkovChain::MarkovChain(RowMatrixXd transition, std::vector<std::string> labels)
    : p_(std::move(transition)), labels_(std::move(labels)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw DimensionError("transition matrix must be square and non-empty");
  }
  if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != p_.rows()) {
    throw DimensionError("label count does not match chain size");
  }
  for (Eigen::Index i = 0; i < p_.rows(); ++i) {
    for (Eigen::Index j = 0; j < p_.cols(); ++j) {
      const double x = p_(i, j);
      if (!(x >= 0.0 && x <= 1.0)) {
        throw InputError("transition entry (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") outside [0, 1]");
      }
    }
    if (std::abs(p_.row(i).sum() - 1.0) > kRowSumTolerance) {
      throw InputError("transition row " + std::to_string(i) +
                       " does not sum to 1");
    }
  }
}

Eigen::VectorXd stationary_distribution(const MarkovChain& chain,
                                        const StationaryOptions& opts) {
  const RowMatrixXd& p = chain.transition();
  const Eigen::Index n = chain.size();
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(n);
  mu(0) = 1.0;
  Eigen::RowVectorXd next(n);
  for (std::int64_t it = 0; it < opts.max_iterations; ++it) {
    next.noalias() = mu * p;
    next /= next.sum();
    const double change = (next - mu).lpNorm<1>();
    mu.swap(next);
    if (change <= opts.tol) {
      return mu.transpose().cwiseMax(0.0);
    }
  }
  throw ErgodicityError("power iteration did not converge in " +
                        std::to_string(opts.max_iterations) +
                        " iterations; chain is not ergodic");
}

double tv_distance(const Eigen::Ref<const Eigen::VectorXd>& p,
                   const Eigen::Ref<const Eigen::VectorXd>& q) {
  if (p.size() != q.size() || p.size() == 0) {
    throw InputError("tv_distance: length mismatch");
  }
  constexpr double kNormTol = 1e-9;
  if (std::abs(p.sum() - 1.0) > kNormTol || std::abs(q.sum() - 1.0) > kNormTol) {
    throw InputError("tv_distance: inputs must sum to 1");
  }
  return 0.5 * (p - q).lpNorm<1>();
}

namespace {

double worst_tv(const RowMatrixXd& pt, const Eigen::VectorXd& mu) {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < pt.rows(); ++s) {
    worst = std::max(worst, 0.5 * (pt.row(s).transpose() - mu).lpNorm<1>());
  }
  return worst;
}

}  // namespace

std::int64_t mixing_time(const MarkovChain& chain, const Eigen::VectorXd& mu,
                         const MixingOptions& opts) {
  if (mu.size() != chain.size()) {
    throw DimensionError("mixing_time: mu has the wrong length");
  }
  const RowMatrixXd& p = chain.transition();
  RowMatrixXd pt = p;
  RowMatrixXd next(p.rows(), p.cols());
  for (std::int64_t t = 1; t <= opts.max_iterations; ++t) {
    if (worst_tv(pt, mu) <= opts.threshold) return t;
    next.noalias() = pt * p;
    pt.swap(next);
  }
  throw ErgodicityError("mixing time exceeds " +
                        std::to_string(opts.max_iterations) + " steps");
}

double worst_tv_at(const MarkovChain& chain, const Eigen::VectorXd& mu,
                   std::int64_t t) {
  return worst_tv(matrix_power(chain.transition(), t), mu);
}

bool is_irreducible(const MarkovChain& chain) {
  const RowMatrixXd& p = chain.transition();
  const Eigen::Index n = chain.size();
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = 1;
    Eigen::Index count = 1;
    while (!frontier.empty()) {
      const Eigen::Index i = frontier.front();
      frontier.pop();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = transpose ? p(j, i) : p(i, j);
        if (w > 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          ++count;
          frontier.push(j);
        }
      }
    }
    return count == n;
  };
  return reaches_all(false) && reaches_all(true);
}

std::int64_t ceil_log2(double x) {
  if (!(x >= 1.0) || !std::isfinite(x)) {
    throw InputError("ceil_log2: argument must be finite and >= 1");
  }
  std::int64_t k = 0;
  while (std::ldexp(1.0, static_cast<int>(k)) < x) ++k;
  return k;
}

std::int64_t exploration_tau(double mu_min, std::int64_t t_mix) {
  if (!(mu_min > 0.0 && mu_min <= 1.0)) {
    throw InputError("mu_min must lie in (0, 1]");
  }
  if (t_mix < 1) throw InputError("t_mix must be >= 1");
  // mu_min comes out of an iterative solve; a ratio within 1e-9 of a power
  // of two is taken as that power.
  return ceil_log2(std::max(1.0, 2.0 / mu_min * (1.0 - 1e-9))) * t_mix;
}

ExplorationParams exploration_params(const MarkovChain& chain,
                                     const StationaryOptions& sopts,
                                     const MixingOptions& mopts) {
  if (!is_irreducible(chain)) {
    throw ErgodicityError("chain is reducible; some state has zero "
                          "stationary mass or is never reached");
  }
  const Eigen::VectorXd mu = stationary_distribution(chain, sopts);
  ExplorationParams out;
  out.mu_min = mu.minCoeff();
  if (!(out.mu_min > 0.0)) {
    throw ErgodicityError("stationary distribution has a zero entry");
  }
  out.t_mix = mixing_time(chain, mu, mopts);
  out.sigma = 0.5 * out.mu_min;
  out.tau = exploration_tau(out.mu_min, out.t_mix);
  return out;
}

RowMatrixXd matrix_power(const RowMatrixXd& p, std::int64_t k) {
  if (k < 0) throw InputError("matrix_power: negative exponent");
  RowMatrixXd result = RowMatrixXd::Identity(p.rows(), p.cols());
  RowMatrixXd base = p;
  while (k > 0) {
    if (k & 1) result = (result * base).eval();
    k >>= 1;
    if (k > 0) base = (base * base).eval();
  }
  return result;
}

ExplorationWitness exploration_check(const MarkovChain& chain, double sigma,
                                     std::int64_t tau) {
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw InputError("exploration_check: sigma must lie in (0, 1)");
  }
  if (tau < 1) throw InputError("exploration_check: tau must be >= 1");
  const RowMatrixXd pt = matrix_power(chain.transition(), tau);
  ExplorationWitness w;
  w.value = pt.minCoeff(&w.start, &w.target);
  w.holds = w.value >= sigma;
  return w;
}

}  // namespace asyncq
