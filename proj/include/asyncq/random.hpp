#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace asyncq {

// All stochastic code draws from this engine. Derived quantities (uniforms,
// categorical draws) are computed here from raw 64-bit outputs rather than
// through <random> distributions, so sample paths do not depend on the
// standard library's distribution implementations.
using Rng = std::mt19937_64;

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for replication `index` of an experiment seeded with `base_seed`.
// Distinct indices give distinct seeds for a fixed base (odd-multiplier
// offset followed by a bijective mix).
constexpr std::uint64_t derive_seed(std::uint64_t base_seed,
                                    std::uint64_t index) noexcept {
  return mix64(base_seed + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline double rademacher(Rng& rng) { return (rng() >> 63) ? 1.0 : -1.0; }

// Inverse-CDF sampler over a fixed probability vector.
class CategoricalTable {
 public:
  CategoricalTable() = default;

  template <typename Derived>
  explicit CategoricalTable(const Eigen::DenseBase<Derived>& probs) {
    cdf_.resize(static_cast<std::size_t>(probs.size()));
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      acc += probs(j);
      cdf_[static_cast<std::size_t>(j)] = acc;
      if (probs(j) > 0.0) last_positive = static_cast<std::size_t>(j);
    }
    // Rounding can leave acc slightly below 1; never fall through.
    for (std::size_t j = last_positive; j < cdf_.size(); ++j) cdf_[j] = 2.0;
  }

  std::size_t sample(Rng& rng) const {
    const double u = uniform01(rng);
    std::size_t j = 0;
    while (u >= cdf_[j]) ++j;
    return j;
  }

  std::size_t size() const noexcept { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

// Uniform draw from the probability simplex of dimension n.
inline Eigen::VectorXd sample_simplex(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // 1 - U is in (0, 1], so the log is finite.
    e(i) = -std::log(1.0 - uniform01(rng));
  }
  const double s = e.sum();
  if (s <= 0.0) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return e / s;
}

}  // namespace asyncq
