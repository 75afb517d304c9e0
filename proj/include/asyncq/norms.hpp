#pragma once

// Weighted infinity norm ||x||_v = max_i |x_i| / v_i, its induced matrix
// norm, and an empirical contraction-modulus probe.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "asyncq/errors.hpp"
#include "asyncq/random.hpp"

namespace asyncq {

template <typename Scalar>
class BasicWeightVector {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit BasicWeightVector(Vector v) : v_(std::move(v)) {
    if (v_.size() == 0) throw InputError("weight vector must be non-empty");
    for (Eigen::Index i = 0; i < v_.size(); ++i) {
      if (!(v_(i) > Scalar(0)) || !std::isfinite(v_(i))) {
        throw InputError("weight " + std::to_string(i) +
                         " must be finite and strictly positive");
      }
    }
    v_min_ = v_.minCoeff();
  }

  static BasicWeightVector ones(Eigen::Index n) {
    return BasicWeightVector(Vector::Ones(n));
  }

  const Vector& values() const noexcept { return v_; }
  Scalar min() const noexcept { return v_min_; }
  Eigen::Index size() const noexcept { return v_.size(); }
  Scalar operator()(Eigen::Index i) const { return v_(i); }

 private:
  Vector v_;
  Scalar v_min_{};
};

using WeightVector = BasicWeightVector<double>;

namespace detail {
inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b || a == 0) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(a) +
                         " does not match weight size " + std::to_string(b));
  }
}
}  // namespace detail

template <typename Derived>
typename Derived::Scalar weighted_norm(
    const Eigen::MatrixBase<Derived>& x,
    const BasicWeightVector<typename Derived::Scalar>& w) {
  detail::require_same_size(x.size(), w.size(), "weighted_norm");
  return (x.derived().cwiseAbs().array() / w.values().array()).maxCoeff();
}

namespace detail {
// Per-row weighted absolute sums  sum_j (v_j / v_i) |a_ij|.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> weighted_row_sums(
    const Eigen::MatrixBase<Derived>& a,
    const BasicWeightVector<typename Derived::Scalar>& w) {
  if (a.rows() != a.cols()) {
    throw DimensionError("induced_matrix_norm: matrix must be square");
  }
  require_same_size(a.rows(), w.size(), "induced_matrix_norm");
  return ((a.derived().cwiseAbs() * w.values()).array() / w.values().array())
      .matrix();
}
}  // namespace detail

template <typename Derived>
typename Derived::Scalar induced_matrix_norm(
    const Eigen::MatrixBase<Derived>& a,
    const BasicWeightVector<typename Derived::Scalar>& w) {
  return detail::weighted_row_sums(a, w).maxCoeff();
}

// x_j = v_j * sign(a_{i*j}) on the first maximizing row i*, sign(0) = +1.
// ||x||_v = 1 and ||A x||_v equals the induced norm.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> norm_achieving_vector(
    const Eigen::MatrixBase<Derived>& a,
    const BasicWeightVector<typename Derived::Scalar>& w) {
  using Scalar = typename Derived::Scalar;
  const auto sums = detail::weighted_row_sums(a, w);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < sums.size(); ++i) {
    if (sums(i) > sums(best)) best = i;
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    x(j) = a(best, j) >= Scalar(0) ? w(j) : -w(j);
  }
  return x;
}

// Largest observed ||F(x) - F(y)||_v / ||x - y||_v over `pairs` pairs drawn
// uniformly from the v-ball of the given radius. A lower bound on the
// Lipschitz modulus of F in ||.||_v.
template <typename Op>
double estimate_contraction(Op&& op, const WeightVector& w, int pairs,
                            double radius, Rng& rng) {
  if (pairs < 1) throw InputError("estimate_contraction: pairs must be >= 1");
  if (!(radius > 0.0)) {
    throw InputError("estimate_contraction: radius must be positive");
  }
  const Eigen::Index n = w.size();
  auto draw = [&] {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i) = radius * w(i) * uniform(rng, -1.0, 1.0);
    }
    return x;
  };
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Eigen::VectorXd x = draw();
    Eigen::VectorXd y = draw();
    const double gap = weighted_norm(x - y, w);
    if (gap == 0.0) {
      --p;
      continue;
    }
    const Eigen::VectorXd fx = op(x);
    const Eigen::VectorXd fy = op(y);
    worst = std::max(worst, weighted_norm(fx - fy, w) / gap);
  }
  return worst;
}

}  // namespace asyncq
