#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vidfp/tensor.hpp"

namespace vidfp {

inline constexpr double kHooiTol = 1e-8;
inline constexpr int kHooiMaxIter = 200;

/// Tucker model: core tensor (J1 x J2 x J3) plus one factor matrix per mode,
/// factor n of shape In x Jn. Models produced by hosvdInit / tuckerHooi have
/// column-wise orthonormal factors.
template <typename Scalar>
struct TuckerModel {
  Tensor3<Scalar> core;
  std::array<Eigen::MatrixX<Scalar>, 3> factors;

  const Eigen::MatrixX<Scalar>& factor(int mode) const {
    return factors[static_cast<std::size_t>(mode - 1)];
  }
  Eigen::MatrixX<Scalar>& factor(int mode) {
    return factors[static_cast<std::size_t>(mode - 1)];
  }

  Shape3 ranks() const { return core.dims(); }
};

using TuckerModeld = TuckerModel<double>;

template <typename Scalar>
struct HooiResult {
  TuckerModel<Scalar> model;
  /// Reconstruction error after init and after each sweep; non-increasing.
  std::vector<Scalar> sweep_errors;
};

template <typename Scalar>
bool isColumnOrthonormal(const Eigen::MatrixX<Scalar>& m, Scalar tol) {
  Eigen::MatrixX<Scalar> g = m.transpose() * m;
  g.diagonal().array() -= Scalar(1);
  return g.cwiseAbs().maxCoeff() <= tol;
}

namespace detail {

template <typename Scalar>
void validateRanks(const Shape3& dims, const Shape3& ranks) {
  for (int n = 0; n < 3; ++n) {
    if (ranks[n] < 1 || ranks[n] > dims[n])
      throw std::invalid_argument("rank out of range for mode " + std::to_string(n + 1));
  }
}

// Fixes the sign of each column so its largest-magnitude entry is positive
// (first index wins on ties), making the SVD reproducible across runs.
template <typename Scalar>
void fixColumnSigns(Eigen::MatrixX<Scalar>& u) {
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index imax = 0;
    u.col(c).cwiseAbs().maxCoeff(&imax);
    if (u(imax, c) < Scalar(0)) u.col(c) = -u.col(c);
  }
}

}  // namespace detail

/// The `count` leading left singular vectors of m, sign-fixed. When count
/// exceeds the thin-SVD width the basis is completed from the full SVD.
template <typename Scalar>
Eigen::MatrixX<Scalar> leadingLeftSingularVectors(const Eigen::MatrixX<Scalar>& m,
                                                  Eigen::Index count) {
  if (count < 1 || count > m.rows())
    throw std::invalid_argument("leadingLeftSingularVectors: count out of range");
  const unsigned options =
      count > std::min(m.rows(), m.cols()) ? Eigen::ComputeFullU : Eigen::ComputeThinU;
  Eigen::BDCSVD<Eigen::MatrixX<Scalar>> svd(m, options);
  Eigen::MatrixX<Scalar> u = svd.matrixU().leftCols(count);
  detail::fixColumnSigns(u);
  return u;
}

/// Core for given orthonormal factors: t x_1 A1^T x_2 A2^T x_3 A3^T.
template <typename Scalar>
Tensor3<Scalar> projectCore(const Tensor3<Scalar>& t,
                            const std::array<Eigen::MatrixX<Scalar>, 3>& factors) {
  Tensor3<Scalar> y = t;
  for (int n = 1; n <= 3; ++n)
    y = modeProduct<Scalar>(y, factors[static_cast<std::size_t>(n - 1)].transpose(), n);
  return y;
}

/// Truncated HOSVD: factor n holds the Jn leading left singular vectors of
/// the mode-n matricization.
template <typename Scalar>
TuckerModel<Scalar> hosvdInit(const Tensor3<Scalar>& t, const Shape3& ranks) {
  detail::validateRanks<Scalar>(t.dims(), ranks);
  TuckerModel<Scalar> model;
  for (int n = 1; n <= 3; ++n)
    model.factor(n) = leadingLeftSingularVectors<Scalar>(matricize(t, n), ranks[n - 1]);
  model.core = projectCore(t, model.factors);
  return model;
}

template <typename Scalar>
Tensor3<Scalar> reconstruct(const TuckerModel<Scalar>& model) {
  Tensor3<Scalar> t = model.core;
  for (int n = 1; n <= 3; ++n) t = modeProduct(t, model.factor(n), n);
  return t;
}

/// Frobenius norm of t - reconstruct(model). For orthonormal factors this
/// equals sqrt(||t||_F^2 - ||core||_F^2).
template <typename Scalar>
Scalar reconstructionError(const Tensor3<Scalar>& t, const TuckerModel<Scalar>& model) {
  for (int n = 1; n <= 3; ++n) {
    if (model.factor(n).rows() != t.dim(n))
      throw std::invalid_argument("reconstructionError: model dims do not match tensor");
  }
  return (t.data() - reconstruct(model).data()).norm();
}

namespace detail {

template <typename Scalar>
Scalar errorFromCoreNorm(Scalar t_squared_norm, const Tensor3<Scalar>& core) {
  return std::sqrt(std::max<Scalar>(t_squared_norm - core.squaredNorm(), Scalar(0)));
}

}  // namespace detail

/// Tucker decomposition by higher-order orthogonal iteration (alternating
/// least squares). Each mode update projects the tensor onto the current
/// factors of the other modes and takes the Jn leading left singular vectors
/// of the mode-n matricization of that projection; this is the same matrix as
/// X_(n) times the Kronecker product of the other factors. Stops when the
/// decrease in reconstruction error between sweeps falls below tol.
template <typename Scalar>
HooiResult<Scalar> tuckerHooi(const Tensor3<Scalar>& t, const Shape3& ranks,
                              Scalar tol = Scalar(kHooiTol), int max_iter = kHooiMaxIter) {
  detail::validateRanks<Scalar>(t.dims(), ranks);
  if (!t.allFinite()) throw std::invalid_argument("tuckerHooi: input has non-finite entries");
  if (!(tol > Scalar(0)) || max_iter < 1)
    throw std::invalid_argument("tuckerHooi: tol must be > 0 and max_iter >= 1");

  HooiResult<Scalar> result;
  result.model = hosvdInit(t, ranks);
  const Scalar t2 = t.squaredNorm();
  Scalar err = detail::errorFromCoreNorm(t2, result.model.core);
  result.sweep_errors.push_back(err);

  for (int iter = 0; iter < max_iter; ++iter) {
    Tensor3<Scalar> projected;
    for (int n = 1; n <= 3; ++n) {
      projected = t;
      for (int m = 1; m <= 3; ++m) {
        if (m == n) continue;
        projected = modeProduct<Scalar>(projected, result.model.factor(m).transpose(), m);
      }
      result.model.factor(n) =
          leadingLeftSingularVectors<Scalar>(matricize(projected, n), ranks[n - 1]);
    }
    // `projected` now holds t x_1 A1^T x_2 A2^T; one more product gives the core.
    result.model.core = modeProduct<Scalar>(projected, result.model.factor(3).transpose(), 3);
    const Scalar new_err = detail::errorFromCoreNorm(t2, result.model.core);
    result.sweep_errors.push_back(new_err);
    if (err - new_err < tol) break;
    err = new_err;
  }
  return result;
}

}  // namespace vidfp
