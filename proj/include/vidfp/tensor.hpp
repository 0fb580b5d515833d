#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace vidfp {

using Shape3 = std::array<Eigen::Index, 3>;

/// Dense third-order tensor with element (i1,i2,i3) stored at
/// data[i1 + I1*(i2 + I2*i3)], i.e. the first index varies fastest.
template <typename Scalar>
class Tensor3 {
 public:
  using Index = Eigen::Index;
  using DataVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor3() : dims_{0, 0, 0} {}

  Tensor3(Index i1, Index i2, Index i3) : dims_{i1, i2, i3} {
    if (i1 <= 0 || i2 <= 0 || i3 <= 0)
      throw std::invalid_argument("Tensor3: dimensions must be positive");
    data_ = DataVector::Zero(i1 * i2 * i3);
  }

  explicit Tensor3(const Shape3& dims) : Tensor3(dims[0], dims[1], dims[2]) {}

  static Tensor3 constant(const Shape3& dims, Scalar value) {
    Tensor3 t(dims);
    t.data_.setConstant(value);
    return t;
  }

  const Shape3& dims() const { return dims_; }

  /// Extent of the given mode, 1-based like the rest of the API.
  Index dim(int mode) const { return dims_[static_cast<std::size_t>(mode - 1)]; }

  Index size() const { return data_.size(); }

  Scalar& operator()(Index i1, Index i2, Index i3) {
    return data_[i1 + dims_[0] * (i2 + dims_[1] * i3)];
  }
  Scalar operator()(Index i1, Index i2, Index i3) const {
    return data_[i1 + dims_[0] * (i2 + dims_[1] * i3)];
  }

  DataVector& data() { return data_; }
  const DataVector& data() const { return data_; }

  Scalar squaredNorm() const { return data_.squaredNorm(); }
  Scalar norm() const { return data_.norm(); }
  Scalar lpNorm1() const { return data_.template lpNorm<1>(); }
  Scalar sum() const { return data_.sum(); }
  bool allFinite() const { return data_.allFinite(); }

  bool operator==(const Tensor3& other) const {
    return dims_ == other.dims_ && data_ == other.data_;
  }

 private:
  Shape3 dims_;
  DataVector data_;
};

using Tensor3d = Tensor3<double>;

namespace detail {

inline void requireMode(int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

}  // namespace detail

/// Mode-n matricization. Row index is i_n; the remaining indices enumerate
/// the columns with the lower-numbered mode varying fastest:
///   mode 1: column i2 + i3*I2,  mode 2: column i1 + i3*I1,  mode 3: column i1 + i2*I1.
template <typename Scalar>
Eigen::MatrixX<Scalar> matricize(const Tensor3<Scalar>& t, int mode) {
  detail::requireMode(mode);
  const Shape3& d = t.dims();
  using Mat = Eigen::MatrixX<Scalar>;
  switch (mode) {
    case 1:
      // Storage is already i1-fastest, so mode 1 is a straight reshape.
      return Eigen::Map<const Mat>(t.data().data(), d[0], d[1] * d[2]);
    case 2: {
      Mat out(d[1], d[0] * d[2]);
      for (Eigen::Index i3 = 0; i3 < d[2]; ++i3) {
        Eigen::Map<const Mat> slice(t.data().data() + i3 * d[0] * d[1], d[0], d[1]);
        out.block(0, i3 * d[0], d[1], d[0]) = slice.transpose();
      }
      return out;
    }
    default:
      return Eigen::Map<const Mat>(t.data().data(), d[0] * d[1], d[2]).transpose();
  }
}

/// Inverse of matricize: fold(matricize(t, n), n, t.dims()) == t exactly.
template <typename Scalar>
Tensor3<Scalar> fold(const Eigen::MatrixX<Scalar>& m, int mode, const Shape3& dims) {
  detail::requireMode(mode);
  const Eigen::Index other = dims[0] * dims[1] * dims[2] / dims[mode - 1];
  if (m.rows() != dims[mode - 1] || m.cols() != other)
    throw std::invalid_argument("fold: matrix shape inconsistent with dims/mode");
  Tensor3<Scalar> t(dims);
  using Mat = Eigen::MatrixX<Scalar>;
  switch (mode) {
    case 1:
      Eigen::Map<Mat>(t.data().data(), dims[0], dims[1] * dims[2]) = m;
      break;
    case 2:
      for (Eigen::Index i3 = 0; i3 < dims[2]; ++i3) {
        Eigen::Map<Mat> slice(t.data().data() + i3 * dims[0] * dims[1], dims[0], dims[1]);
        slice = m.block(0, i3 * dims[0], dims[1], dims[0]).transpose();
      }
      break;
    default:
      Eigen::Map<Mat>(t.data().data(), dims[0] * dims[1], dims[2]) = m.transpose();
      break;
  }
  return t;
}

/// n-mode product t x_n u: every mode-n fiber is multiplied by u,
/// so matricize(result, n) == u * matricize(t, n).
template <typename Scalar>
Tensor3<Scalar> modeProduct(const Tensor3<Scalar>& t, const Eigen::MatrixX<Scalar>& u, int mode) {
  detail::requireMode(mode);
  if (u.cols() != t.dim(mode))
    throw std::invalid_argument("modeProduct: u.cols() must equal the mode-" +
                                std::to_string(mode) + " extent");
  Shape3 dims = t.dims();
  dims[mode - 1] = u.rows();
  return fold<Scalar>(u * matricize(t, mode), mode, dims);
}

}  // namespace vidfp
