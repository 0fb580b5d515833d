#include "vidfp/tensor.hpp"

#include "doctest.h"
#include "test_util.hpp"

using namespace vidfp;
using test_util::matricizeOracle;
using test_util::randomMatrix;
using test_util::randomTensor;

TEST_CASE("matricize of an all-zero tensor is a zero matrix of the right shape") {
  Tensor3d t(2, 3, 4);
  const Eigen::MatrixXd m = matricize(t, 2);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 8);
  CHECK(m.isZero(0.0));
}

TEST_CASE("mode-1 matricization enumerates (i2,i3) columns with i2 fastest") {
  Tensor3d t(2, 2, 2);
  for (Eigen::Index i3 = 0; i3 < 2; ++i3)
    for (Eigen::Index i2 = 0; i2 < 2; ++i2)
      for (Eigen::Index i1 = 0; i1 < 2; ++i1) t(i1, i2, i3) = double(i1 + 2 * i2 + 4 * i3);

  Eigen::MatrixXd expected(2, 4);
  expected << 0, 2, 4, 6,
              1, 3, 5, 7;
  CHECK(matricize(t, 1) == expected);
  CHECK(matricize(t, 1) == matricizeOracle(t, 1));
}

TEST_CASE("matricization matches the fiber-enumeration oracle in every mode") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3d t = randomTensor(rng, rng.uniformInt(1, 5), rng.uniformInt(1, 5),
                                    rng.uniformInt(1, 5));
    for (int mode = 1; mode <= 3; ++mode) CHECK(matricize(t, mode) == matricizeOracle(t, mode));
  }
}

TEST_CASE("mode-1 matricization of an I1xI2x1 tensor equals its frontal slice") {
  Rng rng(7);
  const Tensor3d t = randomTensor(rng, 4, 3, 1);
  Eigen::MatrixXd slice(4, 3);
  for (Eigen::Index i2 = 0; i2 < 3; ++i2)
    for (Eigen::Index i1 = 0; i1 < 4; ++i1) slice(i1, i2) = t(i1, i2, 0);
  CHECK(matricize(t, 1) == slice);
}

TEST_CASE("fold inverts matricize exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor3d t = randomTensor(rng, rng.uniformInt(1, 6), rng.uniformInt(1, 6),
                                    rng.uniformInt(1, 6));
    for (int mode = 1; mode <= 3; ++mode) CHECK(fold(matricize(t, mode), mode, t.dims()) == t);
  }
}

TEST_CASE("1x1x1 round-trip is the identity") {
  Tensor3d t(1, 1, 1);
  t(0, 0, 0) = 3.25;
  for (int mode = 1; mode <= 3; ++mode) CHECK(fold(matricize(t, mode), mode, t.dims()) == t);
}

TEST_CASE("fold of a 3x8 matrix in mode 2 matches the brute-force inverse") {
  Rng rng(5);
  const Eigen::MatrixXd m = randomMatrix(rng, 3, 8);
  const Shape3 dims{2, 3, 4};
  const Tensor3d t = fold(m, 2, dims);
  // Brute-force inverse: entry (i2, i1 + i3*I1) of the matrix is t(i1,i2,i3).
  for (Eigen::Index i3 = 0; i3 < 4; ++i3)
    for (Eigen::Index i2 = 0; i2 < 3; ++i2)
      for (Eigen::Index i1 = 0; i1 < 2; ++i1) CHECK(t(i1, i2, i3) == m(i2, i1 + i3 * 2));
}

TEST_CASE("fold rejects inconsistent shapes") {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 7);
  CHECK_THROWS_AS(fold(m, 2, Shape3{2, 3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(fold(m, 0, Shape3{2, 3, 4}), std::invalid_argument);
}

TEST_CASE("mode product with the identity returns the tensor unchanged") {
  Rng rng(9);
  const Tensor3d t = randomTensor(rng, 4, 3, 2);
  for (int mode = 1; mode <= 3; ++mode) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(t.dim(mode), t.dim(mode));
    CHECK(modeProduct(t, eye, mode) == t);
  }
}

TEST_CASE("mode product with an all-ones row sums the mode-n fibers") {
  Rng rng(11);
  const Tensor3d t = randomTensor(rng, 4, 3, 2);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, 3);
  const Tensor3d s = modeProduct(t, ones, 2);
  CHECK(s.dims() == Shape3{4, 1, 2});
  for (Eigen::Index i3 = 0; i3 < 2; ++i3)
    for (Eigen::Index i1 = 0; i1 < 4; ++i1) {
      double fiber_sum = 0.0;
      for (Eigen::Index i2 = 0; i2 < 3; ++i2) fiber_sum += t(i1, i2, i3);
      CHECK(s(i1, 0, i3) == doctest::Approx(fiber_sum).epsilon(1e-14));
    }
}

TEST_CASE("mode product satisfies the matricized identity within 1e-12") {
  Rng rng(13);
  const Tensor3d t = randomTensor(rng, 4, 3, 2);
  const Eigen::MatrixXd u = randomMatrix(rng, 5, 4);
  const Tensor3d r = modeProduct(t, u, 1);
  CHECK(r.dims() == Shape3{5, 3, 2});
  CHECK(test_util::relativeError(matricize(r, 1), u * matricize(t, 1)) < 1e-12);
}

TEST_CASE("matricized identity holds for random tensors in every mode") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor3d t = randomTensor(rng, rng.uniformInt(1, 6), rng.uniformInt(1, 6),
                                    rng.uniformInt(1, 6));
    const int mode = rng.uniformInt(1, 3);
    const Eigen::MatrixXd u = randomMatrix(rng, rng.uniformInt(1, 6), t.dim(mode));
    CHECK(test_util::relativeError(matricize(modeProduct(t, u, mode), mode),
                                   u * matricize(t, mode)) < 1e-12);
  }
}

TEST_CASE("products along distinct modes commute") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3d t = randomTensor(rng, 4, 3, 5);
    const Eigen::MatrixXd u = randomMatrix(rng, 2, 4);
    const Eigen::MatrixXd v = randomMatrix(rng, 6, 3);
    const Tensor3d a = modeProduct(modeProduct(t, u, 1), v, 2);
    const Tensor3d b = modeProduct(modeProduct(t, v, 2), u, 1);
    CHECK(test_util::relativeError(a.data(), b.data()) < 1e-12);
  }
}

TEST_CASE("mode product rejects mismatched dimensions") {
  Tensor3d t(4, 3, 2);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(5, 4);
  CHECK_THROWS_AS(modeProduct(t, u, 2), std::invalid_argument);
  CHECK_THROWS_AS(modeProduct(t, u, 4), std::invalid_argument);
}

TEST_CASE("tensor construction validates dimensions") {
  CHECK_THROWS_AS(Tensor3d(0, 2, 2), std::invalid_argument);
  const Tensor3d t = Tensor3d::constant({2, 2, 2}, 1.5);
  CHECK(t.sum() == doctest::Approx(12.0));
  CHECK(t.allFinite());
}
