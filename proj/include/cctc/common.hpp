#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cctc {

/// Raised for every contract violation in the library. The message is a
/// short lowercase phrase so that command-line callers can print it verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index into the blank-augmented alphabet A' = A + {blank}.
using TokenId = int;

/// Frame-level token sequence over A' (one entry per output frame).
using Path = std::vector<TokenId>;

/// Character sequence with no blanks. Entries are A' token ids.
using Transcript = std::vector<TokenId>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major T x V matrix; row t is the log-distribution of frame t.
template <typename Scalar>
using Lattice = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  if (a == neg_inf<Scalar>()) return b;
  if (b == neg_inf<Scalar>()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Stable log(sum(exp(x))) over a dense expression.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  if (m == neg_inf<Scalar>()) return m;
  return m + std::log((x.derived().array() - m).exp().sum());
}

/// Row-wise log-softmax of a T x V matrix.
template <typename Derived>
Lattice<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Lattice<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const Scalar m = logits.row(t).maxCoeff();
    const Scalar lse = m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::DenseBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = i;
  }
  return best;
}

}  // namespace cctc
