#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/markov.hpp"

namespace meet {

/// Vertices for a dense materialization / full SVD; above this only the
/// matrix-free paths are available.
inline constexpr int kDenseLimit = 40;

/// The flattening bijection f(k,l) = (k-1)n + l between pair states and
/// coordinates of length-n^2 vectors. Public indices are 1-based to match
/// the convention used throughout; vector storage is 0-based underneath.
class PairIndex {
 public:
  explicit PairIndex(int n) : n_(n) {
    if (n < 1) throw InvalidParameterError("pair space needs n >= 1");
  }

  int n() const { return n_; }
  int dim() const { return n_ * n_; }

  /// 1-based pair (k,l) -> 1-based coordinate (k-1)n + l.
  int flatten(int k, int l) const {
    if (k < 1 || k > n_ || l < 1 || l > n_)
      throw InvalidParameterError("pair index (" + std::to_string(k) + "," +
                                  std::to_string(l) + ") out of [1," + std::to_string(n_) + "]^2");
    return (k - 1) * n_ + l;
  }

  std::pair<int, int> unflatten(int idx) const {
    if (idx < 1 || idx > dim())
      throw InvalidParameterError("flat index " + std::to_string(idx) + " out of range");
    int k = (idx - 1) / n_ + 1;
    int l = (idx - 1) % n_ + 1;
    return {k, l};
  }

  /// The meeting set D = {1, n+2, 2n+3, ..., n^2} (1-based coordinates).
  std::vector<int> diagonal_set() const {
    std::vector<int> d(n_);
    for (int i = 0; i < n_; ++i) d[i] = i * (n_ + 1) + 1;
    return d;
  }

 private:
  int n_;
};

namespace detail {

inline void require_pair_dim(const Eigen::VectorXd& x, int n, const char* where) {
  if (x.size() != static_cast<Eigen::Index>(n) * n)
    throw DimensionError(std::string(where) + ": vector length " + std::to_string(x.size()) +
                         " != n^2 = " + std::to_string(n * n));
}

// Row-major reshape of a pair-space vector, consistent with f(k,l) = (k-1)n+l:
// coordinate (k,l) is entry (k-1, l-1) of the matrix.
inline Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_matrix(const Eigen::VectorXd& x, int n) {
  return {x.data(), n, n};
}

inline Eigen::VectorXd from_matrix(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd x(static_cast<Eigen::Index>(n) * n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x.data(), n, n) = m;
  return x;
}

}  // namespace detail

/// E x: coordinates in the meeting set D are zeroed, the rest pass through.
inline Eigen::VectorXd apply_E(const Eigen::VectorXd& x, int n) {
  detail::require_pair_dim(x, n, "apply_E");
  Eigen::VectorXd y = x;
  for (int i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i) * (n + 1)) = 0.0;
  return y;
}

/// (P ⊗ P) x without materializing the Kronecker product: reshape x into the
/// n x n matrix X with X[k][l] = x[f(k,l)], form P X P^t, flatten back.
/// O(n^3) time, O(n^2) memory.
inline Eigen::VectorXd apply_kron(const TransitionMatrix& tm, const Eigen::VectorXd& x) {
  detail::require_pair_dim(x, tm.n, "apply_kron");
  Eigen::MatrixXd X = detail::as_matrix(x, tm.n);
  return detail::from_matrix(tm.P * X * tm.P.transpose());
}

/// (P ⊗ P)^t x = vec(P^t X P).
inline Eigen::VectorXd apply_kron_transpose(const TransitionMatrix& tm,
                                            const Eigen::VectorXd& x) {
  detail::require_pair_dim(x, tm.n, "apply_kron_transpose");
  Eigen::MatrixXd X = detail::as_matrix(x, tm.n);
  return detail::from_matrix(tm.P.transpose() * X * tm.P);
}

/// L x = x - (P ⊗ P) x.
inline Eigen::VectorXd apply_L(const TransitionMatrix& tm, const Eigen::VectorXd& x) {
  return x - apply_kron(tm, x);
}

inline Eigen::VectorXd apply_L_transpose(const TransitionMatrix& tm, const Eigen::VectorXd& x) {
  return x - apply_kron_transpose(tm, x);
}

/// L_kill x = x - (P ⊗ P) E x.
inline Eigen::VectorXd apply_Lkill(const TransitionMatrix& tm, const Eigen::VectorXd& x) {
  return x - apply_kron(tm, apply_E(x, tm.n));
}

inline Eigen::VectorXd apply_Lkill_transpose(const TransitionMatrix& tm,
                                             const Eigen::VectorXd& x) {
  return x - apply_E(apply_kron_transpose(tm, x), tm.n);
}

enum class PairMode { L, Lkill, KronOnly };

/// Matrix-free operator on the n^2-dimensional pair space. Immutable and
/// reentrant; every apply allocates a fresh output.
class PairOperator {
 public:
  PairOperator(TransitionMatrix tm, PairMode mode) : tm_(std::move(tm)), mode_(mode) {}

  int n() const { return tm_.n; }
  int dim() const { return tm_.n * tm_.n; }
  PairMode mode() const { return mode_; }
  const TransitionMatrix& transition() const { return tm_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    switch (mode_) {
      case PairMode::L:
        return apply_L(tm_, x);
      case PairMode::Lkill:
        return apply_Lkill(tm_, x);
      case PairMode::KronOnly:
        return apply_kron(tm_, x);
    }
    throw Error("unreachable");
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const {
    switch (mode_) {
      case PairMode::L:
        return apply_L_transpose(tm_, x);
      case PairMode::Lkill:
        return apply_Lkill_transpose(tm_, x);
      case PairMode::KronOnly:
        return apply_kron_transpose(tm_, x);
    }
    throw Error("unreachable");
  }

 private:
  TransitionMatrix tm_;
  PairMode mode_;
};

/// Dense n^2 x n^2 materialization: column j is apply(e_j). Refused above the
/// dense limit.
inline Eigen::MatrixXd materialize(const PairOperator& op) {
  if (op.n() > kDenseLimit)
    throw SizeError("dense materialization refused for n = " + std::to_string(op.n()) +
                    " > " + std::to_string(kDenseLimit));
  const int dim = op.dim();
  Eigen::MatrixXd m(dim, dim);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < dim; ++j) {
    e(j) = 1.0;
    m.col(j) = op.apply(e);
    e(j) = 0.0;
  }
  return m;
}

/// pi ⊗ pi flattened with the same f-convention: coordinate (i,j) = pi_i pi_j.
inline Eigen::VectorXd pair_outer(const Eigen::VectorXd& pi) {
  const int n = static_cast<int>(pi.size());
  Eigen::VectorXd x(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(static_cast<Eigen::Index>(i) * n + j) = pi(i) * pi(j);
  return x;
}

}  // namespace meet
