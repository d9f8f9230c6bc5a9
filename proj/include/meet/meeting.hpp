#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/krylov.hpp"
#include "meet/markov.hpp"
#include "meet/pairspace.hpp"

namespace meet {

/// Expected meeting times M[i][j] = E[tau_meet(i,j)], zero diagonal.
/// solved_diagonal keeps the diagonal of the raw pair-system solution w,
/// which satisfies sum_i pi_i^2 w[(i,i)] = 1.
struct MeetingTimeMatrix {
  Eigen::MatrixXd M;
  Eigen::VectorXd solved_diagonal;
};

namespace detail {

inline std::string period_diagnostic(const TransitionMatrix& tm) {
  if (!check_irreducible(tm)) return "chain is reducible";
  int p = chain_period(tm);
  if (p > 1)
    return "chain has period " + std::to_string(p) +
           "; walks started in different cyclic classes never meet";
  return "chain is irreducible and aperiodic";
}

}  // namespace detail

enum class SolveMode { Auto, Dense, MatrixFree };

/// Solves (I - (P ⊗ P) E) w = 1 on the pair space and reshapes E w into the
/// meeting-time matrix. Dense LU with a condition estimate for n within the
/// dense limit, matrix-free GMRES above it (or on request).
inline MeetingTimeMatrix exact_meeting_times(const TransitionMatrix& tm,
                                             SolveMode mode = SolveMode::Auto) {
  const int n = tm.n;
  const Eigen::Index dim = static_cast<Eigen::Index>(n) * n;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim);
  Eigen::VectorXd w;

  if (check_irreducible(tm) && !check_aperiodic(tm))
    throw InfiniteMeetingTimeError("killed pair system is singular: " +
                                   detail::period_diagnostic(tm));

  const bool dense = mode == SolveMode::Dense || (mode == SolveMode::Auto && n <= kDenseLimit);
  if (dense) {
    Eigen::MatrixXd A = materialize(PairOperator(tm, PairMode::Lkill));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    // Pivot-ratio condition estimate; PartialPivLU::rcond() is unreliable on
    // an exactly singular factorization.
    Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    double pmin = pivots.minCoeff(), pmax = pivots.maxCoeff();
    if (!(pmin > 0.0) || pmax / pmin > 1e12)
      throw InfiniteMeetingTimeError(
          "killed pair system is singular or near-singular (estimated condition " +
          detail::sci(pmin > 0.0 ? pmax / pmin : std::numeric_limits<double>::infinity()) +
          "): " + detail::period_diagnostic(tm));
    w = lu.solve(ones);
    w += lu.solve(ones - A * w);
    if (!w.allFinite() || (A * w - ones).norm() > 1e-8 * ones.norm())
      throw InfiniteMeetingTimeError("killed pair solve failed the residual check: " +
                                     detail::period_diagnostic(tm));
  } else {
    auto apply = [&tm](const Eigen::VectorXd& x) { return apply_Lkill(tm, x); };
    GmresResult res = gmres(apply, ones, ones, 1e-10, 50 * n, 60);
    if (!res.converged)
      throw ConvergenceError("matrix-free meeting-time solve stalled at relative residual " +
                                 detail::sci(res.rel_residual),
                             res.rel_residual);
    w = res.x;
  }

  MeetingTimeMatrix mt;
  mt.M.resize(n, n);
  mt.solved_diagonal.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) mt.M(i, j) = w(static_cast<Eigen::Index>(i) * n + j);
    mt.solved_diagonal(i) = mt.M(i, i);
    mt.M(i, i) = 0.0;
  }
  return mt;
}

/// t_meet^pi = sum_{i != j} pi_i pi_j M[i][j]; the diagonal of M is zero so
/// the quadratic form needs no exclusion.
inline double tmeet_pi(const MeetingTimeMatrix& mt, const StationaryDistribution& sd) {
  if (mt.M.rows() != sd.pi.size())
    throw DimensionError("meeting matrix and stationary distribution sizes differ");
  return sd.pi.dot(mt.M * sd.pi);
}

/// Singular triplets of L_kill, non-increasing. In partial mode only the
/// k smallest triplets are held (still stored non-increasingly).
struct SvdResult {
  Eigen::VectorXd sigma;
  Eigen::MatrixXd U, V;
  bool partial = false;
};

namespace detail {

struct DenseSvd {
  Eigen::VectorXd sigma;
  Eigen::MatrixXd U, V;
};

// Bidiagonal divide-and-conquer first; its deflation can mangle matrices with
// heavily repeated singular values (complete graphs and other highly symmetric
// chains), so the factorization is probed with random vectors and recomputed
// by two-sided Jacobi when it fails.
inline DenseSvd robust_svd(const Eigen::MatrixXd& a) {
  DenseSvd out;
  {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.sigma = svd.singularValues();
    out.U = svd.matrixU();
    out.V = svd.matrixV();
  }
  SplitMix64 rng(0x5EEDFACEULL);
  const double scale = std::max(1.0, out.sigma.size() > 0 ? out.sigma(0) : 0.0);
  bool ok = true;
  for (int probe = 0; probe < 3 && ok; ++probe) {
    Eigen::VectorXd r(a.cols());
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.next_double() - 0.5;
    r /= r.norm();
    double forward = (a * (out.V * r) - out.U * (out.sigma.asDiagonal() * r)).norm();
    double adjoint = (a.transpose() * (out.U * r) - out.V * (out.sigma.asDiagonal() * r)).norm();
    if (forward > 1e-10 * scale || adjoint > 1e-10 * scale) ok = false;
  }
  if (!ok) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.sigma = svd.singularValues();
    out.U = svd.matrixU();
    out.V = svd.matrixV();
  }
  return out;
}

// Sign convention: first coordinate of each left vector with magnitude above
// 1e-10 is made positive; the right vector flips with it.
inline void fix_svd_signs(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      if (std::abs(U(i, j)) > 1e-10) {
        if (U(i, j) < 0.0) {
          U.col(j) = -U.col(j);
          V.col(j) = -V.col(j);
        }
        break;
      }
    }
  }
}

}  // namespace detail

/// Full SVD of the dense materialization of L_kill (n within the dense limit).
inline SvdResult svd_killed(const TransitionMatrix& tm) {
  Eigen::MatrixXd A = materialize(PairOperator(tm, PairMode::Lkill));
  detail::DenseSvd svd = detail::robust_svd(A);
  SvdResult out;
  out.sigma = std::move(svd.sigma);
  out.U = std::move(svd.U);
  out.V = std::move(svd.V);
  detail::fix_svd_signs(out.U, out.V);
  return out;
}

/// The k smallest singular triplets of L_kill, computed matrix-free by block
/// inverse subspace iteration on (L_kill^t L_kill)^{-1} with GMRES inner
/// solves and a Rayleigh-Ritz extraction. The block grows when the residual
/// stalls, which happens when it straddles a cluster of singular values.
/// Works for any n; requires L_kill nonsingular (inner solves stall
/// otherwise).
inline SvdResult svd_killed(const TransitionMatrix& tm, int k_smallest,
                            std::uint64_t seed = 20240901) {
  const int n = tm.n;
  const Eigen::Index dim = static_cast<Eigen::Index>(n) * n;
  if (k_smallest < 1) throw InvalidParameterError("k_smallest must be at least 1");
  const int m = static_cast<int>(std::min<Eigen::Index>(k_smallest, dim));
  const int max_block = static_cast<int>(std::min<Eigen::Index>(m + 16, dim));
  const int inner_cap = 50 * std::max(n, 4);
  const double inner_rtol = 1e-12;
  const double residual_tol = 1e-8;
  const int max_outer = 300;

  auto apply = [&tm](const Eigen::VectorXd& x) { return apply_Lkill(tm, x); };
  auto apply_t = [&tm](const Eigen::VectorXd& x) { return apply_Lkill_transpose(tm, x); };
  auto orthonormalize = [](Eigen::MatrixXd& mat) {
    mat = Eigen::HouseholderQR<Eigen::MatrixXd>(mat).householderQ() *
          Eigen::MatrixXd::Identity(mat.rows(), mat.cols());
  };

  SplitMix64 rng(seed);
  auto random_fill = [&rng](Eigen::Ref<Eigen::MatrixXd> block_ref) {
    for (Eigen::Index i = 0; i < block_ref.rows(); ++i)
      for (Eigen::Index j = 0; j < block_ref.cols(); ++j)
        block_ref(i, j) = rng.next_double() - 0.5;
  };

  int block = static_cast<int>(std::min<Eigen::Index>(m + 2, dim));
  Eigen::MatrixXd V(dim, block);
  random_fill(V);
  orthonormalize(V);

  Eigen::VectorXd sigma;
  Eigen::MatrixXd left, right;
  double worst_residual = std::numeric_limits<double>::infinity();
  double prev_worst = worst_residual;
  int stalled = 0;

  for (int outer = 0; outer < max_outer; ++outer) {
    // Z = L_kill^{-1} L_kill^{-t} V, one inverse power step on L_kill^t L_kill.
    Eigen::MatrixXd Z(dim, block);
    for (int j = 0; j < block; ++j) {
      GmresResult step1 = gmres(apply_t, V.col(j), Eigen::VectorXd::Zero(dim).eval(),
                                inner_rtol, inner_cap);
      if (!step1.converged)
        throw ConvergenceError("partial SVD inner solve (transpose) stalled at residual " +
                                   detail::sci(step1.rel_residual),
                               step1.rel_residual);
      GmresResult step2 =
          gmres(apply, step1.x, Eigen::VectorXd::Zero(dim).eval(), inner_rtol, inner_cap);
      if (!step2.converged)
        throw ConvergenceError("partial SVD inner solve stalled at residual " +
                                   detail::sci(step2.rel_residual),
                               step2.rel_residual);
      Z.col(j) = step2.x;
    }
    V = std::move(Z);
    orthonormalize(V);

    // Rayleigh-Ritz through the thin SVD of L_kill V.
    Eigen::MatrixXd W(dim, block);
    for (int j = 0; j < block; ++j) W.col(j) = apply(V.col(j));
    Eigen::MatrixXd Q = W;
    orthonormalize(Q);
    Eigen::MatrixXd R = Q.transpose() * W;
    Eigen::JacobiSVD<Eigen::MatrixXd> small(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    sigma.resize(block);
    left.resize(dim, block);
    right.resize(dim, block);
    // Ascending order: smallest candidate triplets first.
    for (int j = 0; j < block; ++j) {
      int src = block - 1 - j;
      sigma(j) = small.singularValues()(src);
      left.col(j) = Q * small.matrixU().col(src);
      right.col(j) = V * small.matrixV().col(src);
    }

    worst_residual = 0.0;
    for (int j = 0; j < m; ++j) {
      double r1 = (apply(right.col(j)) - sigma(j) * left.col(j)).norm();
      double r2 = (apply_t(left.col(j)) - sigma(j) * right.col(j)).norm();
      worst_residual = std::max(worst_residual, std::max(r1, r2));
    }
    if (worst_residual <= residual_tol) {
      SvdResult out;
      out.partial = true;
      out.sigma.resize(m);
      out.U.resize(dim, m);
      out.V.resize(dim, m);
      for (int j = 0; j < m; ++j) {
        out.sigma(j) = sigma(m - 1 - j);  // non-increasing
        out.U.col(j) = left.col(m - 1 - j);
        out.V.col(j) = right.col(m - 1 - j);
      }
      detail::fix_svd_signs(out.U, out.V);
      return out;
    }

    stalled = worst_residual > 0.5 * prev_worst ? stalled + 1 : 0;
    prev_worst = worst_residual;
    V = right.leftCols(block);
    if (stalled >= 2 && block < max_block) {
      // The block boundary is cutting through a singular-value cluster; widen
      // it until the whole cluster fits.
      int grown = std::min(block + 2, max_block);
      Eigen::MatrixXd wide(dim, grown);
      wide.leftCols(block) = V;
      random_fill(wide.rightCols(grown - block));
      orthonormalize(wide);
      V = std::move(wide);
      block = grown;
      stalled = 0;
      prev_worst = std::numeric_limits<double>::infinity();
    }
  }
  throw ConvergenceError("partial SVD did not reach residual tolerance; worst residual " +
                             detail::sci(worst_residual),
                         worst_residual);
}

/// Maximal triplet residual max_i(||L_kill v_i - sigma_i u_i||,
/// ||L_kill^t u_i - sigma_i v_i||); test hook for the SvdResult contract.
inline double svd_residual(const TransitionMatrix& tm, const SvdResult& svd) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < svd.sigma.size(); ++j) {
    double r1 = (apply_Lkill(tm, svd.V.col(j)) - svd.sigma(j) * svd.U.col(j)).norm();
    double r2 = (apply_Lkill_transpose(tm, svd.U.col(j)) - svd.sigma(j) * svd.V.col(j)).norm();
    worst = std::max({worst, r1, r2});
  }
  return worst;
}

/// Spectral formula: t^pi = -1 + sum_i (1/sigma_i) (pi ⊗ pi)^t v_i u_i^t 1.
/// Needs the full decomposition and a nonsingular L_kill.
inline double spectral_tmeet(const SvdResult& svd, const StationaryDistribution& sd) {
  if (svd.partial)
    throw InsufficientDataError("spectral formula needs the full set of n^2 triplets");
  const Eigen::Index dim = svd.sigma.size();
  if (svd.sigma(dim - 1) <= 1e-12)
    throw InfiniteMeetingTimeError("zero singular value: expected meeting time is infinite");
  Eigen::VectorXd pipi = pair_outer(sd.pi);
  Eigen::VectorXd s1 = svd.V.transpose() * pipi;
  Eigen::VectorXd s2 = svd.U.transpose() * Eigen::VectorXd::Ones(dim);
  double total = -1.0;
  for (Eigen::Index i = 0; i < dim; ++i) total += s1(i) * s2(i) / svd.sigma(i);
  return total;
}

/// Rank-k truncation of the spectral sum with its certified error bound
/// n ||pi||^2 / sigma_{n^2-k}; the bound is 0 at k = n^2 (the sum is exact).
struct RankKApprox {
  int k = 0;
  double value = 0.0;
  double bound = 0.0;
  bool certified = false;
};

inline RankKApprox rank_k_tmeet(const SvdResult& svd, const StationaryDistribution& sd, int k) {
  const int n = static_cast<int>(sd.pi.size());
  const Eigen::Index full_dim = static_cast<Eigen::Index>(n) * n;
  const Eigen::Index held = svd.sigma.size();
  if (k < 1 || k > full_dim)
    throw InvalidParameterError("rank k must be in [1, n^2]");
  if (held < k)
    throw InsufficientDataError("decomposition holds " + std::to_string(held) +
                                " triplets, need the " + std::to_string(k) + " smallest");
  const bool full = !svd.partial;
  if (full && held != full_dim)
    throw DimensionError("full SVD size does not match the stationary distribution");

  Eigen::VectorXd pipi = pair_outer(sd.pi);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(svd.U.rows());
  RankKApprox out;
  out.k = k;
  out.value = -1.0;
  for (Eigen::Index i = held - k; i < held; ++i) {
    if (svd.sigma(i) <= 1e-14)
      throw InfiniteMeetingTimeError("zero singular value inside the rank-k sum");
    double s1 = svd.V.col(i).dot(pipi);
    double s2 = svd.U.col(i).dot(ones);
    out.value += s1 * s2 / svd.sigma(i);
  }

  if (k == full_dim) {
    out.bound = 0.0;
    out.certified = true;
    return out;
  }
  if (held < k + 1)
    throw InsufficientDataError("bound needs sigma_{n^2-k}: hold at least k+1 smallest triplets");
  double sigma_next = svd.sigma(held - k - 1);
  if (sigma_next <= 1e-14) {
    out.bound = std::numeric_limits<double>::infinity();
    out.certified = false;
  } else {
    out.bound = n * sd.sq_norm / sigma_next;
    out.certified = true;
  }
  return out;
}

/// Singular-value summary as CSV rows "i,sigma" (1-based index, descending).
inline void write_sigma_csv(const SvdResult& svd, std::ostream& out) {
  out.precision(17);
  out << "i,sigma\n";
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i)
    out << (i + 1) << ',' << svd.sigma(i) << '\n';
}

}  // namespace meet
