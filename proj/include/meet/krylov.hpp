#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/rng.hpp"

namespace meet {

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES for a nonsymmetric matrix-free operator. Modified
/// Gram-Schmidt Arnoldi with Givens rotations; stops at relative residual
/// rtol against ||b|| or after max_iters total Arnoldi steps.
template <typename Op>
GmresResult gmres(const Op& apply, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                  double rtol, int max_iters, int restart = 50) {
  const Eigen::Index dim = b.size();
  GmresResult out;
  out.x = x0;
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }
  if (restart > static_cast<int>(dim)) restart = static_cast<int>(dim);

  Eigen::MatrixXd V(dim, restart + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
  Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);

  while (true) {
    Eigen::VectorXd r = b - apply(out.x);
    double beta = r.norm();
    out.rel_residual = beta / b_norm;
    if (out.rel_residual <= rtol) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= max_iters) return out;

    V.col(0) = r / beta;
    g.setZero();
    g(0) = beta;

    int j = 0;
    for (; j < restart && out.iterations < max_iters; ++j) {
      Eigen::VectorXd w = apply(V.col(j));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      bool breakdown = H(j + 1, j) < 1e-14 * b_norm;
      if (!breakdown) V.col(j + 1) = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {
        double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      double denom = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = denom == 0.0 ? 1.0 : H(j, j) / denom;
      sn(j) = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);

      ++out.iterations;
      out.rel_residual = std::abs(g(j + 1)) / b_norm;
      if (out.rel_residual <= rtol || breakdown) {
        ++j;
        break;
      }
    }

    Eigen::VectorXd y =
        H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    out.x += V.leftCols(j) * y;
    if (out.rel_residual <= rtol) {
      // Recompute against the true residual; the Givens estimate can drift.
      out.rel_residual = (b - apply(out.x)).norm() / b_norm;
      if (out.rel_residual <= 10 * rtol) {
        out.converged = true;
        return out;
      }
    }
    if (out.iterations >= max_iters) {
      out.rel_residual = (b - apply(out.x)).norm() / b_norm;
      return out;
    }
  }
}

enum class SpectrumEnd { Smallest, Largest };

/// Extreme eigenvalue of a symmetric matrix-free operator via Lanczos with
/// full reorthogonalization. Converges on clustered spectra where plain
/// (inverse) power iteration crawls; one operator apply per step.
template <typename Op>
double lanczos_extreme_eig(const Op& apply, Eigen::Index dim, double tol, int max_steps,
                           SpectrumEnd end, std::uint64_t seed = 31337) {
  max_steps = static_cast<int>(std::min<Eigen::Index>(max_steps, dim));
  SplitMix64 rng(seed);
  Eigen::MatrixXd basis(dim, max_steps);
  Eigen::VectorXd alpha(max_steps), beta(max_steps);

  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.next_double() - 0.5;
  v /= v.norm();
  basis.col(0) = v;

  double scale = 1.0;
  int k = 0;
  for (; k < max_steps; ++k) {
    Eigen::VectorXd w = apply(basis.col(k));
    alpha(k) = basis.col(k).dot(w);
    scale = std::max(scale, std::abs(alpha(k)));
    w -= alpha(k) * basis.col(k);
    if (k > 0) w -= beta(k - 1) * basis.col(k - 1);
    // Two rounds of reorthogonalization keep the basis numerically orthogonal.
    for (int round = 0; round < 2; ++round)
      w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    beta(k) = w.norm();

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      t(i, i) = alpha(i);
      if (i < k) t(i, i + 1) = t(i + 1, i) = beta(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    int which = end == SpectrumEnd::Smallest ? 0 : k;
    double theta = es.eigenvalues()(which);
    double residual = beta(k) * std::abs(es.eigenvectors()(k, which));
    if (residual <= tol * scale || beta(k) <= 1e-14 * scale || k + 1 == dim) return theta;
    if (k + 1 < max_steps) basis.col(k + 1) = w / beta(k);
  }
  throw ConvergenceError("Lanczos did not isolate the extreme eigenvalue within " +
                             std::to_string(max_steps) + " steps",
                         beta(k - 1));
}

/// Largest singular value of a matrix-free operator via power iteration on
/// A^t A. For a symmetric operator pass the same callable twice; the iteration
/// is then on A^2 and returns the spectral norm.
template <typename OpA, typename OpAt>
double power_sigma_max(const OpA& apply, const OpAt& apply_t, Eigen::Index dim, double tol,
                       int max_iters, std::uint64_t seed = 7151) {
  SplitMix64 rng(seed);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.next_double() - 0.5;
  double vn = v.norm();
  if (vn == 0.0) v(0) = 1.0; else v /= vn;

  double sigma = 0.0;
  int stable = 0;
  int restarts = 0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = apply(v);
    double s = w.norm();
    if (s == 0.0) {
      // Start vector fell into the kernel; redraw a few times before calling
      // the operator zero.
      if (++restarts > 4) return 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.next_double() - 0.5;
      v /= v.norm();
      continue;
    }
    Eigen::VectorXd z = apply_t(w);
    double zn = z.norm();
    if (zn == 0.0) return s;
    v = z / zn;
    double change = std::abs(s - sigma) / std::max(s, 1e-300);
    sigma = s;
    stable = change <= tol ? stable + 1 : 0;
    if (stable >= 3) return sigma;
  }
  throw ConvergenceError("power iteration for the operator norm did not converge within " +
                             std::to_string(max_iters) + " iterations",
                         sigma);
}

}  // namespace meet
