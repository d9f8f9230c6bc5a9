#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/krylov.hpp"
#include "meet/markov.hpp"
#include "meet/meeting.hpp"
#include "meet/pairspace.hpp"

#include <json.hpp>

namespace meet {

/// The perturbation Pi = (P ⊗ P)(E - I); L_kill = L - Pi.
inline Eigen::VectorXd apply_perturbation(const TransitionMatrix& tm, const Eigen::VectorXd& x) {
  return apply_kron(tm, apply_E(x, tm.n) - x);
}

inline Eigen::VectorXd apply_perturbation_transpose(const TransitionMatrix& tm,
                                                    const Eigen::VectorXd& x) {
  Eigen::VectorXd y = apply_kron_transpose(tm, x);
  return apply_E(y, tm.n) - y;
}

/// ||(P ⊗ P)(E - I)||, the largest singular value of the perturbation,
/// via matrix-free power iteration on Pi^t Pi.
inline double perturbation_norm(const TransitionMatrix& tm, double tol = 1e-8,
                                int max_iters = 20000) {
  auto a = [&tm](const Eigen::VectorXd& x) { return apply_perturbation(tm, x); };
  auto at = [&tm](const Eigen::VectorXd& x) { return apply_perturbation_transpose(tm, x); };
  return power_sigma_max(a, at, static_cast<Eigen::Index>(tm.n) * tm.n, tol, max_iters);
}

/// SVD of the unperturbed generator L = I - P ⊗ P. The vanishing last triplet
/// is known in closed form (u = pi⊗pi normalized, v = uniform); it is verified
/// against the numeric decomposition and then substituted exactly.
struct UnperturbedSvd {
  Eigen::VectorXd sigma;  // descending; last entry exactly 0
  Eigen::MatrixXd U, V;   // full bases; last columns hold the closed forms
  Eigen::VectorXd u_last, v_last;
};

inline UnperturbedSvd unperturbed_svd(const TransitionMatrix& tm,
                                      const StationaryDistribution& sd) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  Eigen::MatrixXd A = materialize(PairOperator(tm, PairMode::L));
  detail::DenseSvd svd = detail::robust_svd(A);

  UnperturbedSvd out;
  out.sigma = std::move(svd.sigma);
  out.U = std::move(svd.U);
  out.V = std::move(svd.V);

  Eigen::VectorXd pipi = pair_outer(sd.pi);
  out.u_last = pipi / pipi.norm();
  out.v_last = Eigen::VectorXd::Constant(dim, 1.0 / tm.n);

  double numeric_null = out.sigma(dim - 1);
  double right_res = apply_L(tm, out.v_last).norm();
  double left_res = apply_L_transpose(tm, out.u_last).norm();
  if (numeric_null > 1e-6 || right_res > 1e-6 || left_res > 1e-6)
    throw InconsistencyError(
        "closed-form null pair disagrees with the numeric SVD (sigma_min = " +
        detail::sci(numeric_null) + ", residuals " + detail::sci(right_res) + ", " +
        detail::sci(left_res) + "); chain reducible or pi not stationary?");

  out.sigma(dim - 1) = 0.0;
  out.U.col(dim - 1) = out.u_last;
  out.V.col(dim - 1) = out.v_last;
  return out;
}

/// gamma_11 = u_last^t (P⊗P)(E-I) v_last, computed matrix-free. Equals -1/n
/// for every stochastic P with stationary pi.
inline double gamma11(const TransitionMatrix& tm, const StationaryDistribution& sd) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  Eigen::VectorXd pipi = pair_outer(sd.pi);
  Eigen::VectorXd z = apply_perturbation(tm, Eigen::VectorXd::Ones(dim));
  return pipi.dot(z) / (pipi.norm() * tm.n);
}

/// tilde_gamma_11^2 = ||g21||^2 + gamma_11^2 via the closed form
/// (1/n^2) ||(P⊗P)(E-I) 1||^2.
inline double tilde_gamma11_sq(const TransitionMatrix& tm) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  Eigen::VectorXd y = apply_perturbation(tm, Eigen::VectorXd::Ones(dim));
  return y.squaredNorm() / (static_cast<double>(tm.n) * tm.n);
}

/// Block quantities of the Stewart split of L_kill^t L_kill around the known
/// null pair of L. Vector blocks are held as ambient-space projections
/// (same norms as the U2/V2 coordinates, which are only defined up to the
/// basis rotation); U2/V2 are never materialized.
///
/// ||G22|| and ||Delta22|| come in two flavors: the submultiplicative upper
/// bounds the analysis uses, and exact values from power iteration on the
/// deflated operators. delta / condition_value are carried for both routes.
struct StewartBlocks {
  double gamma11 = 0.0;          // u_last^t Pi v_last
  double tilde_gamma11_sq = 0.0; // gamma11^2 + ||g21||^2
  Eigen::VectorXd g12;           // (I - v v^t) Pi^t u_last
  Eigen::VectorXd g21;           // (I - u u^t) Pi v_last
  double g12_norm = 0.0;
  double g21_norm = 0.0;
  double g22_norm = 0.0;         // exact, deflated power iteration
  double g22_norm_bound = 0.0;   // ||Pi||
  double sigma2_norm = 0.0;      // ||Sigma2|| = sigma_1(L)
  double sep = 0.0;              // ||Sigma2^{-2}||^{-1} = sigma_min(Sigma2)^2
  double delta11_norm = 0.0;     // == tilde_gamma11_sq (1x1 block)
  double delta12_norm = 0.0;
  double delta21_norm = 0.0;
  double delta22_norm = 0.0;        // exact, deflated power iteration
  double delta22_norm_bound = 0.0;  // 2||G22||_bound ||Sigma2|| + ||G22||_bound^2 + ||g12||^2
  double delta = 0.0;               // sep - ||Delta11|| - ||Delta22||_bound (primary route)
  double delta_exact_route = 0.0;   // same with the exact ||Delta22||
  double condition_value = 0.0;  // 4 ||Delta21|| (||B12|| + ||Delta12||) / delta^2, B12 = 0
  double condition_value_exact_route = 0.0;
  double perturbation_norm = 0.0;  // ||Pi||
};

/// The spectral extremes of L that the Stewart split needs: sigma_1(L) and
/// the smallest nonzero singular value. Computed matrix-free; the known null
/// direction is shifted out of L^t L before the inverse iteration, so the
/// chain must have a simple zero singular value (irreducible, aperiodic).
struct SpectralExtremes {
  double sigma1 = 0.0;
  double sigma_min_sigma2 = 0.0;
};

inline SpectralExtremes spectral_extremes(const TransitionMatrix& tm, double tol = 1e-10,
                                          int max_steps = 400) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  SpectralExtremes out;
  auto gram = [&tm](const Eigen::VectorXd& x) {
    return apply_L_transpose(tm, apply_L(tm, x));
  };
  out.sigma1 = std::sqrt(std::max(
      lanczos_extreme_eig(gram, dim, tol, max_steps, SpectrumEnd::Largest, 4243), 0.0));

  // Lift the known null direction above the spectrum of L^t L; the smallest
  // eigenvalue of the shifted operator is sigma_min(Sigma2)^2.
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(dim, 1.0 / tm.n);
  const double shift = out.sigma1 * out.sigma1 + 1.0;
  auto shifted = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return apply_L_transpose(tm, apply_L(tm, x)) + shift * (v.dot(x)) * v;
  };
  double lambda = lanczos_extreme_eig(shifted, dim, tol, max_steps, SpectrumEnd::Smallest, 5857);
  out.sigma_min_sigma2 = std::sqrt(std::max(lambda, 0.0));
  return out;
}

namespace detail {

inline StewartBlocks stewart_blocks_impl(const TransitionMatrix& tm,
                                         const StationaryDistribution& sd, double sigma2_norm,
                                         double sigma_min_sigma2) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  StewartBlocks b;
  Eigen::VectorXd pipi = pair_outer(sd.pi);
  const Eigen::VectorXd u = pipi / pipi.norm();
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(dim, 1.0 / tm.n);

  Eigen::VectorXd z = apply_perturbation(tm, v);  // Pi v_last
  b.gamma11 = u.dot(z);
  b.g21 = z - b.gamma11 * u;
  b.g21_norm = b.g21.norm();
  b.tilde_gamma11_sq = z.squaredNorm();

  Eigen::VectorXd w = apply_perturbation_transpose(tm, u);  // Pi^t u_last
  b.g12 = w - w.dot(v) * v;
  b.g12_norm = b.g12.norm();

  b.sigma2_norm = sigma2_norm;
  b.sep = sigma_min_sigma2 * sigma_min_sigma2;

  // First row/column of X^t Delta X off the (1,1) entry. Delta is symmetric,
  // so the two norms coincide; both are computed from Delta v_last.
  auto apply_delta = [&tm](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return apply_Lkill_transpose(tm, apply_Lkill(tm, x)) -
           apply_L_transpose(tm, apply_L(tm, x));
  };
  Eigen::VectorXd r = apply_delta(v);
  b.delta11_norm = std::abs(v.dot(r));
  Eigen::VectorXd r_perp = r - v.dot(r) * v;
  b.delta12_norm = r_perp.norm();
  b.delta21_norm = b.delta12_norm;

  b.perturbation_norm = perturbation_norm(tm);
  b.g22_norm_bound = b.perturbation_norm;
  auto g22_op = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = apply_perturbation(tm, x - v.dot(x) * v);
    return (y - u.dot(y) * u).eval();
  };
  auto g22_op_t = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = apply_perturbation_transpose(tm, x - u.dot(x) * u);
    return (y - v.dot(y) * v).eval();
  };
  auto g22_gram = [&](const Eigen::VectorXd& x) { return g22_op_t(g22_op(x)); };
  b.g22_norm = std::sqrt(std::max(
      lanczos_extreme_eig(g22_gram, dim, 1e-9, 400, SpectrumEnd::Largest, 977), 0.0));

  auto delta22_op = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = apply_delta(x - v.dot(x) * v);
    return (y - v.dot(y) * v).eval();
  };
  // Delta22 is symmetric but indefinite; Lanczos on its square gives ||.||.
  auto delta22_sq = [&](const Eigen::VectorXd& x) { return delta22_op(delta22_op(x)); };
  b.delta22_norm = std::sqrt(std::max(
      lanczos_extreme_eig(delta22_sq, dim, 1e-9, 400, SpectrumEnd::Largest, 1789), 0.0));
  b.delta22_norm_bound = 2.0 * b.g22_norm_bound * b.sigma2_norm +
                         b.g22_norm_bound * b.g22_norm_bound + b.g12_norm * b.g12_norm;

  b.delta = b.sep - b.delta11_norm - b.delta22_norm_bound;
  b.delta_exact_route = b.sep - b.delta11_norm - b.delta22_norm;
  auto condition = [&](double delta) {
    if (delta <= 0.0) return std::numeric_limits<double>::infinity();
    return 4.0 * b.delta21_norm * b.delta12_norm / (delta * delta);
  };
  b.condition_value = condition(b.delta);
  b.condition_value_exact_route = condition(b.delta_exact_route);
  return b;
}

}  // namespace detail

/// Blocks from a dense unperturbed SVD (spectral extremes read off directly).
inline StewartBlocks stewart_blocks(const TransitionMatrix& tm, const StationaryDistribution& sd,
                                    const UnperturbedSvd& svd) {
  const Eigen::Index dim = static_cast<Eigen::Index>(tm.n) * tm.n;
  if (svd.sigma.size() != dim)
    throw DimensionError("unperturbed SVD does not match the chain dimension");
  return detail::stewart_blocks_impl(tm, sd, svd.sigma(0), svd.sigma(dim - 2));
}

/// Fully matrix-free blocks for chains past the dense limit.
inline StewartBlocks stewart_blocks(const TransitionMatrix& tm,
                                    const StationaryDistribution& sd) {
  SpectralExtremes ext = spectral_extremes(tm);
  return detail::stewart_blocks_impl(tm, sd, ext.sigma1, ext.sigma_min_sigma2);
}

/// Sandwich bounds on sigma_min(L_kill)^2 with the Stewart applicability
/// certificate. q_norm_bound / w_norm_bound are the rotation bounds for the
/// perturbed right and left null directions.
struct SigmaBounds {
  double lower_sq = 0.0;
  double upper_sq = 0.0;
  bool certified = false;
  bool certified_exact_route = false;
  double q_norm_bound = 0.0;
  double w_norm_bound = 0.0;
};

inline SigmaBounds sigma_min_bounds(const StewartBlocks& b) {
  SigmaBounds out;
  out.certified = b.delta > 0.0 && b.condition_value <= 1.0;
  out.certified_exact_route = b.delta_exact_route > 0.0 && b.condition_value_exact_route <= 1.0;
  if (b.delta > 0.0) {
    double shift = 2.0 * b.delta12_norm * b.delta12_norm / b.delta;
    out.lower_sq = b.tilde_gamma11_sq - shift;
    out.upper_sq = b.tilde_gamma11_sq + shift;
    out.q_norm_bound = 2.0 * b.delta21_norm / b.delta;
  } else {
    out.lower_sq = -std::numeric_limits<double>::infinity();
    out.upper_sq = std::numeric_limits<double>::infinity();
    out.q_norm_bound = std::numeric_limits<double>::infinity();
  }

  // Left-vector analysis: Stewart applied to L L^t. The Delta22 analogue is
  // bounded submultiplicatively with the exact ||G22||.
  double delta22_left = 2.0 * b.g22_norm * b.sigma2_norm + b.g22_norm * b.g22_norm +
                        b.g21_norm * b.g21_norm;
  double delta_w = b.sep - b.gamma11 * b.gamma11 - b.g12_norm * b.g12_norm - delta22_left;
  if (delta_w > 0.0) {
    out.w_norm_bound = 2.0 *
                       (std::abs(b.gamma11) * b.g21_norm +
                        b.g12_norm * (b.sigma2_norm + b.g22_norm)) /
                       delta_w;
  } else {
    out.w_norm_bound = std::numeric_limits<double>::infinity();
  }
  return out;
}

/// The Lemma-4.5-style norm estimates at a given eps1, as measured values
/// with pass flags, plus the nu1 = nu2 choice they correspond to.
struct NormEstimateReport {
  double eps1 = 0.0;
  double nu = 0.0;  // nu1 = nu2 = ((eps1+1)^{1/4} - 1)/((eps1+1)^{1/4} + 1)
  double sigma2_norm = 0.0;
  bool sigma2_ok = false;
  double n_g12_sq = 0.0;
  bool g12_ok = false;
  double n_pi_sq = 0.0;
  bool pi_ok = false;
  double sqrt_n_g22_bound = 0.0;
  bool g22_ok = false;
  double n2_g21_sq = 0.0;
  bool g21_ok = false;
  double sep = 0.0;
  bool sep_lower_ok = false;
  bool sep_upper_ok = false;

  bool all_pass() const {
    return sigma2_ok && g12_ok && pi_ok && g22_ok && g21_ok && sep_lower_ok && sep_upper_ok;
  }
};

inline NormEstimateReport norm_estimate_report(const TransitionMatrix& tm,
                                               const StationaryDistribution& sd,
                                               const StewartBlocks& b, double eps1) {
  if (eps1 <= 0.0) throw InvalidParameterError("eps1 must be positive");
  NormEstimateReport rep;
  rep.eps1 = eps1;
  double root = std::pow(eps1 + 1.0, 0.25);
  rep.nu = (root - 1.0) / (root + 1.0);

  rep.sigma2_norm = b.sigma2_norm;
  rep.sigma2_ok = rep.sigma2_norm <= 2.0 + eps1;
  rep.n_g12_sq = tm.n * b.g12_norm * b.g12_norm;
  rep.g12_ok = rep.n_g12_sq <= 1.0 + eps1;
  rep.n_pi_sq = tm.n * sd.sq_norm;
  rep.pi_ok = rep.n_pi_sq <= 1.0 + eps1;
  rep.sqrt_n_g22_bound = std::sqrt(static_cast<double>(tm.n)) * b.g22_norm_bound;
  rep.g22_ok = rep.sqrt_n_g22_bound <= 1.0 + eps1;
  rep.n2_g21_sq = static_cast<double>(tm.n) * tm.n * b.g21_norm * b.g21_norm;
  rep.g21_ok = rep.n2_g21_sq <= (1.0 + eps1) * (1.0 + eps1) - 1.0;
  rep.sep = b.sep;
  rep.sep_lower_ok = (1.0 - eps1) * (1.0 - eps1) <= rep.sep;
  rep.sep_upper_ok = rep.sep <= (1.0 + eps1) * (1.0 + eps1);
  return rep;
}

/// Rotations of the perturbed null pair recovered from the computed singular
/// vectors: ||Q|| = tan(angle(v_tilde, v_last)), ||W|| = tan(angle(u_tilde,
/// u_last)). The decomposition of L_kill must hold its smallest triplet.
struct SubspaceRotation {
  double q_norm = 0.0;
  double w_norm = 0.0;
  double angle_v = 0.0;  // radians
  double angle_u = 0.0;
};

inline SubspaceRotation recover_q(const UnperturbedSvd& unpert, const SvdResult& killed) {
  if (killed.sigma.size() < 1) throw InsufficientDataError("empty decomposition");
  if (killed.U.rows() != unpert.U.rows())
    throw DimensionError("decompositions live on different pair spaces");
  const Eigen::Index last = killed.sigma.size() - 1;
  auto rotation = [](const Eigen::VectorXd& tilted, const Eigen::VectorXd& axis, double& angle) {
    double c = std::abs(tilted.dot(axis)) / (tilted.norm() * axis.norm());
    if (c <= 1e-12)
      throw RecoveryError("perturbed vector rotated by 90 degrees or more; "
                          "rotation not recoverable");
    c = std::min(c, 1.0);
    angle = std::acos(c);
    return std::sqrt(1.0 - c * c) / c;
  };
  SubspaceRotation out;
  out.q_norm = rotation(killed.V.col(last), unpert.v_last, out.angle_v);
  out.w_norm = rotation(killed.U.col(last), unpert.u_last, out.angle_u);
  return out;
}

// --- JSON serialization -----------------------------------------------------

inline nlohmann::json to_json(const StewartBlocks& b) {
  return {
      {"gamma11", b.gamma11},
      {"tilde_gamma11_sq", b.tilde_gamma11_sq},
      {"g12_norm", b.g12_norm},
      {"g21_norm", b.g21_norm},
      {"g22_norm", b.g22_norm},
      {"g22_norm_bound", b.g22_norm_bound},
      {"sigma2_norm", b.sigma2_norm},
      {"sep", b.sep},
      {"delta11_norm", b.delta11_norm},
      {"delta12_norm", b.delta12_norm},
      {"delta21_norm", b.delta21_norm},
      {"delta22_norm", b.delta22_norm},
      {"delta22_norm_bound", b.delta22_norm_bound},
      {"delta", b.delta},
      {"delta_exact_route", b.delta_exact_route},
      {"condition_value", b.condition_value},
      {"condition_value_exact_route", b.condition_value_exact_route},
      {"perturbation_norm", b.perturbation_norm},
  };
}

inline nlohmann::json to_json(const SigmaBounds& s) {
  return {
      {"lower_sq", s.lower_sq},
      {"upper_sq", s.upper_sq},
      {"certified", s.certified},
      {"certified_exact_route", s.certified_exact_route},
      {"q_norm_bound", s.q_norm_bound},
      {"w_norm_bound", s.w_norm_bound},
  };
}

inline nlohmann::json to_json(const NormEstimateReport& r) {
  return {
      {"eps1", r.eps1},
      {"nu", r.nu},
      {"sigma2_norm", r.sigma2_norm},
      {"sigma2_ok", r.sigma2_ok},
      {"n_g12_sq", r.n_g12_sq},
      {"g12_ok", r.g12_ok},
      {"n_pi_sq", r.n_pi_sq},
      {"pi_ok", r.pi_ok},
      {"sqrt_n_g22_bound", r.sqrt_n_g22_bound},
      {"g22_ok", r.g22_ok},
      {"n2_g21_sq", r.n2_g21_sq},
      {"g21_ok", r.g21_ok},
      {"sep", r.sep},
      {"sep_lower_ok", r.sep_lower_ok},
      {"sep_upper_ok", r.sep_upper_ok},
      {"all_pass", r.all_pass()},
  };
}

/// Full perturbation report for one chain: blocks, bounds and the norm
/// estimates at eps1. Within the dense limit the dense SVDs also contribute
/// sigma_min(L_kill) and the recovered rotations; above it the report is the
/// matrix-free subset.
inline nlohmann::json perturb_report_json(const TransitionMatrix& tm,
                                          const StationaryDistribution& sd, double eps1) {
  nlohmann::json j;
  j["n"] = tm.n;
  if (tm.n <= kDenseLimit) {
    UnperturbedSvd unpert = unperturbed_svd(tm, sd);
    StewartBlocks blocks = stewart_blocks(tm, sd, unpert);
    SigmaBounds bounds = sigma_min_bounds(blocks);
    j["blocks"] = to_json(blocks);
    j["bounds"] = to_json(bounds);
    j["norm_estimates"] = to_json(norm_estimate_report(tm, sd, blocks, eps1));
    SvdResult killed = svd_killed(tm);
    j["sigma_min_killed"] = killed.sigma(killed.sigma.size() - 1);
    try {
      SubspaceRotation rot = recover_q(unpert, killed);
      j["q_norm_recovered"] = rot.q_norm;
      j["w_norm_recovered"] = rot.w_norm;
    } catch (const RecoveryError& e) {
      j["rotation_recovery_error"] = e.what();
    }
  } else {
    StewartBlocks blocks = stewart_blocks(tm, sd);
    SigmaBounds bounds = sigma_min_bounds(blocks);
    j["blocks"] = to_json(blocks);
    j["bounds"] = to_json(bounds);
    j["norm_estimates"] = to_json(norm_estimate_report(tm, sd, blocks, eps1));
  }
  return j;
}

}  // namespace meet
