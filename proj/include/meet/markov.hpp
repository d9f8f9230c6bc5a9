#pragma once

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/graph.hpp"

namespace meet {

/// Row-stochastic transition matrix. When built from a simple random walk the
/// graph degrees are kept so the closed-form stationary distribution applies.
struct TransitionMatrix {
  int n = 0;
  Eigen::MatrixXd P;
  std::vector<int> srw_degrees;  // empty unless built by srw_from_graph

  bool is_srw() const { return !srw_degrees.empty(); }
};

inline void validate_stochastic(const Eigen::MatrixXd& P, double tol = 1e-12) {
  if (P.rows() != P.cols()) throw DimensionError("transition matrix must be square");
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double row_sum = P.row(i).sum();
    if (std::abs(row_sum - 1.0) > tol)
      throw InvalidParameterError("row " + std::to_string(i + 1) + " sums to " +
                                  detail::sci(row_sum) + ", not 1");
    if ((P.row(i).array() < -tol).any() || (P.row(i).array() > 1.0 + tol).any())
      throw InvalidParameterError("row " + std::to_string(i + 1) + " has entries outside [0,1]");
  }
}

inline TransitionMatrix make_transition(Eigen::MatrixXd P) {
  validate_stochastic(P);
  TransitionMatrix tm;
  tm.n = static_cast<int>(P.rows());
  tm.P = std::move(P);
  return tm;
}

/// Simple random walk: P[i][j] = adjacency[i][j]/deg(i).
inline TransitionMatrix srw_from_graph(const Graph& g) {
  const int n = g.num_vertices();
  for (int i = 0; i < n; ++i)
    if (g.degrees()[i] == 0)
      throw DegenerateGraphError("vertex " + std::to_string(i + 1) +
                                 " is isolated; random walk undefined");
  TransitionMatrix tm;
  tm.n = n;
  tm.P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double inv_deg = 1.0 / g.degrees()[i];
    for (int j : g.neighbors(i)) tm.P(i, j) = inv_deg;
  }
  tm.srw_degrees = g.degrees();
  return tm;
}

/// Lazy version (I+P)/2; removes periodicity, keeps the stationary law.
inline TransitionMatrix lazy_chain(const TransitionMatrix& tm) {
  TransitionMatrix out;
  out.n = tm.n;
  out.P = 0.5 * (Eigen::MatrixXd::Identity(tm.n, tm.n) + tm.P);
  out.srw_degrees = tm.srw_degrees;
  return out;
}

/// Structural irreducibility: the support digraph is strongly connected.
inline bool check_irreducible(const TransitionMatrix& tm) {
  const int n = tm.n;
  auto reaches_all = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        double w = forward ? tm.P(u, v) : tm.P(v, u);
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reaches_all(true) && reaches_all(false);
}

/// Period of the class of state 0 via the gcd of level differences along
/// support edges; aperiodic iff the gcd is 1.
inline bool check_aperiodic(const TransitionMatrix& tm) {
  const int n = tm.n;
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v = 0; v < n; ++v)
      if (tm.P(u, v) > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  long long g = 0;
  for (int u = 0; u < n; ++u) {
    if (level[u] < 0) continue;
    for (int v = 0; v < n; ++v)
      if (tm.P(u, v) > 0.0 && level[v] >= 0)
        g = std::gcd(g, static_cast<long long>(std::abs(level[u] + 1 - level[v])));
  }
  return g == 1;
}

/// Period of the class of state 0 (1 = aperiodic); diagnostic companion to
/// check_aperiodic for error messages.
inline int chain_period(const TransitionMatrix& tm) {
  const int n = tm.n;
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v = 0; v < n; ++v)
      if (tm.P(u, v) > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  long long g = 0;
  for (int u = 0; u < n; ++u) {
    if (level[u] < 0) continue;
    for (int v = 0; v < n; ++v)
      if (tm.P(u, v) > 0.0 && level[v] >= 0)
        g = std::gcd(g, static_cast<long long>(std::abs(level[u] + 1 - level[v])));
  }
  return static_cast<int>(g);
}

/// Stationary distribution with cached squared Euclidean norm.
struct StationaryDistribution {
  Eigen::VectorXd pi;
  double sq_norm = 0.0;
};

/// Unique invariant distribution of an irreducible chain. Simple random walks
/// use the exact degree closed form pi_i = deg(i)/(2m); general chains solve
/// the singular system (P^t - I)pi = 0 with the normalization row appended,
/// by dense QR least squares.
inline StationaryDistribution stationary(const TransitionMatrix& tm) {
  StationaryDistribution sd;
  if (tm.is_srw()) {
    double total = std::accumulate(tm.srw_degrees.begin(), tm.srw_degrees.end(), 0.0);
    sd.pi.resize(tm.n);
    for (int i = 0; i < tm.n; ++i) sd.pi(i) = tm.srw_degrees[i] / total;
  } else {
    if (!check_irreducible(tm))
      throw NoUniqueStationaryError("chain is reducible; stationary distribution not unique");
    Eigen::MatrixXd A(tm.n + 1, tm.n);
    A.topRows(tm.n) = tm.P.transpose() - Eigen::MatrixXd::Identity(tm.n, tm.n);
    A.bottomRows(1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(tm.n + 1);
    b(tm.n) = 1.0;
    Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);
    // One refinement step on the same system knocks the residual down to
    // rounding level, which the gamma11 = -1/n contract needs.
    Eigen::VectorXd r = b - A * pi;
    pi += A.colPivHouseholderQr().solve(r);
    pi /= pi.sum();
    sd.pi = pi;
  }
  sd.sq_norm = sd.pi.squaredNorm();
  return sd;
}

/// Dense row-major CSV, full precision.
inline void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out) {
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("ragged CSV row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty CSV");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace meet
