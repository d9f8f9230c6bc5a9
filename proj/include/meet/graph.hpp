#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/rng.hpp"

namespace meet {

/// Undirected simple graph: symmetric 0/1 adjacency, zero diagonal.
/// Vertices are 0-based in the API; the text file format is 1-based.
class Graph {
 public:
  Graph(int n, std::vector<std::pair<int, int>> edges) : n_(n), neighbors_(n) {
    if (n < 1) throw InvalidParameterError("graph needs at least one vertex");
    for (auto& [u, v] : edges) {
      if (u > v) std::swap(u, v);
      if (u < 0 || v >= n) throw InvalidParameterError("edge endpoint out of range");
      if (u == v) throw InvalidParameterError("self-loop not allowed");
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
      throw InvalidParameterError("duplicate edge");
    edges_ = std::move(edges);
    for (const auto& [u, v] : edges_) {
      neighbors_[u].push_back(v);
      neighbors_[v].push_back(u);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
    degrees_.resize(n);
    for (int i = 0; i < n; ++i) degrees_[i] = static_cast<int>(neighbors_[i].size());
  }

  static Graph complete(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return Graph(n, std::move(e));
  }

  static Graph path(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return Graph(n, std::move(e));
  }

  static Graph cycle(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    if (n > 2) e.emplace_back(0, n - 1);
    return Graph(n, std::move(e));
  }

  /// Star with `leaves` leaves; the center is vertex 0.
  static Graph star(int leaves) {
    std::vector<std::pair<int, int>> e;
    for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
    return Graph(leaves + 1, std::move(e));
  }

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& degrees() const { return degrees_; }
  const std::vector<int>& neighbors(int v) const { return neighbors_[v]; }

  bool has_edge(int u, int v) const {
    const auto& nb = neighbors_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  int min_degree() const { return *std::min_element(degrees_.begin(), degrees_.end()); }
  int max_degree() const { return *std::max_element(degrees_.begin(), degrees_.end()); }

  bool connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : neighbors_[u])
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
    }
    return count == n_;
  }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& [u, v] : edges_) {
      a(u, v) = 1.0;
      a(v, u) = 1.0;
    }
    return a;
  }

 private:
  int n_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> degrees_;
};

/// Erdős–Rényi sampling parameters. d = n·p across the whole range,
/// including the saturation p = 1.
struct ErParams {
  int n = 0;
  double beta = 0.0;
  double c = 0.0;
  double p = 0.0;
  double d = 0.0;

  static ErParams from_beta(int n, double beta, double c) {
    if (n < 1) throw InvalidParameterError("n must be positive");
    if (beta <= 0.0 || beta > 1.0) throw InvalidParameterError("beta must be in (0,1]");
    if (c <= 0.0) throw InvalidParameterError("c must be positive");
    ErParams params;
    params.n = n;
    params.beta = beta;
    params.c = c;
    params.p = std::min(c * std::pow(static_cast<double>(n), beta - 1.0), 1.0);
    params.d = n * params.p;
    return params;
  }

  static ErParams from_p(int n, double p) {
    if (n < 1) throw InvalidParameterError("n must be positive");
    if (p < 0.0 || p > 1.0) throw InvalidParameterError("p must be in [0,1]");
    ErParams params;
    params.n = n;
    params.p = p;
    params.d = n * p;
    return params;
  }
};

/// Samples G(n, p): every unordered pair {i,j}, i<j, is an edge independently
/// with probability p. Draws happen in fixed lexicographic (i<j) order, so the
/// edge set is a pure function of (params, seed).
inline Graph er_sample(const ErParams& params, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < params.n; ++i)
    for (int j = i + 1; j < params.n; ++j)
      if (rng.bernoulli(params.p)) edges.emplace_back(i, j);
  return Graph(params.n, std::move(edges));
}

/// Per-vertex relative degree deviations eps_i = deg(i)/d - 1 and their
/// maximal absolute value R1.
struct DegreeStats {
  std::vector<double> eps;
  double r1 = 0.0;
};

inline DegreeStats degree_stats(const Graph& g, double d) {
  if (d <= 0.0) throw InvalidParameterError("degree scale d must be positive");
  DegreeStats s;
  s.eps.reserve(g.num_vertices());
  for (int deg : g.degrees()) {
    double e = static_cast<double>(deg) / d - 1.0;
    s.eps.push_back(e);
    s.r1 = std::max(s.r1, std::abs(e));
  }
  return s;
}

/// Pairwise codegree deviations eps_{(k,l)} = (n/d^2)·|N(k) ∩ N(l)| - 1 over
/// unordered pairs k != l, and their maximal absolute value R2.
struct CodegreeStats {
  Eigen::MatrixXi codegree;  // symmetric counts, diagonal unused (0)
  Eigen::MatrixXd eps;       // symmetric deviations, diagonal 0
  double r2 = 0.0;
};

/// O(n·max_deg^2) via neighbor-list wedges; every common neighbor i of the
/// pair (k,l) is one wedge k-i-l.
inline CodegreeStats codegree_stats(const Graph& g, double d) {
  const int n = g.num_vertices();
  if (d <= 0.0) throw InvalidParameterError("degree scale d must be positive");
  if (n < 2) throw InvalidParameterError("codegree needs at least two vertices");
  CodegreeStats s;
  s.codegree = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& nb = g.neighbors(i);
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        s.codegree(nb[a], nb[b]) += 1;
        s.codegree(nb[b], nb[a]) += 1;
      }
  }
  s.eps = Eigen::MatrixXd::Zero(n, n);
  const double scale = n / (d * d);
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      double e = scale * s.codegree(k, l) - 1.0;
      s.eps(k, l) = e;
      s.eps(l, k) = e;
      s.r2 = std::max(s.r2, std::abs(e));
    }
  return s;
}

/// Second-largest singular value of A/sqrt(d). A is symmetric, so this is the
/// second element of the |eigenvalue|-sorted spectrum.
inline double adjacency_sigma2(const Graph& g, double d) {
  const int n = g.num_vertices();
  if (n < 2) throw InvalidParameterError("sigma2 needs at least two vertices");
  if (d <= 0.0) throw InvalidParameterError("degree scale d must be positive");
  Eigen::MatrixXd a = g.adjacency() / std::sqrt(d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> mags(n);
  for (int i = 0; i < n; ++i) mags[i] = std::abs(es.eigenvalues()(i));
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  return mags[1];
}

/// Concentration-event indicators: F_{nu1}, F_{nu1,nu2} and the sigma2 event.
struct EventFlags {
  bool f_nu1 = false;
  bool f_nu1_nu2 = false;
  bool f_sigma = false;
};

inline EventFlags event_flags(double r1, double r2, double sigma2_scaled, double nu1,
                              double nu2) {
  EventFlags f;
  f.f_nu1 = r1 <= nu1;
  f.f_nu1_nu2 = f.f_nu1 && r2 <= nu2;
  f.f_sigma = sigma2_scaled <= 8.0;
  return f;
}

/// Diagnostic values for the three regularity conditions of the generalized
/// meeting-time statement: R1 -> 0, R2 -> 0 and sigma2(A)/sqrt(d) bounded.
struct RegularityReport {
  double r1 = 0.0;
  double r2 = 0.0;
  double sigma2_scaled = 0.0;
  bool r1_ok = false;
  bool r2_ok = false;
  bool sigma_ok = false;
};

inline RegularityReport check_regularity_conditions(const Graph& g, double d, double tol) {
  if (tol <= 0.0) throw InvalidParameterError("tolerance must be positive");
  RegularityReport rep;
  rep.r1 = degree_stats(g, d).r1;
  rep.r2 = codegree_stats(g, d).r2;
  rep.sigma2_scaled = adjacency_sigma2(g, d);
  rep.r1_ok = rep.r1 <= tol;
  rep.r2_ok = rep.r2 <= tol;
  rep.sigma_ok = rep.sigma2_scaled <= 8.0;
  return rep;
}

/// Text format: first line "n m", then m lines "u v" with 1-based indices,
/// u < v. Rejects self-loops, duplicates and out-of-range indices.
inline Graph read_graph_text(std::istream& in) {
  int n = 0, m = 0;
  if (!(in >> n >> m)) throw ParseError("expected header line \"n m\"");
  if (n < 1 || m < 0) throw ParseError("invalid header values");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(m);
  for (int k = 0; k < m; ++k) {
    int u = 0, v = 0;
    if (!(in >> u >> v)) throw ParseError("expected edge line " + std::to_string(k + 1));
    if (u < 1 || v < 1 || u > n || v > n)
      throw ParseError("vertex index out of range on edge line " + std::to_string(k + 1));
    if (u == v) throw ParseError("self-loop on edge line " + std::to_string(k + 1));
    if (u >= v) throw ParseError("edges must satisfy u < v (line " + std::to_string(k + 1) + ")");
    edges.emplace_back(u - 1, v - 1);
  }
  try {
    return Graph(n, std::move(edges));
  } catch (const InvalidParameterError& e) {
    throw ParseError(e.what());
  }
}

inline void write_graph_text(const Graph& g, std::ostream& out) {
  out << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (const auto& [u, v] : g.edges()) out << (u + 1) << ' ' << (v + 1) << '\n';
}

}  // namespace meet
