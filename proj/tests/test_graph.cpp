#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "meet/graph.hpp"

using namespace meet;

TEST_CASE("er_sample degenerate probabilities") {
  Graph full = er_sample(ErParams::from_p(5, 1.0), 1);
  CHECK(full.num_edges() == 10);
  for (int d : full.degrees()) CHECK(d == 4);

  Graph empty = er_sample(ErParams::from_p(5, 0.0), 1);
  CHECK(empty.num_edges() == 0);
  for (int d : empty.degrees()) CHECK(d == 0);
}

TEST_CASE("er_sample is reproducible and seed-sensitive") {
  ErParams params = ErParams::from_p(40, 0.3);
  Graph a = er_sample(params, 99);
  Graph b = er_sample(params, 99);
  Graph c = er_sample(params, 100);
  CHECK(a.edges() == b.edges());
  CHECK(a.edges() != c.edges());
}

TEST_CASE("er_sample mean degree sits in the binomial band") {
  // mean degree = 2m/n with m ~ Bin(n(n-1)/2, p); sd of the mean degree is
  // sqrt(2 p (1-p) (n-1) / n).
  const int n = 1000;
  const double p = 0.5;
  const double expected = (n - 1) * p;
  const double sd = std::sqrt(2.0 * p * (1.0 - p) * (n - 1) / n);
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Graph g = er_sample(ErParams::from_p(n, p), seed);
    double mean_deg = 2.0 * g.num_edges() / n;
    CHECK(std::abs(mean_deg - expected) <= 3.0 * sd);
  }
}

TEST_CASE("ErParams reconciles beta parametrization with d = np") {
  ErParams params = ErParams::from_beta(100, 0.8, 1.0);
  CHECK(params.p == doctest::Approx(std::pow(100.0, -0.2)).epsilon(1e-14));
  CHECK(params.d == doctest::Approx(100.0 * params.p).epsilon(1e-14));
  // saturation p = 1 keeps d = n
  ErParams sat = ErParams::from_beta(10, 1.0, 5.0);
  CHECK(sat.p == 1.0);
  CHECK(sat.d == 10.0);
  CHECK_THROWS_AS(ErParams::from_p(10, 1.5), InvalidParameterError);
  CHECK_THROWS_AS(ErParams::from_beta(10, 0.0, 1.0), InvalidParameterError);
}

TEST_CASE("degree_stats oracles") {
  Graph k5 = Graph::complete(5);
  CHECK(degree_stats(k5, 4.0).r1 == doctest::Approx(0.0));
  CHECK(degree_stats(k5, 5.0).r1 == doctest::Approx(0.2).epsilon(1e-12));

  Graph s4 = Graph::star(4);
  CHECK(degree_stats(s4, 2.0).r1 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(degree_stats(k5, 0.0), InvalidParameterError);
}

TEST_CASE("degree deviations bracket the extreme degrees") {
  ErParams params = ErParams::from_p(80, 0.4);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    Graph g = er_sample(params, seed);
    double r1 = degree_stats(g, params.d).r1;
    CHECK(g.min_degree() >= params.d * (1.0 - r1) - 1e-9);
    CHECK(g.max_degree() <= params.d * (1.0 + r1) + 1e-9);
  }
}

TEST_CASE("codegree_stats oracles") {
  // K_n: every pair shares n-2 neighbors.
  for (int n : {4, 7, 10}) {
    Graph g = Graph::complete(n);
    double d = n - 1.0;
    double expected = std::abs(n * (n - 2.0) / ((n - 1.0) * (n - 1.0)) - 1.0);
    CHECK(codegree_stats(g, d).r2 == doctest::Approx(expected).epsilon(1e-12));
  }

  // Empty graph: all pairs share nothing.
  Graph empty(4, {});
  CHECK(codegree_stats(empty, 2.0).r2 == doctest::Approx(1.0));

  // Path on three vertices with n/d^2 = 1, i.e. d = sqrt(3).
  Graph p3 = Graph::path(3);
  CodegreeStats s = codegree_stats(p3, std::sqrt(3.0));
  CHECK(s.eps(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.eps(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s.r2 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(codegree_stats(Graph(1, {}), 1.0), InvalidParameterError);
}

TEST_CASE("codegree counts match the dense triple loop") {
  Graph g = er_sample(ErParams::from_p(25, 0.4), 17);
  CodegreeStats s = codegree_stats(g, 10.0);
  const int n = g.num_vertices();
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (g.has_edge(i, k) && g.has_edge(i, l)) ++count;
      CHECK(s.codegree(k, l) == count);
      CHECK(count <= n - 2);
    }
}

TEST_CASE("adjacency_sigma2 oracles") {
  // Complete graph: spectrum {n-1, -1, ...}, so sigma2(A/sqrt(n-1)) = 1/sqrt(n-1).
  for (int n : {3, 6, 12}) {
    Graph g = Graph::complete(n);
    CHECK(adjacency_sigma2(g, n - 1.0) ==
          doctest::Approx(1.0 / std::sqrt(n - 1.0)).epsilon(1e-12));
  }
  // Single edge: eigenvalues {1, -1}.
  Graph k2 = Graph::complete(2);
  CHECK(adjacency_sigma2(k2, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(adjacency_sigma2(Graph(1, {}), 1.0), InvalidParameterError);
}

TEST_CASE("adjacency_sigma2 agrees with an SVD of the scaled adjacency") {
  ErParams params = ErParams::from_p(60, 0.5);
  Graph g = er_sample(params, 23);
  Eigen::MatrixXd a = g.adjacency() / std::sqrt(params.d);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  CHECK(adjacency_sigma2(g, params.d) ==
        doctest::Approx(svd.singularValues()(1)).epsilon(1e-10));
}

TEST_CASE("sigma2 of dense ER stays below 8") {
  ErParams params = ErParams::from_p(200, 0.5);
  for (std::uint64_t seed : {5u, 6u}) {
    Graph g = er_sample(params, seed);
    CHECK(adjacency_sigma2(g, params.d) <= 8.0);
  }
}

TEST_CASE("regularity conditions: complete graph and long cycle") {
  Graph kn = Graph::complete(12);
  RegularityReport kr = check_regularity_conditions(kn, 11.0, 1e-6);
  CHECK(kr.r1 == doctest::Approx(0.0));
  CHECK(kr.r1_ok);

  // Cycle: R1 = 0 at d = 2, but distance-2 pairs share one neighbor, so
  // eps = n/4 - 1 and the codegree condition fails for long cycles.
  Graph c20 = Graph::cycle(20);
  RegularityReport cr = check_regularity_conditions(c20, 2.0, 0.5);
  CHECK(cr.r1 == doctest::Approx(0.0));
  CHECK(cr.r2 == doctest::Approx(20.0 / 4.0 - 1.0).epsilon(1e-12));
  CHECK(cr.r1_ok);
  CHECK(!cr.r2_ok);
}

TEST_CASE("regularity conditions at desk scale: degree and spectrum settle first") {
  // At n = 150, beta = 0.8 the degree and sigma2 conditions already hold at
  // tol = 0.5, while R2 still sits near 4.5 sqrt(n)/d ~ 0.9: the codegree
  // condition is the last to kick in as n grows.
  ErParams params = ErParams::from_beta(150, 0.8, 1.0);
  int r1_sigma_ok = 0, r2_tight = 0, r2_loose = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    Graph g = er_sample(params, derive_seed(321, s));
    RegularityReport rep = check_regularity_conditions(g, params.d, 0.5);
    if (rep.r1_ok && rep.sigma_ok) ++r1_sigma_ok;
    if (rep.r2_ok) ++r2_tight;
    if (rep.r2 <= 1.5) ++r2_loose;
  }
  CHECK(r1_sigma_ok > seeds / 2);
  CHECK(r2_loose > seeds / 2);
  CHECK(r2_tight < seeds);  // tol = 0.5 is not yet reachable for the codegrees
}

TEST_CASE("event flags are consistent") {
  EventFlags f = event_flags(0.2, 0.9, 3.0, 0.25, 0.5);
  CHECK(f.f_nu1);
  CHECK(!f.f_nu1_nu2);
  CHECK(f.f_sigma);
  EventFlags g = event_flags(0.2, 0.4, 9.0, 0.25, 0.5);
  CHECK(g.f_nu1_nu2);
  CHECK(g.f_nu1);  // f_nu1_nu2 implies f_nu1
  CHECK(!g.f_sigma);
}

TEST_CASE("graph text format round trip") {
  Graph g = er_sample(ErParams::from_p(15, 0.4), 3);
  std::stringstream ss;
  write_graph_text(g, ss);
  Graph back = read_graph_text(ss);
  CHECK(back.num_vertices() == g.num_vertices());
  CHECK(back.edges() == g.edges());
}

TEST_CASE("graph text reader rejects malformed input") {
  auto reject = [](const std::string& text) {
    std::stringstream ss(text);
    CHECK_THROWS_AS(read_graph_text(ss), ParseError);
  };
  reject("3 1\n2 2\n");        // self-loop
  reject("3 2\n1 2\n1 2\n");   // duplicate
  reject("3 1\n1 4\n");        // out of range
  reject("3 1\n2 1\n");        // u >= v
  reject("3 2\n1 2\n");        // truncated
  reject("");                  // empty
}

TEST_CASE("graph construction validates edges") {
  CHECK_THROWS_AS(Graph(3, {{0, 0}}), InvalidParameterError);
  CHECK_THROWS_AS(Graph(3, {{0, 3}}), InvalidParameterError);
  CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), InvalidParameterError);
  Graph g(3, {{1, 0}});  // unordered input is normalized
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(!g.connected());
}
