// Acceptance suite: end-to-end checks of every advertised guarantee, one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "meet/experiment.hpp"
#include "meet/graph.hpp"
#include "meet/markov.hpp"
#include "meet/meeting.hpp"
#include "meet/montecarlo.hpp"
#include "meet/perturb.hpp"

using namespace meet;

namespace {

int failures = 0;

void run_criterion(int index, const std::string& title,
                   const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %2d [%s] %s: %s (%.1fs)\n", index, pass ? "PASS" : "FAIL",
              title.c_str(), detail.c_str(), dt);
  std::fflush(stdout);
  if (!pass) ++failures;
}

Graph connected_er(int n, double p, std::uint64_t seed) {
  Graph g = er_sample(ErParams::from_p(n, p), seed);
  while (!g.connected()) g = er_sample(ErParams::from_p(n, p), ++seed);
  return g;
}

// Connected and non-bipartite: the walk is aperiodic, so the killed pair
// system is nonsingular and the meeting time finite. Bipartite samples have
// no finite expected meeting time and are skipped like disconnected ones.
Graph usable_er(int n, double p, std::uint64_t seed) {
  Graph g = er_sample(ErParams::from_p(n, p), seed);
  while (!g.connected() || !check_aperiodic(srw_from_graph(g)))
    g = er_sample(ErParams::from_p(n, p), ++seed);
  return g;
}

}  // namespace

int main() {
  // 1. Complete-graph closed form, cross-validated by Monte Carlo.
  run_criterion(1, "complete-graph oracle", []() -> std::pair<bool, std::string> {
    bool ok = true;
    double worst = 0.0;
    for (int n : {3, 4, 5, 10}) {
      TransitionMatrix tm = srw_from_graph(Graph::complete(n));
      StationaryDistribution sd = stationary(tm);
      MeetingTimeMatrix mt = exact_meeting_times(tm);
      const double m_expected = (n - 1.0) * (n - 1.0) / (n - 2.0);
      const double t_expected = std::pow(n - 1.0, 3) / (n * (n - 2.0));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j)
            worst = std::max(worst, std::abs(mt.M(i, j) - m_expected) / m_expected);
      double t = tmeet_pi(mt, sd);
      worst = std::max(worst, std::abs(t - t_expected) / t_expected);
      McEstimate mc = estimate_tmeet_pi(tm, sd, 50000, 1000 + n, default_cap(n));
      if (std::abs(mc.mean - t_expected) > mc.ci_half_width) ok = false;
    }
    ok = ok && worst <= 1e-10;
    return {ok, "max relative deviation " + detail::sci(worst) +
                    ", Monte Carlo intervals cover the closed forms"};
  });

  // Shared sample set for criteria 2 and 3.
  struct Case {
    TransitionMatrix tm;
    StationaryDistribution sd;
    double exact;
    SvdResult svd;
  };
  std::vector<Case> cases;

  // 2. Spectral formula == exact solve on 50 connected ER graphs.
  run_criterion(2, "spectral-exact equivalence", [&]() -> std::pair<bool, std::string> {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      int n = 4 + i % 17;  // sizes 4..20
      Graph g = usable_er(n, 0.6, derive_seed(7000, i));
      Case c{srw_from_graph(g), {}, 0.0, {}};
      c.sd = stationary(c.tm);
      c.exact = tmeet_pi(exact_meeting_times(c.tm), c.sd);
      c.svd = svd_killed(c.tm);
      double spectral = spectral_tmeet(c.svd, c.sd);
      worst = std::max(worst, std::abs(spectral - c.exact) / std::abs(c.exact));
      cases.push_back(std::move(c));
    }
    return {worst <= 1e-8,
            "50 graphs, worst relative gap " + detail::sci(worst)};
  });

  // 3. Rank-k truncation error within the certified bound, all k, all graphs.
  run_criterion(3, "rank-k error bound", [&]() -> std::pair<bool, std::string> {
    if (cases.size() != 50) return {false, "criterion 2 sample set unavailable"};
    int violations = 0;
    int checks = 0;
    for (const Case& c : cases) {
      const int dim = c.tm.n * c.tm.n;
      for (int k : {1, 2, 4, 8, dim}) {
        RankKApprox approx = rank_k_tmeet(c.svd, c.sd, k);
        double err = std::abs(approx.value - c.exact);
        if (err > approx.bound * (1.0 + 1e-9) + 1e-12) ++violations;
        ++checks;
      }
    }
    return {violations == 0,
            std::to_string(checks) + " truncations, " + std::to_string(violations) +
                " bound violations"};
  });

  // 4. gamma11 = -1/n on arbitrary irreducible stochastic matrices.
  run_criterion(4, "universal gamma11", []() -> std::pair<bool, std::string> {
    double worst = 0.0;
    SplitMix64 rng(4242);
    for (int t = 0; t < 100; ++t) {
      int n = 2 + static_cast<int>(rng.next_below(29));  // 2..30
      Eigen::MatrixXd p(n, n);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          p(i, j) = -std::log(1.0 - rng.next_double());
          sum += p(i, j);
        }
        p.row(i) /= sum;
      }
      TransitionMatrix tm = make_transition(std::move(p));
      StationaryDistribution sd = stationary(tm);
      worst = std::max(worst, std::abs(gamma11(tm, sd) + 1.0 / n));
    }
    return {worst <= 1e-12, "100 matrices, worst |gamma11 + 1/n| = " + detail::sci(worst)};
  });

  // 5. Stewart sandwich on dense ER at n = 30, plus the two-route identity.
  run_criterion(5, "perturbation sandwich", []() -> std::pair<bool, std::string> {
    int certified = 0, sandwich_ok = 0;
    double worst_identity = 0.0;
    for (int s = 0; s < 20; ++s) {
      Graph g = connected_er(30, 0.7, derive_seed(8000, s));
      TransitionMatrix tm = srw_from_graph(g);
      StationaryDistribution sd = stationary(tm);
      StewartBlocks blocks = stewart_blocks(tm, sd, unperturbed_svd(tm, sd));
      SigmaBounds bounds = sigma_min_bounds(blocks);
      double two_route = std::abs(blocks.tilde_gamma11_sq -
                                  (blocks.gamma11 * blocks.gamma11 +
                                   blocks.g21_norm * blocks.g21_norm));
      worst_identity = std::max(worst_identity, two_route);
      if (!bounds.certified) continue;
      ++certified;
      SvdResult killed = svd_killed(tm);
      double smin_sq = killed.sigma(killed.sigma.size() - 1);
      smin_sq *= smin_sq;
      if (smin_sq >= bounds.lower_sq && smin_sq <= bounds.upper_sq) ++sandwich_ok;
    }
    bool ok = certified > 0 && sandwich_ok == certified && worst_identity <= 1e-10;
    return {ok, std::to_string(certified) + "/20 certified, sandwich held in " +
                    std::to_string(sandwich_ok) + ", worst two-route gap " +
                    detail::sci(worst_identity)};
  });

  // 6. Perturbation-norm sandwich from the degree/codegree statistics.
  run_criterion(6, "perturbation-norm sandwich", []() -> std::pair<bool, std::string> {
    int inside = 0;
    const int samples = 20;
    for (int s = 0; s < samples; ++s) {
      ErParams params = ErParams::from_p(50, 0.5);
      Graph g = er_sample(params, derive_seed(9000, s));
      double r1 = degree_stats(g, params.d).r1;
      double r2 = codegree_stats(g, params.d).r2;
      TransitionMatrix tm = srw_from_graph(g);
      double sq = perturbation_norm(tm);
      sq *= sq;
      const double n = params.n, d = params.d;
      double up = (1 + r1) * (1 + r1) / (d * d * std::pow(1 - r1, 4)) +
                  (1 + r2) * (1 + r2) / (n * std::pow(1 - r1, 4)) -
                  (1 + r2) * (1 + r2) / (n * n * std::pow(1 - r1, 4));
      double low = (1 - r1) * (1 - r1) / (d * d * std::pow(1 + r1, 4)) +
                   (1 - r2) * (1 - r2) / (n * std::pow(1 + r1, 4)) -
                   (1 - r2) * (1 - r2) / (n * n * std::pow(1 + r1, 4));
      if (sq >= low - 1e-12 && sq <= up + 1e-12) ++inside;
    }
    return {inside == samples,
            std::to_string(inside) + "/" + std::to_string(samples) + " inside the sandwich"};
  });

  // 7. Dense-regime reproduction at desk scale with the size trend.
  run_criterion(7, "dense-regime ratio t/n", []() -> std::pair<bool, std::string> {
    ExperimentConfig cfg;
    cfg.sizes = {50, 100, 150};
    cfg.beta = 0.8;
    cfg.c = 1.0;
    cfg.seeds = 20;
    cfg.master_seed = 10101;
    cfg.method = Method::Exact;
    SweepResult res = run_er_experiment(cfg);
    if (res.any_error) return {false, "sweep captured per-seed errors"};
    const SizeSummary* s50 = &res.summaries[0];
    const SizeSummary* s100 = &res.summaries[1];
    const SizeSummary* s150 = &res.summaries[2];
    bool mean_ok = s100->mean_t_over_n >= 0.85 && s100->mean_t_over_n <= 1.15;
    bool each_ok = true;
    for (const RunRecord& rec : res.records)
      if (rec.n == 100 && !rec.skipped && std::abs(rec.tmeet_over_n - 1.0) > 0.3)
        each_ok = false;
    bool trend_ok = s50->mean_abs_dev > s150->mean_abs_dev;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "mean t/n at n=100: %.4f; mean |t/n-1|: %.4f (n=50) -> %.4f (n=150)",
                  s100->mean_t_over_n, s50->mean_abs_dev, s150->mean_abs_dev);
    return {mean_ok && each_ok && trend_ok, buf};
  });

  // 8. Monte Carlo cross-validation of the exact solve.
  run_criterion(8, "Monte Carlo cross-validation", []() -> std::pair<bool, std::string> {
    int covered = 0;
    for (int s = 0; s < 10; ++s) {
      Graph g = connected_er(20, 0.5, derive_seed(11000, s));
      TransitionMatrix tm = srw_from_graph(g);
      StationaryDistribution sd = stationary(tm);
      double exact = tmeet_pi(exact_meeting_times(tm), sd);
      McEstimate mc =
          estimate_tmeet_pi(tm, sd, 100000, derive_seed(12000, s), default_cap(20));
      if (mc.clean() && std::abs(mc.mean - exact) <= mc.ci_half_width) ++covered;
    }
    return {covered >= 9, std::to_string(covered) + "/10 intervals cover the exact value"};
  });

  // 9. Degenerate chain: all three routes agree that meeting never happens.
  run_criterion(9, "degenerate two-state chain", []() -> std::pair<bool, std::string> {
    TransitionMatrix swap = srw_from_graph(Graph::complete(2));
    bool threw = false;
    try {
      exact_meeting_times(swap);
    } catch (const InfiniteMeetingTimeError&) {
      threw = true;
    }
    PairWalkRun run = simulate_pair(swap, 0, 1, 5, 1000000);
    SvdResult svd = svd_killed(swap);
    double smin = svd.sigma(svd.sigma.size() - 1);
    bool ok = threw && run.censored && smin <= 1e-12;
    return {ok, std::string("exact path ") + (threw ? "raised" : "missed") +
                    ", walk censored at cap, sigma_min = " + detail::sci(smin)};
  });

  // 10. Operator micro-suite: dense agreement, projection, adjointness,
  // sub-stochasticity.
  run_criterion(10, "operator micro-suite", []() -> std::pair<bool, std::string> {
    bool ok = true;
    SplitMix64 rng(1313);
    for (int t = 0; t < 10; ++t) {
      int n = 2 + static_cast<int>(rng.next_below(7));  // 2..8
      Eigen::MatrixXd p(n, n);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          p(i, j) = -std::log(1.0 - rng.next_double());
          sum += p(i, j);
        }
        p.row(i) /= sum;
      }
      TransitionMatrix tm = make_transition(std::move(p));
      const int dim = n * n;

      Eigen::MatrixXd kron(dim, dim);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              kron(i * n + j, a * n + b) = tm.P(i, a) * tm.P(j, b);
      Eigen::MatrixXd e = Eigen::MatrixXd::Identity(dim, dim);
      for (int i = 0; i < n; ++i) e(i * (n + 1), i * (n + 1)) = 0.0;
      Eigen::MatrixXd lkill_dense = Eigen::MatrixXd::Identity(dim, dim) - kron * e;

      PairOperator op(tm, PairMode::Lkill);
      if ((materialize(op) - lkill_dense).cwiseAbs().maxCoeff() > 1e-12) ok = false;

      Eigen::VectorXd x(dim), y(dim);
      for (int i = 0; i < dim; ++i) {
        x(i) = rng.next_double() - 0.5;
        y(i) = rng.next_double() - 0.5;
      }
      if ((apply_E(apply_E(x, n), n) - apply_E(x, n)).norm() > 0.0) ok = false;
      if (std::abs(op.apply(x).dot(y) - x.dot(op.apply_transpose(y))) > 1e-12) ok = false;

      Eigen::MatrixXd ke = kron * e;
      if (ke.minCoeff() < -1e-15) ok = false;
      for (int i = 0; i < dim; ++i)
        if (ke.row(i).sum() > 1.0 + 1e-12) ok = false;
    }
    return {ok, "dense agreement, E idempotence, adjointness, sub-stochasticity"};
  });

  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              failures);
  return failures == 0 ? 0 : 1;
}
