#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "meet/errors.hpp"
#include "meet/markov.hpp"
#include "meet/rng.hpp"

#include <json.hpp>

namespace meet {

/// Default censoring cap: 100 n^2 steps, well above the Theta(n^2) worst
/// cases such as the cycle.
inline std::uint64_t default_cap(int n) {
  return 100ULL * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
}

/// Precomputed cumulative rows of P for O(log n) inverse-CDF stepping.
class WalkSampler {
 public:
  explicit WalkSampler(const TransitionMatrix& tm) : n_(tm.n), cum_(tm.n) {
    for (int i = 0; i < n_; ++i) {
      cum_[i].resize(n_);
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) {
        acc += tm.P(i, j);
        cum_[i][j] = acc;
      }
      cum_[i][n_ - 1] = 1.0;  // guard against rounding in the row sum
    }
  }

  int step(int state, SplitMix64& rng) const {
    double r = rng.next_double();
    const auto& row = cum_[state];
    return static_cast<int>(std::upper_bound(row.begin(), row.end(), r) - row.begin());
  }

  /// Draw a state from an arbitrary distribution (used for pi ⊗ pi starts).
  static int draw(const std::vector<double>& cum, SplitMix64& rng) {
    double r = rng.next_double();
    return static_cast<int>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
  }

 private:
  int n_;
  std::vector<std::vector<double>> cum_;
};

/// One replica: two independent walks until they occupy the same state.
struct PairWalkRun {
  int start_i = 0;
  int start_j = 0;
  std::uint64_t steps_to_meet = 0;
  bool censored = false;
  std::uint64_t seed = 0;
};

inline PairWalkRun simulate_pair(const WalkSampler& sampler, int i, int j, std::uint64_t seed,
                                 std::uint64_t cap) {
  if (cap < 1) throw InvalidParameterError("cap must be at least 1");
  PairWalkRun run;
  run.start_i = i;
  run.start_j = j;
  run.seed = seed;
  SplitMix64 rng(seed);
  int x = i, y = j;
  std::uint64_t t = 0;
  while (x != y) {
    if (t >= cap) {
      run.censored = true;
      break;
    }
    x = sampler.step(x, rng);
    y = sampler.step(y, rng);
    ++t;
  }
  run.steps_to_meet = t;
  return run;
}

inline PairWalkRun simulate_pair(const TransitionMatrix& tm, int i, int j, std::uint64_t seed,
                                 std::uint64_t cap) {
  if (i < 0 || i >= tm.n || j < 0 || j >= tm.n)
    throw InvalidParameterError("start state out of range");
  return simulate_pair(WalkSampler(tm), i, j, seed, cap);
}

/// Monte Carlo estimate with a 99% normal-approximation confidence interval.
/// Censored replicas contribute the cap, so with censoring the mean is only a
/// lower bound (clean = false).
struct McEstimate {
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::int64_t replicas = 0;
  std::int64_t censored = 0;
  std::uint64_t cap = 0;
  std::uint64_t seed = 0;
  bool clean() const { return censored == 0; }
};

/// Estimates t_meet^pi: every replica draws (i,j) ~ pi ⊗ pi and simulates the
/// pair. Replica seeds are pre-assigned from the master seed, and reduction is
/// over the replica-indexed results, so the estimate does not depend on the
/// execution schedule.
inline McEstimate estimate_tmeet_pi(const TransitionMatrix& tm, const StationaryDistribution& sd,
                                    std::int64_t replicas, std::uint64_t seed, std::uint64_t cap) {
  if (replicas < 1) throw InvalidParameterError("need at least one replica");
  WalkSampler sampler(tm);
  std::vector<double> pi_cum(tm.n);
  double acc = 0.0;
  for (int i = 0; i < tm.n; ++i) {
    acc += sd.pi(i);
    pi_cum[i] = acc;
  }
  pi_cum[tm.n - 1] = 1.0;

  std::vector<double> steps(replicas);
  std::vector<char> censored(replicas);
  auto worker = [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t r = lo; r < hi; ++r) {
      SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      int i = WalkSampler::draw(pi_cum, rng);
      int j = WalkSampler::draw(pi_cum, rng);
      PairWalkRun run = simulate_pair(sampler, i, j, rng.next_u64(), cap);
      steps[r] = static_cast<double>(run.steps_to_meet);
      censored[r] = run.censored ? 1 : 0;
    }
  };

  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (replicas < 1024 || threads == 1) {
    worker(0, replicas);
  } else {
    std::vector<std::future<void>> futures;
    std::int64_t chunk = (replicas + threads - 1) / threads;
    for (std::int64_t lo = 0; lo < replicas; lo += chunk)
      futures.push_back(std::async(std::launch::async, worker, lo,
                                   std::min(lo + chunk, replicas)));
    for (auto& f : futures) f.get();
  }

  McEstimate est;
  est.replicas = replicas;
  est.cap = cap;
  est.seed = seed;
  double sum = 0.0;
  for (std::int64_t r = 0; r < replicas; ++r) {
    sum += steps[r];
    est.censored += censored[r];
  }
  est.mean = sum / static_cast<double>(replicas);
  if (replicas > 1) {
    double ss = 0.0;
    for (std::int64_t r = 0; r < replicas; ++r) {
      double d = steps[r] - est.mean;
      ss += d * d;
    }
    double sd_hat = std::sqrt(ss / static_cast<double>(replicas - 1));
    constexpr double z99 = 2.5758293035489004;  // 99.5% normal quantile
    est.ci_half_width = z99 * sd_hat / std::sqrt(static_cast<double>(replicas));
  }
  return est;
}

inline nlohmann::json to_json(const McEstimate& e) {
  return {
      {"mean", e.mean},           {"ci_half_width", e.ci_half_width},
      {"replicas", e.replicas},   {"censored", e.censored},
      {"cap", e.cap},             {"seed", e.seed},
      {"clean", e.clean()},
  };
}

}  // namespace meet
