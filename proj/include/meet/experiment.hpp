#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "meet/errors.hpp"
#include "meet/graph.hpp"
#include "meet/markov.hpp"
#include "meet/meeting.hpp"
#include "meet/montecarlo.hpp"
#include "meet/perturb.hpp"

#include <json.hpp>

namespace meet {

/// nu1 = nu2 = ((eps1+1)^{1/4} - 1)/((eps1+1)^{1/4} + 1); the standard
/// (non-optimal) choice tying the concentration radii to eps1.
inline std::pair<double, double> nu_from_eps(double eps1) {
  if (eps1 <= 0.0) throw InvalidParameterError("eps1 must be positive");
  double root = std::pow(eps1 + 1.0, 0.25);
  double nu = (root - 1.0) / (root + 1.0);
  return {nu, nu};
}

enum class Method { Exact, Spectral, RankK, Mc };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Spectral: return "spectral";
    case Method::RankK: return "rank_k";
    case Method::Mc: return "mc";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  if (s == "exact") return Method::Exact;
  if (s == "spectral") return Method::Spectral;
  if (s == "rank-k" || s == "rank_k") return Method::RankK;
  if (s == "mc") return Method::Mc;
  throw InvalidParameterError("unknown method \"" + s + "\"");
}

struct ExperimentConfig {
  std::vector<int> sizes;
  double beta = 0.0;  // used when p < 0
  double c = 1.0;
  double p = -1.0;  // >= 0 selects an explicit edge probability
  int seeds = 20;
  std::uint64_t master_seed = 12345;
  double epsilon = 0.3;   // tolerance on |t^pi/n - 1|
  double epsilon1 = 0.5;  // parameter for nu1 = nu2
  Method method = Method::Exact;
  int k = 1;                      // rank for Method::RankK
  std::int64_t replicas = 10000;  // for Method::Mc
  bool lazy = false;
  bool with_perturb_report = false;  // dense-path diagnostics per record

  void validate() const {
    if (sizes.empty()) throw InvalidParameterError("at least one size required");
    if (seeds < 1) throw InvalidParameterError("seeds must be positive");
    if (epsilon <= 0.0 || epsilon1 <= 0.0)
      throw InvalidParameterError("tolerances must be positive");
    if (p < 0.0 && (beta <= 0.0 || beta > 1.0))
      throw InvalidParameterError("need either p in [0,1] or beta in (0,1]");
  }

  ErParams params_for(int n) const {
    return p >= 0.0 ? ErParams::from_p(n, p) : ErParams::from_beta(n, beta, c);
  }
};

/// One sampled graph processed end to end. tmeet fields are NaN when the
/// sample was skipped or errored.
struct RunRecord {
  std::uint64_t seed = 0;
  int n = 0;
  double p = 0.0;
  double d = 0.0;
  bool connected = false;
  bool skipped = false;
  double r1 = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double sigma2_scaled = std::numeric_limits<double>::quiet_NaN();
  EventFlags flags;
  double tmeet_pi_value = std::numeric_limits<double>::quiet_NaN();
  double tmeet_over_n = std::numeric_limits<double>::quiet_NaN();
  std::string method;
  double rank_k_bound = std::numeric_limits<double>::quiet_NaN();
  double mc_ci_half_width = std::numeric_limits<double>::quiet_NaN();
  std::int64_t mc_censored = -1;
  std::optional<nlohmann::json> perturb_report;
  double wall_time_s = 0.0;
  std::string error;  // empty when the record is clean
};

/// Per-size aggregate against the dense-regime tail bound. The third term of
/// the bound has an unknown constant and is reported symbolically only.
struct SizeSummary {
  int n = 0;
  double p = 0.0;
  double d = 0.0;
  int total = 0;
  int skipped = 0;
  int errors = 0;
  double mean_t_over_n = std::numeric_limits<double>::quiet_NaN();
  double mean_abs_dev = std::numeric_limits<double>::quiet_NaN();
  double freq_exceed_eps = std::numeric_limits<double>::quiet_NaN();
  double bound_degree_term = 0.0;    // 2 n exp(-nu1^2 d / 3)
  double bound_codegree_term = 0.0;  // 2 C(n,2) exp(-nu2^2 d^2 / (3n))
  std::string bound_theta_term = "exp(-theta (log n)^2), theta unknown, omitted";
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<SizeSummary> summaries;
  double nu1 = 0.0;
  double nu2 = 0.0;
  bool any_error = false;
};

namespace detail {

inline RunRecord process_er_seed(const ExperimentConfig& cfg, const ErParams& params,
                                 std::uint64_t graph_seed) {
  auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = graph_seed;
  rec.n = params.n;
  rec.p = params.p;
  rec.d = params.d;
  rec.method = method_name(cfg.method);
  auto [nu1, nu2] = nu_from_eps(cfg.epsilon1);
  try {
    Graph g = er_sample(params, graph_seed);
    rec.connected = g.connected();
    if (params.d > 0.0) {
      rec.r1 = degree_stats(g, params.d).r1;
      rec.r2 = codegree_stats(g, params.d).r2;
      rec.sigma2_scaled = adjacency_sigma2(g, params.d);
      rec.flags = event_flags(rec.r1, rec.r2, rec.sigma2_scaled, nu1, nu2);
    }
    if (!rec.connected || g.min_degree() == 0) {
      rec.skipped = true;
    } else {
      TransitionMatrix tm = srw_from_graph(g);
      if (cfg.lazy) tm = lazy_chain(tm);
      StationaryDistribution sd = stationary(tm);
      switch (cfg.method) {
        case Method::Exact:
          rec.tmeet_pi_value = tmeet_pi(exact_meeting_times(tm), sd);
          break;
        case Method::Spectral:
          rec.tmeet_pi_value = spectral_tmeet(svd_killed(tm), sd);
          break;
        case Method::RankK: {
          SvdResult svd = svd_killed(tm, cfg.k + 1, derive_seed(graph_seed, 1));
          RankKApprox approx = rank_k_tmeet(svd, sd, cfg.k);
          rec.tmeet_pi_value = approx.value;
          rec.rank_k_bound = approx.bound;
          break;
        }
        case Method::Mc: {
          McEstimate est = estimate_tmeet_pi(tm, sd, cfg.replicas, derive_seed(graph_seed, 2),
                                             default_cap(tm.n));
          rec.tmeet_pi_value = est.mean;
          rec.mc_ci_half_width = est.ci_half_width;
          rec.mc_censored = est.censored;
          break;
        }
      }
      rec.tmeet_over_n = rec.tmeet_pi_value / rec.n;
      if (cfg.with_perturb_report && tm.n <= kDenseLimit)
        rec.perturb_report = perturb_report_json(tm, sd, cfg.epsilon1);
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace detail

/// The dense-regime sweep: per seed, sample, skip-or-solve, collect the
/// concentration statistics, and aggregate the |t^pi/n - 1| tail frequency
/// against the explicit terms of the theorem bound. Per-seed failures are
/// captured in the record, never aborting the sweep.
inline SweepResult run_er_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepResult out;
  std::tie(out.nu1, out.nu2) = nu_from_eps(cfg.epsilon1);

  for (std::size_t a = 0; a < cfg.sizes.size(); ++a) {
    ErParams params = cfg.params_for(cfg.sizes[a]);
    std::uint64_t size_seed = derive_seed(cfg.master_seed, a);

    std::vector<RunRecord> records(cfg.seeds);
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads == 1 || cfg.seeds == 1) {
      for (int s = 0; s < cfg.seeds; ++s)
        records[s] = detail::process_er_seed(cfg, params, derive_seed(size_seed, s));
    } else {
      std::vector<std::future<RunRecord>> futures;
      futures.reserve(cfg.seeds);
      for (int s = 0; s < cfg.seeds; ++s)
        futures.push_back(std::async(std::launch::async, detail::process_er_seed, cfg, params,
                                     derive_seed(size_seed, s)));
      for (int s = 0; s < cfg.seeds; ++s) records[s] = futures[s].get();
    }

    SizeSummary sum;
    sum.n = params.n;
    sum.p = params.p;
    sum.d = params.d;
    sum.total = cfg.seeds;
    double acc_ratio = 0.0, acc_dev = 0.0;
    int used = 0, exceed = 0;
    for (const RunRecord& rec : records) {
      if (rec.skipped) ++sum.skipped;
      if (!rec.error.empty()) {
        ++sum.errors;
        out.any_error = true;
      }
      if (!rec.skipped && rec.error.empty() && std::isfinite(rec.tmeet_over_n)) {
        ++used;
        acc_ratio += rec.tmeet_over_n;
        acc_dev += std::abs(rec.tmeet_over_n - 1.0);
        if (std::abs(rec.tmeet_over_n - 1.0) > cfg.epsilon) ++exceed;
      }
    }
    if (used > 0) {
      sum.mean_t_over_n = acc_ratio / used;
      sum.mean_abs_dev = acc_dev / used;
      sum.freq_exceed_eps = static_cast<double>(exceed) / used;
    }
    double n = params.n, d = params.d;
    sum.bound_degree_term = 2.0 * n * std::exp(-out.nu1 * out.nu1 * d / 3.0);
    sum.bound_codegree_term =
        2.0 * (n * (n - 1.0) / 2.0) * std::exp(-out.nu2 * out.nu2 * d * d / (3.0 * n));

    out.summaries.push_back(sum);
    for (RunRecord& rec : records) out.records.push_back(std::move(rec));
  }
  return out;
}

/// Empirical frequencies of the concentration events versus their Chernoff
/// bounds over independent samples; pass = empirical within bound plus three
/// standard errors. The sigma2 event has no explicit finite-n bound, so only
/// its frequency is reported.
struct ConcentrationReport {
  int n = 0;
  double p = 0.0;
  int seeds = 0;
  double nu1 = 0.0, nu2 = 0.0;
  double freq_r1 = 0.0, bound_r1 = 0.0;
  bool pass_r1 = false;
  double freq_r2 = 0.0, bound_r2 = 0.0;
  bool pass_r2 = false;
  double freq_sigma = 0.0;
};

inline ConcentrationReport concentration_study(int n, double p, int seeds, double nu1, double nu2,
                                               std::uint64_t master_seed) {
  if (seeds < 30) throw InvalidParameterError("need at least 30 seeds");
  if (nu1 <= 0.0 || nu2 <= 0.0) throw InvalidParameterError("nu1, nu2 must be positive");
  ErParams params = ErParams::from_p(n, p);
  if (params.d <= 0.0) throw InvalidParameterError("np must be positive");
  ConcentrationReport rep;
  rep.n = n;
  rep.p = p;
  rep.seeds = seeds;
  rep.nu1 = nu1;
  rep.nu2 = nu2;

  int c1 = 0, c2 = 0, cs = 0;
  for (int s = 0; s < seeds; ++s) {
    Graph g = er_sample(params, derive_seed(master_seed, s));
    if (degree_stats(g, params.d).r1 > nu1) ++c1;
    if (codegree_stats(g, params.d).r2 > nu2) ++c2;
    if (adjacency_sigma2(g, params.d) > 8.0) ++cs;
  }
  auto finish = [&](int count, double& bound, double bound_value, double& freq, bool& pass) {
    bound = bound_value;
    freq = static_cast<double>(count) / seeds;
    double se = std::sqrt(freq * (1.0 - freq) / seeds);
    pass = freq <= bound + 3.0 * se;
  };
  double np = n * p, np2 = n * p * p;
  finish(c1, rep.bound_r1, 2.0 * n * std::exp(-nu1 * nu1 * np / 3.0), rep.freq_r1, rep.pass_r1);
  finish(c2, rep.bound_r2, 2.0 * (n * (n - 1.0) / 2.0) * std::exp(-nu2 * nu2 * np2 / 3.0),
         rep.freq_r2, rep.pass_r2);
  rep.freq_sigma = static_cast<double>(cs) / seeds;
  return rep;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j{
      {"seed", r.seed},
      {"n", r.n},
      {"p", r.p},
      {"d", r.d},
      {"connected", r.connected},
      {"skipped", r.skipped},
      {"r1", r.r1},
      {"r2", r.r2},
      {"sigma2_scaled", r.sigma2_scaled},
      {"f_nu1", r.flags.f_nu1},
      {"f_nu1_nu2", r.flags.f_nu1_nu2},
      {"f_sigma", r.flags.f_sigma},
      {"tmeet_pi", r.tmeet_pi_value},
      {"tmeet_over_n", r.tmeet_over_n},
      {"method", r.method},
      {"rank_k_bound", r.rank_k_bound},
      {"mc_ci_half_width", r.mc_ci_half_width},
      {"mc_censored", r.mc_censored},
      {"wall_time_s", r.wall_time_s},
      {"error", r.error},
  };
  if (r.perturb_report) j["perturb_report"] = *r.perturb_report;
  return j;
}

inline nlohmann::json to_json(const SizeSummary& s) {
  return {
      {"n", s.n},
      {"p", s.p},
      {"d", s.d},
      {"total", s.total},
      {"skipped", s.skipped},
      {"errors", s.errors},
      {"mean_t_over_n", s.mean_t_over_n},
      {"mean_abs_dev", s.mean_abs_dev},
      {"freq_exceed_eps", s.freq_exceed_eps},
      {"bound_degree_term", s.bound_degree_term},
      {"bound_codegree_term", s.bound_codegree_term},
      {"bound_theta_term", s.bound_theta_term},
  };
}

inline nlohmann::json to_json(const ConcentrationReport& r) {
  return {
      {"n", r.n},           {"p", r.p},
      {"seeds", r.seeds},   {"nu1", r.nu1},
      {"nu2", r.nu2},       {"freq_r1", r.freq_r1},
      {"bound_r1", r.bound_r1}, {"pass_r1", r.pass_r1},
      {"freq_r2", r.freq_r2},   {"bound_r2", r.bound_r2},
      {"pass_r2", r.pass_r2},   {"freq_sigma", r.freq_sigma},
  };
}

/// One JSON object per line, stable keys.
inline void write_records_jsonl(const std::vector<RunRecord>& records, std::ostream& out) {
  for (const RunRecord& r : records) out << to_json(r).dump() << '\n';
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace detail

/// CSV twin of the JSONL schema (identical columns; the optional perturbation
/// report is embedded as a quoted JSON string).
inline void write_records_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "seed,n,p,d,connected,skipped,r1,r2,sigma2_scaled,f_nu1,f_nu1_nu2,f_sigma,"
         "tmeet_pi,tmeet_over_n,method,rank_k_bound,mc_ci_half_width,mc_censored,"
         "wall_time_s,error,perturb_report\n";
  out.precision(17);
  for (const RunRecord& r : records) {
    out << r.seed << ',' << r.n << ',' << r.p << ',' << r.d << ',' << r.connected << ','
        << r.skipped << ',' << r.r1 << ',' << r.r2 << ',' << r.sigma2_scaled << ','
        << r.flags.f_nu1 << ',' << r.flags.f_nu1_nu2 << ',' << r.flags.f_sigma << ','
        << r.tmeet_pi_value << ',' << r.tmeet_over_n << ',' << r.method << ',' << r.rank_k_bound
        << ',' << r.mc_ci_half_width << ',' << r.mc_censored << ',' << r.wall_time_s << ','
        << detail::csv_escape(r.error) << ','
        << detail::csv_escape(r.perturb_report ? r.perturb_report->dump() : "") << '\n';
  }
}

/// Two-column plot data: n against mean t^pi/n.
inline void write_plot_tmeet_vs_n(const std::vector<SizeSummary>& summaries, std::ostream& out) {
  out.precision(12);
  for (const SizeSummary& s : summaries) out << s.n << ' ' << s.mean_t_over_n << '\n';
}

/// Two-column plot data for one chain: k against the rank-k truncation error
/// |t_hat^(k) - t^pi| (third column: the certified bound). Needs the dense
/// paths, so n must be within the dense limit.
inline void write_plot_rank_error(const TransitionMatrix& tm, const StationaryDistribution& sd,
                                  const std::vector<int>& ks, std::ostream& out) {
  MeetingTimeMatrix mt = exact_meeting_times(tm);
  double exact = tmeet_pi(mt, sd);
  SvdResult svd = svd_killed(tm);
  out.precision(12);
  for (int k : ks) {
    RankKApprox approx = rank_k_tmeet(svd, sd, k);
    out << k << ' ' << std::abs(approx.value - exact) << ' ' << approx.bound << '\n';
  }
}

}  // namespace meet
