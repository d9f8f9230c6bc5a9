// Command-line front end: sample ER graphs, compute meeting times by every
// method, emit perturbation reports, and run the dense-regime sweeps.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "meet/experiment.hpp"
#include "meet/graph.hpp"
#include "meet/markov.hpp"
#include "meet/meeting.hpp"
#include "meet/montecarlo.hpp"
#include "meet/perturb.hpp"

namespace {

struct GraphSource {
  std::string graph_path;
  std::string transition_path;
  int n = 0;
  double p = -1.0;
  double beta = 0.0;
  double c = 1.0;

  void attach(CLI::App* cmd, bool with_transition = false) {
    cmd->add_option("--graph", graph_path, "read a graph from a text file (\"n m\" + edges)");
    if (with_transition)
      cmd->add_option("--transition", transition_path,
                      "read a row-stochastic transition matrix from dense CSV");
    cmd->add_option("--n", n, "vertex count for inline ER sampling");
    cmd->add_option("--p", p, "ER edge probability");
    cmd->add_option("--beta", beta, "ER density exponent, p = min(c n^{beta-1}, 1)");
    cmd->add_option("--c", c, "ER density scale")->capture_default_str();
  }

  meet::Graph load(std::uint64_t seed) const {
    if (!graph_path.empty()) {
      std::ifstream in(graph_path);
      if (!in) throw meet::ParseError("cannot open " + graph_path);
      return meet::read_graph_text(in);
    }
    if (n <= 0) throw meet::InvalidParameterError("need --graph or --n with --p/--beta");
    auto params = p >= 0.0 ? meet::ErParams::from_p(n, p) : meet::ErParams::from_beta(n, beta, c);
    return meet::er_sample(params, seed);
  }

  meet::TransitionMatrix load_chain(std::uint64_t seed) const {
    if (!transition_path.empty()) {
      std::ifstream in(transition_path);
      if (!in) throw meet::ParseError("cannot open " + transition_path);
      return meet::make_transition(meet::read_matrix_csv(in));
    }
    return meet::srw_from_graph(load(seed));
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw meet::Error("cannot open output file " + path);
  return file;
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  std::ofstream file;
  std::ostream& out = open_output(out_path, file);
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"expected meeting times of random walks via the killed pair generator"};
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--out/--format may follow the subcommand

  std::uint64_t seed = 12345;
  std::string out_path;
  std::string format = "json";
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--format", format, "output format: json | csv")->capture_default_str()
      ->check(CLI::IsMember({"json", "csv"}));

  // sample ---------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "sample an ER graph, write the text format");
  GraphSource sample_src;
  sample_src.attach(sample);

  // meet -----------------------------------------------------------------
  auto* meet_cmd = app.add_subcommand("meet", "expected meeting time from stationarity");
  GraphSource meet_src;
  meet_src.attach(meet_cmd, /*with_transition=*/true);
  std::string method = "exact";
  int rank_k = 1;
  std::int64_t replicas = 100000;
  bool lazy = false;
  std::string matrix_csv, sigma_csv, rank_plot;
  meet_cmd->add_option("--method", method, "exact | spectral | rank-k | mc")->capture_default_str()
      ->check(CLI::IsMember({"exact", "spectral", "rank-k", "mc"}));
  meet_cmd->add_option("--k", rank_k, "rank for --method rank-k")->capture_default_str();
  meet_cmd->add_option("--replicas", replicas, "replicas for --method mc")->capture_default_str();
  meet_cmd->add_flag("--lazy", lazy, "replace P by (I+P)/2 before computing");
  meet_cmd->add_option("--matrix-csv", matrix_csv, "write the meeting-time matrix as CSV");
  meet_cmd->add_option("--sigma-csv", sigma_csv, "write the singular values as CSV");
  meet_cmd->add_option("--plot-data", rank_plot,
                       "write \"k error bound\" rows for k = 1,2,4,... to this file");

  // perturb ----------------------------------------------------------------
  auto* perturb_cmd = app.add_subcommand("perturb", "Stewart perturbation report");
  GraphSource perturb_src;
  perturb_src.attach(perturb_cmd, /*with_transition=*/true);
  double eps1 = 0.5;
  bool perturb_lazy = false;
  perturb_cmd->add_option("--epsilon1", eps1, "norm-estimate parameter eps1")->capture_default_str();
  perturb_cmd->add_flag("--lazy", perturb_lazy, "replace P by (I+P)/2 before computing");

  // er-sweep ---------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("er-sweep", "dense-regime reproduction sweep");
  std::vector<int> sizes;
  double sweep_beta = 0.8, sweep_c = 1.0, sweep_p = -1.0;
  int sweep_seeds = 20;
  double sweep_eps = 0.3, sweep_eps1 = 0.5;
  std::string sweep_method = "exact";
  int sweep_k = 1;
  std::int64_t sweep_replicas = 10000;
  bool sweep_lazy = false, sweep_perturb = false;
  std::string plot_prefix;
  sweep_cmd->add_option("--n", sizes, "graph sizes (repeatable)")->required();
  sweep_cmd->add_option("--beta", sweep_beta, "ER exponent")->capture_default_str();
  sweep_cmd->add_option("--c", sweep_c, "ER scale")->capture_default_str();
  sweep_cmd->add_option("--p", sweep_p, "explicit edge probability (overrides beta)");
  sweep_cmd->add_option("--seeds", sweep_seeds, "samples per size")->capture_default_str();
  sweep_cmd->add_option("--epsilon", sweep_eps, "tolerance on |t/n - 1|")->capture_default_str();
  sweep_cmd->add_option("--epsilon1", sweep_eps1, "parameter for nu1 = nu2")->capture_default_str();
  sweep_cmd->add_option("--method", sweep_method, "exact | spectral | rank-k | mc")->capture_default_str()
      ->check(CLI::IsMember({"exact", "spectral", "rank-k", "mc"}));
  sweep_cmd->add_option("--k", sweep_k, "rank for rank-k")->capture_default_str();
  sweep_cmd->add_option("--replicas", sweep_replicas, "replicas for mc")->capture_default_str();
  sweep_cmd->add_flag("--lazy", sweep_lazy, "lazy chains");
  sweep_cmd->add_flag("--perturb-report", sweep_perturb, "attach perturbation diagnostics");
  sweep_cmd->add_option("--plot-data", plot_prefix, "write <prefix>_tmeet_vs_n.dat");

  // concentration ------------------------------------------------------------
  auto* conc_cmd = app.add_subcommand("concentration", "event-frequency study");
  int conc_n = 200;
  double conc_p = 0.5;
  int conc_seeds = 100;
  double conc_nu1 = 0.3, conc_nu2 = 0.3, conc_eps1 = -1.0;
  conc_cmd->add_option("--n", conc_n, "graph size")->capture_default_str();
  conc_cmd->add_option("--p", conc_p, "edge probability")->capture_default_str();
  conc_cmd->add_option("--seeds", conc_seeds, "samples")->capture_default_str();
  conc_cmd->add_option("--nu1", conc_nu1, "degree radius")->capture_default_str();
  conc_cmd->add_option("--nu2", conc_nu2, "codegree radius")->capture_default_str();
  conc_cmd->add_option("--epsilon1", conc_eps1, "derive nu1 = nu2 from eps1 instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sample->parsed()) {
      meet::Graph g = sample_src.load(seed);
      std::ofstream file;
      std::ostream& out = open_output(out_path, file);
      meet::write_graph_text(g, out);
      return 0;
    }

    if (meet_cmd->parsed()) {
      meet::TransitionMatrix tm = meet_src.load_chain(seed);
      if (lazy) tm = meet::lazy_chain(tm);
      meet::StationaryDistribution sd = meet::stationary(tm);
      nlohmann::json j{{"n", tm.n}, {"method", method}, {"lazy", lazy}};

      if (method == "exact") {
        meet::MeetingTimeMatrix mt = meet::exact_meeting_times(tm);
        j["tmeet_pi"] = meet::tmeet_pi(mt, sd);
        if (!matrix_csv.empty()) {
          std::ofstream mcsv(matrix_csv);
          meet::write_matrix_csv(mt.M, mcsv);
        }
      } else if (method == "spectral") {
        meet::SvdResult svd = meet::svd_killed(tm);
        j["tmeet_pi"] = meet::spectral_tmeet(svd, sd);
        if (!sigma_csv.empty()) {
          std::ofstream scsv(sigma_csv);
          meet::write_sigma_csv(svd, scsv);
        }
      } else if (method == "rank-k") {
        meet::SvdResult svd = meet::svd_killed(tm, rank_k + 1, meet::derive_seed(seed, 1));
        meet::RankKApprox approx = meet::rank_k_tmeet(svd, sd, rank_k);
        j["tmeet_pi"] = approx.value;
        j["k"] = approx.k;
        j["bound"] = approx.bound;
        j["certified"] = approx.certified;
        if (!sigma_csv.empty()) {
          std::ofstream scsv(sigma_csv);
          meet::write_sigma_csv(svd, scsv);
        }
      } else {
        meet::McEstimate est =
            meet::estimate_tmeet_pi(tm, sd, replicas, seed, meet::default_cap(tm.n));
        j["tmeet_pi"] = est.mean;
        j["mc"] = meet::to_json(est);
      }
      if (!rank_plot.empty()) {
        std::vector<int> ks;
        for (int k = 1; k <= tm.n * tm.n; k *= 2) ks.push_back(k);
        if (ks.back() != tm.n * tm.n) ks.push_back(tm.n * tm.n);
        std::ofstream pf(rank_plot);
        meet::write_plot_rank_error(tm, sd, ks, pf);
      }
      emit(j, out_path);
      return 0;
    }

    if (perturb_cmd->parsed()) {
      meet::TransitionMatrix tm = perturb_src.load_chain(seed);
      if (perturb_lazy) tm = meet::lazy_chain(tm);
      meet::StationaryDistribution sd = meet::stationary(tm);
      emit(meet::perturb_report_json(tm, sd, eps1), out_path);
      return 0;
    }

    if (sweep_cmd->parsed()) {
      meet::ExperimentConfig cfg;
      cfg.sizes = sizes;
      cfg.beta = sweep_beta;
      cfg.c = sweep_c;
      cfg.p = sweep_p;
      cfg.seeds = sweep_seeds;
      cfg.master_seed = seed;
      cfg.epsilon = sweep_eps;
      cfg.epsilon1 = sweep_eps1;
      cfg.method = meet::method_from_name(sweep_method);
      cfg.k = sweep_k;
      cfg.replicas = sweep_replicas;
      cfg.lazy = sweep_lazy;
      cfg.with_perturb_report = sweep_perturb;
      meet::SweepResult result = meet::run_er_experiment(cfg);

      std::ofstream file;
      std::ostream& out = open_output(out_path, file);
      if (format == "csv") {
        meet::write_records_csv(result.records, out);
      } else {
        meet::write_records_jsonl(result.records, out);
        for (const auto& s : result.summaries) out << meet::to_json(s).dump() << '\n';
      }
      if (!plot_prefix.empty()) {
        std::ofstream pf(plot_prefix + "_tmeet_vs_n.dat");
        meet::write_plot_tmeet_vs_n(result.summaries, pf);
      }
      return result.any_error ? 2 : 0;
    }

    if (conc_cmd->parsed()) {
      if (conc_eps1 > 0.0) {
        auto [nu1, nu2] = meet::nu_from_eps(conc_eps1);
        conc_nu1 = nu1;
        conc_nu2 = nu2;
      }
      meet::ConcentrationReport rep =
          meet::concentration_study(conc_n, conc_p, conc_seeds, conc_nu1, conc_nu2, seed);
      emit(meet::to_json(rep), out_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
