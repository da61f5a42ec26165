// netgee command line: simulation studies, fitting, hypothesis testing,
// and the flight-data construction pipeline.
//
// Exit codes: 0 success, 2 usage/input problems, 3 solver failures,
// 4 experiment failure budget exceeded.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "netgee/communities.hpp"
#include "netgee/gee.hpp"
#include "netgee/inference.hpp"
#include "netgee/io.hpp"
#include "netgee/model.hpp"
#include "netgee/pipeline.hpp"
#include "netgee/sbm.hpp"
#include "netgee/study.hpp"
#include "netgee/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON config files mirror the long flag names: {"n": 200, "p": 0.8}.
// Values from the file are appended as flags unless the flag was given
// explicitly, so the command line always wins.
std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::vector<std::string> merge_config_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config_path.empty()) return out;
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file: " + config_path);
  json j;
  f >> j;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : out)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += json_scalar(v);
      }
      out.push_back(flag + "=" + joined);
    } else {
      out.push_back(flag + "=" + json_scalar(value));
    }
  }
  return out;
}

void add_json_config(CLI::App* sub) {
  // parsed away before CLI11 sees it; declared here for --help
  static std::string dummy;
  sub->add_option("--config", dummy, "JSON file mirroring the long flag names");
}

std::string timestamp_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& config, std::uint64_t seed,
                    std::vector<std::string> outputs) {
  json m;
  m["schema_version"] = 1;
  m["command"] = command;
  m["config"] = config;
  m["base_seed"] = seed;
  m["timestamp"] = timestamp_utc();
  m["library_version"] = netgee::kVersion;
  m["outputs"] = outputs;
  std::ofstream f(dir / "manifest.json");
  f << m.dump(2) << '\n';
}

netgee::Link parse_link(const std::string& s) {
  if (s == "identity") return netgee::Link::Identity;
  if (s == "logit") return netgee::Link::Logit;
  throw CLI::ValidationError("--link must be identity or logit");
}

using netgee::reference_rate;
using netgee::ReferenceCell;
const auto& kTable1Reference = netgee::table1_reference();
const auto& kTable2Reference = netgee::table2_reference();
const auto& kPqGrid = netgee::study_pq_grid();
const auto& kSizes = netgee::study_sizes();

// ---------------------------------------------------------------------
// simulate

struct SimulateArgs {
  int n = 200, k = 20;
  double p = 0.8, q = 0.0, beta0 = 0.5;
  std::string link = "identity";
  int reps = 1;
  std::uint64_t seed = 1;
  std::vector<double> alpha0;
  std::string out_dir = "netgee_simulate";
};

int run_simulate(const SimulateArgs& args) {
  if (args.k < 1 || args.n % args.k != 0) {
    std::cerr << "error: --n must be divisible by --k\n";
    return 2;
  }
  const int m = args.n / args.k;
  const netgee::Link link = parse_link(args.link);
  Eigen::VectorXd alpha0;
  if (args.alpha0.empty()) {
    alpha0 = netgee::default_alpha0();
  } else {
    alpha0 = Eigen::Map<const Eigen::VectorXd>(args.alpha0.data(),
                                               static_cast<Eigen::Index>(args.alpha0.size()));
  }

  netgee::SbmConfig sbm{args.k, m, args.p, args.q, 0};
  for (const auto& w : sbm.validate()) std::cerr << "warning: " << w << '\n';

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  std::vector<std::string> outputs;
  netgee::write_partition_csv((dir / "planted_labels.csv").string(),
                              netgee::planted_partition(sbm));
  outputs.push_back("planted_labels.csv");

  const netgee::ModelParams truth{args.beta0, alpha0};
  for (int b = 0; b < args.reps; ++b) {
    const std::uint64_t rep_seed = netgee::Rng::derive(args.seed, b);
    sbm.seed = netgee::Rng::derive(rep_seed, 1);
    const netgee::DirectedGraph graph = netgee::sample_sbm(sbm);
    const Eigen::MatrixXd design = netgee::simulate_design(
        args.k, m, static_cast<int>(alpha0.size()), netgee::Rng::derive(rep_seed, 2));
    Eigen::VectorXd mu;
    if (link == netgee::Link::Identity)
      mu = netgee::mean_continuous_block(graph.weights(), design, truth, args.n);
    else
      mu = netgee::mean_fixed_point(graph.weights(), design, truth, link, 1e-12,
                                    5000, args.n);
    const Eigen::VectorXd y =
        netgee::simulate_outcomes(mu, link, netgee::Rng::derive(rep_seed, 3));

    char tag[16];
    std::snprintf(tag, sizeof(tag), "%03d", b);
    const std::string gf = std::string("graph_") + tag + ".csv";
    const std::string df = std::string("design_") + tag + ".csv";
    const std::string of = std::string("outcomes_") + tag + ".csv";
    netgee::write_matrix_csv((dir / gf).string(), graph.weights());
    netgee::write_matrix_csv((dir / df).string(), design);
    netgee::write_vector_csv((dir / of).string(), y);
    outputs.insert(outputs.end(), {gf, df, of});
  }

  json config = {{"n", args.n},       {"k", args.k},     {"p", args.p},
                 {"q", args.q},       {"beta0", args.beta0},
                 {"link", args.link}, {"reps", args.reps},
                 {"seed", args.seed}};
  write_manifest(dir, "simulate", config, args.seed, outputs);
  std::cout << "wrote " << outputs.size() << " files to " << args.out_dir << '\n';
  return 0;
}

// ---------------------------------------------------------------------
// fit / fit-naive

struct FitArgs {
  std::string graph_path, design_path, outcome_path, labels_path;
  std::string corr = "indep";
  std::string zmode = "block";
  std::string detect = "modularity";
  std::string link = "identity";
  double resolution = 1.0;
  int max_sweeps = 100;
  std::uint64_t seed = 1;
  std::string out = "fit.json";
  std::string partition_out = "detected_partition.csv";
};

int run_fit(const FitArgs& args, bool naive) {
  for (const std::string& path :
       {args.graph_path, args.design_path, args.outcome_path}) {
    if (!fs::exists(path)) {
      std::cerr << "error: missing file: " << path << '\n';
      return 2;
    }
  }
  const Eigen::MatrixXd a = netgee::read_matrix_csv(args.graph_path);
  const Eigen::MatrixXd design = netgee::read_matrix_csv(args.design_path);
  const Eigen::VectorXd y = netgee::read_vector_csv(args.outcome_path);
  const bool binary = (a.array() == 0.0 || a.array() == 1.0).all();
  const netgee::DirectedGraph graph(a, binary);
  const netgee::Link link = parse_link(args.link);

  netgee::FitOptions opts;
  opts.link = link;
  opts.z_mode = args.zmode == "full" ? netgee::ZMode::FullNetwork
                                     : netgee::ZMode::Block;

  netgee::FitResult fit;
  json extra;
  if (naive) {
    fit = netgee::fit_naive(graph, design, y, link, opts);
  } else {
    netgee::DetectionAlgorithm algo;
    if (args.detect == "oracle") {
      if (args.labels_path.empty() || !fs::exists(args.labels_path)) {
        std::cerr << "error: --detect oracle requires --labels <csv>\n";
        return 2;
      }
      algo = netgee::Oracle{netgee::read_partition_csv(args.labels_path).labels()};
    } else if (args.detect == "labelprop") {
      algo = netgee::LabelPropagation{args.max_sweeps, args.seed};
    } else {
      algo = netgee::GreedyModularity{args.resolution, args.seed};
    }
    const netgee::Partition partition = netgee::detect(graph, algo);
    netgee::write_partition_csv(args.partition_out, partition);
    extra["detected_communities"] = partition.community_count();
    extra["partition_file"] = args.partition_out;

    netgee::WorkingCorrelation corr;
    corr.structure = args.corr == "exch"
                         ? netgee::CorrelationStructure::Exchangeable
                         : netgee::CorrelationStructure::Independence;
    fit = netgee::fit_gee(graph, partition, design, y, corr, opts);
  }

  json out = netgee::fit_result_to_json(fit);
  out["link"] = args.link;
  out["zmode"] = naive ? "full" : args.zmode;
  out["model"] = naive ? "naive" : ("gee-" + args.corr);
  for (const auto& [k, v] : extra.items()) out[k] = v;
  std::ofstream f(args.out);
  f << out.dump(2) << '\n';
  std::cout << "beta = " << fit.params.beta
            << " (sandwich se " << fit.sandwich_se(0) << ", naive se "
            << fit.naive_se(0) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------
// reproduce

struct ReproduceArgs {
  std::string target;
  std::string scale = "desk";
  std::string out_dir = "netgee_reproduce";
  std::uint64_t seed = 20240501;
  int threads = 0;
  std::string detect = "modularity";
};

netgee::SimStudyConfig study_config(const ReproduceArgs& args, int kc, int m,
                                    double p, double q, double beta0,
                                    netgee::Link link, int reps,
                                    std::uint64_t cell_seed) {
  netgee::SimStudyConfig c;
  c.communities = kc;
  c.community_size = m;
  c.p = p;
  c.q = q;
  c.beta0 = beta0;
  c.link = link;
  c.replications = reps;
  c.base_seed = cell_seed;
  c.z_mode = netgee::ZMode::FullNetwork;
  if (args.detect == "oracle")
    c.detection = netgee::Oracle{netgee::planted_partition({kc, m, p, q, 0}).labels()};
  else if (args.detect == "labelprop")
    c.detection = netgee::LabelPropagation{};
  else
    c.detection = netgee::GreedyModularity{};
  return c;
}

int run_reproduce_table(const ReproduceArgs& args, netgee::Link link) {
  const bool binary = link == netgee::Link::Logit;
  const auto& reference = binary ? kTable2Reference : kTable1Reference;
  const int reps = args.scale == "full" ? 1000 : 200;
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  const std::string csv_name = binary ? "table2.csv" : "table1.csv";
  std::ofstream csv(dir / csv_name);
  csv << "n,K,p,q,method,rate\n";

  json cells = json::array();
  int cell_index = 0;
  for (const auto& [kc, m] : kSizes) {
    for (const auto& [p, q] : kPqGrid) {
      const int n = kc * m;
      auto config = study_config(args, kc, m, p, q, 0.0, link, reps,
                                 netgee::Rng::derive(args.seed, cell_index++));
      const auto result = netgee::type1_error_experiment(config, 0.05, args.threads);
      const ReferenceCell ref = reference.at({n, {p, q}});
      for (const auto& row : result.rows) {
        csv << n << ',' << kc << ',' << p << ',' << q << ','
            << netgee::method_name(row.method) << ','
            << netgee::format_double(row.rate) << '\n';
        const double ref_rate = reference_rate(ref, row.method);
        const double band = 3.0 * std::sqrt(ref_rate * (1.0 - ref_rate) / reps);
        json cell;
        cell["n"] = n;
        cell["K"] = kc;
        cell["p"] = p;
        cell["q"] = q;
        cell["method"] = netgee::method_name(row.method);
        cell["rate"] = row.rate;
        cell["reference"] = ref_rate;
        cell["band_3sigma"] = band;
        cell["within_band"] = std::abs(row.rate - ref_rate) <= band;
        cell["used"] = row.used;
        cell["failures"] = row.failures;
        cell["nonconverged"] = row.nonconverged;
        cell["avg_degree"] = result.avg_degree;
        cell["avg_detected_communities"] = result.avg_detected_communities;
        cells.push_back(cell);
      }
      std::cout << csv_name << " (" << n << "," << kc << ") (" << p << "," << q
                << ") done\n";
    }
  }

  json report;
  report["target"] = binary ? "table2" : "table1";
  report["scale"] = args.scale;
  report["replications"] = reps;
  report["cells"] = cells;
  // ordering checks: Naive >= GEE-indep at q >= 0.1 and exch >= indep
  int naive_ge_indep = 0, naive_cells = 0, exch_ge_indep = 0, exch_cells = 0;
  std::map<std::string, double> rate_of;
  for (const auto& cell : cells)
    rate_of[cell["method"].get<std::string>() + "@" +
            std::to_string(cell["n"].get<int>()) + "," +
            netgee::format_double(cell["q"].get<double>())] =
        cell["rate"].get<double>();
  for (const auto& [kc, m] : kSizes)
    for (const auto& [p, q] : kPqGrid) {
      const std::string at =
          "@" + std::to_string(kc * m) + "," + netgee::format_double(q);
      ++exch_cells;
      if (rate_of["GEE-exch" + at] >= rate_of["GEE-indep" + at]) ++exch_ge_indep;
      if (q >= 0.1) {
        ++naive_cells;
        if (rate_of["Naive" + at] >= rate_of["GEE-indep" + at]) ++naive_ge_indep;
      }
    }
  report["orderings"]["naive_ge_gee_indep_at_q_ge_0.1"] =
      std::to_string(naive_ge_indep) + "/" + std::to_string(naive_cells);
  report["orderings"]["exch_ge_indep"] =
      std::to_string(exch_ge_indep) + "/" + std::to_string(exch_cells);
  std::ofstream rf(dir / "comparison_report.json");
  rf << report.dump(2) << '\n';

  json config = {{"target", report["target"]}, {"scale", args.scale},
                 {"seed", args.seed},          {"detect", args.detect},
                 {"threads", args.threads}};
  write_manifest(dir, "reproduce", config, args.seed,
                 {csv_name, "comparison_report.json"});
  return 0;
}

int run_reproduce_fig(const ReproduceArgs& args, netgee::Link link) {
  const bool binary = link == netgee::Link::Logit;
  const int reps = args.scale == "full" ? 1000 : 200;
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  const std::string csv_name = binary ? "fig2.csv" : "fig1.csv";
  std::ofstream csv(dir / csv_name);
  csv << "n,p,q,method,bias_sq,se\n";

  json panels = json::array();
  int cell_index = 100;
  for (const auto& [kc, m] : kSizes) {
    const int n = kc * m;
    std::vector<double> bias_indep, bias_naive;
    for (const auto& [p, q] : kPqGrid) {
      auto config = study_config(args, kc, m, p, q, 0.5, link, reps,
                                 netgee::Rng::derive(args.seed, cell_index++));
      const auto sim = netgee::run_replications(config, args.threads);
      const auto rows = netgee::summarize_bias_variance(config, sim);
      double max_estimate_gap = 0.0;
      for (const auto& r : sim) {
        if (r.failed) continue;
        max_estimate_gap = std::max(
            max_estimate_gap,
            (r.fits[0].estimate - r.fits[2].estimate).lpNorm<Eigen::Infinity>());
      }
      json panel;
      panel["n"] = n;
      panel["p"] = p;
      panel["q"] = q;
      panel["max_gee_naive_estimate_gap"] = max_estimate_gap;
      for (const auto& row : rows) {
        csv << n << ',' << p << ',' << q << ','
            << netgee::method_name(row.method) << ','
            << netgee::format_double(row.bias_sq) << ','
            << netgee::format_double(row.se) << '\n';
        json jr;
        jr["method"] = netgee::method_name(row.method);
        jr["bias_sq"] = row.bias_sq;
        jr["se"] = row.se;
        jr["mc_sd"] = row.mc_sd;
        jr["mean_beta"] = row.mean_beta;
        panel["methods"].push_back(jr);
        if (row.method == netgee::Method::GeeIndependence)
          bias_indep.push_back(row.bias_sq);
        if (row.method == netgee::Method::Naive) bias_naive.push_back(row.bias_sq);
      }
      panels.push_back(panel);
      std::cout << csv_name << " (" << n << ") (" << p << "," << q << ") done\n";
    }
  }

  json report;
  report["target"] = binary ? "fig2" : "fig1";
  report["scale"] = args.scale;
  report["replications"] = reps;
  report["panels"] = panels;
  std::ofstream rf(dir / "comparison_report.json");
  rf << report.dump(2) << '\n';
  json config = {{"target", report["target"]}, {"scale", args.scale},
                 {"seed", args.seed},          {"detect", args.detect},
                 {"threads", args.threads}};
  write_manifest(dir, "reproduce", config, args.seed,
                 {csv_name, "comparison_report.json"});
  return 0;
}

int run_reproduce_ratecheck(const ReproduceArgs& args) {
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  netgee::RateCheckConfig config;
  config.gamma = 0.0;
  config.ladder = {{10, 20}, {10, 40}, {20, 40}};
  config.p = 0.6;
  config.q = 0.2;
  config.replications = args.scale == "full" ? 500 : 200;
  config.base_seed = args.seed;
  const auto result = netgee::rate_check(config, args.threads);

  std::ofstream csv(dir / "ratecheck.csv");
  csv << "m,K,sd_scaled_p,sd_scaled_q,ks_p_within,ks_p_between\n";
  for (const auto& s : result.sizes)
    csv << s.m << ',' << s.communities << ','
        << netgee::format_double(s.sd_scaled_p) << ','
        << netgee::format_double(s.sd_scaled_q) << ','
        << netgee::format_double(s.ks_p_within) << ','
        << netgee::format_double(s.ks_p_between) << '\n';

  json report;
  report["target"] = "ratecheck";
  report["p_nonincreasing_20pct_slack"] = result.p_nonincreasing;
  report["q_nonincreasing_20pct_slack"] = result.q_nonincreasing;
  report["max_sd_ratio_q_over_p"] = result.max_ratio;
  std::ofstream rf(dir / "comparison_report.json");
  rf << report.dump(2) << '\n';
  json config_json = {{"target", "ratecheck"}, {"scale", args.scale},
                      {"seed", args.seed}};
  write_manifest(dir, "reproduce", config_json, args.seed,
                 {"ratecheck.csv", "comparison_report.json"});
  std::cout << "ratecheck done (p non-increasing: " << result.p_nonincreasing
            << ", q non-increasing: " << result.q_nonincreasing << ")\n";
  return 0;
}

// ---------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string flights_path, covariates_path;
  std::string mode = "unweighted";
  std::string outcome = "incidence";
  std::string q3_domain = "offdiag";
  std::string out_dir = "netgee_pipeline";
};

int run_pipeline(const PipelineArgs& args) {
  for (const std::string& path : {args.flights_path, args.covariates_path}) {
    if (!fs::exists(path)) {
      std::cerr << "error: missing file: " << path << '\n';
      return 2;
    }
  }
  const netgee::LoadResult loaded =
      netgee::load_and_join(args.flights_path, args.covariates_path);
  const auto mode = args.mode == "weighted" ? netgee::AdjacencyMode::Weighted
                                            : netgee::AdjacencyMode::Unweighted;
  const auto domain = args.q3_domain == "all"
                          ? netgee::QuartileDomain::AllEntries
                          : netgee::QuartileDomain::OffDiagonal;
  const netgee::AdjacencyBuild built =
      netgee::build_adjacency(loaded.flights, mode, loaded.covariates, domain);
  const Eigen::MatrixXd design = netgee::scale_covariates(loaded.covariates);

  Eigen::VectorXd outcome;
  double aid_median_value = std::numeric_limits<double>::quiet_NaN();
  if (args.outcome == "aid") {
    if (!loaded.covariates.has_aid) {
      std::cerr << "error: covariate file has no aid column\n";
      return 2;
    }
    aid_median_value = netgee::aid_median(loaded.covariates.aid);
    outcome = netgee::dichotomize_aid(loaded.covariates.aid);
  } else {
    if (!loaded.covariates.has_incidence) {
      std::cerr << "error: covariate file has no incidence_rate column\n";
      return 2;
    }
    outcome = loaded.covariates.incidence_rate;
  }

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  netgee::write_matrix_csv((dir / "adjacency.csv").string(), built.graph.weights());
  netgee::write_edge_list_csv((dir / "edgelist.csv").string(), built.graph);
  netgee::write_matrix_csv((dir / "design.csv").string(), design);
  netgee::write_vector_csv((dir / "outcome.csv").string(), outcome);

  std::ofstream countries(dir / "countries.csv");
  countries << "index,code\n";
  for (std::size_t i = 0; i < loaded.flights.countries.size(); ++i)
    countries << i << ',' << loaded.flights.countries[i] << '\n';

  json report = netgee::join_report_to_json(loaded.report);
  report["mode"] = args.mode;
  report["outcome"] = args.outcome;
  if (mode == netgee::AdjacencyMode::Unweighted) report["q3"] = built.q3;
  if (args.outcome == "aid") report["aid_median"] = aid_median_value;
  std::ofstream rf(dir / "join_report.json");
  rf << report.dump(2) << '\n';

  json config = {{"flights", args.flights_path},
                 {"covariates", args.covariates_path},
                 {"mode", args.mode},
                 {"outcome", args.outcome},
                 {"q3_domain", args.q3_domain}};
  write_manifest(dir, "pipeline", config, 0,
                 {"adjacency.csv", "edgelist.csv", "design.csv", "outcome.csv",
                  "countries.csv", "join_report.json"});
  std::cout << "pipeline wrote " << loaded.flights.countries.size()
            << " countries to " << args.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network regression with GEE over graph communities"};
  app.set_version_flag("--version", netgee::kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample SBM graphs, designs, outcomes");
  sim_cmd->add_option("--n", sim.n, "node count (= K*m)");
  sim_cmd->add_option("--k", sim.k, "number of communities");
  sim_cmd->add_option("--p", sim.p, "within-community edge probability");
  sim_cmd->add_option("--q", sim.q, "between-community edge probability");
  sim_cmd->add_option("--beta0", sim.beta0, "true network effect");
  sim_cmd->add_option("--link", sim.link, "identity|logit");
  sim_cmd->add_option("--reps", sim.reps, "number of replications");
  sim_cmd->add_option("--seed", sim.seed, "base seed");
  sim_cmd->add_option("--alpha0", sim.alpha0, "true covariate coefficients")->delimiter(',');
  sim_cmd->add_option("--out-dir", sim.out_dir, "output directory");
  add_json_config(sim_cmd);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the GEE network regression");
  fit_cmd->add_option("--graph", fit.graph_path, "adjacency CSV")->required();
  fit_cmd->add_option("--design", fit.design_path, "design CSV (l x n)")->required();
  fit_cmd->add_option("--outcome", fit.outcome_path, "outcome CSV (n x 1)")->required();
  fit_cmd->add_option("--labels", fit.labels_path, "labels CSV for --detect oracle");
  fit_cmd->add_option("--corr", fit.corr, "indep|exch");
  fit_cmd->add_option("--zmode", fit.zmode, "block|full");
  fit_cmd->add_option("--detect", fit.detect, "oracle|labelprop|modularity");
  fit_cmd->add_option("--link", fit.link, "identity|logit");
  fit_cmd->add_option("--resolution", fit.resolution, "modularity resolution");
  fit_cmd->add_option("--seed", fit.seed, "detection seed");
  fit_cmd->add_option("--out", fit.out, "fit JSON path");
  fit_cmd->add_option("--partition-out", fit.partition_out, "detected partition CSV");
  add_json_config(fit_cmd);

  FitArgs naive;
  auto* naive_cmd = app.add_subcommand("fit-naive", "Fit ignoring community structure");
  naive_cmd->add_option("--graph", naive.graph_path, "adjacency CSV")->required();
  naive_cmd->add_option("--design", naive.design_path, "design CSV (l x n)")->required();
  naive_cmd->add_option("--outcome", naive.outcome_path, "outcome CSV (n x 1)")->required();
  naive_cmd->add_option("--link", naive.link, "identity|logit");
  naive_cmd->add_option("--out", naive.out, "fit JSON path");
  add_json_config(naive_cmd);

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run the simulation studies");
  rep_cmd->add_option("target", rep.target, "table1|table2|fig1|fig2|ratecheck")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "fig1", "fig2", "ratecheck"}));
  rep_cmd->add_option("--scale", rep.scale, "desk|full")
      ->check(CLI::IsMember({"desk", "full"}));
  rep_cmd->add_option("--out-dir", rep.out_dir, "output directory");
  rep_cmd->add_option("--seed", rep.seed, "base seed");
  rep_cmd->add_option("--threads", rep.threads, "worker cap (0 = cores)");
  rep_cmd->add_option("--detect", rep.detect, "oracle|labelprop|modularity");
  add_json_config(rep_cmd);

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Build analysis files from flight data");
  pipe_cmd->add_option("--flights", pipe.flights_path, "flight edge-list CSV")->required();
  pipe_cmd->add_option("--covariates", pipe.covariates_path, "covariate CSV")->required();
  pipe_cmd->add_option("--mode", pipe.mode, "weighted|unweighted")
      ->check(CLI::IsMember({"weighted", "unweighted"}));
  pipe_cmd->add_option("--outcome", pipe.outcome, "incidence|aid")
      ->check(CLI::IsMember({"incidence", "aid"}));
  pipe_cmd->add_option("--q3-domain", pipe.q3_domain, "offdiag|all")
      ->check(CLI::IsMember({"offdiag", "all"}));
  pipe_cmd->add_option("--out-dir", pipe.out_dir, "output directory");
  add_json_config(pipe_cmd);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config_args(args);
    std::vector<const char*> ptrs = {argv[0]};
    for (const auto& a : args) ptrs.push_back(a.c_str());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  // NETGEE_THREADS is honored inside resolve_threads when --threads is 0.
  try {
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (fit_cmd->parsed()) return run_fit(fit, /*naive=*/false);
    if (naive_cmd->parsed()) return run_fit(naive, /*naive=*/true);
    if (pipe_cmd->parsed()) return run_pipeline(pipe);
    if (rep_cmd->parsed()) {
      if (rep.target == "table1") return run_reproduce_table(rep, netgee::Link::Identity);
      if (rep.target == "table2") return run_reproduce_table(rep, netgee::Link::Logit);
      if (rep.target == "fig1") return run_reproduce_fig(rep, netgee::Link::Identity);
      if (rep.target == "fig2") return run_reproduce_fig(rep, netgee::Link::Logit);
      return run_reproduce_ratecheck(rep);
    }
  } catch (const netgee::ExperimentError& e) {
    std::cerr << "experiment error: " << e.what() << '\n';
    return 4;
  } catch (const netgee::SingularSystemError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const netgee::ConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
