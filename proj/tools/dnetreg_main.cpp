// Command-line front end: simulation, model fitting, tuning, element-wise
// baselines, benchmark studies, and the network construction / clustering /
// permutation pipeline. All stochastic commands require --seed and every
// run with identical inputs produces byte-identical outputs.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dnetreg/baselines.hpp"
#include "dnetreg/fit.hpp"
#include "dnetreg/io.hpp"
#include "dnetreg/parallel.hpp"
#include "dnetreg/pipeline.hpp"
#include "dnetreg/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dnetreg;

namespace {

Family parse_family(const std::string& s) { return family_from_string(s); }

std::vector<GoiSpec> load_goi_specs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open GOI spec: " + path.string());
  json j;
  in >> j;
  std::vector<GoiSpec> out;
  for (const auto& item : j) {
    GoiSpec spec;
    spec.name = item.value("name", "goi");
    const std::string kind = item.value("kind", "within");
    if (kind == "within") {
      spec.kind = GoiSpec::Kind::kWithin;
      spec.nodes_a = item.at("nodes").get<std::vector<int>>();
    } else if (kind == "between") {
      spec.kind = GoiSpec::Kind::kBetween;
      spec.nodes_a = item.at("nodes_a").get<std::vector<int>>();
      spec.nodes_b = item.at("nodes_b").get<std::vector<int>>();
    } else if (kind == "pairs") {
      spec.kind = GoiSpec::Kind::kPairs;
      for (const auto& pr : item.at("pairs"))
        spec.pairs.emplace_back(pr.at(0).get<int>(), pr.at(1).get<int>());
    } else {
      throw std::runtime_error("unknown GOI kind: " + kind);
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<int> load_labels_csv(const fs::path& path, int N) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels: " + path.string());
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    labels.push_back(std::stoi(line));
  }
  if (static_cast<int>(labels.size()) != N)
    throw std::runtime_error("labels: expected " + std::to_string(N) +
                             " rows, got " + std::to_string(labels.size()));
  return labels;
}

struct FitFlags {
  int R = 2;
  double lambda = 0.05;
  int K = 8;
  int degree = 3;
  int max_outer = 100;
  double outer_tol = 1e-6;
  int fista_max = 500;
  double fista_tol = 1e-8;
  int newton_max = 20;
  double step = 0.0;
  uint64_t seed = 0;

  FitOptions to_options() const {
    FitOptions o;
    o.R = R;
    o.lambda = lambda;
    o.K = K;
    o.spline_degree = degree;
    o.max_outer_iters = max_outer;
    o.outer_tol = outer_tol;
    o.fista_max_iters = fista_max;
    o.fista_tol = fista_tol;
    o.newton_max_iters = newton_max;
    o.step = step;
    o.seed = seed;
    return o;
  }
};

void add_fit_flags(CLI::App* cmd, FitFlags& f, bool want_lambda = true) {
  cmd->add_option("--rank,-R", f.R, "CP rank of the baseline tensor");
  if (want_lambda)
    cmd->add_option("--lambda", f.lambda, "group-lasso penalty weight");
  cmd->add_option("--K", f.K, "spline basis dimension");
  cmd->add_option("--degree", f.degree, "spline degree");
  cmd->add_option("--max-outer-iters", f.max_outer, "outer iteration cap");
  cmd->add_option("--outer-tol", f.outer_tol, "outer relative tolerance");
  cmd->add_option("--fista-max-iters", f.fista_max, "FISTA iteration cap");
  cmd->add_option("--fista-tol", f.fista_tol, "FISTA relative tolerance");
  cmd->add_option("--newton-max-iters", f.newton_max,
                  "quasi-Newton iteration cap per factor");
  cmd->add_option("--step", f.step, "FISTA step size (0 = analytic bound)");
  cmd->add_option("--seed", f.seed, "RNG seed")->required();
}

int run(int argc, char** argv) {
  CLI::App app{"dnetreg: dynamic network response regression"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (0 = available parallelism)");
  app.set_version_flag("--version", std::string("dnetreg ") + DNETREG_VERSION);

  // ---- simulate ----------------------------------------------------------
  auto* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic population");
  SimConfig sim;
  std::string sim_family = "bernoulli";
  std::string sim_out;
  bool sim_write_truth = true;
  simulate_cmd->add_option("--n", sim.n, "node count");
  simulate_cmd->add_option("--N", sim.N, "subject count");
  simulate_cmd->add_option("--T", sim.T, "time points");
  simulate_cmd->add_option("--K", sim.K_gen, "generator basis dimension");
  simulate_cmd->add_option("--degree", sim.spline_degree, "spline degree");
  simulate_cmd->add_option("--R", sim.R, "baseline rank");
  simulate_cmd->add_option("--p", sim.p, "covariate count");
  simulate_cmd->add_option("--s0", sim.s0, "slope sparsity proportion");
  simulate_cmd->add_option("--family", sim_family, "bernoulli|gaussian|poisson");
  simulate_cmd->add_option("--seed", sim.seed, "RNG seed")->required();
  simulate_cmd->add_option("--out", sim_out, "output directory")->required();
  simulate_cmd->add_flag("--no-truth,!--truth", sim_write_truth,
                         "also write ground-truth tensors");

  // ---- fit ---------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "fit the model to a dataset");
  std::string fit_data, fit_out, fit_family_check;
  FitFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "dataset directory")->required();
  fit_cmd->add_option("--out", fit_out, "output directory")->required();
  fit_cmd->add_option("--family", fit_family_check,
                      "expected family (validated against the manifest)");
  add_fit_flags(fit_cmd, fit_flags);

  // ---- tune --------------------------------------------------------------
  auto* tune_cmd = app.add_subcommand("tune", "grid-search (R, lambda) by eBIC");
  std::string tune_data, tune_out;
  std::vector<int> tune_ranks{1, 2, 3};
  std::vector<double> tune_lambdas{0.1, 0.05, 0.02};
  FitFlags tune_flags;
  tune_cmd->add_option("--data", tune_data, "dataset directory")->required();
  tune_cmd->add_option("--out", tune_out, "output directory")->required();
  tune_cmd->add_option("--ranks", tune_ranks, "rank grid")->delimiter(',');
  tune_cmd->add_option("--lambdas", tune_lambdas, "lambda grid")->delimiter(',');
  add_fit_flags(tune_cmd, tune_flags, /*want_lambda=*/false);

  // ---- edgereg / dedgereg --------------------------------------------------
  auto* edgereg_cmd =
      app.add_subcommand("edgereg", "per-edge per-time GLM baseline");
  std::string er_data, er_out, er_correction = "bonferroni";
  double er_alpha = 0.05;
  edgereg_cmd->add_option("--data", er_data, "dataset directory")->required();
  edgereg_cmd->add_option("--out", er_out, "output directory")->required();
  edgereg_cmd->add_option("--alpha", er_alpha, "selection level");
  edgereg_cmd->add_option("--correction", er_correction, "bonferroni|bh");

  auto* dedgereg_cmd =
      app.add_subcommand("dedgereg", "per-edge spline GLM baseline");
  std::string de_data, de_out;
  int de_K = 8, de_degree = 3;
  dedgereg_cmd->add_option("--data", de_data, "dataset directory")->required();
  dedgereg_cmd->add_option("--out", de_out, "output directory")->required();
  dedgereg_cmd->add_option("--K", de_K, "spline basis dimension");
  dedgereg_cmd->add_option("--degree", de_degree, "spline degree");

  // ---- bench ---------------------------------------------------------------
  auto* bench_cmd =
      app.add_subcommand("bench", "replicated simulation study (CSV + JSON)");
  std::string bench_config, bench_out;
  int bench_reps = 10;
  std::vector<std::string> bench_methods{"dnetreg", "dedgereg", "edgereg"};
  uint64_t bench_seed = 0;
  bool bench_seed_set = false;
  bench_cmd->add_option("--config", bench_config, "study config JSON")
      ->required();
  bench_cmd->add_option("--out", bench_out, "output directory")->required();
  bench_cmd->add_option("--reps", bench_reps, "replicate count");
  bench_cmd->add_option("--methods", bench_methods, "methods to run")
      ->delimiter(',');
  auto* bench_seed_opt =
      bench_cmd->add_option("--seed", bench_seed, "override config seed");
  static_cast<void>(bench_seed_set);

  // ---- netconstruct ----------------------------------------------------------
  auto* net_cmd = app.add_subcommand(
      "netconstruct", "sliding-window correlation networks from signals");
  std::string net_signal, net_signals_dir, net_covariates, net_out;
  int net_window = 30, net_stride = 5;
  double net_tau = 0.5;
  net_cmd->add_option("--signal", net_signal, "one signal CSV (n x S)");
  net_cmd->add_option("--signals-dir", net_signals_dir,
                      "directory of per-subject signal CSVs");
  net_cmd->add_option("--covariates", net_covariates,
                      "covariate CSV for --signals-dir mode");
  net_cmd->add_option("--window", net_window, "window length in scans");
  net_cmd->add_option("--stride", net_stride, "stride in scans");
  net_cmd->add_option("--tau", net_tau, "correlation threshold");
  net_cmd->add_option("--out", net_out, "output directory")->required();

  // ---- cluster -------------------------------------------------------------
  auto* cluster_cmd =
      app.add_subcommand("cluster", "k-means on the SVD embedding of a matrix");
  std::string cl_matrix, cl_out;
  int cl_k = 5, cl_dim = 2;
  uint64_t cl_seed = 0;
  cluster_cmd->add_option("--matrix", cl_matrix, "square matrix CSV")
      ->required();
  cluster_cmd->add_option("--k", cl_k, "cluster count");
  cluster_cmd->add_option("--embed-dim", cl_dim, "embedding dimension");
  cluster_cmd->add_option("--seed", cl_seed, "RNG seed")->required();
  cluster_cmd->add_option("--out", cl_out, "output directory")->required();

  // ---- permute -------------------------------------------------------------
  auto* permute_cmd = app.add_subcommand(
      "permute", "permutation test of group differences in the slopes");
  std::string pm_data, pm_labels, pm_out, pm_goi;
  int pm_nperm = 100;
  double pm_quantile = 0.95;
  FitFlags pm_flags;
  permute_cmd->add_option("--data", pm_data, "dataset directory")->required();
  permute_cmd->add_option("--labels", pm_labels, "0/1 labels CSV (one per row)")
      ->required();
  permute_cmd->add_option("--n-perm", pm_nperm, "permutation count");
  permute_cmd->add_option("--quantile", pm_quantile, "flag quantile");
  permute_cmd->add_option("--goi", pm_goi, "GOI spec JSON");
  permute_cmd->add_option("--out", pm_out, "output directory")->required();
  add_fit_flags(permute_cmd, pm_flags);

  CLI11_PARSE(app, argc, argv);
  set_num_threads(threads);

  if (simulate_cmd->parsed()) {
    sim.family = parse_family(sim_family);
    auto [data, truth] = generate(sim);
    io::write_dataset(data, sim_out);
    if (sim_write_truth) {
      io::write_tensor3(fs::path(sim_out) / "b0_true.dnt3", truth.B0);
      if (!truth.slopes.empty())
        io::write_tensor3(fs::path(sim_out) / "b1_true.dnt3", truth.slopes[0]);
      io::write_int_matrix_csv(truth.H_true, fs::path(sim_out) / "h_true.csv");
    }
    std::cerr << "[dnetreg] wrote dataset (N=" << data.N << ", n=" << data.n
              << ", T=" << data.T << ") to " << sim_out << "\n";
    return 0;
  }

  if (fit_cmd->parsed()) {
    const DynamicNetworkDataset data = io::read_dataset(fit_data);
    if (!fit_family_check.empty() &&
        parse_family(fit_family_check) != data.family)
      throw std::runtime_error("--family disagrees with the dataset manifest");
    const FitOptions opts = fit_flags.to_options();
    const FitResult res = fit(data, opts);
    io::write_fit_result(res, opts, data.family, fit_out);
    std::cerr << "[dnetreg] fit " << (res.converged ? "converged" : "stopped")
              << " after " << res.outer_iters << " outer iterations; "
              << res.support.size() << " active fibers; wrote " << fit_out
              << "\n";
    return 0;
  }

  if (tune_cmd->parsed()) {
    const DynamicNetworkDataset data = io::read_dataset(tune_data);
    const TuneResult tr =
        tune(data, tune_ranks, tune_lambdas, tune_flags.to_options());
    fs::create_directories(tune_out);
    io::write_tune_table_csv(tr, fs::path(tune_out) / "tune_table.csv");
    FitOptions best = tune_flags.to_options();
    best.R = tr.best_R;
    best.lambda = tr.best_lambda;
    io::write_fit_result(tr.best_fit, best, data.family,
                         fs::path(tune_out) / "best");
    std::cerr << "[dnetreg] selected R=" << tr.best_R
              << " lambda=" << tr.best_lambda << "\n";
    return 0;
  }

  if (edgereg_cmd->parsed()) {
    const DynamicNetworkDataset data = io::read_dataset(er_data);
    const EdgeRegResult res = edgereg_fit(data);
    fs::create_directories(er_out);
    int non_converged = 0;
    for (uint8_t c : res.converged) non_converged += c == 0;
    json summary;
    summary["n"] = res.n;
    summary["T"] = res.T;
    summary["p"] = res.p;
    summary["non_converged_cells"] = non_converged;
    if (data.p > 0) {
      const Correction corr = er_correction == "bh"
                                  ? Correction::kBenjaminiHochberg
                                  : Correction::kBonferroni;
      const Eigen::MatrixXi H =
          select_edges(res.slope_pvalues(0), res.n, res.T, er_alpha, corr);
      io::write_int_matrix_csv(H, fs::path(er_out) / "selected_edges.csv");
      summary["selected_edges"] = H.sum();
      summary["alpha"] = er_alpha;
      summary["correction"] = er_correction;
    }
    std::ofstream(fs::path(er_out) / "edgereg.json") << summary.dump(2) << "\n";
    std::cerr << "[dnetreg] edgereg done (" << non_converged
              << " non-converged cells)\n";
    return 0;
  }

  if (dedgereg_cmd->parsed()) {
    const DynamicNetworkDataset data = io::read_dataset(de_data);
    const SplineBasis basis(de_K, de_degree);
    const DEdgeRegResult res = dedgereg_fit(data, basis);
    fs::create_directories(de_out);
    for (size_t c = 0; c < res.coefficients.size(); ++c)
      io::write_tensor3(fs::path(de_out) / ("b" + std::to_string(c) + "_hat.dnt3"),
                        res.coefficients[c]);
    json summary;
    summary["K"] = de_K;
    summary["degree"] = de_degree;
    summary["failed_edges"] = res.n_failed;
    std::ofstream(fs::path(de_out) / "dedgereg.json") << summary.dump(2) << "\n";
    std::cerr << "[dnetreg] dedgereg done (" << res.n_failed
              << " failed edges)\n";
    return 0;
  }

  if (bench_cmd->parsed()) {
    std::ifstream cfg_in(bench_config);
    if (!cfg_in)
      throw std::runtime_error("cannot open config: " + bench_config);
    json cfg;
    cfg_in >> cfg;
    SimConfig sc;
    sc.n = cfg.value("n", sc.n);
    sc.N = cfg.value("N", sc.N);
    sc.T = cfg.value("T", sc.T);
    sc.K_gen = cfg.value("K", sc.K_gen);
    sc.R = cfg.value("R", sc.R);
    sc.p = cfg.value("p", sc.p);
    sc.s0 = cfg.value("s0", sc.s0);
    sc.spline_degree = cfg.value("degree", sc.spline_degree);
    sc.family = parse_family(cfg.value("family", std::string("bernoulli")));
    sc.seed = cfg.value("seed", uint64_t{0});
    if (bench_seed_opt->count() > 0) sc.seed = bench_seed;

    FitOptions fo;
    fo.R = sc.R;
    fo.K = sc.K_gen;
    fo.spline_degree = sc.spline_degree;
    if (cfg.contains("fit")) {
      const json& f = cfg["fit"];
      fo.R = f.value("R", fo.R);
      fo.lambda = f.value("lambda", fo.lambda);
      fo.K = f.value("K", fo.K);
      fo.spline_degree = f.value("degree", fo.spline_degree);
      fo.max_outer_iters = f.value("max_outer_iters", fo.max_outer_iters);
      fo.outer_tol = f.value("outer_tol", fo.outer_tol);
      fo.fista_max_iters = f.value("fista_max_iters", fo.fista_max_iters);
      fo.fista_tol = f.value("fista_tol", fo.fista_tol);
      fo.newton_max_iters = f.value("newton_max_iters", fo.newton_max_iters);
      fo.step = f.value("step", fo.step);
    }
    const int reps = bench_cmd->count("--reps") ? bench_reps
                                                : cfg.value("replicates", 10);
    const StudyResult study = run_study(sc, reps, bench_methods, fo);
    fs::create_directories(bench_out);
    io::write_study_csv(study, fs::path(bench_out) / "study.csv");
    io::write_study_json(study, fs::path(bench_out) / "study.json");
    std::cerr << "[dnetreg] study written to " << bench_out << "\n";
    return 0;
  }

  if (net_cmd->parsed()) {
    fs::create_directories(net_out);
    if (!net_signal.empty()) {
      const Eigen::MatrixXd signal = io::read_signal_csv(net_signal);
      const SlidingWindowResult sw =
          sliding_windows(signal, net_window, net_stride);
      const int n = static_cast<int>(signal.rows());
      const int T = static_cast<int>(sw.correlations.size());
      std::string buf(static_cast<size_t>(T) * n * n, '\0');
      double density = 0.0;
      for (int h = 0; h < T; ++h) {
        const Eigen::MatrixXi A = binarize(sw.correlations[h], net_tau);
        for (int j = 0; j < n; ++j)
          for (int jp = 0; jp < n; ++jp)
            buf[(static_cast<size_t>(h) * n + j) * n + jp] =
                static_cast<char>(A(j, jp));
        density += A.sum() / static_cast<double>(n * (n - 1));
      }
      std::ofstream(fs::path(net_out) / "adjacency.bin", std::ios::binary)
          << buf;
      json meta;
      meta["n"] = n;
      meta["T"] = T;
      meta["window"] = net_window;
      meta["stride"] = net_stride;
      meta["tau"] = net_tau;
      meta["mean_density"] = density / T;
      meta["flagged_regions"] = sw.n_flagged;
      std::ofstream(fs::path(net_out) / "networks.json") << meta.dump(2) << "\n";
      std::cerr << "[dnetreg] " << T << " networks, mean density "
                << density / T << "\n";
      return 0;
    }
    if (net_signals_dir.empty())
      throw std::runtime_error("netconstruct needs --signal or --signals-dir");
    // dataset assembly mode: every *.csv in the directory is one subject
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(net_signals_dir))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::runtime_error("no .csv signals in " + net_signals_dir);
    DynamicNetworkDataset data;
    data.family = Family::kBernoulli;
    for (size_t i = 0; i < files.size(); ++i) {
      const Eigen::MatrixXd signal = io::read_signal_csv(files[i]);
      const SlidingWindowResult sw =
          sliding_windows(signal, net_window, net_stride);
      if (i == 0) {
        data.n = static_cast<int>(signal.rows());
        data.T = static_cast<int>(sw.correlations.size());
        data.time_grid.resize(data.T);
        for (int h = 0; h < data.T; ++h)
          data.time_grid[h] =
              data.T > 1 ? static_cast<double>(h) / (data.T - 1) : 0.0;
      }
      std::vector<double> adj(static_cast<size_t>(data.T) * data.n * data.n);
      for (int h = 0; h < data.T; ++h) {
        const Eigen::MatrixXi A = binarize(sw.correlations[h], net_tau);
        for (int j = 0; j < data.n; ++j)
          for (int jp = 0; jp < data.n; ++jp)
            adj[(static_cast<size_t>(h) * data.n + j) * data.n + jp] = A(j, jp);
      }
      data.adjacency.push_back(std::move(adj));
    }
    data.N = static_cast<int>(files.size());
    if (!net_covariates.empty()) {
      const Eigen::MatrixXd X = io::read_signal_csv(net_covariates);
      if (X.rows() != data.N)
        throw std::runtime_error("covariate rows != subject count");
      data.p = static_cast<int>(X.cols());
      data.X = X;
      standardize_columns(data.X);
    } else {
      data.p = 0;
      data.X.resize(data.N, 0);
    }
    io::write_dataset(data, net_out);
    std::cerr << "[dnetreg] dataset with N=" << data.N << ", T=" << data.T
              << " written to " << net_out << "\n";
    return 0;
  }

  if (cluster_cmd->parsed()) {
    const Eigen::MatrixXd M = io::read_signal_csv(cl_matrix);
    const std::vector<int> labels = cluster_regions(M, cl_k, cl_dim, cl_seed);
    fs::create_directories(cl_out);
    std::ofstream out(fs::path(cl_out) / "labels.csv");
    out << "region,cluster\n";
    for (size_t j = 0; j < labels.size(); ++j)
      out << j << "," << labels[j] << "\n";
    std::cerr << "[dnetreg] wrote cluster labels\n";
    return 0;
  }

  if (permute_cmd->parsed()) {
    const DynamicNetworkDataset data = io::read_dataset(pm_data);
    const std::vector<int> labels = load_labels_csv(pm_labels, data.N);
    std::vector<GoiSpec> gois;
    if (!pm_goi.empty()) gois = load_goi_specs(pm_goi);
    const PermutationReport report = permutation_test(
        data, labels, pm_nperm, pm_flags.to_options(), pm_quantile, gois);
    io::write_permutation_report(report, pm_out);
    std::cerr << "[dnetreg] " << report.S_flag.sum()
              << " flagged cells; report in " << pm_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error&) {
    return 1;  // CLI11_PARSE already printed usage
  } catch (const std::exception& e) {
    std::cerr << "[dnetreg] error: " << e.what() << "\n";
    return 2;
  }
}
