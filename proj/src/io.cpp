#include "dnetreg/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dnetreg::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_u32(std::string& buf, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}

uint32_t take_u32(const std::string& buf, size_t off) {
  uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  return v;
}

void append_f64(std::string& buf, const double* v, size_t count) {
  buf.append(reinterpret_cast<const char*>(v), count * sizeof(double));
}

}  // namespace

void write_tensor3(const fs::path& path, const Tensor3& t) {
  std::string buf;
  buf.reserve(16 + t.v.size() * 8);
  buf.append("DNT3", 4);
  append_u32(buf, t.n1);
  append_u32(buf, t.n2);
  append_u32(buf, t.K);
  append_f64(buf, t.v.data(), t.v.size());
  write_file(path, buf);
  ordered_json side;
  side["magic"] = "DNT3";
  side["dims"] = {t.n1, t.n2, t.K};
  side["symmetric"] = t.symmetric;
  write_file(path.string() + ".json", side.dump(2) + "\n");
}

Tensor3 read_tensor3(const fs::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 16 || buf.compare(0, 4, "DNT3") != 0)
    throw std::runtime_error("not a DNT3 file: " + path.string());
  Tensor3 t(take_u32(buf, 4), take_u32(buf, 8), take_u32(buf, 12));
  const size_t want = 16 + t.v.size() * 8;
  if (buf.size() != want)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(want) + " bytes, got " +
                             std::to_string(buf.size()));
  std::memcpy(t.v.data(), buf.data() + 16, t.v.size() * 8);
  const fs::path side = path.string() + ".json";
  if (fs::exists(side)) {
    const auto j = ordered_json::parse(read_file(side));
    t.symmetric = j.value("symmetric", false);
  }
  return t;
}

void write_tensor4(const fs::path& path, const Tensor4& t) {
  std::string buf;
  buf.reserve(20 + t.v.size() * 8);
  buf.append("DNT4", 4);
  append_u32(buf, t.n);
  append_u32(buf, t.n);
  append_u32(buf, t.K);
  append_u32(buf, t.p);
  append_f64(buf, t.v.data(), t.v.size());
  write_file(path, buf);
  ordered_json side;
  side["magic"] = "DNT4";
  side["dims"] = {t.n, t.n, t.K, t.p};
  side["symmetric_slices"] = true;
  write_file(path.string() + ".json", side.dump(2) + "\n");
}

Tensor4 read_tensor4(const fs::path& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 20 || buf.compare(0, 4, "DNT4") != 0)
    throw std::runtime_error("not a DNT4 file: " + path.string());
  const uint32_t n1 = take_u32(buf, 4), n2 = take_u32(buf, 8);
  if (n1 != n2) throw std::runtime_error("DNT4: non-square node modes");
  Tensor4 t(n1, take_u32(buf, 12), take_u32(buf, 16));
  const size_t want = 20 + t.v.size() * 8;
  if (buf.size() != want)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(want) + " bytes, got " +
                             std::to_string(buf.size()));
  std::memcpy(t.v.data(), buf.data() + 20, t.v.size() * 8);
  return t;
}

void write_dataset(const DynamicNetworkDataset& data, const fs::path& dir,
                   const std::string& storage_in) {
  data.validate();
  fs::create_directories(dir);
  std::string storage = storage_in;
  if (storage == "auto")
    storage = data.family == Family::kBernoulli ? "u8" : "f64";
  if (storage != "u8" && storage != "f64")
    throw std::invalid_argument("write_dataset: storage must be u8 or f64");

  ordered_json manifest;
  manifest["N"] = data.N;
  manifest["n"] = data.n;
  manifest["T"] = data.T;
  manifest["p"] = data.p;
  manifest["family"] = family_to_string(data.family);
  manifest["storage"] = storage;
  ordered_json grid = ordered_json::array();
  for (double t : data.time_grid) grid.push_back(t);
  manifest["time_grid"] = grid;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::ostringstream cov;
  for (int l = 0; l < data.p; ++l) cov << (l ? "," : "") << "x" << (l + 1);
  cov << "\n";
  for (int i = 0; i < data.N; ++i) {
    for (int l = 0; l < data.p; ++l)
      cov << (l ? "," : "") << fmt_double(data.X(i, l));
    cov << "\n";
  }
  write_file(dir / "covariates.csv", cov.str());

  for (int i = 0; i < data.N; ++i) {
    std::string buf;
    const auto& adj = data.adjacency[i];
    if (storage == "u8") {
      buf.resize(adj.size());
      for (size_t q = 0; q < adj.size(); ++q) {
        if (adj[q] != 0.0 && adj[q] != 1.0)
          throw std::invalid_argument(
              "write_dataset: non-binary value under u8 storage");
        buf[q] = static_cast<char>(adj[q] != 0.0);
      }
    } else {
      buf.resize(adj.size() * 8);
      std::memcpy(buf.data(), adj.data(), buf.size());
    }
    write_file(dir / ("subject_" + std::to_string(i) + ".bin"), buf);
  }
}

DynamicNetworkDataset read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath))
    throw std::runtime_error("read_dataset: missing " + mpath.string());
  const auto manifest = ordered_json::parse(read_file(mpath));

  DynamicNetworkDataset data;
  data.N = manifest.at("N").get<int>();
  data.n = manifest.at("n").get<int>();
  data.T = manifest.at("T").get<int>();
  data.p = manifest.at("p").get<int>();
  data.family = family_from_string(manifest.at("family").get<std::string>());
  const std::string storage = manifest.at("storage").get<std::string>();
  data.time_grid = manifest.at("time_grid").get<std::vector<double>>();

  // covariates.csv: header then N rows of p comma-separated values
  data.X.resize(data.N, data.p);
  {
    std::ifstream in(dir / "covariates.csv");
    if (!in)
      throw std::runtime_error("read_dataset: missing covariates.csv in " +
                               dir.string());
    std::string line;
    std::getline(in, line);  // header
    for (int i = 0; i < data.N; ++i) {
      if (!std::getline(in, line))
        throw std::runtime_error("read_dataset: covariates.csv ended at row " +
                                 std::to_string(i) + ", expected " +
                                 std::to_string(data.N));
      std::stringstream ss(line);
      std::string cell;
      for (int l = 0; l < data.p; ++l) {
        if (!std::getline(ss, cell, ','))
          throw std::runtime_error("read_dataset: covariates.csv row " +
                                   std::to_string(i) + " has fewer than " +
                                   std::to_string(data.p) + " columns");
        data.X(i, l) = std::stod(cell);
      }
    }
  }
  if (data.p > 0) standardize_columns(data.X);

  const size_t cells = static_cast<size_t>(data.T) * data.n * data.n;
  const size_t want = storage == "u8" ? cells : cells * 8;
  data.adjacency.assign(data.N, std::vector<double>(cells));
  for (int i = 0; i < data.N; ++i) {
    const fs::path spath = dir / ("subject_" + std::to_string(i) + ".bin");
    const std::string buf = read_file(spath);
    if (buf.size() != want)
      throw std::runtime_error(spath.string() + ": expected " +
                               std::to_string(want) + " bytes, got " +
                               std::to_string(buf.size()));
    if (storage == "u8") {
      for (size_t q = 0; q < cells; ++q)
        data.adjacency[i][q] = static_cast<unsigned char>(buf[q]) ? 1.0 : 0.0;
    } else {
      std::memcpy(data.adjacency[i].data(), buf.data(), buf.size());
    }
  }
  data.validate();
  return data;
}

namespace {

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  auto put = [&](const char* key, double v) {
    if (std::isfinite(v)) j[key] = v;
  };
  put("mu_err", m.mu_err);
  put("b0_err", m.b0_err);
  put("b1_err", m.b1_err);
  put("tpr", m.tpr);
  put("fpr", m.fpr);
  put("fpr_neg", m.fpr_neg);
  return j;
}

}  // namespace

void write_fit_result(const FitResult& res, const FitOptions& opts,
                      Family family, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json j;
  j["family"] = family_to_string(family);
  j["R"] = opts.R;
  j["lambda"] = opts.lambda;
  j["K"] = opts.K;
  j["spline_degree"] = opts.spline_degree;
  j["seed"] = opts.seed;
  j["converged"] = res.converged;
  j["outer_iters"] = res.outer_iters;
  j["final_loss"] = res.final_loss;
  j["ebic"] = res.ebic;
  j["wall_time_sec"] = res.wall_time_sec;
  ordered_json trace = ordered_json::array();
  for (double v : res.objective_trace) trace.push_back(v);
  j["objective_trace"] = trace;
  ordered_json support = ordered_json::array();
  for (const auto& s : res.support) support.push_back({s[0], s[1], s[2]});
  j["support"] = support;
  ordered_json w = ordered_json::array();
  for (int r = 0; r < res.params.baseline.rank(); ++r)
    w.push_back(res.params.baseline.w[r]);
  j["weights"] = w;
  write_file(dir / "fit.json", j.dump(2) + "\n");

  write_tensor3(dir / "b0_hat.dnt3", cp_reconstruct(res.params.baseline));
  if (res.params.slopes.p > 0)
    write_tensor4(dir / "gamma_hat.dnt4", res.params.slopes);

  ordered_json fj;
  fj["w"] = w;
  ordered_json u1 = ordered_json::array(), u3 = ordered_json::array();
  for (int i = 0; i < res.params.baseline.U1.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int r = 0; r < res.params.baseline.rank(); ++r)
      row.push_back(res.params.baseline.U1(i, r));
    u1.push_back(row);
  }
  for (int k = 0; k < res.params.baseline.U3.rows(); ++k) {
    ordered_json row = ordered_json::array();
    for (int r = 0; r < res.params.baseline.rank(); ++r)
      row.push_back(res.params.baseline.U3(k, r));
    u3.push_back(row);
  }
  fj["U1"] = u1;
  fj["U3"] = u3;
  write_file(dir / "factors.json", fj.dump(2) + "\n");
}

void write_study_csv(const StudyResult& study, const fs::path& path) {
  std::ostringstream out;
  out << "method,n,N,T,R,s0,K,family,replicates,used,failures";
  const std::vector<std::string> keys = {"mu_err", "b0_err", "b1_err",
                                         "tpr",    "fpr",    "fpr_neg"};
  for (const auto& k : keys) out << "," << k << "_mean," << k << "_sd";
  out << "\n";
  for (const auto& row : study.rows) {
    out << row.method << "," << study.config.n << "," << study.config.N << ","
        << study.config.T << "," << study.config.R << ","
        << fmt_double(study.config.s0) << "," << study.config.K_gen << ","
        << family_to_string(study.config.family) << "," << study.replicates
        << "," << row.replicates_used << "," << row.failures;
    for (const auto& k : keys) {
      out << ",";
      if (auto it = row.mean.find(k); it != row.mean.end())
        out << fmt_double(it->second);
      else
        out << "NA";
      out << ",";
      if (auto it = row.sd.find(k); it != row.sd.end())
        out << fmt_double(it->second);
      else
        out << "NA";
    }
    out << "\n";
  }
  write_file(path, out.str());
}

void write_study_json(const StudyResult& study, const fs::path& path) {
  ordered_json j;
  j["config"] = {{"n", study.config.n},
                 {"N", study.config.N},
                 {"T", study.config.T},
                 {"K_gen", study.config.K_gen},
                 {"R", study.config.R},
                 {"p", study.config.p},
                 {"s0", study.config.s0},
                 {"family", family_to_string(study.config.family)},
                 {"seed", study.config.seed}};
  j["replicates"] = study.replicates;
  ordered_json rows = ordered_json::array();
  for (const auto& row : study.rows) {
    ordered_json r;
    r["method"] = row.method;
    r["replicates_used"] = row.replicates_used;
    r["failures"] = row.failures;
    ordered_json mean, sd;
    for (const auto& [k, v] : row.mean) mean[k] = v;
    for (const auto& [k, v] : row.sd) sd[k] = v;
    r["mean"] = mean;
    r["sd"] = sd;
    rows.push_back(r);
  }
  j["rows"] = rows;
  ordered_json raw = ordered_json::array();
  for (const auto& rep : study.raw) {
    ordered_json r;
    for (const auto& [method, metrics] : rep) r[method] = metrics_json(metrics);
    raw.push_back(r);
  }
  j["raw"] = raw;
  write_file(path, j.dump(2) + "\n");
}

void write_tune_table_csv(const TuneResult& tr, const fs::path& path) {
  std::ostringstream out;
  out << "R,lambda,ok,ebic,support_size,error\n";
  for (const auto& cell : tr.table) {
    out << cell.R << "," << fmt_double(cell.lambda) << "," << (cell.ok ? 1 : 0)
        << "," << (cell.ok ? fmt_double(cell.ebic) : std::string("NA")) << ","
        << cell.support_size << "," << cell.error << "\n";
  }
  write_file(path, out.str());
}

namespace {

void write_heatmap_csv(const Eigen::MatrixXd& M, const fs::path& path) {
  std::ostringstream out;
  out << "row,col,value\n";
  for (long j = 0; j < M.rows(); ++j)
    for (long jp = 0; jp < M.cols(); ++jp)
      out << j << "," << jp << "," << fmt_double(M(j, jp)) << "\n";
  write_file(path, out.str());
}

}  // namespace

void write_permutation_report(const PermutationReport& report,
                              const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json j;
  j["n_permutations_kept"] = static_cast<int>(report.D_per.size());
  j["n_dropped"] = report.n_dropped;
  j["flagged_cells"] = report.S_flag.sum();
  ordered_json goi = ordered_json::array();
  for (size_t g = 0; g < report.goi_obs.size(); ++g) {
    ordered_json item;
    item["name"] = report.goi_obs[g].name;
    item["observed"] = report.goi_obs[g].value;
    item["observed_empty"] = report.goi_obs[g].empty;
    ordered_json per = ordered_json::array();
    for (const auto& row : report.goi_per) per.push_back(row[g].value);
    item["permuted"] = per;
    goi.push_back(item);
  }
  j["goi"] = goi;
  write_file(dir / "report.json", j.dump(2) + "\n");

  write_heatmap_csv(report.D_obs, dir / "d_obs.csv");
  write_heatmap_csv(report.D_per_mean, dir / "d_per_mean.csv");
  write_heatmap_csv(report.S_flag.cast<double>(), dir / "s_flag.csv");
}

Eigen::MatrixXd read_signal_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::runtime_error("read_signal_csv: ragged rows in " +
                               path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_signal_csv: empty file");
  Eigen::MatrixXd M(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[0].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_matrix_csv(const Eigen::MatrixXd& M, const fs::path& path) {
  std::ostringstream out;
  for (long i = 0; i < M.rows(); ++i) {
    for (long j = 0; j < M.cols(); ++j)
      out << (j ? "," : "") << fmt_double(M(i, j));
    out << "\n";
  }
  write_file(path, out.str());
}

void write_int_matrix_csv(const Eigen::MatrixXi& M, const fs::path& path) {
  std::ostringstream out;
  for (long i = 0; i < M.rows(); ++i) {
    for (long j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << "\n";
  }
  write_file(path, out.str());
}

}  // namespace dnetreg::io
