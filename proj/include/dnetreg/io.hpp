#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dnetreg/dataset.hpp"
#include "dnetreg/fit.hpp"
#include "dnetreg/pipeline.hpp"
#include "dnetreg/simulation.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg::io {

/// Fixed 17-significant-digit float formatting; every CSV/JSON number the
/// tool emits goes through this so outputs are byte-reproducible.
std::string fmt_double(double v);

// ---- raw little-endian tensor format -------------------------------------
// Header: 4-byte magic "DNT3"/"DNT4", then u32 dims, then f64 values
// row-major (the last declared mode fastest). A JSON sidecar
// (<path>.json) records dims and the symmetry flag.

void write_tensor3(const std::filesystem::path& path, const Tensor3& t);
Tensor3 read_tensor3(const std::filesystem::path& path);
void write_tensor4(const std::filesystem::path& path, const Tensor4& t);
Tensor4 read_tensor4(const std::filesystem::path& path);

// ---- dataset directory ----------------------------------------------------
// manifest.json: {N, n, T, p, family, time_grid, storage in {u8, f64}};
// covariates.csv: header x1..xp, N rows;
// subject_<i>.bin: T row-major n x n matrices in the declared type.

void write_dataset(const DynamicNetworkDataset& data,
                   const std::filesystem::path& dir,
                   const std::string& storage = "auto");
DynamicNetworkDataset read_dataset(const std::filesystem::path& dir);

// ---- result emission -------------------------------------------------------

/// fit.json + b0_hat.dnt3 + gamma_hat.dnt4 + factors.json under dir.
void write_fit_result(const FitResult& res, const FitOptions& opts,
                      Family family, const std::filesystem::path& dir);

void write_study_csv(const StudyResult& study, const std::filesystem::path& path);
void write_study_json(const StudyResult& study, const std::filesystem::path& path);

void write_tune_table_csv(const TuneResult& tr, const std::filesystem::path& path);

/// report.json plus tidy CSV heatmaps (row, col, value) for D_obs,
/// D_per_mean and S_flag.
void write_permutation_report(const PermutationReport& report,
                              const std::filesystem::path& dir);

/// Signal matrix as CSV (n rows x S columns, no header) for netconstruct.
Eigen::MatrixXd read_signal_csv(const std::filesystem::path& path);

void write_matrix_csv(const Eigen::MatrixXd& M, const std::filesystem::path& path);
void write_int_matrix_csv(const Eigen::MatrixXi& M,
                          const std::filesystem::path& path);

}  // namespace dnetreg::io
