#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebflow/ebflow.hpp"
#include "ebflow/model.hpp"

namespace ebflow::cli {

namespace fs = std::filesystem;

/// 17 significant digits; NaN as "NA".
std::string format_double(double v);
/// Inverse of format_double ("NA" -> NaN).
double parse_double(const std::string& token);

/// Matrix files: comma-separated, LF, no header.
void write_matrix_csv(const fs::path& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const fs::path& path);
void write_vector_csv(const fs::path& path, const VectorXd& v);
VectorXd read_vector_csv(const fs::path& path);

/// Header "b,w" then one row per atom.
void write_weights_csv(const fs::path& path, const GridPrior& prior);
GridPrior read_weights_csv(const fs::path& path);

/// Header "iter,eta_phi,eta_w,tv,seq_nll,clamp_count".
void write_trace_csv(const fs::path& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(const fs::path& path);

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

struct Dataset {
  LinearModel model;  // theta_star set
  MatrixXd X_new;
  GridPrior truth;
  nlohmann::json meta;
};

/// X.csv, y.csv, theta_star.csv, X_new.csv, truth_weights.csv, meta.json.
void write_dataset(const fs::path& dir, const Dataset& data);
Dataset read_dataset(const fs::path& dir);

}  // namespace ebflow::cli
