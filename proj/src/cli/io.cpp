#include "ebflow/cli/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "ebflow/errors.hpp"

namespace ebflow::cli {

using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<double>> read_rows(const fs::path& path, bool skip_header) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& tok : split_csv(line)) row.push_back(parse_double(tok));
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidArgument("ragged CSV file '" + path.string() + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& token) {
  if (token == "NA") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size())
    throw InvalidArgument("malformed number '" + token + "'");
  return v;
}

void write_matrix_csv(const fs::path& path, const MatrixXd& m) {
  auto out = open_out(path);
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
}

MatrixXd read_matrix_csv(const fs::path& path) {
  const auto rows = read_rows(path, false);
  if (rows.empty()) return MatrixXd(0, 0);
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_vector_csv(const fs::path& path, const VectorXd& v) { write_matrix_csv(path, v); }

VectorXd read_vector_csv(const fs::path& path) {
  const MatrixXd m = read_matrix_csv(path);
  if (m.cols() > 1) throw InvalidArgument("'" + path.string() + "' is not a single column");
  return m.size() == 0 ? VectorXd() : VectorXd(m.col(0));
}

void write_weights_csv(const fs::path& path, const GridPrior& prior) {
  auto out = open_out(path);
  out << "b,w\n";
  for (Index k = 0; k < prior.size(); ++k)
    out << format_double(prior.support()[k]) << ',' << format_double(prior.weights()[k]) << '\n';
}

GridPrior read_weights_csv(const fs::path& path) {
  const auto rows = read_rows(path, true);
  if (rows.empty() || rows.front().size() != 2) throw InvalidArgument("'" + path.string() + "' is not a b,w table");
  VectorXd b(static_cast<Index>(rows.size())), w(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    b[static_cast<Index>(k)] = rows[k][0];
    w[static_cast<Index>(k)] = rows[k][1];
  }
  return GridPrior(std::move(b), std::move(w));
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRecord>& trace) {
  auto out = open_out(path);
  out << "iter,eta_phi,eta_w,tv,seq_nll,clamp_count\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << format_double(r.eta_phi) << ',' << format_double(r.eta_w) << ','
        << format_double(r.tv) << ',' << format_double(r.seq_nll) << ',' << r.clamp_count << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(const fs::path& path) {
  const auto rows = read_rows(path, true);
  std::vector<TraceRecord> trace;
  trace.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.size() != 6) throw InvalidArgument("'" + path.string() + "' is not a trace table");
    TraceRecord r;
    r.iter = static_cast<std::int64_t>(row[0]);
    r.eta_phi = row[1];
    r.eta_w = row[2];
    r.tv = row[3];
    r.seq_nll = row[4];
    r.clamp_count = static_cast<int>(row[5]);
    trace.push_back(r);
  }
  return trace;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  write_matrix_csv(dir / "X.csv", data.model.X);
  write_vector_csv(dir / "y.csv", data.model.y);
  if (data.model.theta_star) write_vector_csv(dir / "theta_star.csv", *data.model.theta_star);
  write_matrix_csv(dir / "X_new.csv", data.X_new);
  write_weights_csv(dir / "truth_weights.csv", data.truth);
  json meta = data.meta;
  meta["sigma_sq"] = data.model.sigma_sq;
  write_json(dir / "meta.json", meta);
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("dataset directory '" + dir.string() + "' does not exist");
  json meta = read_json(dir / "meta.json");
  if (!meta.contains("sigma_sq") || !meta["sigma_sq"].is_number())
    throw InvalidArgument("meta.json lacks sigma_sq");
  LinearModel model;
  model.X = read_matrix_csv(dir / "X.csv");
  model.y = read_vector_csv(dir / "y.csv");
  model.sigma_sq = meta["sigma_sq"].get<double>();
  if (fs::exists(dir / "theta_star.csv")) model.theta_star = read_vector_csv(dir / "theta_star.csv");
  model.validate();
  MatrixXd X_new = read_matrix_csv(dir / "X_new.csv");
  GridPrior truth = read_weights_csv(dir / "truth_weights.csv");
  return Dataset{std::move(model), std::move(X_new), std::move(truth), std::move(meta)};
}

}  // namespace ebflow::cli
