#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "netgee/gee.hpp"
#include "netgee/graph.hpp"
#include "netgee/partition.hpp"

namespace netgee {

// Shortest exact decimal form: 17 significant digits round-trip any
// double bit-exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_number(const std::string& cell, const std::string& path,
                           std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": cannot parse number from '" + cell + "'");
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

}  // namespace detail

// Headerless dense CSV, one row per line.
inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  auto f = detail::open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << format_double(m(i, j));
    }
    f << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_number(c, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": empty matrix file");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline void write_vector_csv(const std::string& path, const Eigen::VectorXd& v) {
  write_matrix_csv(path, v);
}

inline Eigen::VectorXd read_vector_csv(const std::string& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 1) throw std::runtime_error(path + ": expected a single column");
  return m.col(0);
}

// Sparse form: "src,dst,weight" with 0-based node ids, nonzero entries
// in row-major order.
inline void write_edge_list_csv(const std::string& path, const DirectedGraph& g) {
  auto f = detail::open_out(path);
  f << "src,dst,weight\n";
  const auto& w = g.weights();
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (w(i, j) != 0.0)
        f << i << ',' << j << ',' << format_double(w(i, j)) << '\n';
}

// Node count is inferred from the largest id unless given.
inline DirectedGraph read_edge_list_csv(const std::string& path, int node_count = -1) {
  auto f = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  struct Edge { int src, dst; double w; };
  std::vector<Edge> edges;
  int max_id = -1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("src", 0) == 0) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected src,dst,weight");
    Edge e;
    e.src = static_cast<int>(detail::parse_number(cells[0], path, line_no));
    e.dst = static_cast<int>(detail::parse_number(cells[1], path, line_no));
    e.w = detail::parse_number(cells[2], path, line_no);
    max_id = std::max({max_id, e.src, e.dst});
    edges.push_back(e);
  }
  const int n = node_count > 0 ? node_count : max_id + 1;
  if (n <= 0) throw std::runtime_error(path + ": no edges and no node count");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  bool binary = true;
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n)
      throw std::runtime_error(path + ": node id exceeds node count");
    w(e.src, e.dst) = e.w;
    if (e.w != 0.0 && e.w != 1.0) binary = false;
  }
  return DirectedGraph(std::move(w), binary);
}

inline void write_partition_csv(const std::string& path, const Partition& p) {
  auto f = detail::open_out(path);
  f << "node_id,label\n";
  for (int i = 0; i < p.size(); ++i) f << i << ',' << p.label(i) << '\n';
}

inline Partition read_partition_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<int, int>> entries;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("node_id", 0) == 0) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected node_id,label");
    entries.emplace_back(static_cast<int>(detail::parse_number(cells[0], path, line_no)),
                         static_cast<int>(detail::parse_number(cells[1], path, line_no)));
  }
  std::vector<int> labels(entries.size(), 0);
  for (const auto& [node, label] : entries) {
    if (node < 0 || node >= static_cast<int>(labels.size()))
      throw std::runtime_error(path + ": node ids must cover 0..n-1");
    labels[node] = label;
  }
  return Partition::compacted(labels);
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data_row_major", rows}};
}

// Full fit summary: estimates, both covariances, convergence metadata,
// per-coefficient sandwich SEs with z and two-sided normal p-values.
inline nlohmann::json fit_result_to_json(const FitResult& fit) {
  nlohmann::json j;
  j["estimates"]["beta"] = fit.params.beta;
  j["estimates"]["alpha"] = std::vector<double>(
      fit.params.alpha.data(), fit.params.alpha.data() + fit.params.alpha.size());
  j["sandwich_cov"] = matrix_to_json(fit.sandwich_cov);
  j["naive_cov"] = matrix_to_json(fit.naive_cov);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["phi_hat"] = fit.phi_hat;
  j["rho_hat"] = fit.rho_hat;
  j["score_norm"] = fit.score_norm;
  nlohmann::json coefs = nlohmann::json::array();
  for (int c = 0; c < fit.params.dimension(); ++c) {
    const double est = c == 0 ? fit.params.beta : fit.params.alpha[c - 1];
    const double se = fit.sandwich_se(c);
    const double z = se > 0.0 ? est / se : 0.0;
    nlohmann::json entry;
    entry["name"] = c == 0 ? "beta" : "alpha" + std::to_string(c);
    entry["estimate"] = est;
    entry["sandwich_se"] = se;
    entry["z"] = z;
    entry["p_value"] = se > 0.0 ? std::erfc(std::abs(z) / std::sqrt(2.0)) : 1.0;
    coefs.push_back(entry);
  }
  j["coefficients"] = coefs;
  return j;
}

}  // namespace netgee
