#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace netgee {

// Directed graph held as a dense n x n weight matrix. weights()(i, j) is
// the weight of the edge i -> j; the diagonal is identically zero and all
// weights are non-negative. Binary graphs additionally restrict weights
// to {0, 1}. Immutable after construction.
class DirectedGraph {
 public:
  explicit DirectedGraph(Eigen::MatrixXd weights, bool is_binary = false)
      : weights_(std::move(weights)), is_binary_(is_binary) {
    if (weights_.rows() != weights_.cols())
      throw std::invalid_argument("adjacency matrix must be square");
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
      for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
        const double w = weights_(i, j);
        if (!std::isfinite(w) || w < 0.0)
          throw std::invalid_argument("edge weights must be finite and >= 0");
        if (i == j && w != 0.0)
          throw std::invalid_argument("self-loops are not allowed");
        if (is_binary_ && w != 0.0 && w != 1.0)
          throw std::invalid_argument("binary graph has a weight outside {0,1}");
      }
    }
  }

  int node_count() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  bool is_binary() const { return is_binary_; }

  double edge_count() const { return (weights_.array() != 0.0).cast<double>().sum(); }

  // A + A^T, the undirected view used by community detection.
  Eigen::MatrixXd symmetrized() const { return weights_ + weights_.transpose(); }

 private:
  Eigen::MatrixXd weights_;
  bool is_binary_;
};

}  // namespace netgee
