#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "netgee/graph.hpp"

namespace netgee {

// Single-membership community assignment. Labels are 1..K with every
// community non-empty.
class Partition {
 public:
  explicit Partition(std::vector<int> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("empty partition");
    k_ = *std::max_element(labels_.begin(), labels_.end());
    if (k_ < 1) throw std::invalid_argument("labels must be in 1..K");
    members_.resize(k_);
    for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
      const int g = labels_[i];
      if (g < 1 || g > k_) throw std::invalid_argument("labels must be in 1..K");
      members_[g - 1].push_back(i);
    }
    for (const auto& m : members_)
      if (m.empty()) throw std::invalid_argument("empty community in 1..K");
  }

  // Renumbers arbitrary integer labels to 1..K, communities ordered by
  // their smallest member index.
  static Partition compacted(const std::vector<int>& raw) {
    std::map<int, int> seen;  // raw label -> new label
    std::vector<int> out(raw.size());
    int next = 1;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto [it, inserted] = seen.emplace(raw[i], next);
      if (inserted) ++next;
      out[i] = it->second;
    }
    return Partition(out);
  }

  int size() const { return static_cast<int>(labels_.size()); }
  int community_count() const { return k_; }
  int label(int node) const { return labels_.at(node); }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& members(int k) const { return members_.at(k - 1); }
  int community_size(int k) const { return static_cast<int>(members(k).size()); }

  int max_community_size() const {
    int m = 0;
    for (const auto& c : members_) m = std::max(m, static_cast<int>(c.size()));
    return m;
  }

 private:
  std::vector<int> labels_;
  std::vector<std::vector<int>> members_;
  int k_ = 0;
};

// Sub-matrix of A restricted to community k, rows/columns in ascending
// node order.
inline Eigen::MatrixXd block_submatrix(const DirectedGraph& graph,
                                       const Partition& partition, int k) {
  if (partition.size() != graph.node_count())
    throw std::invalid_argument("partition size does not match graph");
  if (k < 1 || k > partition.community_count())
    throw std::out_of_range("community index out of range");
  const auto& idx = partition.members(k);
  const auto nk = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(nk, nk);
  for (Eigen::Index r = 0; r < nk; ++r)
    for (Eigen::Index c = 0; c < nk; ++c)
      out(r, c) = graph.weights()(idx[r], idx[c]);
  return out;
}

// Columns of an l x n design matrix restricted to community k.
inline Eigen::MatrixXd design_block(const Eigen::MatrixXd& design,
                                    const Partition& partition, int k) {
  const auto& idx = partition.members(k);
  Eigen::MatrixXd out(design.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(c) = design.col(idx[c]);
  return out;
}

inline Eigen::VectorXd vector_block(const Eigen::VectorXd& v,
                                    const Partition& partition, int k) {
  const auto& idx = partition.members(k);
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
  return out;
}

}  // namespace netgee
