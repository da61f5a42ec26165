#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "netgee/graph.hpp"
#include "netgee/partition.hpp"
#include "netgee/rng.hpp"

namespace netgee {

// Balanced stochastic block model: K communities of size m, edge
// probability p within a community and q between.
struct SbmConfig {
  int communities = 1;       // K
  int community_size = 1;    // m
  double p_within = 0.0;
  double q_between = 0.0;
  std::uint64_t seed = 0;

  int node_count() const { return communities * community_size; }

  // Throws on invalid values; returns human-readable warnings (a
  // non-assortative q >= p is legal but worth flagging).
  std::vector<std::string> validate() const {
    if (communities < 1 || community_size < 1)
      throw std::invalid_argument("communities and community size must be >= 1");
    if (p_within < 0.0 || p_within > 1.0 || q_between < 0.0 || q_between > 1.0)
      throw std::invalid_argument("edge probabilities must lie in [0,1]");
    std::vector<std::string> warnings;
    if (q_between >= p_within && p_within < 1.0)
      warnings.push_back("q >= p: the block model is non-assortative");
    return warnings;
  }
};

// Community labels 1..K in node order: nodes k*m .. k*m+m-1 form
// community k+1.
inline Partition planted_partition(const SbmConfig& config) {
  config.validate();
  std::vector<int> labels(config.node_count());
  for (int i = 0; i < config.node_count(); ++i)
    labels[i] = i / config.community_size + 1;
  return Partition(labels);
}

// Samples a binary directed graph: each ordered pair (i,j), i != j, gets
// an edge independently with probability p (same community) or q.
// Bernoulli draws are consumed in row-major order so a seed pins the
// sample exactly.
inline DirectedGraph sample_sbm(const SbmConfig& config) {
  config.validate();
  const int n = config.node_count();
  const int m = config.community_size;
  Rng rng(config.seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double prob = (i / m == j / m) ? config.p_within : config.q_between;
      if (rng.bernoulli(prob)) a(i, j) = 1.0;
    }
  }
  return DirectedGraph(std::move(a), /*is_binary=*/true);
}

struct EdgeProbEstimate {
  double p_hat = 0.0;
  double q_hat = 0.0;
  double within_pairs = 0.0;   // sum_k n_k (n_k - 1), ordered pairs
  double between_pairs = 0.0;  // n(n-1) minus the above
};

// Empirical edge probabilities over ordered pairs: p_hat counts directed
// within-community edges against sum_k n_k(n_k-1) possible ones, q_hat
// the rest. Unbalanced partitions are accepted.
inline EdgeProbEstimate estimate_edge_probs(const DirectedGraph& graph,
                                            const Partition& partition) {
  if (!graph.is_binary())
    throw std::invalid_argument("edge probabilities require a binary graph");
  if (partition.size() != graph.node_count())
    throw std::invalid_argument("partition size does not match graph");
  const int n = graph.node_count();
  double within_pairs = 0.0;
  for (int k = 1; k <= partition.community_count(); ++k) {
    const double nk = partition.community_size(k);
    within_pairs += nk * (nk - 1.0);
  }
  const double between_pairs = static_cast<double>(n) * (n - 1.0) - within_pairs;
  if (within_pairs <= 0.0)
    throw std::invalid_argument("no within-community ordered pairs (all communities are singletons)");
  if (between_pairs <= 0.0)
    throw std::invalid_argument("no between-community ordered pairs (single community)");

  double within_edges = 0.0, between_edges = 0.0;
  const auto& w = graph.weights();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || w(i, j) == 0.0) continue;
      if (partition.label(i) == partition.label(j))
        within_edges += 1.0;
      else
        between_edges += 1.0;
    }
  return {within_edges / within_pairs, between_edges / between_pairs,
          within_pairs, between_pairs};
}

}  // namespace netgee
