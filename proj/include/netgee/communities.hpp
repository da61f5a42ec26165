#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

#include "netgee/graph.hpp"
#include "netgee/partition.hpp"
#include "netgee/rng.hpp"

namespace netgee {

// Detection variants. All of them emit a single-membership Partition;
// directed graphs are symmetrized (A + A^T) before detection.
struct Oracle {
  std::vector<int> labels;
};

struct LabelPropagation {
  int max_sweeps = 100;
  std::uint64_t seed = 0;
};

struct GreedyModularity {
  double resolution = 1.0;
  std::uint64_t seed = 0;
};

using DetectionAlgorithm = std::variant<Oracle, LabelPropagation, GreedyModularity>;

namespace detail {

// Weighted label propagation. Sweep order is a fresh seeded permutation
// per sweep; among tied dominant labels the lowest index wins; isolated
// nodes keep their own label.
inline Partition run_label_propagation(const Eigen::MatrixXd& sym,
                                       const LabelPropagation& opts) {
  const int n = static_cast<int>(sym.rows());
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i;
  std::vector<int> order(n);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    Rng rng(Rng::derive(opts.seed, static_cast<std::uint64_t>(sweep)));
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);

    int changed = 0;
    std::map<int, double> weight_by_label;
    for (const int node : order) {
      weight_by_label.clear();
      for (int j = 0; j < n; ++j)
        if (sym(node, j) > 0.0) weight_by_label[labels[j]] += sym(node, j);
      if (weight_by_label.empty()) continue;
      int best = labels[node];
      double best_w = -1.0;
      for (const auto& [lab, w] : weight_by_label) {
        if (w > best_w) {  // map iterates labels ascending: ties keep lowest
          best_w = w;
          best = lab;
        }
      }
      if (best != labels[node]) {
        labels[node] = best;
        ++changed;
      }
    }
    if (changed == 0) break;
  }
  return Partition::compacted(labels);
}

// Agglomerative modularity maximization (merge the best pair while the
// modularity gain is positive) on the symmetrized weights, with a
// resolution parameter. Candidate pairs live in a lazy max-heap keyed by
// gain; stale entries are detected through per-community version stamps.
inline Partition run_greedy_modularity(const Eigen::MatrixXd& sym,
                                       const GreedyModularity& opts) {
  const int n = static_cast<int>(sym.rows());
  const double total = sym.sum();  // = 2W
  std::vector<int> comm(n);
  for (int i = 0; i < n; ++i) comm[i] = i;
  if (total <= 0.0) return Partition::compacted(comm);

  std::vector<double> strength(n);           // community degree sums
  std::vector<std::unordered_map<int, double>> between(n);
  for (int i = 0; i < n; ++i) {
    strength[i] = sym.row(i).sum();
    for (int j = 0; j < n; ++j)
      if (j != i && sym(i, j) > 0.0) between[i][j] = sym(i, j);
  }
  std::vector<int> version(n, 0);
  std::vector<bool> alive(n, true);

  const auto gain = [&](int a, int b, double w_ab) {
    return 2.0 * w_ab / total -
           2.0 * opts.resolution * strength[a] * strength[b] / (total * total);
  };

  struct Cand {
    double dq;
    int a, b, va, vb;
  };
  const auto cmp = [](const Cand& x, const Cand& y) {
    if (x.dq != y.dq) return x.dq < y.dq;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  };
  std::priority_queue<Cand, std::vector<Cand>, decltype(cmp)> heap(cmp);
  for (int a = 0; a < n; ++a)
    for (const auto& [b, w] : between[a])
      if (a < b) heap.push({gain(a, b, w), a, b, 0, 0});

  while (!heap.empty()) {
    const Cand top = heap.top();
    heap.pop();
    if (!alive[top.a] || !alive[top.b]) continue;
    if (version[top.a] != top.va || version[top.b] != top.vb) continue;
    if (top.dq <= 0.0) break;

    const int a = top.a, b = top.b;  // merge b into a
    alive[b] = false;
    ++version[a];
    strength[a] += strength[b];
    between[a].erase(b);
    for (const auto& [c, w] : between[b]) {
      if (c == a || !alive[c]) continue;
      between[a][c] += w;
      between[c].erase(b);
      between[c][a] = between[a][c];
    }
    between[b].clear();
    for (int i = 0; i < n; ++i)
      if (comm[i] == b) comm[i] = a;
    for (const auto& [c, w] : between[a]) {
      if (!alive[c]) continue;
      const int lo = std::min(a, c), hi = std::max(a, c);
      heap.push({gain(lo, hi, w), lo, hi, version[lo], version[hi]});
    }
  }
  return Partition::compacted(comm);
}

}  // namespace detail

// Runs the chosen detection algorithm. Oracle returns its labels
// verbatim (length-checked); the other variants are deterministic given
// their seed.
inline Partition detect(const DirectedGraph& graph, const DetectionAlgorithm& algo) {
  const int n = graph.node_count();
  if (n == 0) throw std::invalid_argument("empty graph");
  if (const auto* oracle = std::get_if<Oracle>(&algo)) {
    if (static_cast<int>(oracle->labels.size()) != n)
      throw std::invalid_argument("oracle label length does not match graph");
    return Partition::compacted(oracle->labels);
  }
  const Eigen::MatrixXd sym = graph.symmetrized();
  if (const auto* lp = std::get_if<LabelPropagation>(&algo))
    return detail::run_label_propagation(sym, *lp);
  return detail::run_greedy_modularity(sym, std::get<GreedyModularity>(algo));
}

// Adjusted Rand index between two partitions of the same node set.
// Identical partitions give 1; the all-singletons vs all-one-community
// comparison gives 0.
inline double partition_agreement(const Partition& a, const Partition& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("partitions cover different node counts");
  const int n = a.size();
  const int ka = a.community_count(), kb = b.community_count();
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (int i = 0; i < n; ++i) table(a.label(i) - 1, b.label(i) - 1) += 1.0;

  const auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_cells = 0.0;
  for (int r = 0; r < ka; ++r)
    for (int c = 0; c < kb; ++c) sum_cells += choose2(table(r, c));
  double sum_rows = 0.0, sum_cols = 0.0;
  for (int r = 0; r < ka; ++r) sum_rows += choose2(table.row(r).sum());
  for (int c = 0; c < kb; ++c) sum_cols += choose2(table.col(c).sum());
  const double pairs = choose2(static_cast<double>(n));
  const double expected = sum_rows * sum_cols / pairs;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial and equal
  return (sum_cells - expected) / (max_index - expected);
}

// Modularity of a partition on the symmetrized weights (used by tests
// and diagnostics).
inline double modularity(const DirectedGraph& graph, const Partition& partition,
                         double resolution = 1.0) {
  const Eigen::MatrixXd sym = graph.symmetrized();
  const double total = sym.sum();
  if (total <= 0.0) return 0.0;
  double q = 0.0;
  for (int k = 1; k <= partition.community_count(); ++k) {
    const auto& idx = partition.members(k);
    double internal = 0.0, degree = 0.0;
    for (const int i : idx) {
      degree += sym.row(i).sum();
      for (const int j : idx) internal += sym(i, j);
    }
    q += internal / total - resolution * (degree / total) * (degree / total);
  }
  return q;
}

}  // namespace netgee
