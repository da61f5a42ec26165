#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "netgee/sbm.hpp"

using netgee::estimate_edge_probs;
using netgee::planted_partition;
using netgee::sample_sbm;
using netgee::SbmConfig;

TEST_CASE("degenerate probabilities give the block-complete graph") {
  const auto g = sample_sbm({2, 2, 1.0, 0.0, 123});
  Eigen::MatrixXd expected(4, 4);
  expected << 0, 1, 0, 0,
              1, 0, 0, 0,
              0, 0, 0, 1,
              0, 0, 1, 0;
  REQUIRE(g.weights() == expected);
}

TEST_CASE("same seed gives bit-identical samples") {
  const auto g1 = sample_sbm({4, 5, 0.6, 0.1, 99});
  const auto g2 = sample_sbm({4, 5, 0.6, 0.1, 99});
  const auto g3 = sample_sbm({4, 5, 0.6, 0.1, 100});
  REQUIRE(g1.weights() == g2.weights());
  REQUIRE(g1.weights() != g3.weights());
}

TEST_CASE("samples are binary with a zero diagonal") {
  const auto g = sample_sbm({3, 7, 0.5, 0.2, 5});
  REQUIRE(g.is_binary());
  for (int i = 0; i < g.node_count(); ++i) REQUIRE(g.weights()(i, i) == 0.0);
}

TEST_CASE("empirical within-block density concentrates at p") {
  const SbmConfig config{20, 10, 0.8, 0.0, 0};
  double edges = 0.0, pairs = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    SbmConfig c = config;
    c.seed = netgee::Rng::derive(31, rep);
    const auto g = sample_sbm(c);
    const auto est = estimate_edge_probs(g, planted_partition(c));
    edges += est.p_hat * est.within_pairs;
    pairs += est.within_pairs;
  }
  REQUIRE(std::abs(edges / pairs - 0.8) < 0.01);
}

TEST_CASE("config validation") {
  const SbmConfig bad_k{0, 5, 0.5, 0.1, 0};
  REQUIRE_THROWS_AS(bad_k.validate(), std::invalid_argument);
  const SbmConfig bad_p{2, 5, 1.5, 0.1, 0};
  REQUIRE_THROWS_AS(bad_p.validate(), std::invalid_argument);
  const SbmConfig good{2, 5, 0.8, 0.1, 0};
  REQUIRE(good.validate().empty());
  const SbmConfig nonassort{2, 5, 0.2, 0.4, 0};
  REQUIRE_FALSE(nonassort.validate().empty());  // q >= p warns
}

TEST_CASE("edge probability estimates on tiny hand-counted graphs") {
  SECTION("two disjoint complete communities") {
    const auto g = sample_sbm({2, 3, 1.0, 0.0, 1});
    const auto est = estimate_edge_probs(g, planted_partition({2, 3, 1, 0, 0}));
    REQUIRE(est.p_hat == 1.0);
    REQUIRE(est.q_hat == 0.0);
  }
  SECTION("n=4 with edges 1->2, 3->4, 1->3") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a(0, 1) = 1;  // within {1,2}
    a(2, 3) = 1;  // within {3,4}
    a(0, 2) = 1;  // between
    const netgee::DirectedGraph g(a, true);
    const netgee::Partition part({1, 1, 2, 2});
    const auto est = estimate_edge_probs(g, part);
    REQUIRE(est.p_hat == Catch::Approx(0.5));    // 2 of 4 ordered within pairs
    REQUIRE(est.q_hat == Catch::Approx(0.125));  // 1 of 8 ordered between pairs
  }
  SECTION("degenerate partitions raise") {
    const auto g = sample_sbm({2, 2, 0.5, 0.5, 3});
    REQUIRE_THROWS_AS(estimate_edge_probs(g, netgee::Partition({1, 2, 3, 4})),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_edge_probs(g, netgee::Partition({1, 1, 1, 1})),
                      std::invalid_argument);
  }
  SECTION("weighted graphs are rejected") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
    w(0, 1) = 2.0;
    REQUIRE_THROWS_AS(
        estimate_edge_probs(netgee::DirectedGraph(w), netgee::Partition({1, 2})),
        std::invalid_argument);
  }
}

TEST_CASE("estimator consistency at K=40, m=10") {
  const SbmConfig base{40, 10, 0.6, 0.2, 0};
  const netgee::Partition planted = planted_partition(base);
  double abs_p = 0.0, abs_q = 0.0, mean_p = 0.0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    SbmConfig c = base;
    c.seed = netgee::Rng::derive(77, rep);
    const auto est = estimate_edge_probs(sample_sbm(c), planted);
    abs_p += std::abs(est.p_hat - 0.6);
    abs_q += std::abs(est.q_hat - 0.2);
    mean_p += est.p_hat;
  }
  REQUIRE(abs_p / reps < 0.01);
  REQUIRE(abs_q / reps < 0.005);
  // unbiasedness at the R^{-1/2} scale: the mean over 500 seeds sits a
  // few Monte Carlo sigmas from p
  const double se_mean = std::sqrt(0.6 * 0.4 / (40 * 10 * 9)) / std::sqrt(reps);
  REQUIRE(std::abs(mean_p / reps - 0.6) < 5 * se_mean);
}

TEST_CASE("scaled estimation errors stay bounded as the network doubles") {
  // sd of m K^{1/2} (p_hat - p) and of m K (q_hat - q) should not explode
  // when (m, K) doubles, and their ratio stays O(1)
  const double p = 0.6, q = 0.2;
  std::vector<std::pair<int, int>> ladder = {{10, 20}, {10, 40}, {20, 40}};
  std::vector<double> sd_p, sd_q;
  for (std::size_t s = 0; s < ladder.size(); ++s) {
    const auto [m, kc] = ladder[s];
    const netgee::Partition planted = planted_partition({kc, m, p, q, 0});
    std::vector<double> sp, sq;
    for (int rep = 0; rep < 300; ++rep) {
      SbmConfig c{kc, m, p, q, netgee::Rng::derive(1000 + s, rep)};
      const auto est = estimate_edge_probs(sample_sbm(c), planted);
      sp.push_back(m * std::sqrt(kc) * (est.p_hat - p));
      sq.push_back(m * kc * (est.q_hat - q));
    }
    const auto sd = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::sqrt(ss / (v.size() - 1));
    };
    sd_p.push_back(sd(sp));
    sd_q.push_back(sd(sq));
  }
  for (std::size_t s = 1; s < sd_p.size(); ++s) {
    REQUIRE(sd_p[s] < 1.25 * sd_p[s - 1]);
    REQUIRE(sd_q[s] < 1.25 * sd_q[s - 1]);
  }
  for (std::size_t s = 0; s < sd_p.size(); ++s)
    REQUIRE(sd_q[s] / sd_p[s] < 3.0);
}
