#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "netgee/model.hpp"
#include "netgee/rng.hpp"
#include "netgee/sbm.hpp"

using netgee::Link;
using netgee::mean_continuous_block;
using netgee::mean_fixed_point;
using netgee::mean_jacobian;
using netgee::ModelParams;
using netgee::network_covariate;
using netgee::Rng;

namespace {

struct Instance {
  Eigen::MatrixXd a;  // n_k x n_k, non-negative, zero diagonal
  Eigen::MatrixXd x;  // l x n_k
  ModelParams params;
  int total_nodes;
};

Instance random_instance(Rng& rng, Link link) {
  const int nk = 2 + static_cast<int>(rng.below(8));
  const int l = 1 + static_cast<int>(rng.below(4));
  Instance inst;
  inst.a = Eigen::MatrixXd::Zero(nk, nk);
  for (int i = 0; i < nk; ++i)
    for (int j = 0; j < nk; ++j)
      if (i != j && rng.uniform() < 0.5) inst.a(i, j) = 0.2 + rng.uniform();
  inst.x.resize(l, nk);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < nk; ++j) inst.x(i, j) = rng.normal(0.0, 0.7);
  inst.params.alpha.resize(l);
  for (int i = 0; i < l; ++i) inst.params.alpha[i] = rng.normal(0.0, 0.8);
  // total node count well above the block size keeps beta * rho(N) < 1/2
  inst.total_nodes = nk + 12 + static_cast<int>(rng.below(20));
  inst.params.beta = (rng.uniform() - 0.5) * 2.0;
  if (link == Link::Logit) inst.params.beta *= 3.0;
  return inst;
}

Eigen::VectorXd mean_of(const Instance& inst, Link link) {
  if (link == Link::Identity)
    return mean_continuous_block(inst.a, inst.x, inst.params, inst.total_nodes);
  return mean_fixed_point(inst.a, inst.x, inst.params, link, 1e-13, 5000,
                          inst.total_nodes);
}

}  // namespace

TEST_CASE("block mean reduces to the linear predictor when beta = 0") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    Instance inst = random_instance(rng, Link::Identity);
    inst.params.beta = 0.0;
    const Eigen::VectorXd mu = mean_of(inst, Link::Identity);
    const Eigen::VectorXd lp = inst.x.transpose() * inst.params.alpha;
    REQUIRE((mu - lp).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("single-node block ignores beta") {
  ModelParams params{3.5, Eigen::VectorXd::Constant(2, 1.0)};
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd x(2, 1);
  x << 0.4, 0.6;
  const Eigen::VectorXd mu = mean_continuous_block(a, x, params, 10);
  REQUIRE(mu[0] == Catch::Approx(1.0));
}

TEST_CASE("hand-solved 2x2 block mean") {
  // n=3 total, A_k = [[0,1],[1,0]], beta = 0.5, X^T alpha = (1,2)
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd x(1, 2);
  x << 1, 2;
  ModelParams params{0.5, Eigen::VectorXd::Constant(1, 1.0)};
  const Eigen::VectorXd mu = mean_continuous_block(a, x, params, 3);
  REQUIRE(mu[0] == Catch::Approx(1.6).epsilon(1e-12));
  REQUIRE(mu[1] == Catch::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("singular system is reported") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd x(1, 2);
  x << 1, 1;
  ModelParams params{1.0, Eigen::VectorXd::Constant(1, 1.0)};
  // n=2: aggregation is A^T; beta=1 puts I - A^T exactly at singularity
  REQUIRE_THROWS_AS(mean_continuous_block(a, x, params, 2),
                    netgee::SingularSystemError);
}

TEST_CASE("network covariate aggregates incoming edges") {
  SECTION("zero vector or empty graph give zero") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = 2.0;
    REQUIRE(network_covariate(a, Eigen::VectorXd::Zero(3), 3).isZero(0.0));
    REQUIRE(network_covariate(Eigen::MatrixXd::Zero(3, 3),
                              Eigen::VectorXd::Constant(3, 4.0), 3)
                .isZero(0.0));
  }
  SECTION("hand sum: edges 1->2 (w 2) and 3->2 (w 1), v = (1,5,4)") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = 2.0;
    a(2, 1) = 1.0;
    Eigen::VectorXd v(3);
    v << 1, 5, 4;
    const Eigen::VectorXd z = network_covariate(a, v, 3);
    REQUIRE(z[0] == 0.0);
    REQUIRE(z[1] == Catch::Approx(3.0));
    REQUIRE(z[2] == 0.0);
  }
}

TEST_CASE("fixed point matches the closed form for the identity link") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Instance inst = random_instance(rng, Link::Identity);
    const Eigen::VectorXd closed =
        mean_continuous_block(inst.a, inst.x, inst.params, inst.total_nodes);
    const Eigen::VectorXd fixed = mean_fixed_point(
        inst.a, inst.x, inst.params, Link::Identity, 1e-13, 5000, inst.total_nodes);
    REQUIRE((closed - fixed).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("logit fixed point with beta = 0 is the plain logistic mean") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 1) = 1.0;
  Eigen::MatrixXd x(1, 3);
  x << -1.0, 0.0, 2.0;
  ModelParams params{0.0, Eigen::VectorXd::Constant(1, 1.0)};
  const Eigen::VectorXd mu = mean_fixed_point(a, x, params, Link::Logit);
  REQUIRE(mu[0] == Catch::Approx(netgee::logistic(-1.0)));
  REQUIRE(mu[1] == Catch::Approx(0.5));
  REQUIRE(mu[2] == Catch::Approx(netgee::logistic(2.0)));
}

TEST_CASE("symmetric 2-node logit fixed point matches a bisection oracle") {
  // A = [[0,1],[1,0]], X^T alpha = 0, beta = 1, n = 2: both coordinates
  // solve mu = logistic(logistic(mu)).
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 2);
  ModelParams params{1.0, Eigen::VectorXd::Zero(1)};
  const Eigen::VectorXd mu =
      mean_fixed_point(a, x, params, Link::Logit, 1e-12, 5000, 2);

  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid - netgee::logistic(netgee::logistic(mid)) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double oracle = 0.5 * (lo + hi);
  REQUIRE(mu[0] == Catch::Approx(oracle).margin(1e-8));
  REQUIRE(mu[1] == Catch::Approx(oracle).margin(1e-8));
}

TEST_CASE("non-convergence reports the residual") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd x(1, 2);
  x << 1, 1;
  ModelParams params{5.0, Eigen::VectorXd::Constant(1, 1.0)};  // diverges: beta > 1
  try {
    mean_fixed_point(a, x, params, Link::Identity, 1e-10, 50, 2);
    FAIL("expected ConvergenceError");
  } catch (const netgee::ConvergenceError& e) {
    REQUIRE(e.residual() > 0.0);
  }
}

namespace {

// Central finite differences of the mean in every coordinate of
// (beta, alpha).
Eigen::MatrixXd fd_jacobian(const Instance& inst, Link link, double step) {
  const int l = static_cast<int>(inst.params.alpha.size());
  Eigen::MatrixXd d(inst.a.rows(), 1 + l);
  for (int c = 0; c <= l; ++c) {
    Instance plus = inst, minus = inst;
    if (c == 0) {
      plus.params.beta += step;
      minus.params.beta -= step;
    } else {
      plus.params.alpha[c - 1] += step;
      minus.params.alpha[c - 1] -= step;
    }
    d.col(c) = (mean_of(plus, link) - mean_of(minus, link)) / (2.0 * step);
  }
  return d;
}

}  // namespace

TEST_CASE("jacobian matches finite differences on 100 random instances per link") {
  for (const Link link : {Link::Identity, Link::Logit}) {
    Rng rng(link == Link::Identity ? 100 : 200);
    for (int t = 0; t < 100; ++t) {
      const Instance inst = random_instance(rng, link);
      const Eigen::VectorXd mu = mean_of(inst, link);
      const Eigen::MatrixXd d =
          mean_jacobian(inst.a, inst.x, inst.params, link, inst.total_nodes, &mu);
      const Eigen::MatrixXd fd = fd_jacobian(inst, link, 1e-6);
      const double scale = std::max(1.0, d.lpNorm<Eigen::Infinity>());
      REQUIRE((d - fd).lpNorm<Eigen::Infinity>() / scale < 1e-6);
    }
  }
}

TEST_CASE("jacobian closed forms at beta = 0") {
  Rng rng(5);
  Instance inst = random_instance(rng, Link::Identity);
  inst.params.beta = 0.0;
  const Eigen::MatrixXd d =
      mean_jacobian(inst.a, inst.x, inst.params, Link::Identity, inst.total_nodes);
  const Eigen::VectorXd lp = inst.x.transpose() * inst.params.alpha;
  const Eigen::VectorXd beta_col =
      inst.a.transpose() * lp / (inst.total_nodes - 1.0);
  REQUIRE((d.col(0) - beta_col).lpNorm<Eigen::Infinity>() < 1e-14);
  REQUIRE((d.rightCols(inst.x.rows()) - inst.x.transpose()).lpNorm<Eigen::Infinity>() ==
          0.0);
}

TEST_CASE("jacobian for a single-node block") {
  ModelParams params{2.0, Eigen::VectorXd::Constant(2, 0.5)};
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd x(2, 1);
  x << 3.0, -1.0;
  const Eigen::MatrixXd d = mean_jacobian(a, x, params, Link::Identity, 5);
  REQUIRE(d(0, 0) == 0.0);
  REQUIRE(d(0, 1) == 3.0);
  REQUIRE(d(0, 2) == -1.0);
}

TEST_CASE("identity mean is nondecreasing in beta for nonnegative data") {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    Instance inst = random_instance(rng, Link::Identity);
    inst.x = inst.x.cwiseAbs();
    inst.params.alpha = inst.params.alpha.cwiseAbs();
    Instance larger = inst;
    inst.params.beta = 0.3 * rng.uniform();
    larger.params.beta = inst.params.beta + 0.3 * rng.uniform();
    const Eigen::VectorXd mu1 = mean_of(inst, Link::Identity);
    const Eigen::VectorXd mu2 = mean_of(larger, Link::Identity);
    REQUIRE(((mu2 - mu1).array() >= -1e-12).all());
  }
}

TEST_CASE("design simulation matches its community means and covariance") {
  const int kc = 6, m = 200, l = 4;
  const Eigen::MatrixXd x = netgee::simulate_design(kc, m, l, 99);
  REQUIRE(x.rows() == l);
  REQUIRE(x.cols() == kc * m);
  for (int k = 1; k <= kc; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(l);
    for (int j = (k - 1) * m; j < k * m; ++j) mean += x.col(j);
    mean /= m;
    for (int i = 0; i < l; ++i)
      REQUIRE(std::abs(mean[i] - k / 10.0) < 3.5 * 0.1 / std::sqrt(m));
  }
  // pooled within-community covariance should be close to 0.01 I
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(l, l);
  for (int k = 1; k <= kc; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(l);
    for (int j = (k - 1) * m; j < k * m; ++j) mean += x.col(j);
    mean /= m;
    for (int j = (k - 1) * m; j < k * m; ++j)
      cov += (x.col(j) - mean) * (x.col(j) - mean).transpose();
  }
  cov /= kc * m - kc;
  REQUIRE((cov - 0.01 * Eigen::MatrixXd::Identity(l, l)).lpNorm<Eigen::Infinity>() <
          0.002);
  REQUIRE(x == netgee::simulate_design(kc, m, l, 99));
}

TEST_CASE("outcome simulation") {
  SECTION("identity noise variance is 0.01") {
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(100000, 2.0);
    const Eigen::VectorXd y = netgee::simulate_outcomes(mu, Link::Identity, 4);
    const double var = (y.array() - y.mean()).square().sum() / (y.size() - 1);
    REQUIRE(std::abs(var - 0.01) < 0.001);
  }
  SECTION("bernoulli mean tracks mu") {
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(100000, 0.3);
    const Eigen::VectorXd y = netgee::simulate_outcomes(mu, Link::Logit, 8);
    REQUIRE(std::abs(y.mean() - 0.3) < 0.005);
  }
  SECTION("degenerate bernoulli means are rejected") {
    Eigen::VectorXd mu(2);
    mu << 0.5, 1.0;
    REQUIRE_THROWS_AS(netgee::simulate_outcomes(mu, Link::Logit, 1),
                      std::domain_error);
    mu << 0.0, 0.5;
    REQUIRE_THROWS_AS(netgee::simulate_outcomes(mu, Link::Logit, 1),
                      std::domain_error);
  }
  SECTION("fixed seed reproduces") {
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(50, 0.4);
    REQUIRE(netgee::simulate_outcomes(mu, Link::Logit, 12) ==
            netgee::simulate_outcomes(mu, Link::Logit, 12));
  }
}
