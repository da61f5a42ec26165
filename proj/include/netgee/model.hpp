#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "netgee/errors.hpp"
#include "netgee/rng.hpp"

namespace netgee {

enum class Link { Identity, Logit };

// Network coefficient beta plus covariate coefficients alpha (length l).
struct ModelParams {
  double beta = 0.0;
  Eigen::VectorXd alpha;

  int dimension() const { return 1 + static_cast<int>(alpha.size()); }
};

inline double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double link_apply(Link link, double mu) {
  if (link == Link::Identity) return mu;
  return std::log(mu / (1.0 - mu));
}

inline double link_inverse(Link link, double v) {
  if (link == Link::Identity) return v;
  return logistic(v);
}

// d g^{-1}(v) / dv
inline double link_inverse_deriv(Link link, double v) {
  if (link == Link::Identity) return 1.0;
  const double s = logistic(v);
  return s * (1.0 - s);
}

namespace detail {

inline constexpr double kMuClamp = 1e-12;
inline constexpr double kRcondGuard = 1e-12;

inline Eigen::VectorXd apply_inverse(Link link, const Eigen::VectorXd& v) {
  return v.unaryExpr([link](double x) { return link_inverse(link, x); });
}

// Aggregation matrix: entry (i, j) weights node j's contribution to node
// i's network term, i.e. in-edges scaled by 1/(n-1).
inline Eigen::MatrixXd aggregation(const Eigen::MatrixXd& a, int total_nodes) {
  if (total_nodes < 2) throw std::invalid_argument("need at least 2 nodes");
  return a.transpose() / (total_nodes - 1.0);
}

inline Eigen::PartialPivLU<Eigen::MatrixXd> guarded_lu(Eigen::MatrixXd m,
                                                       const char* what) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(std::move(m));
  if (!(lu.rcond() > kRcondGuard))
    throw SingularSystemError(std::string(what) + ": condition estimate above guard");
  return lu;
}

}  // namespace detail

// Network covariate: Z_i = sum_{j != i} A_{ji} v_j / (n-1), aggregating
// over edges INTO node i.
inline Eigen::VectorXd network_covariate(const Eigen::MatrixXd& a,
                                         const Eigen::VectorXd& v,
                                         int total_nodes) {
  if (a.rows() != a.cols() || a.rows() != v.size())
    throw std::invalid_argument("network covariate: dimension mismatch");
  return detail::aggregation(a, total_nodes) * v;
}

// Mean of the continuous (identity-link) model on one block:
// mu = (I - beta * N)^{-1} X^T alpha with N the in-edge aggregation of
// a_block. `total_nodes` is the n of the whole network, which sets the
// 1/(n-1) scale even on a block.
inline Eigen::VectorXd mean_continuous_block(const Eigen::MatrixXd& a_block,
                                             const Eigen::MatrixXd& x_block,
                                             const ModelParams& params,
                                             int total_nodes) {
  const auto nk = a_block.rows();
  if (a_block.cols() != nk || x_block.cols() != nk ||
      x_block.rows() != params.alpha.size())
    throw std::invalid_argument("mean: dimension mismatch");
  const Eigen::VectorXd lp = x_block.transpose() * params.alpha;
  if (params.beta == 0.0 || nk == 1) return lp;
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(nk, nk) -
      params.beta * detail::aggregation(a_block, total_nodes);
  return detail::guarded_lu(system, "block mean").solve(lp);
}

// Solves g(mu_i) = alpha^T x_i + beta * sum_j A_{ji} g^{-1}(mu_j)/(n-1)
// by damped fixed-point iteration (factor 0.5) from the beta=0 solution.
// The logit model composes g^{-1} with mu_j itself, exactly as the model
// is defined. Convergence is declared on the max-norm g-space residual.
inline Eigen::VectorXd mean_fixed_point(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& x,
                                        const ModelParams& params, Link link,
                                        double tol = 1e-10, int max_iter = 500,
                                        int total_nodes = -1) {
  if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
  const auto n = a.rows();
  if (total_nodes < 0) total_nodes = static_cast<int>(n);
  if (a.cols() != n || x.cols() != n || x.rows() != params.alpha.size())
    throw std::invalid_argument("mean: dimension mismatch");
  const Eigen::VectorXd lp = x.transpose() * params.alpha;
  const auto clamp = [link](Eigen::VectorXd v) {
    if (link == Link::Logit)
      for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = std::min(1.0 - detail::kMuClamp, std::max(detail::kMuClamp, v[i]));
    return v;
  };
  Eigen::VectorXd mu = clamp(detail::apply_inverse(link, lp));
  if (n == 1 || params.beta == 0.0) return mu;
  const Eigen::MatrixXd agg = params.beta * detail::aggregation(a, total_nodes);
  double residual = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  double damping = 0.5;
  bool keep_damped = false;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = lp + agg * detail::apply_inverse(link, mu);
    const Eigen::VectorXd target = clamp(detail::apply_inverse(link, eta));
    // max-norm residual of the g-space equation; near-saturated logit
    // means lose the g-space digits to cancellation in log(mu/(1-mu)),
    // so a node also counts as converged by its mu-space residual
    residual = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      residual = std::max(residual,
                          std::min(std::abs(link_apply(link, mu[i]) - eta[i]),
                                   std::abs(target[i] - mu[i])));
    if (residual < tol) return mu;
    // drop the damping while the map contracts strongly; restore it for
    // good on any residual increase
    if (residual > previous) {
      damping = 0.5;
      keep_damped = true;
    } else if (!keep_damped && it >= 2 && residual < 0.25 * previous) {
      damping = 0.0;
    }
    previous = residual;
    mu = damping * mu + (1.0 - damping) * target;
  }
  throw ConvergenceError("mean fixed point did not converge (residual " +
                             std::to_string(residual) + ")",
                         residual);
}

// Jacobian D = d mu / d (beta, alpha^T), an n_k x (1+l) matrix; column 0
// is the beta derivative. Identity link uses the closed form with
// M = (I - beta N)^{-1}; the logit link differentiates the fixed point
// implicitly.
inline Eigen::MatrixXd mean_jacobian(const Eigen::MatrixXd& a_block,
                                     const Eigen::MatrixXd& x_block,
                                     const ModelParams& params, Link link,
                                     int total_nodes,
                                     const Eigen::VectorXd* mu_hint = nullptr) {
  const auto nk = a_block.rows();
  const auto l = x_block.rows();
  Eigen::MatrixXd d(nk, 1 + l);
  const Eigen::MatrixXd agg = detail::aggregation(a_block, total_nodes);
  if (link == Link::Identity) {
    const Eigen::VectorXd mu =
        mu_hint ? *mu_hint : mean_continuous_block(a_block, x_block, params, total_nodes);
    if (params.beta == 0.0) {
      d.col(0) = agg * mu;
      d.rightCols(l) = x_block.transpose();
      return d;
    }
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(nk, nk) - params.beta * agg;
    auto lu = detail::guarded_lu(system, "mean jacobian");
    d.col(0) = lu.solve(agg * mu);
    d.rightCols(l) = lu.solve(x_block.transpose());
    return d;
  }
  // logit
  const Eigen::VectorXd mu =
      mu_hint ? *mu_hint
              : mean_fixed_point(a_block, x_block, params, link, 1e-12, 2000,
                                 total_nodes);
  const Eigen::VectorXd ginv_mu = detail::apply_inverse(link, mu);
  const Eigen::VectorXd eta =
      x_block.transpose() * params.alpha + params.beta * (agg * ginv_mu);
  Eigen::VectorXd outer(nk), inner(nk);
  for (Eigen::Index i = 0; i < nk; ++i) {
    outer[i] = link_inverse_deriv(link, eta[i]);  // d mu_i / d eta_i
    inner[i] = link_inverse_deriv(link, mu[i]);   // d g^{-1}(mu_j) / d mu_j
  }
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(nk, nk) -
      params.beta * outer.asDiagonal() * agg * inner.asDiagonal();
  auto lu = detail::guarded_lu(system, "mean jacobian");
  d.col(0) = lu.solve(outer.asDiagonal() * (agg * ginv_mu));
  d.rightCols(l) = lu.solve(outer.asDiagonal() * x_block.transpose());
  return d;
}

namespace detail {

// Identity-link mean and Jacobian from one factorization of (I - beta N).
inline void identity_mean_jacobian(const Eigen::MatrixXd& a_block,
                                   const Eigen::MatrixXd& x_block,
                                   const ModelParams& params, int total_nodes,
                                   Eigen::VectorXd& mu, Eigen::MatrixXd& d) {
  const auto nk = a_block.rows();
  const auto l = x_block.rows();
  const Eigen::MatrixXd agg = aggregation(a_block, total_nodes);
  const Eigen::VectorXd lp = x_block.transpose() * params.alpha;
  d.resize(nk, 1 + l);
  if (params.beta == 0.0) {
    mu = lp;
    d.col(0) = agg * mu;
    d.rightCols(l) = x_block.transpose();
    return;
  }
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(nk, nk) - params.beta * agg;
  auto lu = guarded_lu(system, "block mean");
  mu = lu.solve(lp);
  d.col(0) = lu.solve(agg * mu);
  d.rightCols(l) = lu.solve(x_block.transpose());
}

}  // namespace detail

// l x n design whose column j, for a node in community k, is drawn from
// MVN((k/10) 1_l, 0.01 I_l). Draws run node-major then coordinate-major.
inline Eigen::MatrixXd simulate_design(int communities, int community_size,
                                       int l, std::uint64_t seed) {
  if (l < 1) throw std::invalid_argument("design needs at least one covariate");
  const int n = communities * community_size;
  Eigen::MatrixXd x(l, n);
  Rng rng(seed);
  for (int j = 0; j < n; ++j) {
    const int community = j / community_size + 1;
    const double mean = community / 10.0;
    for (int i = 0; i < l; ++i) x(i, j) = rng.normal(mean, 0.1);
  }
  return x;
}

// Identity: y_i ~ N(mu_i, 0.01); Logit: y_i ~ Bernoulli(mu_i).
inline Eigen::VectorXd simulate_outcomes(const Eigen::VectorXd& mu, Link link,
                                         std::uint64_t seed) {
  Eigen::VectorXd y(mu.size());
  Rng rng(seed);
  if (link == Link::Identity) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) y[i] = rng.normal(mu[i], 0.1);
    return y;
  }
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > 0.0 && mu[i] < 1.0))
      throw std::domain_error("Bernoulli mean must lie strictly in (0,1)");
    y[i] = rng.bernoulli(mu[i]) ? 1.0 : 0.0;
  }
  return y;
}

}  // namespace netgee
