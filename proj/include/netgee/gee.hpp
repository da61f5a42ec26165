#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "netgee/errors.hpp"
#include "netgee/graph.hpp"
#include "netgee/model.hpp"
#include "netgee/partition.hpp"

namespace netgee {

enum class CorrelationStructure { Independence, Exchangeable };

struct WorkingCorrelation {
  CorrelationStructure structure = CorrelationStructure::Independence;
  double rho = 0.0;  // exchangeable only, re-estimated during fitting
  double phi = 1.0;  // dispersion, re-estimated during fitting
};

// How the network term entering mu_k and D_k is built: Block restricts
// to each cluster's sub-adjacency (the written estimating equation);
// FullNetwork evaluates mean and Jacobian on the whole graph and lets
// clusters shape only the working covariance, which makes the point
// estimates coincide with the naive fit under independence.
enum class ZMode { Block, FullNetwork };

struct FitOptions {
  int max_iter = 25;
  double tol = 1e-10;  // max-norm parameter change
  ZMode z_mode = ZMode::Block;
  Link link = Link::Identity;
  std::optional<double> fixed_beta;  // constrain the network effect
  double fp_tol = 1e-12;             // inner fixed-point tolerance (logit)
  int fp_max_iter = 2000;
};

struct FitResult {
  ModelParams params;
  Eigen::MatrixXd sandwich_cov;
  Eigen::MatrixXd naive_cov;  // model-based (bread inverse)
  bool converged = false;
  int iterations = 0;
  std::vector<Eigen::VectorXd> cluster_residuals;  // S_k = y_k - mu_k
  double phi_hat = 1.0;
  double rho_hat = 0.0;
  double score_norm = std::numeric_limits<double>::quiet_NaN();

  double sandwich_se(int j) const { return std::sqrt(sandwich_cov(j, j)); }
  double naive_se(int j) const { return std::sqrt(naive_cov(j, j)); }
};

namespace detail {

// LDLT with an explicit rank check: Eigen's solve() silently applies a
// pseudo-inverse across zero pivots, so rcond alone does not catch exact
// singularity.
inline Eigen::LDLT<Eigen::MatrixXd> guarded_ldlt(const Eigen::MatrixXd& m,
                                                 const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> ld(m);
  const Eigen::VectorXd d = ld.vectorD().cwiseAbs();
  const double dmax = d.maxCoeff();
  if (ld.info() != Eigen::Success || !(dmax > 0.0) ||
      !(d.minCoeff() > 1e-12 * dmax) || !(ld.rcond() > 1e-12))
    throw SingularSystemError(std::string(what) +
                              ": singular or ill-conditioned system");
  return ld;
}

}  // namespace detail

// Moment estimator of the exchangeable correlation from Pearson
// residuals: rho = sum_k sum_{i != j} r_ki r_kj / (phi * sum_k n_k(n_k-1)),
// clamped to the range keeping every V_k positive definite.
inline double estimate_correlation(
    const std::vector<Eigen::VectorXd>& pearson_clusters, double phi) {
  double cross = 0.0, pairs = 0.0;
  int max_nk = 0;
  for (const auto& r : pearson_clusters) {
    const double nk = static_cast<double>(r.size());
    max_nk = std::max(max_nk, static_cast<int>(r.size()));
    const double s = r.sum();
    cross += s * s - r.squaredNorm();
    pairs += nk * (nk - 1.0);
  }
  if (pairs <= 0.0)
    throw std::invalid_argument("exchangeable correlation needs a cluster with >= 2 members");
  if (phi <= 0.0) throw std::invalid_argument("dispersion must be positive");
  const double raw = cross / (phi * pairs);
  // margin keeps every V_k invertible at working precision, not merely PD
  const double lo = max_nk > 1 ? -1.0 / (max_nk - 1.0) + 1e-4 : 0.0;
  const double hi = 1.0 - 1e-4;
  return std::min(hi, std::max(lo, raw));
}

// Robust covariance bread^{-1} meat bread^{-1} from converged cluster
// quantities; symmetrized against roundoff.
inline Eigen::MatrixXd sandwich_covariance(
    const std::vector<Eigen::MatrixXd>& cluster_ds,
    const std::vector<Eigen::MatrixXd>& cluster_vs,
    const std::vector<Eigen::VectorXd>& cluster_residuals) {
  if (cluster_ds.empty() || cluster_ds.size() != cluster_vs.size() ||
      cluster_ds.size() != cluster_residuals.size())
    throw std::invalid_argument("sandwich: cluster sequences must align");
  const auto p = cluster_ds.front().cols();
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t k = 0; k < cluster_ds.size(); ++k) {
    const auto& d = cluster_ds[k];
    const auto vld = detail::guarded_ldlt(cluster_vs[k], "sandwich working covariance");
    const Eigen::MatrixXd vinv_d = vld.solve(d);
    bread += d.transpose() * vinv_d;
    const Eigen::VectorXd g = vinv_d.transpose() * cluster_residuals[k];
    meat += g * g.transpose();
  }
  const auto bld = detail::guarded_ldlt(bread, "sandwich bread");
  const Eigen::MatrixXd half = bld.solve(meat);
  Eigen::MatrixXd cov = bld.solve(half.transpose());
  return 0.5 * (cov + cov.transpose());
}

namespace detail {

inline double variance_function(Link link, double mu) {
  if (link == Link::Identity) return 1.0;
  return std::max(mu * (1.0 - mu), 1e-10);
}

// Applies R(rho)^{-1} for the exchangeable structure without forming it:
// R^{-1} = I/(1-rho) - rho/((1-rho)(1+(nk-1)rho)) * J.
inline Eigen::MatrixXd exchangeable_solve(double rho, const Eigen::MatrixXd& m) {
  const double nk = static_cast<double>(m.rows());
  const double denom = (1.0 - rho) * (1.0 + (nk - 1.0) * rho);
  const Eigen::RowVectorXd colsum = m.colwise().sum();
  Eigen::MatrixXd out = m / (1.0 - rho);
  out.rowwise() -= (rho / denom) * colsum;
  return out;
}

struct GeeProblem {
  const DirectedGraph* graph;
  const Partition* partition;
  const Eigen::MatrixXd* design;  // l x n
  const Eigen::VectorXd* outcome;
  FitOptions opts;

  std::vector<Eigen::MatrixXd> a_blocks, x_blocks;
  std::vector<Eigen::VectorXd> y_blocks;

  void prepare() {
    const int kc = partition->community_count();
    a_blocks.reserve(kc);
    x_blocks.reserve(kc);
    y_blocks.reserve(kc);
    for (int k = 1; k <= kc; ++k) {
      a_blocks.push_back(block_submatrix(*graph, *partition, k));
      x_blocks.push_back(design_block(*design, *partition, k));
      y_blocks.push_back(vector_block(*outcome, *partition, k));
    }
  }

  // Mean and Jacobian per cluster at the given parameters.
  void evaluate(const ModelParams& b, std::vector<Eigen::VectorXd>& mus,
                std::vector<Eigen::MatrixXd>& ds) const {
    const int n = graph->node_count();
    const int kc = partition->community_count();
    mus.resize(kc);
    ds.resize(kc);
    if (opts.z_mode == ZMode::FullNetwork) {
      Eigen::VectorXd mu_full;
      Eigen::MatrixXd d_full;
      if (opts.link == Link::Identity) {
        identity_mean_jacobian(graph->weights(), *design, b, n, mu_full, d_full);
      } else {
        mu_full = mean_fixed_point(graph->weights(), *design, b, opts.link,
                                   opts.fp_tol, opts.fp_max_iter, n);
        d_full = mean_jacobian(graph->weights(), *design, b, opts.link, n, &mu_full);
      }
      for (int k = 1; k <= kc; ++k) {
        const auto& idx = partition->members(k);
        Eigen::VectorXd mu_k(idx.size());
        Eigen::MatrixXd d_k(idx.size(), d_full.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
          mu_k[static_cast<Eigen::Index>(r)] = mu_full[idx[r]];
          d_k.row(static_cast<Eigen::Index>(r)) = d_full.row(idx[r]);
        }
        mus[k - 1] = std::move(mu_k);
        ds[k - 1] = std::move(d_k);
      }
      return;
    }
    for (int k = 1; k <= kc; ++k) {
      if (opts.link == Link::Identity) {
        identity_mean_jacobian(a_blocks[k - 1], x_blocks[k - 1], b, n,
                               mus[k - 1], ds[k - 1]);
      } else {
        mus[k - 1] = mean_fixed_point(a_blocks[k - 1], x_blocks[k - 1], b,
                                      opts.link, opts.fp_tol, opts.fp_max_iter, n);
        ds[k - 1] = mean_jacobian(a_blocks[k - 1], x_blocks[k - 1], b, opts.link,
                                  n, &mus[k - 1]);
      }
    }
  }
};

struct WeightState {
  double phi = 1.0;
  double rho = 0.0;
};

// Accumulates bread and score under the current weights.
inline void accumulate(const GeeProblem& prob, const WorkingCorrelation& corr,
                       const WeightState& w,
                       const std::vector<Eigen::VectorXd>& mus,
                       const std::vector<Eigen::MatrixXd>& ds,
                       Eigen::MatrixXd& bread, Eigen::VectorXd& score) {
  const auto p = ds.front().cols();
  bread = Eigen::MatrixXd::Zero(p, p);
  score = Eigen::VectorXd::Zero(p);
  for (std::size_t k = 0; k < mus.size(); ++k) {
    const Eigen::VectorXd s = prob.y_blocks[k] - mus[k];
    Eigen::VectorXd inv_sd(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      inv_sd[i] = 1.0 / std::sqrt(variance_function(prob.opts.link, mus[k][i]));
    Eigen::MatrixXd dt = ds[k].transpose() * inv_sd.asDiagonal();  // p x nk
    if (corr.structure == CorrelationStructure::Exchangeable && s.size() > 1)
      dt = exchangeable_solve(w.rho, dt.transpose()).transpose();
    dt /= w.phi;
    bread.noalias() += dt * inv_sd.asDiagonal() * ds[k];
    score.noalias() += dt * (inv_sd.asDiagonal() * s);
  }
}

inline WeightState update_weights(const GeeProblem& prob,
                                  const WorkingCorrelation& corr,
                                  const std::vector<Eigen::VectorXd>& mus,
                                  int n_params) {
  const int n = prob.graph->node_count();
  const double dof = std::max(1.0, static_cast<double>(n) -
                                       static_cast<double>(n_params));
  std::vector<Eigen::VectorXd> pearson(mus.size());
  double ssq = 0.0;
  bool any_pair = false;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    const Eigen::VectorXd s = prob.y_blocks[k] - mus[k];
    Eigen::VectorXd r(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      r[i] = s[i] / std::sqrt(variance_function(prob.opts.link, mus[k][i]));
    ssq += r.squaredNorm();
    if (r.size() > 1) any_pair = true;
    pearson[k] = std::move(r);
  }
  WeightState w;
  w.phi = std::max(ssq / dof, 1e-12);
  if (corr.structure == CorrelationStructure::Exchangeable)
    w.rho = any_pair ? estimate_correlation(pearson, w.phi) : 0.0;
  return w;
}

inline Eigen::VectorXd pack(const ModelParams& b) {
  Eigen::VectorXd v(b.dimension());
  v[0] = b.beta;
  v.tail(b.alpha.size()) = b.alpha;
  return v;
}

inline ModelParams unpack(const Eigen::VectorXd& v) {
  ModelParams b;
  b.beta = v[0];
  b.alpha = v.tail(v.size() - 1);
  return b;
}

// Initial alpha: the beta = 0 fit of y on X alone (OLS / logistic IRLS).
inline Eigen::VectorXd null_model_alpha(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, Link link) {
  const Eigen::MatrixXd xt = x.transpose();  // n x l
  if (link == Link::Identity)
    return xt.colPivHouseholderQr().solve(y);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(x.rows());
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd mu(y.size()), v(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      mu[i] = logistic(xt.row(i).dot(alpha));
      v[i] = variance_function(Link::Logit, mu[i]);
    }
    const Eigen::VectorXd g = xt.transpose() * (y - mu);
    const Eigen::MatrixXd info = xt.transpose() * v.asDiagonal() * xt;
    Eigen::LDLT<Eigen::MatrixXd> ld(info);
    if (ld.info() != Eigen::Success || !(ld.rcond() > 1e-12)) break;
    const Eigen::VectorXd step = ld.solve(g);
    alpha += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  return alpha;
}

}  // namespace detail

// Solves sum_k D_k^T V_k^{-1} (y_k - mu_k(b)) = 0 by Fisher scoring with
// step halving; phi and rho are refreshed from Pearson residuals each
// iteration. Returns the best iterate flagged when not converged.
inline FitResult fit_gee(const DirectedGraph& graph, const Partition& partition,
                         const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& outcome,
                         const WorkingCorrelation& corr, const FitOptions& opts) {
  const int n = graph.node_count();
  if (partition.size() != n || design.cols() != n || outcome.size() != n)
    throw std::invalid_argument("fit_gee: dimension mismatch");
  const int l = static_cast<int>(design.rows());
  if (n <= l + 1)
    throw std::invalid_argument("fit_gee: more parameters than observations");
  if (opts.max_iter < 1 || opts.tol <= 0.0)
    throw std::invalid_argument("fit_gee: invalid options");

  detail::GeeProblem prob{&graph, &partition, &design, &outcome, opts};
  prob.prepare();

  ModelParams b;
  b.beta = opts.fixed_beta.value_or(0.0);
  b.alpha = detail::null_model_alpha(design, outcome, opts.link);
  const int p = b.dimension();

  std::vector<Eigen::VectorXd> mus;
  std::vector<Eigen::MatrixXd> ds;
  prob.evaluate(b, mus, ds);
  detail::WeightState w = detail::update_weights(prob, corr, mus, p);
  Eigen::MatrixXd bread;
  Eigen::VectorXd score;
  detail::accumulate(prob, corr, w, mus, ds, bread, score);

  const auto free_norm = [&](const Eigen::VectorXd& s) {
    return opts.fixed_beta ? s.tail(p - 1).lpNorm<Eigen::Infinity>()
                           : s.lpNorm<Eigen::Infinity>();
  };

  Eigen::VectorXd best = detail::pack(b);
  double best_norm = free_norm(score);
  bool converged = false;
  int iterations = 0;

  for (int it = 1; it <= opts.max_iter; ++it) {
    iterations = it;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(p);
    if (opts.fixed_beta) {
      const Eigen::MatrixXd baa = bread.bottomRightCorner(p - 1, p - 1);
      const auto ld = detail::guarded_ldlt(baa, "fit_gee normal matrix");
      step.tail(p - 1) = ld.solve(score.tail(p - 1));
    } else {
      const auto ld = detail::guarded_ldlt(bread, "fit_gee normal matrix");
      step = ld.solve(score);
    }

    const double current_norm = free_norm(score);
    double lambda = 1.0;
    Eigen::VectorXd accepted;
    std::vector<Eigen::VectorXd> mus_try;
    std::vector<Eigen::MatrixXd> ds_try;
    bool ok = false;
    for (int half = 0; half <= 10; ++half) {
      const Eigen::VectorXd trial = detail::pack(b) + lambda * step;
      try {
        prob.evaluate(detail::unpack(trial), mus_try, ds_try);
        Eigen::MatrixXd bread_try;
        Eigen::VectorXd score_try;
        detail::accumulate(prob, corr, w, mus_try, ds_try, bread_try, score_try);
        if (free_norm(score_try) < current_norm || half == 10) {
          accepted = trial;
          bread = std::move(bread_try);
          score = std::move(score_try);
          ok = true;
          break;
        }
      } catch (const SingularSystemError&) {
      } catch (const ConvergenceError&) {
      }
      lambda *= 0.5;
    }
    if (!ok) {
      // even the maximally damped step failed to evaluate; stop here
      break;
    }

    const double change = (accepted - detail::pack(b)).lpNorm<Eigen::Infinity>();
    b = detail::unpack(accepted);
    mus = mus_try;
    ds = ds_try;
    w = detail::update_weights(prob, corr, mus, p);
    detail::accumulate(prob, corr, w, mus, ds, bread, score);
    if (free_norm(score) < best_norm) {
      best_norm = free_norm(score);
      best = detail::pack(b);
    }
    if (change < opts.tol) {
      converged = true;
      break;
    }
  }

  if (!converged) b = detail::unpack(best);

  // Final pass at the returned estimate.
  prob.evaluate(b, mus, ds);
  w = detail::update_weights(prob, corr, mus, p);
  detail::accumulate(prob, corr, w, mus, ds, bread, score);

  FitResult out;
  out.params = b;
  out.iterations = iterations;
  out.phi_hat = w.phi;
  out.rho_hat = w.rho;
  out.score_norm = free_norm(score);
  const double scale = 1.0 + outcome.lpNorm<Eigen::Infinity>();
  out.converged = converged && out.score_norm < 1e-6 * scale;

  std::vector<Eigen::MatrixXd> vs(mus.size());
  out.cluster_residuals.resize(mus.size());
  for (std::size_t k = 0; k < mus.size(); ++k) {
    out.cluster_residuals[k] = prob.y_blocks[k] - mus[k];
    const auto nk = mus[k].size();
    Eigen::VectorXd sd(nk);
    for (Eigen::Index i = 0; i < nk; ++i)
      sd[i] = std::sqrt(detail::variance_function(opts.link, mus[k][i]));
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(nk, nk);
    if (corr.structure == CorrelationStructure::Exchangeable && nk > 1) {
      r.setConstant(w.rho);
      r.diagonal().setOnes();
    }
    vs[k] = w.phi * sd.asDiagonal() * r * sd.asDiagonal();
  }
  out.sandwich_cov = sandwich_covariance(ds, vs, out.cluster_residuals);

  const auto bld = detail::guarded_ldlt(bread, "fit_gee normal matrix");
  Eigen::MatrixXd naive =
      bld.solve(Eigen::MatrixXd::Identity(bread.rows(), bread.cols()));
  out.naive_cov = 0.5 * (naive + naive.transpose());
  return out;
}

// Naive fit ignoring community structure: every observation is its own
// cluster and the network term uses the whole adjacency. Identity link
// is nonlinear least squares of y on (Z, X^T); logit is ordinary GLM
// scoring on the same design. naive_cov is the classical model-based
// covariance (sigma^2-scaled for identity, phi = 1 for logit).
inline FitResult fit_naive(const DirectedGraph& graph,
                           const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& outcome, Link link,
                           const FitOptions& base_opts = {}) {
  std::vector<int> singleton(graph.node_count());
  for (int i = 0; i < graph.node_count(); ++i) singleton[i] = i + 1;
  FitOptions opts = base_opts;
  opts.link = link;
  opts.z_mode = ZMode::FullNetwork;
  WorkingCorrelation indep;
  FitResult fit = fit_gee(graph, Partition(singleton), design, outcome, indep, opts);
  if (link == Link::Logit) fit.naive_cov /= fit.phi_hat;  // classical GLM scale
  return fit;
}

}  // namespace netgee
