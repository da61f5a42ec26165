#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "netgee/communities.hpp"
#include "netgee/errors.hpp"
#include "netgee/gee.hpp"
#include "netgee/model.hpp"
#include "netgee/sbm.hpp"

namespace netgee {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided normal p-value for z = estimate / sandwich SE.
struct WaldTest {
  double z = 0.0;
  double p_value = 1.0;
};

inline WaldTest wald_statistic(double estimate, double se) {
  if (!(se > 0.0)) throw std::invalid_argument("wald test: standard error must be positive");
  WaldTest t;
  t.z = estimate / se;
  t.p_value = std::erfc(std::abs(t.z) / std::sqrt(2.0));
  return t;
}

inline WaldTest wald_test(const FitResult& fit, int coef_index) {
  if (coef_index < 0 || coef_index >= fit.params.dimension())
    throw std::out_of_range("wald test: coefficient index out of range");
  const double estimate = coef_index == 0 ? fit.params.beta
                                          : fit.params.alpha[coef_index - 1];
  return wald_statistic(estimate, fit.sandwich_se(coef_index));
}

// One-sample Kolmogorov-Smirnov p-value against the standard normal
// (asymptotic Kolmogorov distribution with the usual finite-sample
// effective size).
inline double ks_normal_pvalue(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 5) throw std::invalid_argument("KS test needs at least 5 values");
  std::sort(values.begin(), values.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = normal_cdf(values[i]);
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
  }
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * j * j * lambda * lambda);
    p += (j % 2 == 1) ? term : -term;
  }
  return std::min(1.0, std::max(0.0, p));
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NETGEE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Static-chunked parallel loop; fn(i) must only touch slot i of any
// shared output so results do not depend on the thread count.
template <typename F>
void parallel_for(int count, int threads, F&& fn) {
  threads = std::min(std::max(threads, 1), std::max(count, 1));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&fn, t, threads, count] {
      for (int i = t; i < count; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

enum class Method { GeeIndependence, GeeExchangeable, Naive };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::GeeIndependence: return "GEE-indep";
    case Method::GeeExchangeable: return "GEE-exch";
    case Method::Naive: return "Naive";
  }
  return "?";
}

// Simulation coefficients used throughout the study harnesses.
inline Eigen::VectorXd default_alpha0() {
  Eigen::VectorXd a(10);
  a << 1, 1, 1, 1, 0.5, 0.5, 0.5, -0.5, -0.5, 2;
  return a;
}

struct SimStudyConfig {
  int communities = 20;      // K
  int community_size = 10;   // m
  double p = 0.8;
  double q = 0.0;
  double beta0 = 0.5;
  Eigen::VectorXd alpha0 = default_alpha0();
  Link link = Link::Identity;
  int replications = 1000;  // B
  std::uint64_t base_seed = 20240501;
  std::vector<Method> methods = {Method::GeeIndependence,
                                 Method::GeeExchangeable, Method::Naive};
  DetectionAlgorithm detection = GreedyModularity{};
  ZMode z_mode = ZMode::FullNetwork;

  int node_count() const { return communities * community_size; }
  int l() const { return static_cast<int>(alpha0.size()); }

  void validate() const {
    SbmConfig sbm{communities, community_size, p, q, 0};
    sbm.validate();
    if (replications < 1) throw std::invalid_argument("B must be >= 1");
    if (alpha0.size() < 1) throw std::invalid_argument("alpha0 must be non-empty");
    if (methods.empty()) throw std::invalid_argument("no methods requested");
  }
};

struct MethodFit {
  Eigen::VectorXd estimate;  // (beta, alpha)
  double beta_se = std::numeric_limits<double>::quiet_NaN();
  double p_value = 1.0;
  bool converged = false;
};

struct ReplicationOutcome {
  bool failed = false;
  std::string error;
  std::vector<MethodFit> fits;  // aligned with config.methods
  double avg_degree = 0.0;
  int detected_communities = 0;
};

namespace detail {

inline DetectionAlgorithm reseeded(DetectionAlgorithm algo, std::uint64_t seed) {
  if (auto* lp = std::get_if<LabelPropagation>(&algo)) lp->seed = seed;
  if (auto* gm = std::get_if<GreedyModularity>(&algo)) gm->seed = seed;
  return algo;
}

}  // namespace detail

// Simulates and fits replication b. Everything derives from
// (base_seed, b); no state crosses replications.
inline ReplicationOutcome run_replication(const SimStudyConfig& config, int b) {
  ReplicationOutcome out;
  const std::uint64_t rep_seed = Rng::derive(config.base_seed, static_cast<std::uint64_t>(b));
  try {
    SbmConfig sbm{config.communities, config.community_size, config.p, config.q,
                  Rng::derive(rep_seed, 1)};
    const DirectedGraph graph = sample_sbm(sbm);
    const int n = graph.node_count();
    const Eigen::MatrixXd design = simulate_design(
        config.communities, config.community_size, config.l(), Rng::derive(rep_seed, 2));
    const ModelParams truth{config.beta0, config.alpha0};
    Eigen::VectorXd mu;
    if (config.link == Link::Identity)
      mu = mean_continuous_block(graph.weights(), design, truth, n);
    else
      mu = mean_fixed_point(graph.weights(), design, truth, config.link, 1e-12, 5000, n);
    const Eigen::VectorXd y = simulate_outcomes(mu, config.link, Rng::derive(rep_seed, 3));

    Partition partition =
        std::holds_alternative<Oracle>(config.detection)
            ? detect(graph, config.detection)
            : detect(graph, detail::reseeded(config.detection, Rng::derive(rep_seed, 4)));
    out.detected_communities = partition.community_count();
    out.avg_degree = graph.edge_count() / n;

    FitOptions opts;
    opts.link = config.link;
    opts.z_mode = config.z_mode;
    for (const Method m : config.methods) {
      MethodFit mf;
      if (m == Method::Naive) {
        const FitResult fit = fit_naive(graph, design, y, config.link, opts);
        mf.estimate = detail::pack(fit.params);
        mf.beta_se = fit.naive_se(0);
        mf.converged = fit.converged;
      } else {
        WorkingCorrelation corr;
        corr.structure = m == Method::GeeExchangeable
                             ? CorrelationStructure::Exchangeable
                             : CorrelationStructure::Independence;
        const FitResult fit = fit_gee(graph, partition, design, y, corr, opts);
        mf.estimate = detail::pack(fit.params);
        mf.beta_se = fit.sandwich_se(0);
        mf.converged = fit.converged;
      }
      mf.p_value = wald_statistic(mf.estimate[0], mf.beta_se).p_value;
      out.fits.push_back(std::move(mf));
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    out.fits.clear();
  }
  return out;
}

inline std::vector<ReplicationOutcome> run_replications(const SimStudyConfig& config,
                                                        int threads) {
  config.validate();
  std::vector<ReplicationOutcome> results(config.replications);
  parallel_for(config.replications, resolve_threads(threads),
               [&](int b) { results[b] = run_replication(config, b); });
  return results;
}

namespace detail {

inline void enforce_failure_budget(const std::vector<ReplicationOutcome>& reps) {
  int failed = 0;
  std::string first;
  for (const auto& r : reps)
    if (r.failed) {
      if (failed == 0) first = r.error;
      ++failed;
    }
  if (failed * 20 > static_cast<int>(reps.size()))  // > 5%
    throw ExperimentError("fit-failure budget exceeded: " + std::to_string(failed) +
                          "/" + std::to_string(reps.size()) +
                          " replications failed; first error: " + first);
}

}  // namespace detail

struct Type1Row {
  Method method;
  double rate = 0.0;
  int used = 0;
  int failures = 0;
  int nonconverged = 0;
};

struct Type1Result {
  std::vector<Type1Row> rows;
  double avg_degree = 0.0;
  double avg_detected_communities = 0.0;
};

// Null rejection rates of the Wald test at the given level, computed
// from already-simulated replications.
inline Type1Result summarize_type1(const SimStudyConfig& config,
                                   const std::vector<ReplicationOutcome>& reps,
                                   double level = 0.05) {
  detail::enforce_failure_budget(reps);

  Type1Result out;
  int used = 0;
  for (const auto& r : reps)
    if (!r.failed) {
      ++used;
      out.avg_degree += r.avg_degree;
      out.avg_detected_communities += r.detected_communities;
    }
  out.avg_degree /= std::max(used, 1);
  out.avg_detected_communities /= std::max(used, 1);

  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    Type1Row row;
    row.method = config.methods[mi];
    for (const auto& r : reps) {
      if (r.failed) {
        ++row.failures;
        continue;
      }
      const auto& mf = r.fits[mi];
      if (!mf.converged) ++row.nonconverged;
      if (mf.p_value < level) row.rate += 1.0;
      ++row.used;
    }
    row.rate /= std::max(row.used, 1);
    out.rows.push_back(row);
  }
  return out;
}

inline Type1Result type1_error_experiment(const SimStudyConfig& config,
                                          double level = 0.05, int threads = 0) {
  if (config.beta0 != 0.0)
    throw std::invalid_argument("Type-I experiment requires beta0 = 0");
  return summarize_type1(config, run_replications(config, threads), level);
}

struct BiasVarianceRow {
  Method method;
  double bias_sq = 0.0;
  double se = 0.0;         // mean of the method's reported SE of beta-hat
  double mc_sd = 0.0;      // across-replication sd of beta-hat
  double mean_beta = 0.0;
  Eigen::VectorXd mean_estimate;  // (beta, alpha)
  int used = 0;
  int failures = 0;
};

// Bias^2 and standard error of the network-effect estimate per method.
inline std::vector<BiasVarianceRow> summarize_bias_variance(
    const SimStudyConfig& config, const std::vector<ReplicationOutcome>& reps) {
  detail::enforce_failure_budget(reps);

  std::vector<BiasVarianceRow> rows;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    BiasVarianceRow row;
    row.method = config.methods[mi];
    row.mean_estimate = Eigen::VectorXd::Zero(1 + config.alpha0.size());
    std::vector<double> betas;
    for (const auto& r : reps) {
      if (r.failed) {
        ++row.failures;
        continue;
      }
      const auto& mf = r.fits[mi];
      betas.push_back(mf.estimate[0]);
      row.se += mf.beta_se;
      row.mean_estimate += mf.estimate;
      ++row.used;
    }
    const double nb = static_cast<double>(betas.size());
    row.se /= std::max(nb, 1.0);
    row.mean_estimate /= std::max(nb, 1.0);
    double mean = 0.0;
    for (const double v : betas) mean += v;
    mean /= std::max(nb, 1.0);
    row.mean_beta = mean;
    double ss = 0.0;
    for (const double v : betas) ss += (v - mean) * (v - mean);
    row.mc_sd = nb > 1 ? std::sqrt(ss / (nb - 1.0)) : 0.0;
    row.bias_sq = (mean - config.beta0) * (mean - config.beta0);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<BiasVarianceRow> bias_variance_experiment(
    const SimStudyConfig& config, int threads = 0) {
  return summarize_bias_variance(config, run_replications(config, threads));
}

// Exceedance p-value of an observed network effect against a simulated
// null distribution of beta-hat (add-one smoothing avoids exact zeros).
// The first configured method supplies the estimator.
inline double empirical_null_test(const SimStudyConfig& config,
                                  double observed_beta, int threads = 0) {
  if (config.beta0 != 0.0)
    throw std::invalid_argument("empirical null requires beta0 = 0");
  if (config.replications < 100)
    throw std::invalid_argument("empirical null requires B >= 100");
  const auto reps = run_replications(config, threads);
  detail::enforce_failure_budget(reps);
  int exceed = 0, used = 0;
  for (const auto& r : reps) {
    if (r.failed) continue;
    ++used;
    if (std::abs(r.fits[0].estimate[0]) >= std::abs(observed_beta)) ++exceed;
  }
  return (1.0 + exceed) / (1.0 + used);
}

struct RateCheckConfig {
  double gamma = 0.0;  // in [0, 2)
  std::vector<std::pair<int, int>> ladder;  // (m, K), increasing size
  double p = 0.6;
  double q = 0.2;
  int replications = 500;
  std::uint64_t base_seed = 7;

  void validate() const {
    if (gamma < 0.0 || gamma >= 2.0) throw std::invalid_argument("gamma must lie in [0,2)");
    if (ladder.size() < 3) throw std::invalid_argument("rate check needs >= 3 ladder sizes");
    if (replications < 10) throw std::invalid_argument("too few replications");
  }
};

struct RateCheckSize {
  int m = 0, communities = 0;
  double sd_scaled_p = 0.0;  // sd of m^{1+g/2} K^{1/2} (p_hat - p)
  double sd_scaled_q = 0.0;  // sd of m^{1+g/2} K (q_hat - q)
  double ks_p_within = std::numeric_limits<double>::quiet_NaN();
  double ks_p_between = std::numeric_limits<double>::quiet_NaN();
};

struct RateCheckResult {
  std::vector<RateCheckSize> sizes;
  bool p_nonincreasing = true;  // within 20% slack up the ladder
  bool q_nonincreasing = true;
  double max_ratio = 0.0;  // max over sizes of sd_scaled_q / sd_scaled_p
};

// Scaled-error spread and CLT diagnostics for the empirical edge
// probabilities up a ladder of (m, K) sizes.
inline RateCheckResult rate_check(const RateCheckConfig& config, int threads = 0) {
  config.validate();
  RateCheckResult out;
  const bool degenerate_p = config.p == 0.0 || config.p == 1.0;
  const bool degenerate_q = config.q == 0.0 || config.q == 1.0;
  for (std::size_t s = 0; s < config.ladder.size(); ++s) {
    const auto [m, kc] = config.ladder[s];
    RateCheckSize size;
    size.m = m;
    size.communities = kc;
    std::vector<double> ep(config.replications), eq(config.replications),
        zw(config.replications), zb(config.replications);
    const Partition planted = planted_partition({kc, m, 0.5, 0.5, 0});
    parallel_for(config.replications, resolve_threads(threads), [&](int b) {
      SbmConfig sbm{kc, m, config.p, config.q,
                    Rng::derive(config.base_seed, s * 1000003ULL + b)};
      const DirectedGraph g = sample_sbm(sbm);
      const EdgeProbEstimate est = estimate_edge_probs(g, planted);
      ep[b] = est.p_hat - config.p;
      eq[b] = est.q_hat - config.q;
      const double nw = est.within_pairs, nb = est.between_pairs;
      zw[b] = degenerate_p ? 0.0
                           : (est.p_hat - config.p) * nw /
                                 std::sqrt(nw * config.p * (1.0 - config.p));
      zb[b] = degenerate_q ? 0.0
                           : (est.q_hat - config.q) * nb /
                                 std::sqrt(nb * config.q * (1.0 - config.q));
    });
    const double scale_p = std::pow(m, 1.0 + config.gamma / 2.0) * std::sqrt(kc);
    const double scale_q = std::pow(m, 1.0 + config.gamma / 2.0) * kc;
    const auto sd = [](const std::vector<double>& v, double scale) {
      double mean = 0.0;
      for (const double x : v) mean += x;
      mean /= v.size();
      double ss = 0.0;
      for (const double x : v) ss += (x - mean) * (x - mean);
      return scale * std::sqrt(ss / (v.size() - 1.0));
    };
    size.sd_scaled_p = sd(ep, scale_p);
    size.sd_scaled_q = sd(eq, scale_q);
    if (!degenerate_p) size.ks_p_within = ks_normal_pvalue(zw);
    if (!degenerate_q) size.ks_p_between = ks_normal_pvalue(zb);
    out.sizes.push_back(size);
  }
  for (std::size_t s = 1; s < out.sizes.size(); ++s) {
    if (out.sizes[s].sd_scaled_p > 1.2 * out.sizes[s - 1].sd_scaled_p)
      out.p_nonincreasing = false;
    if (out.sizes[s].sd_scaled_q > 1.2 * out.sizes[s - 1].sd_scaled_q)
      out.q_nonincreasing = false;
  }
  for (const auto& size : out.sizes)
    if (size.sd_scaled_p > 0.0)
      out.max_ratio = std::max(out.max_ratio, size.sd_scaled_q / size.sd_scaled_p);
  return out;
}

}  // namespace netgee
