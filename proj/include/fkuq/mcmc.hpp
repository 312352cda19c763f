#pragma once

#include "fkuq/field.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>

namespace fkuq {

struct McmcConfig
{
  double proposal_sigma = 1e-2;  // random-walk step, Sigma = proposal_sigma^2 I
  double likelihood_sigma = 0.1;
  int chain_length = 100000;
  int burn_in = 10000;
  std::uint64_t seed = 0;
  PriorBounds bounds;
  double horizon = 7.0;  // years between the two scans
  /// Chains longer than this are not kept in memory; samples then only reach
  /// the step callback and the running post-burn-in moments.
  int memory_limit_steps = 2000000;

  void validate() const;
};

/// Post-burn-in running moments (Welford), filled for every chain.
struct RunningMoments
{
  long count = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;

  void push(const Eigen::VectorXd& x);
};

struct Chain
{
  Eigen::MatrixXd samples;        // chain_length x N, row i holds p^(i+1); empty when streamed
  std::vector<std::uint8_t> accepted_flags;
  long accepted = 0;
  long model_failures = 0;
  int burn_in = 0;
  RunningMoments post_burn_in;

  bool stored() const { return samples.rows() > 0; }
  long length() const { return static_cast<long>(accepted_flags.size()); }
  double acceptance_rate() const { return length() ? static_cast<double>(accepted) / length() : 0.0; }
};

/// p -> Q(p): regional QoIs of the forward model at the calibration horizon.
using CalibrationModel = std::function<Eigen::VectorXd(const ParameterVector&)>;

/// Called after every step with the 1-based step index and the new state.
using ChainObserver = std::function<void(int step, const ParameterVector& p, bool accepted)>;

/// Gaussian log-likelihood with constants dropped: -sum (q_model - q_data)^2 / (2 sigma^2).
double log_likelihood(const Eigen::VectorXd& q_model, const Eigen::VectorXd& q_data, double sigma);

/// log rho for moving from p_prev to p_star; -inf when p_star leaves the prior box.
double acceptance_log_ratio(const ParameterVector& p_star, const ParameterVector& p_prev,
                            const Eigen::VectorXd& q_star, const Eigen::VectorXd& q_prev,
                            const Eigen::VectorXd& q_data, const McmcConfig& cfg);

/**
 * Random-walk Metropolis-Hastings started at the prior box midpoint.
 *
 * Each step draws delta ~ N(0, proposal_sigma^2 I), then u ~ U(0, 1), and
 * accepts when log rho >= 0 or log u < log rho. Proposals outside the box
 * are rejected without evaluating the model. A model that throws
 * NumericalError or returns non-finite values counts as a rejection.
 */
Chain run_mcmc(const CalibrationModel& model, const Eigen::VectorXd& q_data, const McmcConfig& cfg,
               const ChainObserver& observer = {});

/// Mean and unbiased variance of the samples after `burn_in`.
PosteriorSummary posterior_summary(const Chain& chain, int burn_in);

/// Effective sample size from the initial positive sequence of
/// autocorrelation pair sums.
double effective_sample_size(const Eigen::VectorXd& x);

/// Kolmogorov-Smirnov distance between the empirical CDF of x and U(a, b).
double ks_statistic_uniform(Eigen::VectorXd x, double a, double b);

/// Asymptotic one-sample KS critical value at level 1% for sample size n.
double ks_critical_value_1pct(double n);

/// `step,p_1..p_N,accepted`.
void write_chain_csv(const Chain& chain, const std::filesystem::path& path);

struct ChainTable
{
  Eigen::MatrixXd samples;
  std::vector<std::uint8_t> accepted;
};
ChainTable read_chain_csv(const std::filesystem::path& path);

}  // namespace fkuq
