#pragma once

#include "fkuq/field.hpp"
#include "fkuq/qoi.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace fkuq {

/// p -> QoI series (global and regional averages at the report times).
using QoIModel = std::function<QoISeries(const ParameterVector&)>;

/// Expectation and variance of every QoI at each report time.
struct MomentSeries
{
  std::vector<double> times;
  std::vector<double> global_mean;
  std::vector<double> global_var;
  std::vector<Eigen::VectorXd> region_mean;
  std::vector<Eigen::VectorXd> region_var;
  long num_samples = 0;  // model evaluations behind the estimate
};

/// p = mu + sigma (.) z, z ~ N(0, I) drawn from a stream keyed by
/// (base_seed, sample_index) only.
ParameterVector sample_parameters(const PosteriorSummary& post, std::uint64_t sample_index, std::uint64_t base_seed);

/// Sample mean and unbiased (Q - 1) variance, reduced in index order.
MomentSeries moments_from_samples(const std::vector<QoISeries>& samples);

/// Plain Monte Carlo with `count` posterior samples. Any model failure
/// aborts the estimate.
MomentSeries mc_estimate(const QoIModel& model, const PosteriorSummary& post, long count, std::uint64_t base_seed,
                         int threads = 0);

/// Absolute errors of an estimate against a reference at one time.
struct ErrorRow
{
  int level = -1;  // sparse-grid level, -1 for Monte Carlo
  long evaluations = 0;
  double time = 0.0;
  double global_mean = 0.0;
  double global_var = 0.0;
  double lobe_mean = 0.0;  // |<mu_Q> - <mu_Q>_ref| with volume-weighted lobe averages
  double lobe_var = 0.0;
  Eigen::VectorXd region_mean;
  Eigen::VectorXd region_var;
};

/// One row per time instance; estimate and reference must share times.
std::vector<ErrorRow> moment_errors(const MomentSeries& estimate, const MomentSeries& reference,
                                    const Eigen::VectorXd& region_weights);

/**
 * Monte Carlo error against `reference` for every entry of `counts`
 * (increasing). The largest count is sampled once; smaller counts use the
 * leading samples of the same keyed streams.
 */
std::vector<ErrorRow> mc_convergence(const QoIModel& model, const PosteriorSummary& post, const std::vector<long>& counts,
                                     const MomentSeries& reference, const Eigen::VectorXd& region_weights,
                                     std::uint64_t base_seed, int threads = 0);

/// Least-squares slope of log(y) against log(x). NaN if any y <= 0.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// `time,mean_global,var_global,mean_lobes,var_lobes,std_lobes,mean_region_j...,var_region_j...,samples`.
void write_moments_csv(const MomentSeries& m, const Eigen::VectorXd& region_weights, const std::filesystem::path& path);
MomentSeries read_moments_csv(const std::filesystem::path& path);

void write_errors_csv(const std::vector<ErrorRow>& rows, const std::filesystem::path& path);

}  // namespace fkuq
