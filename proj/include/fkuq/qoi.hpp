#pragma once

#include "fkuq/connectome.hpp"
#include "fkuq/solver.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace fkuq {

/// Divisor used by regional_averages.
enum class RegionNormalization
{
  RegionVolume,  // sum of (unmasked) volumes inside the region
  TotalVolume    // sum of (unmasked) volumes over the whole graph
};

/// Quantities of interest of one trajectory at each sampled time.
struct QoISeries
{
  std::vector<double> times;
  std::vector<double> global_avg;             // unweighted node mean
  std::vector<Eigen::VectorXd> regional_avg;  // volume-weighted mean per region
};

double spatial_average(const NodeField& c);

/// Volume-weighted average of c inside each region. Nodes with mask[k] ==
/// false are dropped from both numerator and divisor.
Eigen::VectorXd regional_averages(const Connectome& g, const NodeField& c, const std::vector<bool>* mask = nullptr,
                                  RegionNormalization norm = RegionNormalization::RegionVolume);

QoISeries compute_qoi_series(const Connectome& g, const Trajectory& traj);

/// Weighted mean over regions, sum_j w_j x_j (w = region volume fractions).
double lobe_average(const Eigen::VectorXd& per_region, const Eigen::VectorXd& weights);

/// `time,global,region_1..region_R`.
void write_qoi_csv(const QoISeries& q, const std::filesystem::path& path);
/// `time,region_1,...,region_R`.
void write_regional_csv(const QoISeries& q, const std::filesystem::path& path);

}  // namespace fkuq
