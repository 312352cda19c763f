#pragma once

#include "fkuq/connectome.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace fkuq {

/// Region-wise reaction coefficients p (1/years); entry l belongs to region l+1.
using ParameterVector = Eigen::VectorXd;

/// Uniform prior box [a, b] per region.
struct PriorBounds
{
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  PriorBounds() = default;
  PriorBounds(Eigen::VectorXd lower, Eigen::VectorXd upper);

  Eigen::Index size() const { return a.size(); }
  Eigen::VectorXd midpoint() const { return 0.5 * (a + b); }
};

/// Independent Gaussian marginals N(mu_l, var_l) per region.
struct PosteriorSummary
{
  Eigen::VectorXd mu;
  Eigen::VectorXd var;

  Eigen::Index size() const { return mu.size(); }
  Eigen::VectorXd sigma() const { return var.array().sqrt(); }
};

/// One entry of the priors/posterior JSON document. Fields not known for a
/// given region are NaN.
struct RegionRecord
{
  std::string name;
  double a = std::numeric_limits<double>::quiet_NaN();
  double b = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  double var = std::numeric_limits<double>::quiet_NaN();
};

std::vector<RegionRecord> load_region_records(const std::filesystem::path& path);
void save_region_records(const std::vector<RegionRecord>& records, const std::filesystem::path& path);

PriorBounds prior_from_records(const std::vector<RegionRecord>& records);
/// Throws when any region lacks mu/var or has var <= 0.
PosteriorSummary posterior_from_records(const std::vector<RegionRecord>& records);
std::vector<RegionRecord> make_records(const std::vector<std::string>& names, const PriorBounds* prior,
                                       const PosteriorSummary* posterior);

/// Seven-lobe reference configuration (frontal, temporal, parietal, insular,
/// limbic, occipital, subcortical): prior boxes and calibrated marginals
/// reported for an amyloid-PET patient. Used as realistic defaults.
const std::vector<std::string>& lobe_names();
PriorBounds lobe_prior();
PosteriorSummary lobe_posterior();

/// alpha[k] = p[region(k) - 1].
NodeField assemble_reaction_vector(const Connectome& g, const ParameterVector& p);

/// Unnormalised log density of the uniform box prior: 0 inside, -inf outside.
double log_prior(const ParameterVector& p, const PriorBounds& bounds);

double gaussian_logpdf(double y, double mu, double sigma);

}  // namespace fkuq
