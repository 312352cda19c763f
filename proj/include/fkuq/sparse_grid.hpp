#pragma once

#include "fkuq/field.hpp"
#include "fkuq/forward_mc.hpp"

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace fkuq {

enum class KnotFamily
{
  GaussHermite,
  WeightedLeja
};

/// Level-to-knot map m(i): Linear m(i) = i, TwoStep m(i) = 2i - 1; m(0) = 0.
enum class LevelToKnots
{
  Linear,
  TwoStep
};

int knots_for_level(LevelToKnots growth, int level);

KnotFamily parse_knot_family(const std::string& name);
LevelToKnots parse_level_to_knots(const std::string& name);
std::string to_string(KnotFamily family);
std::string to_string(LevelToKnots growth);

/// 1D knot family plus the Gaussian (mu_n, sigma_n) of every dimension.
struct KnotRule
{
  KnotFamily family = KnotFamily::WeightedLeja;
  LevelToKnots growth = LevelToKnots::Linear;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;

  static KnotRule from_posterior(const PosteriorSummary& post, KnotFamily family, LevelToKnots growth);
  /// Standard normal in every dimension.
  static KnotRule standard(int dimension, KnotFamily family, LevelToKnots growth);
};

struct Rule1D
{
  std::vector<double> points;
  std::vector<double> weights;
};

/// n-point Gauss quadrature for N(mu, sigma^2) (Golub-Welsch on the
/// probabilists' Hermite recurrence, then mapped affinely).
Rule1D gauss_hermite_knots(int n, double mu = 0.0, double sigma = 1.0);

/// First n points of the Gaussian weighted Leja sequence, mapped by mu + sigma y.
/// The standard sequence starts at 0 and maximises exp(-y^2/4) prod |y - y_j|.
std::vector<double> weighted_leja_knots(int n, double mu = 0.0, double sigma = 1.0);

/// Weights of the interpolatory rule on `points` for N(mu, sigma^2): the
/// integrals of the Lagrange basis polynomials. Rejects more than 40 points.
std::vector<double> leja_quadrature_weights(const std::vector<double>& points, double mu = 0.0, double sigma = 1.0);

using MultiIndex = std::vector<int>;

/// Set of multi-indices with entries >= 1, kept in lexicographic order.
class MultiIndexSet
{
 public:
  MultiIndexSet() = default;
  MultiIndexSet(int dimension, const std::vector<MultiIndex>& indices);

  int dimension() const { return dimension_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  bool contains(const MultiIndex& i) const { return lookup_.count(i) > 0; }

  bool is_downward_closed() const;
  /// Throws ValidationError naming the first index whose predecessor is missing.
  void require_downward_closed() const;

 private:
  int dimension_ = 0;
  std::vector<MultiIndex> indices_;
  std::set<MultiIndex> lookup_;
};

/// Isotropic Smolyak set { i >= 1 : sum(i_n - 1) <= w }.
MultiIndexSet smolyak_index_set(int dimension, int level);

/// gamma_i = sum over j in {0,1}^N with i + j in I of (-1)^|j|, aligned with
/// I.indices().
std::vector<int> combination_coefficients(const MultiIndexSet& I);

struct TensorTerm
{
  MultiIndex index;
  int coefficient = 0;
  std::vector<int> knots;              // m(i_n) per dimension
  std::vector<std::uint32_t> point_ids;  // tensor points, last dimension fastest
};

/**
 * Smolyak sparse grid assembled by the combination technique. Only terms
 * with a non-zero coefficient are kept; points are deduplicated across terms
 * (exact match for nested Leja knots, 1e-12 in standard coordinates for
 * Gauss-Hermite knots).
 */
struct SparseGrid
{
  int dimension = 0;
  KnotRule rule;
  MultiIndexSet index_set;
  Eigen::MatrixXd points;  // num_points x dimension
  Eigen::VectorXd weights;
  std::vector<TensorTerm> terms;
  /// standard_rules[m] is the m-point rule for N(0, 1) (empty if unused).
  std::vector<Rule1D> standard_rules;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

SparseGrid build_sparse_grid(int dimension, const KnotRule& rule, const MultiIndexSet& I);

/// Number of distinct collocation points without building the full grid.
std::size_t count_sparse_grid_points(int dimension, KnotFamily family, LevelToKnots growth, const MultiIndexSet& I);

/// E ~ Q_I[Q], V ~ Q_I[(Q - Q_I[Q])^2] (equal to Q_I[Q^2] - Q_I[Q]^2 for unit
/// weight sum). Variances in [-1e-8, 0) are clamped to 0; more negative
/// values raise NumericalError.
MomentSeries sc_moments(const QoIModel& model, const SparseGrid& grid, int threads = 0);

/// Quadrature moments of precomputed scalar values.
double sc_expectation(const SparseGrid& grid, const Eigen::VectorXd& values);

/// Sparse-grid interpolant S_I[u](p) from values at the grid points.
double interpolate(const SparseGrid& grid, const Eigen::VectorXd& values, const ParameterVector& p);

/// `point_index,p_1..p_N,weight`.
void write_grid_csv(const SparseGrid& grid, const std::filesystem::path& path);

/// Errors of SC estimates at `levels` against the estimate at `reference_level`.
struct ScConvergence
{
  MomentSeries reference;
  std::vector<ErrorRow> rows;
};
ScConvergence sc_convergence(const QoIModel& model, const KnotRule& rule, const std::vector<int>& levels,
                             int reference_level, const Eigen::VectorXd& region_weights, int threads = 0);

}  // namespace fkuq
