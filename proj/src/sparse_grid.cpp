#include "fkuq/sparse_grid.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"
#include "fkuq/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace fkuq {

int knots_for_level(LevelToKnots growth, int level)
{
  if (level < 0) throw ValidationError("knots_for_level: negative level");
  if (level == 0) return 0;
  return growth == LevelToKnots::Linear ? level : 2 * level - 1;
}

KnotFamily parse_knot_family(const std::string& name)
{
  if (name == "leja" || name == "weighted-leja") return KnotFamily::WeightedLeja;
  if (name == "gauss-hermite" || name == "gh") return KnotFamily::GaussHermite;
  throw ValidationError("unknown knot family '" + name + "' (expected leja or gauss-hermite)");
}

LevelToKnots parse_level_to_knots(const std::string& name)
{
  if (name == "linear") return LevelToKnots::Linear;
  if (name == "two-step") return LevelToKnots::TwoStep;
  throw ValidationError("unknown level-to-knot map '" + name + "' (expected linear or two-step)");
}

std::string to_string(KnotFamily family)
{
  return family == KnotFamily::WeightedLeja ? "leja" : "gauss-hermite";
}

std::string to_string(LevelToKnots growth)
{
  return growth == LevelToKnots::Linear ? "linear" : "two-step";
}

KnotRule KnotRule::from_posterior(const PosteriorSummary& post, KnotFamily family, LevelToKnots growth)
{
  for (Eigen::Index l = 0; l < post.size(); ++l)
    if (!(post.var[l] > 0.0)) throw ValidationError("sparse grid: posterior variance must be positive");
  return {family, growth, post.mu, post.sigma()};
}

KnotRule KnotRule::standard(int dimension, KnotFamily family, LevelToKnots growth)
{
  return {family, growth, Eigen::VectorXd::Zero(dimension), Eigen::VectorXd::Ones(dimension)};
}

// ---------------------------------------------------------------------------
// One-dimensional rules
// ---------------------------------------------------------------------------

namespace {

Rule1D standard_gauss_hermite(int n)
{
  if (n < 1) throw ValidationError("gauss_hermite_knots: n must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) throw NumericalError("gauss_hermite_knots: eigen solver did not converge");

  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.points[k] = eig.eigenvalues()[k];
    const double v = eig.eigenvectors()(0, k);
    rule.weights[k] = v * v;
  }
  // Symmetrise: nodes come in +- pairs, the middle node of an odd rule is 0.
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (rule.points[n - 1 - k] - rule.points[k]);
    const double w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
    rule.points[k] = -x;
    rule.points[n - 1 - k] = x;
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.0;
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

double leja_log_objective(double y, const std::vector<double>& seq)
{
  double f = -0.25 * y * y;
  for (double s : seq) f += std::log(std::abs(y - s));
  return f;
}

std::vector<double> standard_leja(int n)
{
  static std::mutex mutex;
  static std::vector<double> sequence{0.0};

  std::lock_guard lock(mutex);
  constexpr int kCandidates = 100001;
  constexpr double kHalfWidth = 20.0;
  const double h = 2.0 * kHalfWidth / (kCandidates - 1);
  while (static_cast<int>(sequence.size()) < n) {
    int best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kCandidates; ++k) {
      const double y = -kHalfWidth + 2.0 * kHalfWidth * k / (kCandidates - 1);
      const double f = leja_log_objective(y, sequence);
      if (f > best_value) {
        best_value = f;
        best = k;
      }
    }
    double lo = -kHalfWidth + 2.0 * kHalfWidth * best / (kCandidates - 1) - h;
    double hi = lo + 2.0 * h;
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = leja_log_objective(x1, sequence), f2 = leja_log_objective(x2, sequence);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = leja_log_objective(x2, sequence);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = leja_log_objective(x1, sequence);
      }
    }
    double y = 0.5 * (lo + hi);
    const double grid_y = -kHalfWidth + 2.0 * kHalfWidth * best / (kCandidates - 1);
    if (leja_log_objective(y, sequence) < best_value) y = grid_y;
    // The objective is flat to machine precision within ~1e-8 of the
    // maximiser; finish with Newton steps on its derivative.
    for (int it = 0; it < 8; ++it) {
      double d1 = -0.5 * y, d2 = -0.5;
      for (double s : sequence) {
        const double inv = 1.0 / (y - s);
        d1 += inv;
        d2 -= inv * inv;
      }
      const double next = y - d1 / d2;
      if (!(std::abs(next - y) <= h)) break;
      y = next;
    }
    sequence.push_back(y);
  }
  return {sequence.begin(), sequence.begin() + n};
}

/// l_j(z) for the Lagrange basis on `nodes`.
void lagrange_basis(const std::vector<double>& nodes, double z, double* out)
{
  const std::size_t n = nodes.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (z == nodes[j]) {
      std::fill(out, out + n, 0.0);
      out[j] = 1.0;
      return;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double v = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) v *= (z - nodes[k]) / (nodes[j] - nodes[k]);
    out[j] = v;
  }
}

Rule1D standard_leja_rule(int n)
{
  Rule1D rule;
  rule.points = standard_leja(n);
  rule.weights = leja_quadrature_weights(rule.points);
  return rule;
}

Rule1D standard_rule(KnotFamily family, int n)
{
  return family == KnotFamily::GaussHermite ? standard_gauss_hermite(n) : standard_leja_rule(n);
}

}  // namespace

Rule1D gauss_hermite_knots(int n, double mu, double sigma)
{
  if (!(sigma > 0.0)) throw ValidationError("gauss_hermite_knots: sigma must be positive");
  Rule1D rule = standard_gauss_hermite(n);
  for (double& x : rule.points) x = mu + sigma * x;
  return rule;
}

std::vector<double> weighted_leja_knots(int n, double mu, double sigma)
{
  if (n < 1) throw ValidationError("weighted_leja_knots: n must be >= 1");
  std::vector<double> pts = standard_leja(n);
  for (double& x : pts) x = mu + sigma * x;
  return pts;
}

std::vector<double> leja_quadrature_weights(const std::vector<double>& points, double mu, double sigma)
{
  constexpr std::size_t kMaxPoints = 40;
  if (points.empty()) throw ValidationError("leja_quadrature_weights: no points");
  if (points.size() > kMaxPoints)
    throw ValidationError("leja_quadrature_weights: " + std::to_string(points.size()) +
                          " points exceed the conditioning limit of " + std::to_string(kMaxPoints));
  if (!(sigma > 0.0)) throw ValidationError("leja_quadrature_weights: sigma must be positive");
  std::vector<double> z(points.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (points[j] - mu) / sigma;
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("leja_quadrature_weights: points must be distinct");

  // Lagrange polynomials have degree n-1; a Gauss rule with n/2 + 1 nodes
  // integrates them exactly.
  const Rule1D gauss = standard_gauss_hermite(static_cast<int>(z.size() / 2 + 1));
  std::vector<double> weights(z.size(), 0.0), basis(z.size());
  for (std::size_t q = 0; q < gauss.points.size(); ++q) {
    lagrange_basis(z, gauss.points[q], basis.data());
    for (std::size_t j = 0; j < z.size(); ++j) weights[j] += gauss.weights[q] * basis[j];
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Multi-index sets
// ---------------------------------------------------------------------------

namespace {

std::string describe(const MultiIndex& i)
{
  std::ostringstream ss;
  ss << '(';
  for (std::size_t n = 0; n < i.size(); ++n) ss << (n ? "," : "") << i[n];
  ss << ')';
  return ss.str();
}

}  // namespace

MultiIndexSet::MultiIndexSet(int dimension, const std::vector<MultiIndex>& indices)
    : dimension_(dimension)
{
  if (dimension < 1) throw ValidationError("multi-index set: dimension must be >= 1");
  for (const MultiIndex& i : indices) {
    if (static_cast<int>(i.size()) != dimension)
      throw ValidationError("multi-index set: index " + describe(i) + " has the wrong dimension");
    for (int v : i)
      if (v < 1) throw ValidationError("multi-index set: entries must be >= 1 in " + describe(i));
    lookup_.insert(i);
  }
  indices_.assign(lookup_.begin(), lookup_.end());
}

bool MultiIndexSet::is_downward_closed() const
{
  for (const MultiIndex& i : indices_) {
    MultiIndex prev = i;
    for (int n = 0; n < dimension_; ++n) {
      if (i[n] == 1) continue;
      --prev[n];
      if (!contains(prev)) return false;
      ++prev[n];
    }
  }
  return true;
}

void MultiIndexSet::require_downward_closed() const
{
  for (const MultiIndex& i : indices_) {
    MultiIndex prev = i;
    for (int n = 0; n < dimension_; ++n) {
      if (i[n] == 1) continue;
      --prev[n];
      if (!contains(prev))
        throw ValidationError("multi-index set is not downward-closed: " + describe(i) + " lacks " + describe(prev));
      ++prev[n];
    }
  }
}

MultiIndexSet smolyak_index_set(int dimension, int level)
{
  if (dimension < 1) throw ValidationError("smolyak_index_set: dimension must be >= 1");
  if (level < 0) throw ValidationError("smolyak_index_set: level must be >= 0");
  std::vector<MultiIndex> out;
  MultiIndex current(dimension, 1);
  auto recurse = [&](auto&& self, int n, int budget) -> void {
    if (n == dimension) {
      out.push_back(current);
      return;
    }
    for (int extra = 0; extra <= budget; ++extra) {
      current[n] = 1 + extra;
      self(self, n + 1, budget - extra);
    }
    current[n] = 1;
  };
  recurse(recurse, 0, level);
  return MultiIndexSet(dimension, out);
}

std::vector<int> combination_coefficients(const MultiIndexSet& I)
{
  I.require_downward_closed();
  const int d = I.dimension();
  std::vector<int> gamma;
  gamma.reserve(I.size());
  MultiIndex shifted(d);
  for (const MultiIndex& i : I.indices()) {
    int g = 0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      int bits = 0;
      for (int n = 0; n < d; ++n) {
        const int j = (mask >> n) & 1u;
        shifted[n] = i[n] + j;
        bits += j;
      }
      if (I.contains(shifted)) g += (bits % 2 == 0) ? 1 : -1;
    }
    gamma.push_back(g);
  }
  return gamma;
}

// ---------------------------------------------------------------------------
// Grid assembly
// ---------------------------------------------------------------------------

namespace {

/// Standard rules plus a global id for every distinct 1D knot.
struct KnotCatalogue
{
  std::vector<Rule1D> rules;          // by number of knots
  std::vector<std::vector<int>> ids;  // ids[m][j]
  std::vector<double> values;         // standard coordinate of each id
};

KnotCatalogue catalogue_knots(KnotFamily family, const std::vector<int>& used_m)
{
  const double tol = family == KnotFamily::WeightedLeja ? 0.0 : 1e-12;
  KnotCatalogue cat;
  const int max_m = used_m.empty() ? 0 : *std::max_element(used_m.begin(), used_m.end());
  cat.rules.resize(max_m + 1);
  cat.ids.resize(max_m + 1);
  for (int m : used_m) {
    if (!cat.rules[m].points.empty()) continue;
    cat.rules[m] = standard_rule(family, m);
    for (double z : cat.rules[m].points) {
      int id = -1;
      for (std::size_t k = 0; k < cat.values.size(); ++k)
        if (std::abs(cat.values[k] - z) <= tol) {
          id = static_cast<int>(k);
          break;
        }
      if (id < 0) {
        id = static_cast<int>(cat.values.size());
        cat.values.push_back(z);
      }
      cat.ids[m].push_back(id);
    }
  }
  return cat;
}

/// Maps a tuple of 1D knot ids to a dense point index.
class PointTable
{
 public:
  PointTable(int dimension, std::size_t distinct_knots)
      : dimension_(dimension)
  {
    bits_ = 1;
    while ((std::size_t{1} << bits_) <= distinct_knots) ++bits_;
    packed_ = bits_ * dimension <= 64;
  }

  /// Returns (index, inserted).
  std::pair<std::uint32_t, bool> insert(const std::vector<int>& key)
  {
    const auto next = static_cast<std::uint32_t>(count_);
    if (packed_) {
      std::uint64_t k = 0;
      for (int v : key) k = (k << bits_) | static_cast<std::uint64_t>(v);
      auto [it, fresh] = fast_.try_emplace(k, next);
      if (fresh) ++count_;
      return {it->second, fresh};
    }
    auto [it, fresh] = slow_.try_emplace(key, next);
    if (fresh) ++count_;
    return {it->second, fresh};
  }

  std::size_t size() const { return count_; }

 private:
  int dimension_;
  int bits_;
  bool packed_;
  std::size_t count_ = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> fast_;
  std::map<std::vector<int>, std::uint32_t> slow_;
};

/// Calls visit(term_position, knots m, tensor multi-position j) for every
/// tensor point of every non-zero term, last dimension fastest.
template <typename Visit>
void for_each_tensor_point(const std::vector<int>& m, Visit&& visit)
{
  const std::size_t d = m.size();
  std::vector<int> j(d, 0);
  while (true) {
    visit(j);
    std::size_t n = d;
    while (n > 0) {
      --n;
      if (++j[n] < m[n]) break;
      j[n] = 0;
      if (n == 0) return;
    }
    if (d == 0) return;
  }
}

std::vector<int> used_knot_counts(const MultiIndexSet& I, const std::vector<int>& gamma, LevelToKnots growth)
{
  std::set<int> used;
  for (std::size_t t = 0; t < I.size(); ++t)
    if (gamma[t] != 0)
      for (int level : I.indices()[t]) used.insert(knots_for_level(growth, level));
  return {used.begin(), used.end()};
}

}  // namespace

SparseGrid build_sparse_grid(int dimension, const KnotRule& rule, const MultiIndexSet& I)
{
  if (I.dimension() != dimension) throw ValidationError("build_sparse_grid: index set dimension mismatch");
  if (rule.mu.size() != dimension || rule.sigma.size() != dimension)
    throw ValidationError("build_sparse_grid: knot rule dimension mismatch");
  for (Eigen::Index n = 0; n < dimension; ++n)
    if (!(rule.sigma[n] > 0.0)) throw ValidationError("build_sparse_grid: sigma must be positive");

  const std::vector<int> gamma = combination_coefficients(I);
  KnotCatalogue cat = catalogue_knots(rule.family, used_knot_counts(I, gamma, rule.growth));

  SparseGrid grid;
  grid.dimension = dimension;
  grid.rule = rule;
  grid.index_set = I;

  PointTable table(dimension, cat.values.size());
  std::vector<std::vector<int>> point_keys;
  std::vector<double> weights;
  std::vector<int> key(dimension);
  for (std::size_t t = 0; t < I.size(); ++t) {
    if (gamma[t] == 0) continue;
    TensorTerm term;
    term.index = I.indices()[t];
    term.coefficient = gamma[t];
    for (int level : term.index) term.knots.push_back(knots_for_level(rule.growth, level));
    for_each_tensor_point(term.knots, [&](const std::vector<int>& j) {
      double w = term.coefficient;
      for (int n = 0; n < dimension; ++n) {
        key[n] = cat.ids[term.knots[n]][j[n]];
        w *= cat.rules[term.knots[n]].weights[j[n]];
      }
      auto [id, fresh] = table.insert(key);
      if (fresh) {
        point_keys.push_back(key);
        weights.push_back(0.0);
      }
      weights[id] += w;
      term.point_ids.push_back(id);
    });
    grid.terms.push_back(std::move(term));
  }

  grid.points.resize(static_cast<Eigen::Index>(point_keys.size()), dimension);
  for (std::size_t k = 0; k < point_keys.size(); ++k)
    for (int n = 0; n < dimension; ++n) grid.points(k, n) = rule.mu[n] + rule.sigma[n] * cat.values[point_keys[k][n]];
  grid.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  grid.standard_rules = std::move(cat.rules);
  return grid;
}

std::size_t count_sparse_grid_points(int dimension, KnotFamily family, LevelToKnots growth, const MultiIndexSet& I)
{
  if (I.dimension() != dimension) throw ValidationError("count_sparse_grid_points: index set dimension mismatch");
  const std::vector<int> gamma = combination_coefficients(I);
  const KnotCatalogue cat = catalogue_knots(family, used_knot_counts(I, gamma, growth));
  PointTable table(dimension, cat.values.size());
  std::vector<int> knots(dimension), key(dimension);
  for (std::size_t t = 0; t < I.size(); ++t) {
    if (gamma[t] == 0) continue;
    for (int n = 0; n < dimension; ++n) knots[n] = knots_for_level(growth, I.indices()[t][n]);
    for_each_tensor_point(knots, [&](const std::vector<int>& j) {
      for (int n = 0; n < dimension; ++n) key[n] = cat.ids[knots[n]][j[n]];
      table.insert(key);
    });
  }
  return table.size();
}

// ---------------------------------------------------------------------------
// Quadrature and interpolation
// ---------------------------------------------------------------------------

double sc_expectation(const SparseGrid& grid, const Eigen::VectorXd& values)
{
  if (values.size() != grid.weights.size()) throw ValidationError("sc_expectation: one value per grid point required");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < values.size(); ++k) sum += grid.weights[k] * values[k];
  return sum;
}

namespace {

double clamp_variance(double v, const char* what)
{
  constexpr double kClamp = -1e-8;
  if (v >= 0.0) return v;
  if (v >= kClamp) return 0.0;
  std::ostringstream ss;
  ss << "sc_moments: negative variance " << v << " for " << what << " (quadrature error)";
  throw NumericalError(ss.str());
}

}  // namespace

MomentSeries sc_moments(const QoIModel& model, const SparseGrid& grid, int threads)
{
  const std::size_t np = grid.size();
  if (np == 0) throw ValidationError("sc_moments: empty grid");
  std::vector<QoISeries> values(np);
  parallel_for(np, resolve_threads(threads), [&](std::size_t k) {
    const ParameterVector p = grid.points.row(static_cast<Eigen::Index>(k)).transpose();
    try {
      values[k] = model(p);
    } catch (const std::exception& ex) {
      std::ostringstream ss;
      ss << "sc_moments: model failed at p = (" << p.transpose() << "): " << ex.what();
      throw NumericalError(ss.str());
    }
  });

  const QoISeries& first = values.front();
  const std::size_t nt = first.times.size();
  const Eigen::Index r = nt ? first.regional_avg.front().size() : 0;
  MomentSeries m;
  m.times = first.times;
  m.num_samples = static_cast<long>(np);
  m.global_mean.assign(nt, 0.0);
  m.global_var.assign(nt, 0.0);
  m.region_mean.assign(nt, Eigen::VectorXd::Zero(r));
  m.region_var.assign(nt, Eigen::VectorXd::Zero(r));
  for (std::size_t k = 0; k < np; ++k) {
    if (values[k].times != first.times) throw ValidationError("sc_moments: inconsistent QoI layout");
    const double w = grid.weights[static_cast<Eigen::Index>(k)];
    for (std::size_t t = 0; t < nt; ++t) {
      m.global_mean[t] += w * values[k].global_avg[t];
      m.region_mean[t] += w * values[k].regional_avg[t];
    }
  }
  for (std::size_t k = 0; k < np; ++k) {
    const double w = grid.weights[static_cast<Eigen::Index>(k)];
    for (std::size_t t = 0; t < nt; ++t) {
      const double dg = values[k].global_avg[t] - m.global_mean[t];
      m.global_var[t] += w * dg * dg;
      m.region_var[t] += w * (values[k].regional_avg[t] - m.region_mean[t]).cwiseAbs2();
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    m.global_var[t] = clamp_variance(m.global_var[t], "global average");
    for (Eigen::Index j = 0; j < r; ++j) m.region_var[t][j] = clamp_variance(m.region_var[t][j], "regional average");
  }
  return m;
}

double interpolate(const SparseGrid& grid, const Eigen::VectorXd& values, const ParameterVector& p)
{
  if (values.size() != static_cast<Eigen::Index>(grid.size()))
    throw ValidationError("interpolate: one value per grid point required");
  if (p.size() != grid.dimension) throw ValidationError("interpolate: parameter dimension mismatch");
  if (!p.allFinite()) throw ValidationError("interpolate: non-finite parameter");

  const int d = grid.dimension;
  std::vector<double> z(d);
  for (int n = 0; n < d; ++n) z[n] = (p[n] - grid.rule.mu[n]) / grid.rule.sigma[n];

  // basis[n][m] caches the m-point Lagrange basis of dimension n at z[n].
  std::vector<std::map<int, std::vector<double>>> basis(d);
  auto basis_for = [&](int n, int m) -> const std::vector<double>& {
    auto it = basis[n].find(m);
    if (it == basis[n].end()) {
      std::vector<double> b(m);
      lagrange_basis(grid.standard_rules[m].points, z[n], b.data());
      it = basis[n].emplace(m, std::move(b)).first;
    }
    return it->second;
  };

  double total = 0.0;
  std::vector<const std::vector<double>*> per_dim(d);
  for (const TensorTerm& term : grid.terms) {
    for (int n = 0; n < d; ++n) per_dim[n] = &basis_for(n, term.knots[n]);
    double term_sum = 0.0;
    std::size_t pos = 0;
    for_each_tensor_point(term.knots, [&](const std::vector<int>& j) {
      double w = values[term.point_ids[pos++]];
      for (int n = 0; n < d && w != 0.0; ++n) w *= (*per_dim[n])[j[n]];
      term_sum += w;
    });
    total += term.coefficient * term_sum;
  }
  return total;
}

void write_grid_csv(const SparseGrid& grid, const std::filesystem::path& path)
{
  csv::Writer w(path);
  std::vector<std::string> header{"point_index"};
  for (int n = 0; n < grid.dimension; ++n) header.push_back("p_" + std::to_string(n + 1));
  header.push_back("weight");
  w.header(header);
  for (Eigen::Index k = 0; k < grid.points.rows(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (int n = 0; n < grid.dimension; ++n) row.push_back(grid.points(k, n));
    row.push_back(grid.weights[k]);
    w.row(row);
  }
}

ScConvergence sc_convergence(const QoIModel& model, const KnotRule& rule, const std::vector<int>& levels,
                             int reference_level, const Eigen::VectorXd& region_weights, int threads)
{
  const int d = static_cast<int>(rule.mu.size());
  for (int level : levels)
    if (level < 0 || level >= reference_level)
      throw ValidationError("sc_convergence: levels must lie in [0, reference level)");
  ScConvergence out;
  const SparseGrid ref_grid = build_sparse_grid(d, rule, smolyak_index_set(d, reference_level));
  out.reference = sc_moments(model, ref_grid, threads);
  for (int level : levels) {
    const SparseGrid grid = build_sparse_grid(d, rule, smolyak_index_set(d, level));
    auto rows = moment_errors(sc_moments(model, grid, threads), out.reference, region_weights);
    for (ErrorRow& row : rows) row.level = level;
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace fkuq
