#include "fkuq/connectome.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace fkuq {

namespace {

std::string describe(const Edge& e)
{
  std::ostringstream ss;
  ss << "{i:" << e.i << ",j:" << e.j << ",weight:" << e.weight << "}";
  return ss.str();
}

std::string describe(const Node& n)
{
  std::ostringstream ss;
  ss << "{id:" << n.id << ",region:" << n.region << ",volume:" << n.volume << "}";
  return ss.str();
}

}  // namespace

Connectome::Connectome(int region_count, std::vector<Node> nodes, std::vector<Edge> edges)
    : region_count_(region_count)
    , nodes_(std::move(nodes))
    , edges_(std::move(edges))
{
  if (region_count_ < 1) throw ValidationError("connectome: region_count must be positive");
  if (nodes_.empty()) throw ValidationError("connectome: no nodes");

  std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::vector<int> per_region(region_count_, 0);
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    if (n.id != static_cast<int>(k))
      throw ValidationError("connectome: node ids must be exactly 0..M-1; offending node " + describe(n));
    if (!(n.volume > 0.0) || !std::isfinite(n.volume))
      throw ValidationError("connectome: non-positive volume at node " + describe(n));
    if (n.region < 1 || n.region > region_count_)
      throw ValidationError("connectome: region out of [1, R] at node " + describe(n));
    ++per_region[n.region - 1];
  }
  for (int r = 0; r < region_count_; ++r)
    if (per_region[r] == 0) throw ValidationError("connectome: region gap, region " + std::to_string(r + 1) + " has no nodes");

  const int m = node_count();
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges_) {
    if (e.i < 0 || e.i >= m || e.j < 0 || e.j >= m)
      throw ValidationError("connectome: edge references unknown node " + describe(e));
    if (e.i == e.j) throw ValidationError("connectome: self-loop " + describe(e));
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw ValidationError("connectome: non-positive weight " + describe(e));
    auto key = std::minmax(e.i, e.j);
    if (!seen.insert(key).second) throw ValidationError("connectome: duplicate edge " + describe(e));
  }
}

Eigen::VectorXd Connectome::region_volumes() const
{
  Eigen::VectorXd v = Eigen::VectorXd::Zero(region_count_);
  for (const Node& n : nodes_) v[n.region - 1] += n.volume;
  return v;
}

Eigen::VectorXd Connectome::region_weights() const
{
  Eigen::VectorXd v = region_volumes();
  return v / v.sum();
}

std::vector<std::vector<int>> Connectome::region_members() const
{
  std::vector<std::vector<int>> members(region_count_);
  for (const Node& n : nodes_) members[n.region - 1].push_back(n.id);
  return members;
}

bool Connectome::is_connected() const
{
  const int m = node_count();
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = m;
  for (const Edge& e : edges_) {
    int a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

Connectome load_connectome(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ValidationError("connectome: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("connectome: parse failure in " + path.string() + ": " + ex.what());
  }
  try {
    int region_count = doc.at("region_count").get<int>();
    std::vector<Node> nodes;
    for (const auto& jn : doc.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      n.region = jn.at("region").get<int>();
      n.volume = jn.at("volume").get<double>();
      if (jn.contains("pos")) n.pos = jn.at("pos").get<std::array<double, 3>>();
      nodes.push_back(n);
    }
    std::vector<Edge> edges;
    for (const auto& je : doc.at("edges"))
      edges.push_back({je.at("i").get<int>(), je.at("j").get<int>(), je.at("weight").get<double>()});
    return Connectome(region_count, std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("connectome: schema error in " + path.string() + ": " + ex.what());
  }
}

void save_connectome(const Connectome& g, const std::filesystem::path& path)
{
  nlohmann::json doc;
  doc["region_count"] = g.region_count();
  doc["nodes"] = nlohmann::json::array();
  for (const Node& n : g.nodes()) {
    nlohmann::json jn = {{"id", n.id}, {"region", n.region}, {"volume", n.volume}};
    if (n.pos) jn["pos"] = *n.pos;
    doc["nodes"].push_back(jn);
  }
  doc["edges"] = nlohmann::json::array();
  for (const Edge& e : g.edges()) doc["edges"].push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}});
  std::ofstream out(path);
  if (!out) throw ValidationError("connectome: cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

LaplacianMatrix build_laplacian(const Connectome& g)
{
  const int m = g.node_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * g.edges().size() + m);
  std::vector<double> degree(m, 0.0);
  for (const Edge& e : g.edges()) {
    triplets.emplace_back(e.i, e.j, -e.weight);
    triplets.emplace_back(e.j, e.i, -e.weight);
    degree[e.i] += e.weight;
    degree[e.j] += e.weight;
  }
  // Diagonal entries are always present, even for isolated nodes, so the
  // sparsity pattern of I/dt + L/2 contains the diagonal.
  for (int k = 0; k < m; ++k) triplets.emplace_back(k, k, degree[k]);
  LaplacianMatrix L(m, m);
  L.setFromTriplets(triplets.begin(), triplets.end());
  L.makeCompressed();
  return L;
}

NodeField project_scan(const Connectome& g, const Eigen::VectorXd& raw)
{
  if (raw.size() != g.node_count())
    throw ValidationError("project_scan: length " + std::to_string(raw.size()) + " does not match node count " +
                          std::to_string(g.node_count()));
  if (!raw.allFinite()) throw ValidationError("project_scan: non-finite scan value");
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (!(lo < hi)) return NodeField::Constant(raw.size(), 0.5);
  return (raw.array() - lo) / (hi - lo);
}

std::vector<bool> filter_outlier_nodes(const NodeField& scan1, const NodeField& scan2, double tol)
{
  if (scan1.size() != scan2.size()) throw ValidationError("filter_outlier_nodes: length mismatch");
  if (!(tol >= 0.0 && tol <= 1.0)) throw ValidationError("filter_outlier_nodes: tol must lie in [0, 1]");
  std::vector<bool> mask(scan1.size());
  for (Eigen::Index k = 0; k < scan1.size(); ++k) mask[k] = !(scan2[k] < scan1[k] * (1.0 - tol));
  return mask;
}

std::vector<Edge> threshold_connectogram(const Connectome& g, double fraction)
{
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("threshold_connectogram: fraction must lie in [0, 1]");
  if (g.edges().empty()) throw ValidationError("threshold_connectogram: empty edge set");
  double wmax = 0.0;
  for (const Edge& e : g.edges()) wmax = std::max(wmax, e.weight);
  const double cut = fraction * wmax;
  std::vector<Edge> kept;
  for (const Edge& e : g.edges())
    if (e.weight >= cut) kept.push_back(e);
  return kept;
}

Connectome generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed)
{
  if (spec.nodes_per_region.empty()) throw ValidationError("generate_synthetic: no regions");
  for (int n : spec.nodes_per_region)
    if (n < 1) throw ValidationError("generate_synthetic: every region needs at least one node");
  auto in_unit = [](double d) { return d > 0.0 && d <= 1.0; };
  if (!in_unit(spec.intra_density) || !in_unit(spec.inter_density))
    throw ValidationError("generate_synthetic: densities must lie in (0, 1]");
  if (!(spec.weight_scale > 0.0)) throw ValidationError("generate_synthetic: weight_scale must be positive");
  if (!(spec.volume_range[0] > 0.0 && spec.volume_range[0] <= spec.volume_range[1]))
    throw ValidationError("generate_synthetic: volume_range must be positive and ordered");

  const int regions = static_cast<int>(spec.nodes_per_region.size());
  std::vector<Node> nodes;
  for (int r = 0; r < regions; ++r)
    for (int k = 0; k < spec.nodes_per_region[r]; ++k) nodes.push_back({static_cast<int>(nodes.size()), r + 1, 0.0, {}});
  const int m = static_cast<int>(nodes.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> volume(spec.volume_range[0], spec.volume_range[1]);
  std::uniform_int_distribution<int> count(1, 10);
  std::uniform_real_distribution<double> length(1.0, 4.0);
  std::normal_distribution<double> jitter(0.0, 0.6);

  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (Node& n : nodes) {
      n.volume = volume(rng);
      const double angle = 2.0 * M_PI * (n.region - 1) / regions;
      n.pos = std::array<double, 3>{4.0 * std::cos(angle) + jitter(rng), 4.0 * std::sin(angle) + jitter(rng), jitter(rng)};
    }
    std::vector<Edge> edges;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        const double density = nodes[i].region == nodes[j].region ? spec.intra_density : spec.inter_density;
        if (unit(rng) < density) {
          const double w = spec.weight_scale * count(rng) / length(rng);
          edges.push_back({i, j, w});
        }
      }
    Connectome g(regions, nodes, std::move(edges));
    if (g.is_connected()) return g;
  }
  throw ValidationError("generate_synthetic: no connected graph after " + std::to_string(kMaxAttempts) +
                        " attempts; densities too low");
}

NodeField generate_synthetic_scan(const Connectome& g, std::uint64_t seed, double lo, double hi)
{
  if (!(lo <= hi)) throw ValidationError("generate_synthetic_scan: lo > hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  NodeField c(g.node_count());
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = dist(rng);
  return c;
}

Eigen::VectorXd load_scan_csv(const Connectome& g, const std::filesystem::path& path)
{
  const csv::Table t = csv::read(path);
  const std::size_t id_col = t.column("node_id");
  const std::size_t value_col = t.column("value");
  const int m = g.node_count();
  Eigen::VectorXd values(m);
  std::vector<bool> seen(m, false);
  for (const auto& row : t.rows) {
    const double id = row[id_col];
    if (id != std::floor(id) || id < 0 || id >= m)
      throw ValidationError("scan: " + path.string() + ": unknown node_id " + csv::format(id));
    const int k = static_cast<int>(id);
    if (seen[k]) throw ValidationError("scan: " + path.string() + ": duplicate node_id " + std::to_string(k));
    seen[k] = true;
    values[k] = row[value_col];
  }
  if (static_cast<int>(t.rows.size()) != m)
    throw ValidationError("scan: " + path.string() + ": expected " + std::to_string(m) + " rows, got " +
                          std::to_string(t.rows.size()));
  if (!values.allFinite()) throw ValidationError("scan: " + path.string() + ": non-finite value");
  return values;
}

void save_scan_csv(const NodeField& values, const std::filesystem::path& path)
{
  csv::Writer w(path);
  w.header({"node_id", "value"});
  for (Eigen::Index k = 0; k < values.size(); ++k) w.row({static_cast<double>(k), values[k]});
}

void validate_concentration(const Connectome& g, const NodeField& c, const char* what)
{
  if (c.size() != g.node_count())
    throw ValidationError(std::string(what) + ": length " + std::to_string(c.size()) + " does not match node count " +
                          std::to_string(g.node_count()));
  for (Eigen::Index k = 0; k < c.size(); ++k)
    if (!std::isfinite(c[k]) || c[k] < 0.0 || c[k] > 1.0)
      throw ValidationError(std::string(what) + ": concentration at node " + std::to_string(k) + " outside [0, 1]: " +
                            csv::format(c[k]));
}

}  // namespace fkuq
