#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace fkuq {

/// Per-node real values (concentration, reaction rate, scan projection).
using NodeField = Eigen::VectorXd;

/// Sparse symmetric graph Laplacian L = D - W.
using LaplacianMatrix = Eigen::SparseMatrix<double>;

struct Node
{
  int id = 0;
  int region = 1;  // 1-based
  double volume = 1.0;
  std::optional<std::array<double, 3>> pos;  // carried through to reports only
};

struct Edge
{
  int i = 0;
  int j = 0;
  double weight = 0.0;  // diffusion conductance, 1/years
};

/**
 * Weighted undirected graph with a partition of its nodes into regions.
 *
 * Instances are validated on construction and immutable afterwards:
 * node ids are 0..M-1 in order, edges are unique unordered pairs without
 * self-loops, weights and volumes are strictly positive and every region in
 * [1, R] holds at least one node.
 */
class Connectome
{
 public:
  Connectome(int region_count, std::vector<Node> nodes, std::vector<Edge> edges);

  int region_count() const { return region_count_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  int region_of(int node) const { return nodes_[node].region; }

  /// Sum of node volumes per region (index 0 is region 1).
  Eigen::VectorXd region_volumes() const;

  /// Region volumes divided by the total volume.
  Eigen::VectorXd region_weights() const;

  /// Node indices belonging to each region (index 0 is region 1).
  std::vector<std::vector<int>> region_members() const;

  bool is_connected() const;

 private:
  int region_count_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
};

Connectome load_connectome(const std::filesystem::path& path);
void save_connectome(const Connectome& g, const std::filesystem::path& path);

LaplacianMatrix build_laplacian(const Connectome& g);

/// Affine rescale of raw per-node scan values onto [0, 1]. A constant input
/// maps to 0.5 everywhere.
NodeField project_scan(const Connectome& g, const Eigen::VectorXd& raw);

/// Node mask for calibration: false where the second scan dropped below the
/// first by more than `tol` (relative).
std::vector<bool> filter_outlier_nodes(const NodeField& scan1, const NodeField& scan2, double tol = 0.10);

/// Edges whose weight is at least `fraction` times the largest weight.
std::vector<Edge> threshold_connectogram(const Connectome& g, double fraction);

struct SyntheticSpec
{
  std::vector<int> nodes_per_region = std::vector<int>(7, 6);
  double intra_density = 0.6;
  double inter_density = 0.08;
  double weight_scale = 0.05;
  std::array<double, 2> volume_range = {0.5, 2.0};
};

/// Random region-structured graph; resampled until connected. Edge weights
/// are weight_scale * count / length with count in {1..10} and length in
/// [1, 4]. Deterministic for a fixed seed.
Connectome generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Per-node values drawn uniformly from [lo, hi]; deterministic for a seed.
NodeField generate_synthetic_scan(const Connectome& g, std::uint64_t seed, double lo, double hi);

/// Reads a `node_id,value` CSV. Every node must appear exactly once.
Eigen::VectorXd load_scan_csv(const Connectome& g, const std::filesystem::path& path);
void save_scan_csv(const NodeField& values, const std::filesystem::path& path);

/// Checks that a concentration field has length M, finite entries in [0, 1].
void validate_concentration(const Connectome& g, const NodeField& c, const char* what);

}  // namespace fkuq
