#pragma once

#include "fkuq/connectome.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

/// Path graph 0-1-...-(n-1) with unit volumes, all nodes in region 1.
inline fkuq::Connectome path_graph(int n, double weight = 1.0, int regions = 1)
{
  std::vector<fkuq::Node> nodes;
  for (int k = 0; k < n; ++k) nodes.push_back({k, 1 + k % regions, 1.0, std::nullopt});
  std::vector<fkuq::Edge> edges;
  for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, weight});
  return fkuq::Connectome(regions, nodes, edges);
}

/// Erdos-Renyi style graph with random weights and volumes, made connected by a spanning path.
inline fkuq::Connectome random_graph(int n, int regions, std::uint64_t seed, double p = 0.1)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<fkuq::Node> nodes;
  for (int k = 0; k < n; ++k) nodes.push_back({k, 1 + k % regions, 0.5 + u(rng), std::nullopt});
  std::vector<fkuq::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (j == i + 1 || u(rng) < p) edges.push_back({i, j, 0.01 + 0.2 * u(rng)});
  return fkuq::Connectome(regions, nodes, edges);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("fkuq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
