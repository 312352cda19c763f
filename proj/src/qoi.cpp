#include "fkuq/qoi.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"

namespace fkuq {

double spatial_average(const NodeField& c)
{
  if (c.size() == 0) throw ValidationError("spatial_average: empty field");
  return c.sum() / static_cast<double>(c.size());
}

Eigen::VectorXd regional_averages(const Connectome& g, const NodeField& c, const std::vector<bool>* mask,
                                  RegionNormalization norm)
{
  const int m = g.node_count();
  if (c.size() != m) throw ValidationError("regional_averages: field length mismatch");
  if (mask && static_cast<int>(mask->size()) != m) throw ValidationError("regional_averages: mask length mismatch");

  const int r = g.region_count();
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd volume = Eigen::VectorXd::Zero(r);
  for (const Node& n : g.nodes()) {
    if (mask && !(*mask)[n.id]) continue;
    weighted[n.region - 1] += c[n.id] * n.volume;
    volume[n.region - 1] += n.volume;
  }
  for (int j = 0; j < r; ++j)
    if (volume[j] == 0.0)
      throw ValidationError("regional_averages: region " + std::to_string(j + 1) + " has every node masked out");
  if (norm == RegionNormalization::TotalVolume) return weighted / volume.sum();
  return weighted.cwiseQuotient(volume);
}

QoISeries compute_qoi_series(const Connectome& g, const Trajectory& traj)
{
  QoISeries q;
  q.times = traj.times;
  q.global_avg.reserve(traj.states.size());
  q.regional_avg.reserve(traj.states.size());
  for (const NodeField& c : traj.states) {
    q.global_avg.push_back(spatial_average(c));
    q.regional_avg.push_back(regional_averages(g, c));
  }
  return q;
}

double lobe_average(const Eigen::VectorXd& per_region, const Eigen::VectorXd& weights)
{
  if (per_region.size() != weights.size()) throw ValidationError("lobe_average: length mismatch");
  return per_region.dot(weights);
}

namespace {

std::vector<std::string> region_header(std::vector<std::string> head, Eigen::Index regions)
{
  for (Eigen::Index j = 0; j < regions; ++j) head.push_back("region_" + std::to_string(j + 1));
  return head;
}

}  // namespace

void write_qoi_csv(const QoISeries& q, const std::filesystem::path& path)
{
  csv::Writer w(path);
  const Eigen::Index r = q.regional_avg.empty() ? 0 : q.regional_avg.front().size();
  w.header(region_header({"time", "global"}, r));
  for (std::size_t s = 0; s < q.times.size(); ++s) {
    std::vector<double> row{q.times[s], q.global_avg[s]};
    row.insert(row.end(), q.regional_avg[s].data(), q.regional_avg[s].data() + r);
    w.row(row);
  }
}

void write_regional_csv(const QoISeries& q, const std::filesystem::path& path)
{
  csv::Writer w(path);
  const Eigen::Index r = q.regional_avg.empty() ? 0 : q.regional_avg.front().size();
  w.header(region_header({"time"}, r));
  for (std::size_t s = 0; s < q.times.size(); ++s) {
    std::vector<double> row{q.times[s]};
    row.insert(row.end(), q.regional_avg[s].data(), q.regional_avg[s].data() + r);
    w.row(row);
  }
}

}  // namespace fkuq
