#include "helpers.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"
#include "fkuq/qoi.hpp"

#include <doctest.h>

using namespace fkuq;

namespace {

Connectome three_nodes()
{
  // Region 1: nodes 0 (volume 1) and 1 (volume 3); region 2: node 2 (volume 2).
  return Connectome(2, {{0, 1, 1.0, {}}, {1, 1, 3.0, {}}, {2, 2, 2.0, {}}}, {{0, 1, 1.0}, {1, 2, 1.0}});
}

}  // namespace

TEST_CASE("regional averages are volume weighted")
{
  const Connectome g = three_nodes();
  NodeField c(3);
  c << 0.2, 0.6, 0.9;
  const Eigen::VectorXd avg = regional_averages(g, c);
  CHECK(avg[0] == doctest::Approx((0.2 * 1 + 0.6 * 3) / 4.0));
  CHECK(avg[1] == doctest::Approx(0.9));
  CHECK(spatial_average(c) == doctest::Approx((0.2 + 0.6 + 0.9) / 3.0));

  const Eigen::VectorXd tot = regional_averages(g, c, nullptr, RegionNormalization::TotalVolume);
  CHECK(tot[0] == doctest::Approx((0.2 * 1 + 0.6 * 3) / 6.0));
  CHECK(tot[1] == doctest::Approx(0.9 * 2 / 6.0));

  // Volume-weighted lobe average of regional averages equals the global volume average.
  const double global = (0.2 * 1 + 0.6 * 3 + 0.9 * 2) / 6.0;
  CHECK(lobe_average(avg, g.region_weights()) == doctest::Approx(global));
}

TEST_CASE("masked nodes leave numerator and divisor")
{
  const Connectome g = three_nodes();
  NodeField c(3);
  c << 0.2, 0.6, 0.9;
  const std::vector<bool> mask{true, false, true};
  const Eigen::VectorXd avg = regional_averages(g, c, &mask);
  CHECK(avg[0] == doctest::Approx(0.2));
  const std::vector<bool> none{true, true, false};
  CHECK_THROWS_AS(regional_averages(g, c, &none), ValidationError);
  CHECK_THROWS_AS(regional_averages(g, NodeField::Zero(2)), ValidationError);
}

TEST_CASE("QoI series and CSV output")
{
  const Connectome g = three_nodes();
  Trajectory traj;
  traj.times = {0.0, 1.0};
  traj.states = {NodeField::Constant(3, 0.25), NodeField::Constant(3, 0.5)};
  const QoISeries q = compute_qoi_series(g, traj);
  CHECK(q.global_avg == std::vector<double>{0.25, 0.5});
  CHECK(q.regional_avg[1].isApprox(Eigen::VectorXd::Constant(2, 0.5)));

  const auto dir = testing::scratch_dir("qoi_csv");
  write_qoi_csv(q, dir / "q.csv");
  write_regional_csv(q, dir / "r.csv");
  const csv::Table t = csv::read(dir / "q.csv");
  CHECK(t.header == std::vector<std::string>{"time", "global", "region_1", "region_2"});
  CHECK(t.rows[1][t.column("region_2")] == 0.5);
  CHECK(csv::read(dir / "r.csv").header.size() == 3);
}
