#include "fkuq/models.hpp"

#include "fkuq/errors.hpp"

namespace fkuq {

QoIModel make_forward_model(const Connectome& g, const NodeField& c0, const SolverConfig& cfg)
{
  validate_concentration(g, c0, "initial condition");
  cfg.sample_steps();
  auto graph = std::make_shared<const Connectome>(g);
  auto laplacian = std::make_shared<const LaplacianMatrix>(build_laplacian(g));
  return [graph, laplacian, c0, cfg](const ParameterVector& p) {
    const NodeField alpha = assemble_reaction_vector(*graph, p);
    return compute_qoi_series(*graph, solve_trajectory(*laplacian, alpha, c0, cfg));
  };
}

CalibrationModel make_calibration_model(const Connectome& g, const NodeField& scan1, const std::vector<bool>& mask,
                                        double horizon, double dt, RegionNormalization norm)
{
  validate_concentration(g, scan1, "scan1");
  if (mask.size() != static_cast<std::size_t>(g.node_count()))
    throw ValidationError("calibration model: mask length differs from node count");
  SolverConfig cfg;
  cfg.dt = dt;
  cfg.T = horizon;
  cfg.sample_times = {horizon};
  cfg.sample_steps();
  auto graph = std::make_shared<const Connectome>(g);
  auto laplacian = std::make_shared<const LaplacianMatrix>(build_laplacian(g));
  return [graph, laplacian, scan1, mask, cfg, norm](const ParameterVector& p) {
    const NodeField alpha = assemble_reaction_vector(*graph, p);
    const Trajectory traj = solve_trajectory(*laplacian, alpha, scan1, cfg);
    return regional_averages(*graph, traj.states.back(), &mask, norm);
  };
}

}  // namespace fkuq
