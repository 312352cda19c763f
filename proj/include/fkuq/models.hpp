#pragma once

#include "fkuq/forward_mc.hpp"
#include "fkuq/mcmc.hpp"
#include "fkuq/solver.hpp"

#include <memory>

namespace fkuq {

/// p -> QoI series at cfg.sample_times, starting from c0. The Laplacian is
/// assembled once and shared; each evaluation owns its stepper, so the model
/// may be called concurrently.
QoIModel make_forward_model(const Connectome& g, const NodeField& c0, const SolverConfig& cfg);

/// p -> masked regional averages after `horizon` years starting from scan1.
CalibrationModel make_calibration_model(const Connectome& g, const NodeField& scan1, const std::vector<bool>& mask,
                                        double horizon, double dt,
                                        RegionNormalization norm = RegionNormalization::RegionVolume);

}  // namespace fkuq
