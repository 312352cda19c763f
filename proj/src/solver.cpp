#include "fkuq/solver.hpp"

#include "fkuq/csv.hpp"
#include "fkuq/errors.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace fkuq {

int SolverConfig::steps() const
{
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("solver: dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("solver: T must be positive");
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream ss;
    ss << "solver: T/dt = " << ratio << " is not a positive integer";
    throw ValidationError(ss.str());
  }
  return static_cast<int>(n);
}

std::vector<int> SolverConfig::sample_steps() const
{
  const int n = steps();
  std::vector<int> out;
  out.reserve(sample_times.size());
  double previous = -1.0;
  for (double t : sample_times) {
    if (!(t >= 0.0 && t <= T * (1.0 + 1e-12))) throw ValidationError("solver: sample time " + csv::format(t) + " outside [0, T]");
    if (!(t > previous)) throw ValidationError("solver: sample times must be strictly increasing");
    const double k = std::round(t / dt);
    if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, t))
      throw ValidationError("solver: sample time " + csv::format(t) + " is not on the dt grid");
    out.push_back(std::min(static_cast<int>(k), n));
    previous = t;
  }
  return out;
}

std::vector<double> uniform_sample_times(double T, double every)
{
  if (!(every > 0.0)) throw ValidationError("sample interval must be positive");
  std::vector<double> times;
  const auto n = static_cast<long>(std::round(T / every));
  for (long k = 0; k <= n; ++k) times.push_back(k * every);
  return times;
}

CrankNicolsonStepper::CrankNicolsonStepper(const LaplacianMatrix& L, double dt, LinearSolverKind kind)
    : L_(L)
    , dt_(dt)
{
  if (!(dt > 0.0)) throw ValidationError("step: dt must be positive");
  if (L.rows() != L.cols()) throw ValidationError("step: Laplacian must be square");
  const auto m = L.rows();
  direct_ = kind == LinearSolverKind::Direct || (kind == LinearSolverKind::Automatic && m <= kDirectSolveLimit);

  LaplacianMatrix identity(m, m);
  identity.setIdentity();
  base_ = (identity / dt) + 0.5 * L;
  base_.makeCompressed();

  diagonal_slots_.assign(m, -1);
  for (Eigen::Index col = 0; col < base_.outerSize(); ++col)
    for (auto p = base_.outerIndexPtr()[col]; p < base_.outerIndexPtr()[col + 1]; ++p)
      if (base_.innerIndexPtr()[p] == col) diagonal_slots_[col] = p;

  system_ = base_;
  if (direct_) ldlt_.analyzePattern(system_);
  else bicgstab_.setTolerance(1e-13);
}

NodeField CrankNicolsonStepper::step(const NodeField& c_k, const NodeField& c_km1, const NodeField& alpha)
{
  const auto m = base_.rows();
  if (c_k.size() != m || c_km1.size() != m || alpha.size() != m) throw ValidationError("step: field length mismatch");
  if (!c_k.allFinite() || !c_km1.allFinite() || !alpha.allFinite()) throw NumericalError("step: non-finite state");

  reaction_ = alpha.array() * (1.0 - 1.5 * c_k.array() + 0.5 * c_km1.array());

  std::copy(base_.valuePtr(), base_.valuePtr() + base_.nonZeros(), system_.valuePtr());
  for (Eigen::Index k = 0; k < m; ++k) system_.valuePtr()[diagonal_slots_[k]] -= 0.5 * reaction_[k];

  Lc_.noalias() = L_ * c_k;
  rhs_ = c_k / dt_ - 0.5 * Lc_;
  rhs_.array() += 0.5 * reaction_.array() * c_k.array();

  NodeField next;
  if (direct_) {
    ldlt_.factorize(system_);
    const auto& d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.cwiseAbs().minCoeff();
    if (ldlt_.info() != Eigen::Success || !(dmin > 1e-14 * dmax)) {
      std::ostringstream ss;
      ss << "step: singular system, pivot ratio estimate " << (dmax > 0 ? dmin / dmax : 0.0);
      throw NumericalError(ss.str());
    }
    next = ldlt_.solve(rhs_);
  } else {
    bicgstab_.compute(system_);
    next = bicgstab_.solveWithGuess(rhs_, c_k);
    if (bicgstab_.info() != Eigen::Success) {
      std::ostringstream ss;
      ss << "step: iterative solve did not converge, error estimate " << bicgstab_.error();
      throw NumericalError(ss.str());
    }
  }

  residual_.noalias() = system_ * next;
  residual_ -= rhs_;
  const double bnorm = rhs_.norm();
  last_residual_ = bnorm > 0.0 ? residual_.norm() / bnorm : residual_.norm();
  if (!(last_residual_ <= kResidualTolerance)) {
    std::ostringstream ss;
    ss << "step: relative residual " << last_residual_ << " exceeds " << kResidualTolerance;
    throw NumericalError(ss.str());
  }
  if (!next.allFinite()) throw NumericalError("step: non-finite state");
  return next;
}

NodeField step(const NodeField& c_k, const NodeField& c_km1, const LaplacianMatrix& L, const NodeField& alpha,
               double dt)
{
  CrankNicolsonStepper stepper(L, dt);
  return stepper.step(c_k, c_km1, alpha);
}

Trajectory solve_trajectory(const LaplacianMatrix& L, const NodeField& alpha, const NodeField& c0,
                            const SolverConfig& cfg)
{
  const int n = cfg.steps();
  const std::vector<int> samples = cfg.sample_steps();
  if (c0.size() != L.rows() || alpha.size() != L.rows()) throw ValidationError("solve_trajectory: field length mismatch");
  for (Eigen::Index k = 0; k < c0.size(); ++k)
    if (!(c0[k] >= 0.0 && c0[k] <= 1.0)) throw ValidationError("solve_trajectory: c0 outside [0, 1] at node " + std::to_string(k));

  Trajectory traj;
  traj.times.reserve(samples.size());
  traj.states.reserve(samples.size());
  std::size_t next_sample = 0;
  auto record = [&](int k, const NodeField& c) {
    while (next_sample < samples.size() && samples[next_sample] == k) {
      traj.times.push_back(cfg.sample_times[next_sample]);
      traj.states.push_back(c);
      ++next_sample;
    }
  };

  CrankNicolsonStepper stepper(L, cfg.dt, cfg.linear_solver);
  NodeField previous = c0;
  NodeField current = c0;
  record(0, current);
  for (int k = 0; k < n; ++k) {
    NodeField next = stepper.step(current, previous, alpha);
    previous = std::move(current);
    current = std::move(next);
    record(k + 1, current);
  }
  return traj;
}

Trajectory solve_trajectory(const Connectome& g, const NodeField& alpha, const NodeField& c0, const SolverConfig& cfg)
{
  return solve_trajectory(build_laplacian(g), alpha, c0, cfg);
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path)
{
  csv::Writer w(path);
  std::vector<std::string> header{"time"};
  const auto m = traj.states.empty() ? 0 : traj.states.front().size();
  for (Eigen::Index k = 0; k < m; ++k) header.push_back("node_" + std::to_string(k));
  w.header(header);
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    std::vector<double> row{traj.times[s]};
    row.insert(row.end(), traj.states[s].data(), traj.states[s].data() + traj.states[s].size());
    w.row(row);
  }
}

}  // namespace fkuq
