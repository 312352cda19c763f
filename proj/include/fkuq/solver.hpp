#pragma once

#include "fkuq/connectome.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <filesystem>
#include <optional>
#include <vector>

namespace fkuq {

enum class LinearSolverKind
{
  Automatic,  // direct up to kDirectSolveLimit nodes, iterative above
  Direct,     // sparse LDL^T, refactorised every step
  Iterative   // BiCGSTAB with diagonal preconditioning
};

inline constexpr int kDirectSolveLimit = 20000;

struct SolverConfig
{
  double dt = 0.02;
  double T = 20.0;
  std::vector<double> sample_times;
  LinearSolverKind linear_solver = LinearSolverKind::Automatic;

  /// Number of time steps N_t = T / dt; throws unless T/dt is an integer
  /// within 1e-9 relative rounding.
  int steps() const;

  /// Grid index of every sample time; throws for unsorted times, times
  /// outside [0, T] or off the {l * dt} grid.
  std::vector<int> sample_steps() const;
};

/// Sample times 0, every, 2*every, ..., T (T included).
std::vector<double> uniform_sample_times(double T, double every);

struct Trajectory
{
  std::vector<double> times;
  std::vector<NodeField> states;
};

/**
 * Crank-Nicolson step for dc/dt = -L c + alpha (.) c (.) (1 - c) with the
 * nonlinear factor extrapolated from the two previous levels:
 *
 *   e = 1 - 3/2 c_k + 1/2 c_{k-1}
 *   (I/dt + L/2 - diag(alpha e)/2) c_{k+1} = c_k/dt - L c_k/2 + (alpha e) (.) c_k/2
 *
 * The sparsity pattern and fill-reducing ordering are analysed once; each
 * step only refactorises.
 */
class CrankNicolsonStepper
{
 public:
  CrankNicolsonStepper(const LaplacianMatrix& L, double dt, LinearSolverKind kind = LinearSolverKind::Automatic);

  NodeField step(const NodeField& c_k, const NodeField& c_km1, const NodeField& alpha);

  /// Relative residual ||A x - b|| / ||b|| of the last solve.
  double last_residual() const { return last_residual_; }

  static constexpr double kResidualTolerance = 1e-10;

 private:
  const LaplacianMatrix& L_;
  double dt_;
  bool direct_;
  LaplacianMatrix base_;  // I/dt + L/2
  LaplacianMatrix system_;
  std::vector<Eigen::Index> diagonal_slots_;
  Eigen::SimplicialLDLT<LaplacianMatrix> ldlt_;
  Eigen::BiCGSTAB<LaplacianMatrix, Eigen::DiagonalPreconditioner<double>> bicgstab_;
  NodeField Lc_, reaction_, rhs_, residual_;
  double last_residual_ = 0.0;
};

/// Single step; convenience wrapper around CrankNicolsonStepper.
NodeField step(const NodeField& c_k, const NodeField& c_km1, const LaplacianMatrix& L, const NodeField& alpha,
               double dt);

/// Runs N_t steps from c0 with c^{-1} = c^0, recording the states at the
/// configured sample times.
Trajectory solve_trajectory(const LaplacianMatrix& L, const NodeField& alpha, const NodeField& c0,
                            const SolverConfig& cfg);
Trajectory solve_trajectory(const Connectome& g, const NodeField& alpha, const NodeField& c0, const SolverConfig& cfg);

/// `time,node_0,...,node_{M-1}`.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace fkuq
