#pragma once

#include <utility>
#include <vector>

#include "quadro/types.hpp"

namespace quadro {

/// Smooth part of the solver objective: D(q) = pi V0(q) + (1-pi) V1(q),
/// the prior-weighted within-class variance of the score. A homogeneous
/// positive-semidefinite quadratic form in (omega, delta) whenever each
/// kappa_k >= -2/(d+2).
double smooth_objective(const TwoClassModel& model, const QuadraticProjection& q);

/// Between-class mean gap, affine in the projection:
///   gap(q) = <omega, Sigma0 - Sigma1 + mu0 mu0' - mu1 mu1'> - 2 delta'(mu0 - mu1).
double gap(const TwoClassModel& model, const QuadraticProjection& q);

/// Entrywise shrinkage sign(v) * max(|v| - t, 0).
double soft_threshold(double v, double t);

struct SolverTraceEntry {
  int outer = 0;
  double objective = 0.0;       // D + penalties
  double feas_residual = 0.0;   // |gap - 1|
  double kkt_residual = 0.0;
  double rho = 0.0;
  double dual = 0.0;
  double omega_asymmetry = 0.0;  // max |omega_ij - omega_ji| at this iterate
};

struct SolverResult {
  QuadraticProjection projection;
  double dual = 0.0;           // final multiplier estimate
  double feas_residual = 0.0;  // |gap - 1| at the solution
  double kkt_residual = 0.0;   // norm of the smallest Lagrangian subgradient
  double objective = 0.0;      // D + lambda_omega ||omega||_1 + lambda_delta ||delta||_1
  int iterations = 0;          // outer iterations performed
  long inner_iterations = 0;   // proximal-gradient steps in total
  bool converged = false;
  /// Caps were hit while still far from feasibility (feas > 10 * tol_feas).
  bool did_not_converge = false;
  /// Worst relative increase of the augmented Lagrangian observed within an
  /// inner loop; a correct monotone inner solver keeps this at rounding level.
  double max_inner_increase = 0.0;
  std::vector<SolverTraceEntry> trace;
};

/// Sparse Rayleigh-quotient maximization via the dual form: minimize
///   D(q) + lambda_omega ||omega||_1 + lambda_delta ||delta||_1
/// subject to gap(q) = 1, with a linearized augmented Lagrangian: outer
/// multiplier/penalty updates around an inner proximal-gradient loop
/// (entrywise soft-thresholding, omega re-symmetrized after each step).
/// At a feasible point, R(q) = 1 / D(q), so small D means large Rayleigh
/// quotient.
SolverResult solve_quadro(const TwoClassModel& model, const SolverConfig& cfg);

/// Warm-started sweep over penalty pairs (lambda_omega, lambda_delta),
/// which must be sorted by descending lambda_omega + lambda_delta.
std::vector<SolverResult> solution_path(
    const TwoClassModel& model,
    const std::vector<std::pair<double, double>>& lambdas,
    const SolverConfig& cfg);

}  // namespace quadro
