#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "quadro/errors.hpp"

namespace quadro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// One labeled class: mean, covariance and the elliptical kurtosis parameter
/// kappa (0 for Gaussian, 2/(df-4) for a multivariate t with df > 4).
///
/// Construct through make_class_model, which symmetrizes sigma, checks
/// positive semidefiniteness and validates kappa >= -2/(d+2). Treat the
/// fields as immutable after construction.
struct ClassModel {
  Vector mu;
  Matrix sigma;
  double kappa = 0.0;

  int dim() const { return static_cast<int>(mu.size()); }
};

ClassModel make_class_model(const Vector& mu, const Matrix& sigma, double kappa);

/// Mixture of two labeled classes; pi = P(Y = 0) is the weight of class0.
struct TwoClassModel {
  double pi = 0.5;
  ClassModel class0;
  ClassModel class1;

  int dim() const { return class0.dim(); }
};

TwoClassModel make_two_class_model(double pi, const ClassModel& class0,
                                   const ClassModel& class1);

/// Quadratic score Q(x) = x' Omega x - 2 delta' x. Omega symmetric; the
/// projection is linear exactly when Omega = 0.
struct QuadraticProjection {
  Matrix omega;
  Vector delta;

  int dim() const { return static_cast<int>(delta.size()); }

  double evaluate(const Vector& x) const;
  /// Scores for every row of an n x d matrix.
  Vector scores(const Matrix& x) const;
};

QuadraticProjection make_projection(const Matrix& omega, const Vector& delta);
/// Linear score Q(x) = a'x, i.e. omega = 0, delta = -a/2.
QuadraticProjection make_linear_projection(const Vector& a);
QuadraticProjection zero_projection(int d);

/// Sparsity summary of a projection at a magnitude threshold.
struct SparsityReport {
  int omega_nonzeros = 0;  // upper-triangle count (i <= j)
  int delta_nonzeros = 0;
  std::vector<int> active_features;  // 0-based coordinates touched by omega or delta
};

SparsityReport projection_sparsity(const QuadraticProjection& q,
                                   double threshold);

/// n x d observations with binary labels in {0, 1}. Entries must be finite.
struct LabeledDataset {
  Matrix x;
  IntVector y;

  Eigen::Index n() const { return x.rows(); }
  int dim() const { return static_cast<int>(x.cols()); }
  Eigen::Index count(int label) const;
};

LabeledDataset make_dataset(const Matrix& x, const IntVector& y);

/// Tuning for the constrained sparse solver.
struct SolverConfig {
  double lambda_omega = 0.0;
  double lambda_delta = 0.0;
  double rho0 = 1.0;
  double rho_growth = 2.0;
  double tol_feas = 1e-8;
  double tol_rel = 1e-10;
  int max_outer = 100;
  int max_inner = 5000;
  enum class StepRule { fixed, backtracking };
  StepRule step_rule = StepRule::backtracking;

  void validate() const;
};

/// Restriction of a model to a subset of coordinates (useful for studying
/// single features). Indices are 0-based and must be distinct.
TwoClassModel restrict_features(const TwoClassModel& model,
                                const std::vector<int>& features);

}  // namespace quadro
