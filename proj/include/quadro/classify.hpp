#pragma once

// Classification on top of a quadratic projection: exact error of a linear
// rule under a common covariance, exact best-threshold error for small
// Gaussian models via quadrature, and empirical threshold search on data.

#include "quadro/types.hpp"

namespace quadro {

// A threshold rule on projection scores. When predict_one_below is true the
// rule assigns label 1 to scores strictly below the threshold, otherwise to
// scores at or above it.
struct ThresholdChoice {
  double threshold = 0.0;
  double error = 0.0;
  bool predict_one_below = true;
};

// Exact misclassification error of the linear rule induced by direction a
// with the midpoint threshold c = a'(mu0+mu1)/2, valid when both classes are
// Gaussian with the same covariance. Equals 1 - Phi(sqrt(R)/2) where R is
// the Rayleigh quotient of the linear projection.
//
// Throws UnequalCovariances when the covariances differ (relative 1e-8),
// WrongOrientation when a'(mu0-mu1) < 0 (flip a instead). A zero gap is
// allowed and gives error 0.5: the classes are indistinguishable along a.
double err_linear_common_cov(const TwoClassModel& model, const Vector& a);

// Exact minimum-over-thresholds error of the rule 1{Q(x) < c} (both label
// orientations considered) for Gaussian classes in dimension 1 or 2. The
// class-conditional law of Q(X) is evaluated by exact quadratic-form CDF
// formulas in 1-d and one layer of adaptive quadrature in 2-d; the threshold
// is located on a grid of grid_size points and refined by golden section.
//
// Throws UnsupportedDimension (d > 2), NonGaussianClass (kappa != 0),
// InvalidConfig (grid_size < 100).
ThresholdChoice best_threshold_error_1d(const TwoClassModel& model,
                                        const QuadraticProjection& q,
                                        int grid_size = 400);

// Best empirical threshold rule on the scores Q(x_i): scans every achievable
// split of the sorted scores (plus the two extreme splits, represented by
// finite thresholds just outside the score range) in both orientations and
// returns the minimizing rule. Ties break toward the smaller threshold, and
// toward predict_one_below on exact ties across orientations.
//
// Throws EmptyClass when a label is absent.
ThresholdChoice empirical_error(const LabeledDataset& data,
                                const QuadraticProjection& q);

// Empirical two-class Rayleigh quotient of a score vector: squared mean gap
// over the prior-weighted average of the per-class (maximum-likelihood)
// variances, with the class-0 fraction as prior. Returns 0 when either class
// is empty or the pooled variance vanishes.
double empirical_rayleigh(const Vector& scores, const IntVector& labels);

}  // namespace quadro
