#pragma once

#include "quadro/types.hpp"

namespace quadro {

struct MomentPair {
  double mean = 0.0;
  double variance = 0.0;
};

/// E[Q(X)] for X ~ (mu, Sigma):  tr(Omega Sigma) + mu'Omega mu - 2 delta'mu.
/// Distribution-free (only the first two moments of X enter).
double projection_mean(const ClassModel& c, const QuadraticProjection& q);

/// var[Q(X)] for elliptical X with kurtosis parameter kappa:
///   2(1+kappa) tr((Omega Sigma)^2) + kappa tr(Omega Sigma)^2
///   + 4 (Omega mu - delta)' Sigma (Omega mu - delta).
double projection_variance(const ClassModel& c, const QuadraticProjection& q);

/// Gaussian-only variance path, written independently of the elliptical
/// formula (no kappa terms). Used to cross-check the kappa = 0 case.
double projection_variance_gaussian(const ClassModel& c,
                                    const QuadraticProjection& q);

MomentPair projection_moments(const ClassModel& c, const QuadraticProjection& q);

/// Rayleigh quotient of a projection between the two classes.
///   R  = (m0 - m1)^2 / (pi v0 + (1-pi) v1)
///   Rq = pi (1-pi) R   (the conditional-variance form of the same ratio)
struct RayleighPair {
  double r = 0.0;
  double rq = 0.0;
};

RayleighPair rayleigh(const TwoClassModel& model, const QuadraticProjection& q);

/// Optimal linear direction under a pooled covariance:
///   a = (pi Sigma0 + (1-pi) Sigma1)^{-1} (mu0 - mu1).
/// With Sigma0 = Sigma1 this is the exact maximizer of R over linear scores.
Vector linear_rq_direction(const TwoClassModel& model);

}  // namespace quadro
