#pragma once

#include <cstdint>
#include <random>

#include "quadro/types.hpp"

namespace quadro {

/// Sampling families for the Monte Carlo oracle and the data simulator.
enum class SampleFamily { gaussian, student_t };

/// Draws from one elliptical class. For student_t the scale matrix is
/// shrunk by (df-2)/df so the sampled covariance equals sigma exactly;
/// df must exceed 4 so that fourth moments (and the kurtosis parameter
/// kappa = 2/(df-4)) exist.
class EllipticalSampler {
 public:
  EllipticalSampler(const ClassModel& c, SampleFamily family, double df = 0.0);

  Vector draw(std::mt19937_64& rng);

  SampleFamily family() const { return family_; }
  double df() const { return df_; }

 private:
  Vector mu_;
  Matrix root_;  // square root of the (family-adjusted) scale matrix
  SampleFamily family_;
  double df_ = 0.0;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::gamma_distribution<double> chisq_;  // chi^2_df via gamma(df/2, 2)
};

/// Simulation-based estimate of the score moments under one class, with
/// standard errors. Deterministic given (seed, n, family, df).
struct McMoments {
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  std::int64_t n = 0;
};

McMoments mc_moments(const ClassModel& c, const QuadraticProjection& q,
                     std::int64_t n, std::uint64_t seed,
                     SampleFamily family = SampleFamily::gaussian,
                     double df = 0.0);

/// Exhaustive maximization of the Rayleigh quotient over projections with
/// parameters on a grid, followed by coordinate-descent refinement. Scale
/// invariance is exploited by pinning one parameter to +/-1. Only intended
/// as a ground-truth oracle; cost grows exponentially, so d <= 3.
/// linear_only restricts the family to omega = 0.
struct GridSearchResult {
  QuadraticProjection projection;
  double r = 0.0;
};

GridSearchResult grid_search_rq(const TwoClassModel& model, int resolution,
                                bool linear_only = false);

}  // namespace quadro
