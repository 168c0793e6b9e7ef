#pragma once

#include <cstdint>

#include "quadro/types.hpp"

namespace quadro {

/// Configuration for fitting a TwoClassModel from data.
///
/// method = sample uses the plain mean / covariance. method = robust uses a
/// median-of-means location estimate and an entrywise Huber-truncated
/// covariance, which keep their accuracy under heavy tails (finite fourth
/// moments suffice).
struct EstimatorConfig {
  enum class Method { sample, robust };
  enum class PsdRepair { clip, none };
  enum class KurtosisMode { automatic, fixed };

  Method method = Method::sample;
  int mom_blocks = 10;     // median-of-means block count (robust mean)
  double huber_c = 2.0;    // truncation multiplier (robust covariance)
  PsdRepair psd_repair = PsdRepair::clip;
  KurtosisMode kurtosis = KurtosisMode::automatic;
  double kappa_fixed = 0.0;
  std::uint64_t seed = 0;  // fixes the median-of-means block assignment

  void validate() const;
};

/// P(Y = 0) estimated as the class-0 frequency, clamped into
/// [1/(n+2), 1 - 1/(n+2)] so downstream mixture weights stay interior.
double estimate_prior(const LabeledDataset& data);

/// Plain column mean of the rows.
Vector sample_mean(const Matrix& rows);

/// Second-moment matrix of rows centered at mu_hat (normalized by n).
Matrix sample_covariance(const Matrix& rows, const Vector& mu_hat);

/// Median-of-means location estimate. Rows are put in a canonical order,
/// shuffled with the seeded generator, split into mom_blocks contiguous
/// blocks, and the coordinatewise median of the block means is returned.
/// With mom_blocks = 1 this is exactly (bitwise) the plain mean.
Vector robust_mean(const Matrix& rows, const EstimatorConfig& cfg);

/// Entrywise Huber-truncated covariance, centered at mu_hat. Each product
/// z_ai * z_aj is passed through psi_tau(u) = sign(u) min(|u|, tau) with
/// tau_ij = huber_c * MAD_ij * sqrt(n); the MAD keeps the level
/// scale-equivariant while the sqrt(n) growth makes the truncation bias
/// vanish whenever fourth moments exist. Optional eigenvalue clipping
/// repairs indefiniteness introduced by the truncation.
Matrix robust_covariance(const Matrix& rows, const Vector& mu_hat,
                         const EstimatorConfig& cfg);

/// Elliptical kurtosis parameter from standardized squared radii:
///   kappa_hat = max( mean(s_a^2) / (d(d+2)) - 1 , -2/(d+2) ),
/// where s_a = z_a' Sigma_hat^{-1} z_a. Requires n >= d + 2 rows and a
/// well-conditioned Sigma_hat.
double estimate_kurtosis(const Matrix& rows, const Vector& mu_hat,
                         const Matrix& sigma_hat);

/// Full pipeline: split rows by label, estimate the prior and each class's
/// (mu, Sigma, kappa) per the configuration.
TwoClassModel fit_model(const LabeledDataset& data, const EstimatorConfig& cfg);

}  // namespace quadro
