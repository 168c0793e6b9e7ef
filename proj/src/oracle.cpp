#include "quadro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quadro/moments.hpp"

namespace quadro {

namespace {

Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector l = es.eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = std::sqrt(std::max(l(i), 0.0));
  return es.eigenvectors() * l.asDiagonal();
}

}  // namespace

EllipticalSampler::EllipticalSampler(const ClassModel& c, SampleFamily family,
                                     double df)
    : mu_(c.mu), family_(family), df_(df) {
  if (family == SampleFamily::student_t) {
    if (!(df > 4.0)) {
      throw InvalidDf("student_t sampling requires df > 4, got " +
                      std::to_string(df));
    }
    // Scale matrix (df-2)/df * Sigma gives covariance exactly Sigma.
    root_ = psd_sqrt(((df - 2.0) / df) * c.sigma);
    chisq_ = std::gamma_distribution<double>(df / 2.0, 2.0);
  } else {
    root_ = psd_sqrt(c.sigma);
  }
}

Vector EllipticalSampler::draw(std::mt19937_64& rng) {
  Vector z(mu_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng);
  Vector x = mu_ + root_ * z;
  if (family_ == SampleFamily::student_t) {
    const double w = chisq_(rng);
    const double scale = std::sqrt(df_ / w);
    x = mu_ + (root_ * z) * scale;
  }
  return x;
}

McMoments mc_moments(const ClassModel& c, const QuadraticProjection& q,
                     std::int64_t n, std::uint64_t seed, SampleFamily family,
                     double df) {
  if (c.dim() != q.dim()) {
    throw DimensionMismatch("model and projection dimensions differ");
  }
  if (n < 10000) {
    throw InvalidConfig("mc_moments requires n >= 10000 draws");
  }
  EllipticalSampler sampler(c, family, df);
  std::mt19937_64 rng(seed);

  // Streaming central moments up to order four (Welford-style updates).
  double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (std::int64_t i = 1; i <= n; ++i) {
    const double x = q.evaluate(sampler.draw(rng));
    const double delta = x - mean;
    const double dn = delta / static_cast<double>(i);
    const double dn2 = dn * dn;
    const double term1 = delta * dn * static_cast<double>(i - 1);
    m4 += term1 * dn2 * (static_cast<double>(i) * i - 3.0 * i + 3.0) +
          6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += term1 * dn * (static_cast<double>(i) - 2.0) - 3.0 * dn * m2;
    m2 += term1;
    mean += dn;
  }

  McMoments out;
  out.n = n;
  out.mean = mean;
  out.variance = m2 / static_cast<double>(n - 1);
  const double cm4 = m4 / static_cast<double>(n);
  out.se_mean = std::sqrt(out.variance / static_cast<double>(n));
  out.se_variance = std::sqrt(
      std::max(cm4 - out.variance * out.variance, 0.0) / static_cast<double>(n));
  return out;
}

namespace {

// Flattened parameterization used by the grid search: omega upper triangle
// in column order (i <= j), then delta. Small fixed-size buffers since d <= 3.
struct GridEval {
  int d = 0;
  int n_omega = 0;   // d(d+1)/2, or 0 in linear-only mode
  int n_params = 0;  // n_omega + d
  double pi = 0.0;
  double mu[2][3] = {};
  double sigma[2][3][3] = {};
  double kappa[2] = {};

  explicit GridEval(const TwoClassModel& model, bool linear_only) {
    d = model.dim();
    n_omega = linear_only ? 0 : d * (d + 1) / 2;
    n_params = n_omega + d;
    pi = model.pi;
    const ClassModel* cls[2] = {&model.class0, &model.class1};
    for (int k = 0; k < 2; ++k) {
      kappa[k] = cls[k]->kappa;
      for (int i = 0; i < d; ++i) {
        mu[k][i] = cls[k]->mu(i);
        for (int j = 0; j < d; ++j) sigma[k][i][j] = cls[k]->sigma(i, j);
      }
    }
  }

  void unpack(const double* p, double omega[3][3], double delta[3]) const {
    int idx = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) omega[i][j] = 0.0;
    if (n_omega > 0) {
      for (int j = 0; j < d; ++j) {
        for (int i = 0; i <= j; ++i) {
          omega[i][j] = p[idx];
          omega[j][i] = p[idx];
          ++idx;
        }
      }
    }
    for (int j = 0; j < d; ++j) delta[j] = p[idx++];
  }

  // Rayleigh quotient R, or -1 when the within-class variance is
  // numerically degenerate for this candidate.
  double rq(const double* p) const {
    double omega[3][3], delta[3];
    unpack(p, omega, delta);

    double m[2], v[2];
    for (int k = 0; k < 2; ++k) {
      double prod[3][3];  // omega * sigma
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          double acc = 0.0;
          for (int l = 0; l < d; ++l) acc += omega[i][l] * sigma[k][l][j];
          prod[i][j] = acc;
        }
      }
      double t1 = 0.0, t2 = 0.0;
      for (int i = 0; i < d; ++i) t1 += prod[i][i];
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t2 += prod[i][j] * prod[j][i];

      double mu_omega_mu = 0.0, delta_mu = 0.0;
      double r[3];
      for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int l = 0; l < d; ++l) acc += omega[i][l] * mu[k][l];
        r[i] = acc - delta[i];
        mu_omega_mu += mu[k][i] * acc;
        delta_mu += delta[i] * mu[k][i];
      }
      double quad_form = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) quad_form += r[i] * sigma[k][i][j] * r[j];

      m[k] = t1 + mu_omega_mu - 2.0 * delta_mu;
      v[k] = 2.0 * (1.0 + kappa[k]) * t2 + kappa[k] * t1 * t1 + 4.0 * quad_form;
    }
    const double den = pi * v[0] + (1.0 - pi) * v[1];
    const double gate = std::abs(m[0]) + std::abs(m[1]) + 1.0;
    if (den <= 1e-12 * gate * gate) return -1.0;
    const double gap = m[0] - m[1];
    return gap * gap / den;
  }
};

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

GridSearchResult grid_search_rq(const TwoClassModel& model, int resolution,
                                bool linear_only) {
  const int d = model.dim();
  if (d > 3) {
    throw DimensionTooLarge("grid search supports d <= 3, got " +
                            std::to_string(d));
  }
  if (resolution < 2) throw InvalidConfig("grid resolution must be >= 2");

  const GridEval eval(model, linear_only);
  const int np = eval.n_params;

  std::vector<double> levels(resolution);
  for (int i = 0; i < resolution; ++i) {
    levels[i] = -3.0 + 6.0 * static_cast<double>(i) / (resolution - 1);
  }

  double best_r = -1.0;
  std::vector<double> best(np, 0.0);

  std::vector<double> params(np);
  std::vector<int> odo(np > 1 ? np - 1 : 0);
  // Pin each parameter in turn to +/-1 (scale invariance), sweep the rest.
  for (int pin = 0; pin < np; ++pin) {
    for (int sign = 0; sign < 2; ++sign) {
      const double pin_value = sign == 0 ? 1.0 : -1.0;
      std::fill(odo.begin(), odo.end(), 0);
      while (true) {
        int slot = 0;
        for (int i = 0; i < np; ++i) {
          params[i] = (i == pin) ? pin_value : levels[odo[slot++]];
        }
        const double r = eval.rq(params.data());
        if (r > best_r || (r == best_r && r >= 0.0 && lex_less(params, best))) {
          best_r = r;
          best = params;
        }
        // Advance the odometer over the np-1 free slots.
        int k = 0;
        for (; k < np - 1; ++k) {
          if (++odo[k] < resolution) break;
          odo[k] = 0;
        }
        if (k == np - 1) break;
      }
    }
  }

  // Coordinate-descent refinement with a shrinking step, starting from the
  // grid spacing. The pinned scale freedom means refining all coordinates
  // is safe (a pure rescaling cannot increase R).
  double step = 6.0 / (resolution - 1);
  std::vector<double> cand = best;
  for (int pass = 0; pass < 50; ++pass) {
    for (int i = 0; i < np; ++i) {
      for (double dir : {+1.0, -1.0}) {
        cand = best;
        cand[i] = best[i] + dir * step;
        const double r = eval.rq(cand.data());
        if (r > best_r) {
          best_r = r;
          best = cand;
        }
      }
    }
    step *= 0.7;
  }

  GridSearchResult out;
  double omega[3][3], delta[3];
  eval.unpack(best.data(), omega, delta);
  Matrix om = Matrix::Zero(d, d);
  Vector de(d);
  for (int i = 0; i < d; ++i) {
    de(i) = delta[i];
    for (int j = 0; j < d; ++j) om(i, j) = omega[i][j];
  }
  out.projection = make_projection(om, de);
  out.r = best_r >= 0.0 ? rayleigh(model, out.projection).r : 0.0;
  return out;
}

}  // namespace quadro
