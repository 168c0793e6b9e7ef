#include "quadro/moments.hpp"

#include <cmath>
#include <string>

namespace quadro {

namespace {

void check_dims(const ClassModel& c, const QuadraticProjection& q) {
  if (c.dim() != q.dim()) {
    throw DimensionMismatch("model dimension " + std::to_string(c.dim()) +
                            " vs projection dimension " + std::to_string(q.dim()));
  }
}

}  // namespace

double projection_mean(const ClassModel& c, const QuadraticProjection& q) {
  check_dims(c, q);
  const Matrix m = q.omega * c.sigma;
  return m.trace() + c.mu.dot(q.omega * c.mu) - 2.0 * q.delta.dot(c.mu);
}

double projection_variance(const ClassModel& c, const QuadraticProjection& q) {
  check_dims(c, q);
  const Matrix m = q.omega * c.sigma;
  const double t1 = m.trace();
  // tr((Omega Sigma)^2) accumulated entrywise, without forming the square.
  const double t2 = (m.array() * m.transpose().array()).sum();
  const Vector r = q.omega * c.mu - q.delta;
  const double quad_part = 2.0 * (1.0 + c.kappa) * t2 + c.kappa * t1 * t1;
  const double lin_part = 4.0 * r.dot(c.sigma * r);
  const double v = quad_part + lin_part;
  // The quadratic part is a PSD form only for kappa >= -2/(d+2); a clearly
  // negative value means the supplied kurtosis is incompatible with the
  // covariance. Tiny negatives are rounding and are clamped.
  const double scale =
      2.0 * std::abs(1.0 + c.kappa) * std::abs(t2) +
      std::abs(c.kappa) * t1 * t1 + std::abs(lin_part);
  if (v < -1e-12 * (scale + 1.0)) {
    throw InvalidKurtosis("variance form is negative (" + std::to_string(v) +
                          ") for kappa = " + std::to_string(c.kappa));
  }
  return v < 0.0 ? 0.0 : v;
}

double projection_variance_gaussian(const ClassModel& c,
                                    const QuadraticProjection& q) {
  check_dims(c, q);
  // Gaussian special case, var[Q] = 2 tr((Omega Sigma)^2) + 4 r' Sigma r with
  // r = Omega mu - delta. Deliberately evaluated with explicit index loops,
  // independent of the elliptical code path, so the two can cross-check each
  // other.
  const int d = c.dim();
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += q.omega(i, k) * c.sigma(k, j);
      m(i, j) = acc;
    }
  }
  double t2 = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) t2 += m(i, j) * m(j, i);

  Vector r(d);
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += q.omega(i, k) * c.mu(k);
    r(i) = acc - q.delta(i);
  }
  double quad_form = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) quad_form += r(i) * c.sigma(i, j) * r(j);

  return 2.0 * t2 + 4.0 * quad_form;
}

MomentPair projection_moments(const ClassModel& c, const QuadraticProjection& q) {
  MomentPair p;
  p.mean = projection_mean(c, q);
  p.variance = projection_variance(c, q);
  return p;
}

RayleighPair rayleigh(const TwoClassModel& model, const QuadraticProjection& q) {
  const double m0 = projection_mean(model.class0, q);
  const double m1 = projection_mean(model.class1, q);
  const double v0 = projection_variance(model.class0, q);
  const double v1 = projection_variance(model.class1, q);
  const double den = model.pi * v0 + (1.0 - model.pi) * v1;
  const double gate = std::abs(m0) + std::abs(m1) + 1.0;
  if (den <= 1e-12 * gate * gate) {
    throw DegenerateProjection(
        "within-class variance denominator is numerically zero");
  }
  RayleighPair out;
  const double gap = m0 - m1;
  out.r = gap * gap / den;
  out.rq = model.pi * (1.0 - model.pi) * out.r;
  return out;
}

Vector linear_rq_direction(const TwoClassModel& model) {
  const Matrix pooled =
      model.pi * model.class0.sigma + (1.0 - model.pi) * model.class1.sigma;
  Eigen::SelfAdjointEigenSolver<Matrix> es(pooled);
  const Vector& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  const double lmin = ev.minCoeff();
  if (!(lmin > 0.0) || lmax / lmin >= 1e12) {
    throw SingularPooledCovariance(
        "pooled covariance condition number exceeds 1e12");
  }
  const Vector diff = model.class0.mu - model.class1.mu;
  return es.eigenvectors() *
         (es.eigenvectors().transpose() * diff).cwiseQuotient(ev);
}

}  // namespace quadro
