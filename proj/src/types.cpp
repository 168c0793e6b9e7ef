#include "quadro/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace quadro {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidConfig(msg);
}

}  // namespace

ClassModel make_class_model(const Vector& mu, const Matrix& sigma, double kappa) {
  const Eigen::Index d = mu.size();
  if (d < 1) throw DimensionMismatch("class model requires dimension >= 1");
  if (sigma.rows() != d || sigma.cols() != d) {
    throw DimensionMismatch("sigma must be " + std::to_string(d) + "x" +
                            std::to_string(d) + ", got " +
                            std::to_string(sigma.rows()) + "x" +
                            std::to_string(sigma.cols()));
  }
  if (!mu.allFinite() || !sigma.allFinite() || !std::isfinite(kappa)) {
    throw InvalidConfig("class model entries must be finite");
  }

  ClassModel m;
  m.mu = mu;
  // Symmetrize entry pairs once and mirror, so the result is symmetric
  // bitwise, not merely up to rounding.
  m.sigma = Matrix(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    m.sigma(i, i) = sigma(i, i);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double v = 0.5 * (sigma(i, j) + sigma(j, i));
      m.sigma(i, j) = v;
      m.sigma(j, i) = v;
    }
  }
  m.kappa = kappa;

  Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin < -1e-10 * std::max(lmax, 0.0)) {
    throw NotPositiveSemidefinite(
        "sigma has eigenvalue " + std::to_string(lmin) +
        " below the tolerance -1e-10 * " + std::to_string(std::max(lmax, 0.0)));
  }

  const double kappa_floor = -2.0 / (static_cast<double>(d) + 2.0);
  if (kappa < kappa_floor) {
    throw InvalidKurtosis("kappa = " + std::to_string(kappa) +
                          " below the elliptical floor -2/(d+2) = " +
                          std::to_string(kappa_floor));
  }
  return m;
}

TwoClassModel make_two_class_model(double pi, const ClassModel& class0,
                                   const ClassModel& class1) {
  if (!(pi > 0.0 && pi < 1.0)) {
    throw InvalidConfig("pi must lie strictly inside (0, 1)");
  }
  if (class0.dim() != class1.dim()) {
    throw DimensionMismatch("class dimensions differ: " +
                            std::to_string(class0.dim()) + " vs " +
                            std::to_string(class1.dim()));
  }
  TwoClassModel m;
  m.pi = pi;
  m.class0 = class0;
  m.class1 = class1;
  return m;
}

double QuadraticProjection::evaluate(const Vector& x) const {
  if (x.size() != delta.size()) {
    throw DimensionMismatch("projection evaluated on wrong dimension");
  }
  return x.dot(omega * x) - 2.0 * delta.dot(x);
}

Vector QuadraticProjection::scores(const Matrix& x) const {
  if (x.cols() != delta.size()) {
    throw DimensionMismatch("projection scored on wrong dimension");
  }
  const Matrix xo = x * omega;
  Vector s = (xo.array() * x.array()).rowwise().sum().matrix();
  s.noalias() -= 2.0 * (x * delta);
  return s;
}

QuadraticProjection make_projection(const Matrix& omega, const Vector& delta) {
  const Eigen::Index d = delta.size();
  if (d < 1) throw DimensionMismatch("projection requires dimension >= 1");
  if (omega.rows() != d || omega.cols() != d) {
    throw DimensionMismatch("omega must be square and match delta's dimension");
  }
  if (!omega.allFinite() || !delta.allFinite()) {
    throw InvalidConfig("projection entries must be finite");
  }
  QuadraticProjection q;
  q.omega = Matrix(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    q.omega(i, i) = omega(i, i);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double v = 0.5 * (omega(i, j) + omega(j, i));
      q.omega(i, j) = v;
      q.omega(j, i) = v;
    }
  }
  q.delta = delta;
  return q;
}

QuadraticProjection make_linear_projection(const Vector& a) {
  QuadraticProjection q;
  q.omega = Matrix::Zero(a.size(), a.size());
  q.delta = -0.5 * a;
  return q;
}

QuadraticProjection zero_projection(int d) {
  QuadraticProjection q;
  q.omega = Matrix::Zero(d, d);
  q.delta = Vector::Zero(d);
  return q;
}

SparsityReport projection_sparsity(const QuadraticProjection& q,
                                   double threshold) {
  if (threshold < 0.0) throw InvalidConfig("sparsity threshold must be >= 0");
  SparsityReport r;
  const Eigen::Index d = q.delta.size();
  std::set<int> active;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      if (std::abs(q.omega(i, j)) > threshold) {
        ++r.omega_nonzeros;
        active.insert(static_cast<int>(i));
        active.insert(static_cast<int>(j));
      }
    }
    if (std::abs(q.delta(j)) > threshold) {
      ++r.delta_nonzeros;
      active.insert(static_cast<int>(j));
    }
  }
  r.active_features.assign(active.begin(), active.end());
  return r;
}

Eigen::Index LabeledDataset::count(int label) const {
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) c += (y(i) == label);
  return c;
}

LabeledDataset make_dataset(const Matrix& x, const IntVector& y) {
  if (x.rows() != y.size()) {
    throw DimensionMismatch("feature matrix has " + std::to_string(x.rows()) +
                            " rows but labels have " + std::to_string(y.size()));
  }
  if (x.cols() < 1) throw DimensionMismatch("dataset requires dimension >= 1");
  if (!x.allFinite()) {
    throw InvalidConfig("dataset contains non-finite entries");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0 && y(i) != 1) {
      throw InvalidConfig("labels must lie in {0,1}; row " + std::to_string(i) +
                          " has " + std::to_string(y(i)));
    }
  }
  LabeledDataset ds;
  ds.x = x;
  ds.y = y;
  return ds;
}

void SolverConfig::validate() const {
  require(lambda_omega >= 0.0 && lambda_delta >= 0.0,
          "penalty weights must be >= 0");
  require(rho0 > 0.0, "rho0 must be > 0");
  require(rho_growth >= 1.0, "rho_growth must be >= 1");
  require(tol_feas > 0.0, "tol_feas must be > 0");
  require(tol_rel > 0.0, "tol_rel must be > 0");
  require(max_outer >= 1, "max_outer must be >= 1");
  require(max_inner >= 1, "max_inner must be >= 1");
}

TwoClassModel restrict_features(const TwoClassModel& model,
                                const std::vector<int>& features) {
  const int d = model.dim();
  if (features.empty()) throw InvalidConfig("feature subset must be nonempty");
  std::set<int> seen;
  for (int f : features) {
    if (f < 0 || f >= d) throw DimensionMismatch("feature index out of range");
    if (!seen.insert(f).second) throw InvalidConfig("duplicate feature index");
  }
  const int k = static_cast<int>(features.size());
  auto restrict_class = [&](const ClassModel& c) {
    Vector mu(k);
    Matrix sigma(k, k);
    for (int i = 0; i < k; ++i) {
      mu(i) = c.mu(features[i]);
      for (int j = 0; j < k; ++j) sigma(i, j) = c.sigma(features[i], features[j]);
    }
    // The kurtosis parameter of an elliptical distribution is shared by all
    // marginals, so it carries over unchanged.
    return make_class_model(mu, sigma, c.kappa);
  };
  return make_two_class_model(model.pi, restrict_class(model.class0),
                              restrict_class(model.class1));
}

}  // namespace quadro
