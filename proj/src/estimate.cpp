#include "quadro/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace quadro {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

Matrix clip_to_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector l = es.eigenvalues();
  bool changed = false;
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (l(i) < 0.0) {
      l(i) = 0.0;
      changed = true;
    }
  }
  if (!changed) return a;
  Matrix out = es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
  // Re-symmetrize the reassembled product to kill rounding asymmetry.
  return 0.5 * (out + out.transpose());
}

}  // namespace

void EstimatorConfig::validate() const {
  if (mom_blocks < 1) throw InvalidConfig("mom_blocks must be >= 1");
  if (!(huber_c > 0.0)) throw InvalidConfig("huber_c must be > 0");
  if (!std::isfinite(kappa_fixed)) throw InvalidConfig("kappa_fixed must be finite");
}

double estimate_prior(const LabeledDataset& data) {
  const Eigen::Index n = data.n();
  if (n == 0) throw EmptyDataset("cannot estimate a prior from zero rows");
  const Eigen::Index n0 = data.count(0);
  if (n0 == 0 || n0 == n) {
    throw EmptyClass("both labels must occur to estimate a prior");
  }
  const double p = static_cast<double>(n0) / static_cast<double>(n);
  const double lo = 1.0 / (static_cast<double>(n) + 2.0);
  return std::clamp(p, lo, 1.0 - lo);
}

Vector sample_mean(const Matrix& rows) {
  if (rows.rows() == 0) throw EmptyDataset("mean of zero rows");
  Vector acc = Vector::Zero(rows.cols());
  for (Eigen::Index a = 0; a < rows.rows(); ++a) acc += rows.row(a).transpose();
  return acc / static_cast<double>(rows.rows());
}

Matrix sample_covariance(const Matrix& rows, const Vector& mu_hat) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (n < 2) throw TooFewRows("covariance needs at least 2 rows");
  if (mu_hat.size() != d) throw DimensionMismatch("mu_hat dimension mismatch");
  Matrix acc = Matrix::Zero(d, d);
  for (Eigen::Index a = 0; a < n; ++a) {
    const Vector z = rows.row(a).transpose() - mu_hat;
    acc.noalias() += z * z.transpose();
  }
  return acc / static_cast<double>(n);
}

Vector robust_mean(const Matrix& rows, const EstimatorConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = rows.rows();
  if (n == 0) throw EmptyDataset("robust mean of zero rows");
  if (n < cfg.mom_blocks) {
    throw TooFewRows("median-of-means needs n >= mom_blocks (" +
                     std::to_string(n) + " < " + std::to_string(cfg.mom_blocks) +
                     ")");
  }
  // One block degenerates to the plain mean, bitwise (same code path).
  if (cfg.mom_blocks == 1) return sample_mean(rows);

  const Eigen::Index d = rows.cols();
  // Canonical order first (lexicographic by row), so the seeded shuffle and
  // hence the block assignment depend only on the multiset of rows.
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (rows(a, j) < rows(b, j)) return true;
      if (rows(a, j) > rows(b, j)) return false;
    }
    return false;
  });
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const int blocks = cfg.mom_blocks;
  const Eigen::Index base = n / blocks;
  const Eigen::Index extra = n % blocks;  // first `extra` blocks get one more
  Matrix block_means(blocks, d);
  Eigen::Index pos = 0;
  for (int b = 0; b < blocks; ++b) {
    const Eigen::Index len = base + (b < extra ? 1 : 0);
    Vector acc = Vector::Zero(d);
    for (Eigen::Index t = 0; t < len; ++t) acc += rows.row(idx[pos + t]).transpose();
    block_means.row(b) = (acc / static_cast<double>(len)).transpose();
    pos += len;
  }

  Vector out(d);
  std::vector<double> col(blocks);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (int b = 0; b < blocks; ++b) col[b] = block_means(b, j);
    out(j) = median_inplace(col);
  }
  return out;
}

Matrix robust_covariance(const Matrix& rows, const Vector& mu_hat,
                         const EstimatorConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (n < 2) throw TooFewRows("robust covariance needs at least 2 rows");
  if (mu_hat.size() != d) throw DimensionMismatch("mu_hat dimension mismatch");

  const Matrix z = rows.rowwise() - mu_hat.transpose();
  const double root_n = std::sqrt(static_cast<double>(n));

  Matrix out(d, d);
  std::vector<double> prod(n), dev(n);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      for (Eigen::Index a = 0; a < n; ++a) prod[a] = z(a, i) * z(a, j);
      std::vector<double> tmp = prod;
      const double med = median_inplace(tmp);
      for (Eigen::Index a = 0; a < n; ++a) dev[a] = std::abs(prod[a] - med);
      const double mad = 1.4826 * median_inplace(dev);
      const double tau = cfg.huber_c * mad * root_n;
      double acc = 0.0;
      for (Eigen::Index a = 0; a < n; ++a) {
        const double u = prod[a];
        acc += std::copysign(std::min(std::abs(u), tau), u);
      }
      const double value = acc / static_cast<double>(n);
      out(i, j) = value;
      out(j, i) = value;
    }
  }
  if (cfg.psd_repair == EstimatorConfig::PsdRepair::clip) out = clip_to_psd(out);
  return out;
}

double estimate_kurtosis(const Matrix& rows, const Vector& mu_hat,
                         const Matrix& sigma_hat) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (n < d + 2) {
    throw TooFewRows("kurtosis estimation needs n >= d + 2 rows");
  }
  if (mu_hat.size() != d || sigma_hat.rows() != d || sigma_hat.cols() != d) {
    throw DimensionMismatch("kurtosis estimator dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_hat);
  const Vector& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() >= 1e12) {
    throw SingularCovariance(
        "covariance is singular or too ill-conditioned for standardization");
  }
  const Matrix& u = es.eigenvectors();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Vector w = u.transpose() * (rows.row(a).transpose() - mu_hat);
    const double s = (w.array().square() / ev.array()).sum();
    acc += s * s;
  }
  const double dd = static_cast<double>(d);
  const double kappa = acc / static_cast<double>(n) / (dd * (dd + 2.0)) - 1.0;
  return std::max(kappa, -2.0 / (dd + 2.0));
}

TwoClassModel fit_model(const LabeledDataset& data, const EstimatorConfig& cfg) {
  cfg.validate();
  if (data.n() == 0) throw EmptyDataset("cannot fit a model on zero rows");
  const double pi = estimate_prior(data);  // also rejects single-class data

  const int d = data.dim();
  ClassModel fitted[2];
  for (int label = 0; label < 2; ++label) {
    const Eigen::Index nk = data.count(label);
    Matrix rows(nk, d);
    Eigen::Index r = 0;
    for (Eigen::Index a = 0; a < data.n(); ++a) {
      if (data.y(a) == label) rows.row(r++) = data.x.row(a);
    }
    if (nk < 2) {
      throw TooFewRows("class " + std::to_string(label) +
                       " has fewer than 2 rows");
    }
    if (cfg.method == EstimatorConfig::Method::robust && nk < cfg.mom_blocks) {
      throw TooFewRows("class " + std::to_string(label) +
                       " has fewer rows than mom_blocks");
    }
    if (cfg.kurtosis == EstimatorConfig::KurtosisMode::automatic && nk < d + 2) {
      throw TooFewRows("class " + std::to_string(label) +
                       " needs n >= d + 2 rows for kurtosis estimation");
    }

    Vector mu;
    Matrix sigma;
    if (cfg.method == EstimatorConfig::Method::robust) {
      mu = robust_mean(rows, cfg);
      sigma = robust_covariance(rows, mu, cfg);
    } else {
      mu = sample_mean(rows);
      sigma = sample_covariance(rows, mu);
      if (cfg.psd_repair == EstimatorConfig::PsdRepair::clip) {
        // The sample covariance is PSD by construction; clipping is a no-op
        // kept for uniformity of the pipeline.
      }
    }

    double kappa = cfg.kappa_fixed;
    if (cfg.kurtosis == EstimatorConfig::KurtosisMode::automatic) {
      kappa = estimate_kurtosis(rows, mu, sigma);
    }
    fitted[label] = make_class_model(mu, sigma, kappa);
  }
  return make_two_class_model(pi, fitted[0], fitted[1]);
}

}  // namespace quadro
