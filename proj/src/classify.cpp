#include "quadro/classify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "quadro/errors.hpp"
#include "quadro/moments.hpp"

namespace quadro {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// P(lam * w^2 + 2 b w <= x) for w ~ N(0,1), by completing the square.
double quad_component_cdf(double lam, double b, double x) {
  const double tiny = 1e-13 * (std::abs(b) + std::abs(x) + 1.0);
  if (std::abs(lam) <= tiny) {
    if (b == 0.0) return x >= 0.0 ? 1.0 : 0.0;
    const double z = x / (2.0 * b);
    return b > 0.0 ? normal_cdf(z) : 1.0 - normal_cdf(z);
  }
  const double m = b / lam;
  const double rhs = x / lam + m * m;  // event: (w + m)^2 vs rhs
  if (lam > 0.0) {
    if (rhs <= 0.0) return 0.0;
    const double u = std::sqrt(rhs);
    return normal_cdf(u - m) - normal_cdf(-u - m);
  }
  if (rhs <= 0.0) return 1.0;
  const double u = std::sqrt(rhs);
  return normal_cdf(-u - m) + 1.0 - normal_cdf(u - m);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol,
                            int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 28);
}

// Law of Q(X) for X Gaussian: in the whitened eigenbasis the score is
// q0 + sum_j (lambda_j w_j^2 + 2 b_j w_j) with independent standard normal
// w_j, which has an exact CDF in 1-d and needs one numeric integral in 2-d.
struct ScoreLaw {
  std::vector<double> lambda;
  std::vector<double> bcoef;
  double q0 = 0.0;
  double mean = 0.0;
  double sd = 0.0;

  ScoreLaw(const ClassModel& cls, const QuadraticProjection& q) {
    const Eigen::Index d = cls.dim();
    Eigen::SelfAdjointEigenSolver<Matrix> es_sigma(cls.sigma);
    Matrix root = es_sigma.eigenvectors();
    for (Eigen::Index j = 0; j < d; ++j) {
      root.col(j) *= std::sqrt(std::max(es_sigma.eigenvalues()(j), 0.0));
    }
    const Matrix a = root.transpose() * q.omega * root;
    Eigen::SelfAdjointEigenSolver<Matrix> es_a(0.5 * (a + a.transpose()));
    const Vector bvec = es_a.eigenvectors().transpose() *
                        (root.transpose() * (q.omega * cls.mu - q.delta));
    lambda.assign(es_a.eigenvalues().data(), es_a.eigenvalues().data() + d);
    bcoef.assign(bvec.data(), bvec.data() + d);
    q0 = cls.mu.dot(q.omega * cls.mu) - 2.0 * q.delta.dot(cls.mu);

    double var = 0.0;
    mean = q0;
    for (Eigen::Index j = 0; j < d; ++j) {
      mean += lambda[j];
      var += 2.0 * lambda[j] * lambda[j] + 4.0 * bcoef[j] * bcoef[j];
    }
    sd = std::sqrt(var);
  }

  double cdf(double t) const {
    const double s = t - q0;
    double lam_abs = 0.0;
    double b_norm2 = 0.0;
    for (std::size_t j = 0; j < lambda.size(); ++j) {
      lam_abs = std::max(lam_abs, std::abs(lambda[j]));
      b_norm2 += bcoef[j] * bcoef[j];
    }
    // Purely linear score: exact Gaussian CDF regardless of dimension.
    if (lam_abs <= 1e-13 * (std::sqrt(b_norm2) + std::abs(s) + 1.0)) {
      const double width = 2.0 * std::sqrt(b_norm2);
      if (width == 0.0) return s >= 0.0 ? 1.0 : 0.0;
      return normal_cdf(s / width);
    }
    if (lambda.size() == 1) {
      return quad_component_cdf(lambda[0], bcoef[0], s);
    }
    // Two components: integrate the milder one against its Gaussian weight
    // and evaluate the sharper one exactly inside.
    int outer = std::abs(lambda[0]) <= std::abs(lambda[1]) ? 0 : 1;
    const int inner = 1 - outer;
    const double lo_ = lambda[outer];
    const double bo = bcoef[outer];
    const double li = lambda[inner];
    const double bi = bcoef[inner];
    const auto integrand = [&](double w) {
      const double pdf =
          std::exp(-0.5 * w * w) * 0.39894228040143267794;  // 1/sqrt(2 pi)
      return pdf * quad_component_cdf(li, bi, s - lo_ * w * w - 2.0 * bo * w);
    };
    const double v = adaptive_simpson(integrand, -9.0, 9.0, 1e-10);
    return std::min(1.0, std::max(0.0, v));
  }
};

template <class F>
std::pair<double, double> golden_min(const F& f, double a, double b,
                                     int iters) {
  const double invphi = 0.61803398874989484820;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

}  // namespace

double err_linear_common_cov(const TwoClassModel& model, const Vector& a) {
  if (a.size() != model.dim()) {
    throw DimensionMismatch("direction length does not match model dimension");
  }
  const Matrix& s0 = model.class0.sigma;
  const Matrix& s1 = model.class1.sigma;
  const double scale =
      std::max(s0.cwiseAbs().maxCoeff(), s1.cwiseAbs().maxCoeff());
  if ((s0 - s1).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw UnequalCovariances(
        "the linear error identity requires a common covariance");
  }
  const double gap = a.dot(model.class0.mu - model.class1.mu);
  if (gap < 0.0) {
    throw WrongOrientation(
        "direction points from class 1 to class 0; flip its sign");
  }
  const RayleighPair rp = rayleigh(model, make_linear_projection(a));
  return 1.0 - normal_cdf(0.5 * std::sqrt(rp.r));
}

ThresholdChoice best_threshold_error_1d(const TwoClassModel& model,
                                        const QuadraticProjection& q,
                                        int grid_size) {
  if (model.dim() != q.dim()) {
    throw DimensionMismatch("model and projection dimensions differ");
  }
  if (model.dim() > 2) {
    throw UnsupportedDimension(
        "exact threshold error is implemented for dimensions 1 and 2");
  }
  if (model.class0.kappa != 0.0 || model.class1.kappa != 0.0) {
    throw NonGaussianClass(
        "exact threshold error requires Gaussian classes (kappa = 0)");
  }
  if (grid_size < 100) {
    throw InvalidConfig("grid_size must be at least 100");
  }

  const ScoreLaw law0(model.class0, q);
  const ScoreLaw law1(model.class1, q);
  const double pi = model.pi;

  double lo = std::min(law0.mean - 14.0 * law0.sd, law1.mean - 14.0 * law1.sd);
  double hi = std::max(law0.mean + 14.0 * law0.sd, law1.mean + 14.0 * law1.sd);
  if (hi - lo < 1e-9 * (1.0 + std::abs(lo) + std::abs(hi))) {
    lo -= 0.5;  // near-degenerate laws: widen so the grid straddles the atoms
    hi += 0.5;
  }

  const auto err_below = [&](double c) {
    return pi * law0.cdf(c) + (1.0 - pi) * (1.0 - law1.cdf(c));
  };
  const auto err_above = [&](double c) {
    return pi * (1.0 - law0.cdf(c)) + (1.0 - pi) * law1.cdf(c);
  };

  const double step = (hi - lo) / (grid_size - 1);
  int best_ia = 0, best_ib = 0;
  double best_a = std::numeric_limits<double>::infinity();
  double best_b = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    const double c = lo + i * step;
    const double ea = err_below(c);
    const double eb = err_above(c);
    if (ea < best_a) {
      best_a = ea;
      best_ia = i;
    }
    if (eb < best_b) {
      best_b = eb;
      best_ib = i;
    }
  }

  const auto refine = [&](int idx, const auto& f) {
    const double a = lo + std::max(0, idx - 1) * step;
    const double b = lo + std::min(grid_size - 1, idx + 1) * step;
    return golden_min(f, a, b, 60);
  };
  auto [ca, ea] = refine(best_ia, err_below);
  auto [cb, eb] = refine(best_ib, err_above);
  if (ea > best_a) {  // keep the grid point if refinement found nothing better
    ca = lo + best_ia * step;
    ea = best_a;
  }
  if (eb > best_b) {
    cb = lo + best_ib * step;
    eb = best_b;
  }

  ThresholdChoice out;
  if (eb < ea) {
    out.threshold = cb;
    out.error = eb;
    out.predict_one_below = false;
  } else {
    out.threshold = ca;
    out.error = ea;
    out.predict_one_below = true;
  }
  return out;
}

ThresholdChoice empirical_error(const LabeledDataset& data,
                                const QuadraticProjection& q) {
  if (data.dim() != q.dim()) {
    throw DimensionMismatch("data and projection dimensions differ");
  }
  const Eigen::Index n = data.n();
  const Eigen::Index n0 = data.count(0);
  const Eigen::Index n1 = data.count(1);
  if (n0 == 0 || n1 == 0) {
    throw EmptyClass("threshold search needs both labels present");
  }

  const Vector scores = q.scores(data.x);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (scores(i) != scores(j)) return scores(i) < scores(j);
    return i < j;
  });

  // prefix0[k] = class-0 points among the k lowest scores, same for prefix1.
  std::vector<Eigen::Index> prefix0(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Eigen::Index> prefix1(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int y = data.y(idx[static_cast<std::size_t>(k)]);
    prefix0[static_cast<std::size_t>(k) + 1] =
        prefix0[static_cast<std::size_t>(k)] + (y == 0 ? 1 : 0);
    prefix1[static_cast<std::size_t>(k) + 1] =
        prefix1[static_cast<std::size_t>(k)] + (y == 1 ? 1 : 0);
  }

  const auto threshold_at = [&](Eigen::Index k) {
    if (k == 0) return scores(idx[0]) - 1.0;
    if (k == n) return scores(idx[static_cast<std::size_t>(n) - 1]) + 1.0;
    return 0.5 * (scores(idx[static_cast<std::size_t>(k) - 1]) +
                  scores(idx[static_cast<std::size_t>(k)]));
  };
  const auto is_boundary = [&](Eigen::Index k) {
    if (k == 0 || k == n) return true;
    return scores(idx[static_cast<std::size_t>(k) - 1]) !=
           scores(idx[static_cast<std::size_t>(k)]);
  };

  Eigen::Index best_below = n + 1, best_above = n + 1;
  Eigen::Index k_below = 0, k_above = 0;
  for (Eigen::Index k = 0; k <= n; ++k) {
    if (!is_boundary(k)) continue;
    // predict 1 below the cut: class-0 points below it and class-1 above it
    // are the mistakes; the other orientation mirrors the counts.
    const Eigen::Index eb =
        prefix0[static_cast<std::size_t>(k)] +
        (n1 - prefix1[static_cast<std::size_t>(k)]);
    const Eigen::Index ea =
        prefix1[static_cast<std::size_t>(k)] +
        (n0 - prefix0[static_cast<std::size_t>(k)]);
    if (eb < best_below) {
      best_below = eb;
      k_below = k;
    }
    if (ea < best_above) {
      best_above = ea;
      k_above = k;
    }
  }

  ThresholdChoice out;
  if (best_above < best_below) {
    out.threshold = threshold_at(k_above);
    out.error = static_cast<double>(best_above) / static_cast<double>(n);
    out.predict_one_below = false;
  } else {
    out.threshold = threshold_at(k_below);
    out.error = static_cast<double>(best_below) / static_cast<double>(n);
    out.predict_one_below = true;
  }
  return out;
}

double empirical_rayleigh(const Vector& scores, const IntVector& labels) {
  if (scores.size() != labels.size()) {
    throw DimensionMismatch("scores and labels have different lengths");
  }
  const Eigen::Index n = scores.size();
  if (n == 0) throw EmptyDataset("no scores");
  double m0 = 0.0, m1 = 0.0;
  Eigen::Index n0 = 0, n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels(i) == 0) {
      m0 += scores(i);
      ++n0;
    } else {
      m1 += scores(i);
      ++n1;
    }
  }
  if (n0 == 0 || n1 == 0) return 0.0;
  m0 /= static_cast<double>(n0);
  m1 /= static_cast<double>(n1);
  double v0 = 0.0, v1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = scores(i);
    if (labels(i) == 0) {
      v0 += (s - m0) * (s - m0);
    } else {
      v1 += (s - m1) * (s - m1);
    }
  }
  v0 /= static_cast<double>(n0);
  v1 /= static_cast<double>(n1);
  const double prior = static_cast<double>(n0) / static_cast<double>(n);
  const double den = prior * v0 + (1.0 - prior) * v1;
  if (den <= 0.0) return 0.0;
  const double num = (m0 - m1) * (m0 - m1);
  const double r = num / den;
  return std::isfinite(r) ? r : 0.0;
}

}  // namespace quadro
