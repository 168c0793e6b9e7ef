#include "quadro/solve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "quadro/moments.hpp"

namespace quadro {

double soft_threshold(double v, double t) {
  const double mag = std::abs(v) - t;
  return mag > 0.0 ? std::copysign(mag, v) : 0.0;
}

namespace {

constexpr double kRhoCap = 1e8;

// Precomputed per-model quantities plus the smooth-objective calculus. D is a
// homogeneous quadratic form in (omega, delta); its gradient doubles as the
// Hessian-vector product needed for the curvature estimate.
struct Workspace {
  int d;
  double pi;
  const Matrix &s0, &s1;
  Vector mu0, mu1;
  double k0, k1;
  Matrix cmat;   // Sigma0 - Sigma1 + mu0 mu0' - mu1 mu1' (gap gradient wrt omega)
  Vector mdiff;  // mu0 - mu1 (gap gradient wrt delta is -2 mdiff)
  double gap_grad_norm2;

  explicit Workspace(const TwoClassModel& model)
      : d(model.dim()),
        pi(model.pi),
        s0(model.class0.sigma),
        s1(model.class1.sigma),
        mu0(model.class0.mu),
        mu1(model.class1.mu),
        k0(model.class0.kappa),
        k1(model.class1.kappa) {
    cmat = s0 - s1 + mu0 * mu0.transpose() - mu1 * mu1.transpose();
    cmat = 0.5 * (cmat + cmat.transpose());
    mdiff = mu0 - mu1;
    gap_grad_norm2 = cmat.squaredNorm() + 4.0 * mdiff.squaredNorm();
  }

  double gap(const Matrix& omega, const Vector& delta) const {
    return (omega.array() * cmat.array()).sum() - 2.0 * delta.dot(mdiff);
  }

  double smooth(const Matrix& omega, const Vector& delta) const {
    double out = 0.0;
    for (int k = 0; k < 2; ++k) {
      const Matrix& s = k == 0 ? s0 : s1;
      const Vector& mu = k == 0 ? mu0 : mu1;
      const double kap = k == 0 ? k0 : k1;
      const double w = k == 0 ? pi : 1.0 - pi;
      const Matrix m = omega * s;
      const double t1 = m.trace();
      const double t2 = (m.array() * m.transpose().array()).sum();
      const Vector r = omega * mu - delta;
      out += w * (2.0 * (1.0 + kap) * t2 + kap * t1 * t1 + 4.0 * r.dot(s * r));
    }
    return out;
  }

  void smooth_grad(const Matrix& omega, const Vector& delta, Matrix& g_omega,
                   Vector& g_delta) const {
    g_omega.setZero(d, d);
    g_delta.setZero(d);
    for (int k = 0; k < 2; ++k) {
      const Matrix& s = k == 0 ? s0 : s1;
      const Vector& mu = k == 0 ? mu0 : mu1;
      const double kap = k == 0 ? k0 : k1;
      const double w = k == 0 ? pi : 1.0 - pi;
      const Matrix m = omega * s;
      const double t1 = m.trace();
      const Vector r = omega * mu - delta;
      const Vector sr = s * r;
      g_omega.noalias() += w * 4.0 * (1.0 + kap) * (s * m);
      g_omega += w * 2.0 * kap * t1 * s;
      g_omega.noalias() += w * 4.0 * (sr * mu.transpose() + mu * sr.transpose());
      g_delta.noalias() += w * (-8.0) * sr;
    }
  }
};

struct WarmStart {
  Matrix omega;
  Vector delta;
  double nu = 0.0;
};

double flat_norm2(const Matrix& a, const Vector& b) {
  return a.squaredNorm() + b.squaredNorm();
}

// Largest curvature of D by power iteration on its Hessian (gradient of a
// homogeneous quadratic is linear, so grad evaluated at a direction IS the
// Hessian-vector product). Deterministic seed; a safety margin covers the
// estimate being a lower bound, and backtracking covers the rest.
double estimate_smooth_curvature(const Workspace& ws) {
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(ws.d, ws.d);
  Vector w(ws.d);
  for (int i = 0; i < ws.d; ++i) {
    w(i) = normal(rng);
    for (int j = 0; j <= i; ++j) {
      const double x = normal(rng);
      v(i, j) = x;
      v(j, i) = x;
    }
  }
  double norm = std::sqrt(flat_norm2(v, w));
  if (norm == 0.0) return 1.0;
  v /= norm;
  w /= norm;
  double lambda = 1.0;
  Matrix hv(ws.d, ws.d);
  Vector hw(ws.d);
  for (int it = 0; it < 40; ++it) {
    ws.smooth_grad(v, w, hv, hw);
    lambda = (v.array() * hv.array()).sum() + w.dot(hw);
    const double hnorm = std::sqrt(flat_norm2(hv, hw));
    if (hnorm <= 1e-300) break;
    v = hv / hnorm;
    w = hw / hnorm;
  }
  return std::max(std::abs(lambda), 1e-12);
}

// Norm of the smallest subgradient of the Lagrangian D + penalties + nu*(gap-1)
// given the already-assembled smooth gradient grad = grad D + nu * grad gap.
double subgradient_norm(const Matrix& omega, const Vector& delta,
                        const Matrix& g_omega, const Vector& g_delta,
                        double lambda_omega, double lambda_delta) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < omega.cols(); ++j) {
    for (Eigen::Index i = 0; i < omega.rows(); ++i) {
      const double g = g_omega(i, j);
      const double r = omega(i, j) != 0.0
                           ? g + std::copysign(lambda_omega, omega(i, j))
                           : soft_threshold(g, lambda_omega);
      acc += r * r;
    }
  }
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    const double g = g_delta(i);
    const double r = delta(i) != 0.0
                         ? g + std::copysign(lambda_delta, delta(i))
                         : soft_threshold(g, lambda_delta);
    acc += r * r;
  }
  return std::sqrt(acc);
}

void check_convexity(const TwoClassModel& model, const Workspace& ws) {
  if (model.class0.kappa >= 0.0 && model.class1.kappa >= 0.0) return;
  std::mt19937_64 rng(0xc0ffeeULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int probe = 0; probe < 20; ++probe) {
    Matrix v(ws.d, ws.d);
    Vector w(ws.d);
    for (int i = 0; i < ws.d; ++i) {
      w(i) = normal(rng);
      for (int j = 0; j <= i; ++j) {
        const double x = normal(rng);
        v(i, j) = x;
        v(j, i) = x;
      }
    }
    const double norm = std::sqrt(flat_norm2(v, w));
    if (norm == 0.0) continue;
    v /= norm;
    w /= norm;
    const double curvature = 2.0 * ws.smooth(v, w);
    if (curvature < -1e-10) {
      throw NonconvexObjective(
          "negative curvature " + std::to_string(curvature) +
          " detected; the supplied kurtosis values make the variance "
          "objective indefinite");
    }
  }
}

SolverResult solve_impl(const TwoClassModel& model, const SolverConfig& cfg,
                        const WarmStart* warm) {
  cfg.validate();
  const Workspace ws(model);
  check_convexity(model, ws);
  const int d = ws.d;

  Matrix omega;
  Vector delta;
  double nu = 0.0;
  if (warm) {
    omega = warm->omega;
    delta = warm->delta;
    nu = warm->nu;
  } else {
    // Start from the pooled-covariance linear direction rescaled onto the
    // constraint; fall back to the raw mean difference when the pooled
    // covariance is unusable.
    omega = Matrix::Zero(d, d);
    delta = Vector::Zero(d);
    Vector cand;
    bool have = false;
    try {
      cand = -0.5 * linear_rq_direction(model);
      have = true;
    } catch (const SingularPooledCovariance&) {
      if (ws.mdiff.squaredNorm() > 0.0) {
        cand = -0.5 * ws.mdiff;
        have = true;
      }
    }
    if (have) {
      const double g0 = ws.gap(omega, cand);
      const double scale = std::sqrt(ws.gap_grad_norm2) * cand.norm() + 1.0;
      if (std::isfinite(g0) && std::abs(g0) > 1e-14 * scale) delta = cand / g0;
    }
  }

  const double lam_o = cfg.lambda_omega;
  const double lam_d = cfg.lambda_delta;
  auto penalty = [&](const Matrix& o, const Vector& de) {
    return lam_o * o.cwiseAbs().sum() + lam_d * de.cwiseAbs().sum();
  };

  const double curvature_d = estimate_smooth_curvature(ws) * 1.1;
  double rho = cfg.rho0;

  SolverResult res;
  res.max_inner_increase = 0.0;

  Matrix g_omega(d, d), go_total(d, d), omega_next(d, d);
  Vector g_delta(d), gd_total(d), delta_next(d);

  double obj_prev = ws.smooth(omega, delta) + penalty(omega, delta);
  double feas_prev = std::abs(ws.gap(omega, delta) - 1.0);
  double kkt_now = std::numeric_limits<double>::infinity();

  int outer = 0;
  for (outer = 1; outer <= cfg.max_outer; ++outer) {
    // Entry certification: when the current iterate already satisfies the
    // first-order conditions of the constrained problem under the current
    // multiplier, stop without touching it. A run restarted from its own
    // solution is then an exact no-op (bitwise-identical iterate and dual).
    {
      const double g0 = ws.gap(omega, delta);
      const double feas0 = std::abs(g0 - 1.0);
      if (feas0 <= cfg.tol_feas) {
        ws.smooth_grad(omega, delta, g_omega, g_delta);
        go_total = g_omega + nu * ws.cmat;
        gd_total = g_delta - 2.0 * nu * ws.mdiff;
        const double kkt0 =
            subgradient_norm(omega, delta, go_total, gd_total, lam_o, lam_d);
        const double obj0 = ws.smooth(omega, delta) + penalty(omega, delta);
        if (kkt0 <= cfg.tol_rel * (1.0 + std::abs(obj0))) {
          res.converged = true;
          kkt_now = kkt0;
          obj_prev = obj0;
          break;
        }
      }
    }

    double step_l = curvature_d + rho * ws.gap_grad_norm2;

    // Inner proximal-gradient loop on the augmented Lagrangian
    //   S(q) = D(q) + nu (gap-1) + rho/2 (gap-1)^2  (+ L1 handled by prox).
    auto aug = [&](const Matrix& o, const Vector& de) {
      const double viol = ws.gap(o, de) - 1.0;
      return ws.smooth(o, de) + nu * viol + 0.5 * rho * viol * viol;
    };

    double al_prev = aug(omega, delta) + penalty(omega, delta);
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      const double viol = ws.gap(omega, delta) - 1.0;
      const double mult = nu + rho * viol;
      ws.smooth_grad(omega, delta, g_omega, g_delta);
      go_total = g_omega + mult * ws.cmat;
      gd_total = g_delta - 2.0 * mult * ws.mdiff;

      // grad here equals grad D + nu' grad gap with nu' the multiplier the
      // outer update is about to install, so this IS the final KKT residual.
      kkt_now = subgradient_norm(omega, delta, go_total, gd_total, lam_o, lam_d);
      const double obj_now = ws.smooth(omega, delta) + penalty(omega, delta);
      const double kkt_target =
          std::max(cfg.tol_rel * (1.0 + std::abs(obj_now)),
                   8.0 * std::numeric_limits<double>::epsilon() * step_l *
                       (1.0 + std::sqrt(flat_norm2(omega, delta))));
      if (kkt_now <= kkt_target) break;

      // One proximal step, with optional backtracking on the smooth model.
      const double s_cur = aug(omega, delta);
      for (;;) {
        const double inv_l = 1.0 / step_l;
        omega_next = omega - inv_l * go_total;
        for (Eigen::Index jj = 0; jj < d; ++jj)
          for (Eigen::Index ii = 0; ii < d; ++ii)
            omega_next(ii, jj) = soft_threshold(omega_next(ii, jj), lam_o * inv_l);
        omega_next = 0.5 * (omega_next + omega_next.transpose());
        delta_next = delta - inv_l * gd_total;
        for (Eigen::Index ii = 0; ii < d; ++ii)
          delta_next(ii) = soft_threshold(delta_next(ii), lam_d * inv_l);

        if (cfg.step_rule == SolverConfig::StepRule::fixed) break;
        const Matrix d_o = omega_next - omega;
        const Vector d_d = delta_next - delta;
        const double lin = (go_total.array() * d_o.array()).sum() + gd_total.dot(d_d);
        const double quad = 0.5 * step_l * flat_norm2(d_o, d_d);
        const double bound = s_cur + lin + quad;
        const double slack = 1e-12 * (std::abs(s_cur) + 1.0);
        if (aug(omega_next, delta_next) <= bound + slack || step_l > 1e30) break;
        step_l *= 2.0;
      }

      ++res.inner_iterations;
      const double moved = std::sqrt(flat_norm2(omega_next - omega, delta_next - delta));
      omega.swap(omega_next);
      delta.swap(delta_next);

      const double al_now = aug(omega, delta) + penalty(omega, delta);
      const double rise = (al_now - al_prev) / std::max(1.0, std::abs(al_prev));
      res.max_inner_increase = std::max(res.max_inner_increase, rise);
      al_prev = al_now;

      if (moved == 0.0) break;  // exact stagnation (typically all-zero prox)
    }

    const double g = ws.gap(omega, delta);
    const double feas = std::abs(g - 1.0);
    nu += rho * (g - 1.0);
    const double obj = ws.smooth(omega, delta) + penalty(omega, delta);

    // Certify stationarity at the final iterate against the multiplier just
    // installed (the in-loop value can be one prox step stale when the loop
    // exits through its iteration cap).
    ws.smooth_grad(omega, delta, g_omega, g_delta);
    go_total = g_omega + nu * ws.cmat;
    gd_total = g_delta - 2.0 * nu * ws.mdiff;
    kkt_now = subgradient_norm(omega, delta, go_total, gd_total, lam_o, lam_d);

    double asym = 0.0;
    for (Eigen::Index jj = 0; jj < d; ++jj)
      for (Eigen::Index ii = 0; ii < jj; ++ii)
        asym = std::max(asym, std::abs(omega(ii, jj) - omega(jj, ii)));

    res.trace.push_back({outer, obj, feas, kkt_now, rho, nu, asym});

    const bool obj_settled = std::abs(obj - obj_prev) <= cfg.tol_rel * (1.0 + std::abs(obj));
    // Stationarity is certified one order looser than the objective tolerance;
    // the inner loop may stop at a machine-precision floor when rho is large,
    // and further outer rounds shrink the residual as the dual settles.
    const bool kkt_ok = kkt_now <= 10.0 * cfg.tol_rel * (1.0 + std::abs(obj));
    if (feas <= cfg.tol_feas && obj_settled && kkt_ok) {
      res.converged = true;
      obj_prev = obj;
      break;
    }
    obj_prev = obj;

    // Grow the penalty only while feasibility is not improving fast enough;
    // keeping rho moderate keeps the inner problem well conditioned.
    if (feas > cfg.tol_feas && feas > 0.5 * feas_prev) {
      rho = std::min(rho * cfg.rho_growth, kRhoCap);
    }
    feas_prev = feas;
  }

  res.iterations = std::min(outer, cfg.max_outer);
  res.projection = make_projection(omega, delta);
  res.dual = nu;
  res.feas_residual = std::abs(ws.gap(omega, delta) - 1.0);
  res.kkt_residual = kkt_now;
  res.objective = obj_prev;
  res.did_not_converge = !res.converged && res.feas_residual > 10.0 * cfg.tol_feas;
  return res;
}

}  // namespace

double smooth_objective(const TwoClassModel& model, const QuadraticProjection& q) {
  if (model.dim() != q.dim()) {
    throw DimensionMismatch("model and projection dimensions differ");
  }
  const Workspace ws(model);
  const double v = ws.smooth(q.omega, q.delta);
  if (v < -1e-10 * (1.0 + flat_norm2(q.omega, q.delta))) {
    throw NonconvexObjective(
        "variance objective evaluated negative; kurtosis parameters are "
        "outside the convex range");
  }
  return v;
}

double gap(const TwoClassModel& model, const QuadraticProjection& q) {
  if (model.dim() != q.dim()) {
    throw DimensionMismatch("model and projection dimensions differ");
  }
  const Workspace ws(model);
  return ws.gap(q.omega, q.delta);
}

SolverResult solve_quadro(const TwoClassModel& model, const SolverConfig& cfg) {
  return solve_impl(model, cfg, nullptr);
}

std::vector<SolverResult> solution_path(
    const TwoClassModel& model,
    const std::vector<std::pair<double, double>>& lambdas,
    const SolverConfig& cfg) {
  if (lambdas.empty()) {
    throw InvalidConfig("solution_path needs at least one penalty pair");
  }
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    const double prev = lambdas[i - 1].first + lambdas[i - 1].second;
    const double cur = lambdas[i].first + lambdas[i].second;
    if (cur > prev) {
      throw InvalidConfig(
          "solution_path requires lambdas sorted by descending "
          "lambda_omega + lambda_delta");
    }
  }
  std::vector<SolverResult> out;
  out.reserve(lambdas.size());
  WarmStart warm;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    SolverConfig point_cfg = cfg;
    point_cfg.lambda_omega = lambdas[i].first;
    point_cfg.lambda_delta = lambdas[i].second;
    SolverResult r = i == 0 ? solve_impl(model, point_cfg, nullptr)
                            : solve_impl(model, point_cfg, &warm);
    warm.omega = r.projection.omega;
    warm.delta = r.projection.delta;
    warm.nu = r.dual;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace quadro
