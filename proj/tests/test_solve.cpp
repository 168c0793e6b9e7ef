#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "quadro/errors.hpp"
#include "quadro/moments.hpp"
#include "quadro/oracle.hpp"
#include "quadro/solve.hpp"
#include "quadro/types.hpp"

using namespace quadro;

namespace {

TwoClassModel figure1_model() {
  const ClassModel c0 =
      make_class_model(Vector::Zero(2), Matrix::Identity(2, 2), 0.0);
  Vector mu1(2);
  mu1 << 1.28, 0.8;
  Matrix s1 = Matrix::Zero(2, 2);
  s1(0, 0) = 3.0;
  s1(1, 1) = 1.0 / 3.0;
  return make_two_class_model(0.55, c0, make_class_model(mu1, s1, 0.0));
}

TwoClassModel one_dim_equal_cov() {
  Vector mu0(1), mu1(1);
  mu0 << 0.0;
  mu1 << -1.0;
  Matrix s = Matrix::Identity(1, 1);
  return make_two_class_model(0.5, make_class_model(mu0, s, 0.0),
                              make_class_model(mu1, s, 0.0));
}

Matrix random_spd(int d, std::mt19937_64& rng, double ridge) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) a(i, j) = normal(rng);
  return a.transpose() * a / static_cast<double>(d) +
         ridge * Matrix::Identity(d, d);
}

Vector random_vec(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = normal(rng);
  return v;
}

TwoClassModel random_model(int d, std::uint64_t seed, double kappa0,
                           double kappa1, double pi) {
  std::mt19937_64 rng(seed);
  const Matrix s0 = random_spd(d, rng, 0.5);
  const Matrix s1 = random_spd(d, rng, 0.5);
  const Vector mu0 = random_vec(d, rng);
  const Vector mu1 = random_vec(d, rng);
  return make_two_class_model(pi, make_class_model(mu0, s0, kappa0),
                              make_class_model(mu1, s1, kappa1));
}

QuadraticProjection random_projection(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix om(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) om(i, j) = normal(rng);
  om = ((om + om.transpose()) / 2.0).eval();
  return make_projection(om, random_vec(d, rng));
}

// Coordinates of the solver's search space: the upper triangle of omega
// (off-diagonal values mirrored) followed by delta.
int n_params(int d) { return d * (d + 1) / 2 + d; }

QuadraticProjection theta_to_projection(int d, const Vector& theta) {
  Matrix om = Matrix::Zero(d, d);
  int idx = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      om(i, j) = theta(idx);
      om(j, i) = theta(idx);
      ++idx;
    }
  }
  Vector de(d);
  for (int i = 0; i < d; ++i) de(i) = theta(idx++);
  return make_projection(om, de);
}

// Equality-constrained quadratic program solved exactly: the smooth objective
// is a homogeneous quadratic theta' A theta recovered by polarization, the
// constraint is linear with coefficients gap(e_i); the optimum solves the
// dense KKT system [2A a; a' 0] [theta; nu] = [0; 1].
struct KktOracle {
  Vector theta;
  double nu = 0.0;
};

KktOracle dense_kkt_solution(const TwoClassModel& model) {
  const int d = model.dim();
  const int m = n_params(d);
  Vector diag(m), a(m);
  for (int i = 0; i < m; ++i) {
    Vector e = Vector::Zero(m);
    e(i) = 1.0;
    const QuadraticProjection q = theta_to_projection(d, e);
    diag(i) = smooth_objective(model, q);
    a(i) = gap(model, q);
  }
  Matrix big_a(m, m);
  for (int i = 0; i < m; ++i) {
    big_a(i, i) = diag(i);
    for (int j = i + 1; j < m; ++j) {
      Vector e = Vector::Zero(m);
      e(i) = 1.0;
      e(j) = 1.0;
      const double dij = smooth_objective(model, theta_to_projection(d, e));
      big_a(i, j) = (dij - diag(i) - diag(j)) / 2.0;
      big_a(j, i) = big_a(i, j);
    }
  }
  Matrix kkt = Matrix::Zero(m + 1, m + 1);
  kkt.topLeftCorner(m, m) = 2.0 * big_a;
  kkt.block(0, m, m, 1) = a;
  kkt.block(m, 0, 1, m) = a.transpose();
  Vector rhs = Vector::Zero(m + 1);
  rhs(m) = 1.0;
  const Vector sol = Eigen::FullPivLU<Matrix>(kkt).solve(rhs);
  KktOracle out;
  out.theta = sol.head(m);
  out.nu = sol(m);
  return out;
}

Vector projection_to_theta(const QuadraticProjection& q) {
  const int d = static_cast<int>(q.delta.size());
  Vector theta(n_params(d));
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) theta(idx++) = q.omega(i, j);
  for (int i = 0; i < d; ++i) theta(idx++) = q.delta(i);
  return theta;
}

double cosine(const Vector& u, const Vector& v) {
  return u.dot(v) / (u.norm() * v.norm());
}

SolverConfig tight_config() {
  SolverConfig cfg;
  cfg.tol_feas = 1e-10;
  cfg.tol_rel = 1e-12;
  return cfg;
}

}  // namespace

TEST_CASE("smooth objective") {
  const TwoClassModel m1 = one_dim_equal_cov();

  SUBCASE("prior-weighted variance of the linear score -x/2") {
    Vector de(1);
    de << -0.5;
    const QuadraticProjection q = make_projection(Matrix::Zero(1, 1), de);
    CHECK(smooth_objective(m1, q) == 1.0);
  }

  SUBCASE("zero projection has zero variance") {
    CHECK(smooth_objective(m1, zero_projection(1)) == 0.0);
  }

  SUBCASE("matches the moments module") {
    const TwoClassModel m = figure1_model();
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
      const QuadraticProjection q = random_projection(2, rng);
      const double v0 = projection_variance(m.class0, q);
      const double v1 = projection_variance(m.class1, q);
      const double expected = m.pi * v0 + (1.0 - m.pi) * v1;
      CHECK(smooth_objective(m, q) == doctest::Approx(expected).epsilon(1e-13));
    }
  }

  SUBCASE("quadratic homogeneity") {
    const TwoClassModel m = random_model(3, 17, 0.25, 0.1, 0.4);
    std::mt19937_64 rng(18);
    std::uniform_real_distribution<double> scale(-3.0, 3.0);
    for (int rep = 0; rep < 10; ++rep) {
      const QuadraticProjection q = random_projection(3, rng);
      const double c = scale(rng);
      const QuadraticProjection cq = make_projection(c * q.omega, c * q.delta);
      CHECK(smooth_objective(m, cq) ==
            doctest::Approx(c * c * smooth_objective(m, q)).epsilon(1e-12));
    }
  }
}

TEST_CASE("between-class gap") {
  SUBCASE("identical classes always produce zero") {
    const ClassModel c = make_class_model(Vector::Ones(2),
                                          Matrix::Identity(2, 2), 0.0);
    const TwoClassModel m = make_two_class_model(0.5, c, c);
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 5; ++rep) {
      CHECK(gap(m, random_projection(2, rng)) == 0.0);
    }
  }

  SUBCASE("linear projection reads off the mean difference") {
    Vector de(2);
    de << -0.5, 0.0;
    const QuadraticProjection q = make_projection(Matrix::Zero(2, 2), de);
    CHECK(gap(figure1_model(), q) == doctest::Approx(-1.28).epsilon(1e-14));
  }

  SUBCASE("linearity in the projection") {
    const TwoClassModel m = random_model(3, 23, 0.0, 0.5, 0.6);
    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 5; ++rep) {
      const QuadraticProjection q1 = random_projection(3, rng);
      const QuadraticProjection q2 = random_projection(3, rng);
      const QuadraticProjection sum =
          make_projection(q1.omega + q2.omega, q1.delta + q2.delta);
      CHECK(gap(m, sum) ==
            doctest::Approx(gap(m, q1) + gap(m, q2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-2.0, 0.5) == -1.5);
  CHECK(soft_threshold(1.0, 1.0) == 0.0);  // exact tie maps to zero
}

TEST_CASE("one-dimensional optimum matches the hand KKT solution") {
  const TwoClassModel m = one_dim_equal_cov();
  const SolverResult res = solve_quadro(m, tight_config());

  CHECK(res.converged);
  CHECK_FALSE(res.did_not_converge);
  CHECK(std::abs(res.projection.omega(0, 0)) <= 1e-6);
  CHECK(res.projection.delta(0) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(res.dual == doctest::Approx(-2.0).epsilon(1e-5));
  CHECK(res.objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(res.feas_residual <= 1e-10);
  CHECK(res.kkt_residual <= 10.0 * 1e-12 * (1.0 + std::abs(res.objective)));
}

TEST_CASE("unpenalized solutions match a dense KKT oracle") {
  struct Case {
    int d;
    std::uint64_t seed;
    double k0, k1, pi;
  };
  const Case cases[] = {
      {1, 101, 0.0, 0.0, 0.5},   {2, 102, 0.3, 0.3, 0.5},
      {2, 103, 0.0, 0.5, 0.37},  {3, 104, 0.25, 0.25, 0.5},
      {3, 105, 0.4, 0.1, 0.62},
  };
  for (const Case& c : cases) {
    CAPTURE(c.seed);
    const TwoClassModel m = random_model(c.d, c.seed, c.k0, c.k1, c.pi);
    const KktOracle oracle = dense_kkt_solution(m);
    const SolverResult res = solve_quadro(m, tight_config());
    CHECK(res.converged);
    const Vector theta_hat = projection_to_theta(res.projection);
    const double scale = 1.0 + oracle.theta.cwiseAbs().maxCoeff();
    CHECK((theta_hat - oracle.theta).cwiseAbs().maxCoeff() <= 1e-6 * scale);
    CHECK(std::abs(res.dual - oracle.nu) <= 1e-6 * (1.0 + std::abs(oracle.nu)));
  }
}

TEST_CASE("common covariance forces a linear rule") {
  std::mt19937_64 rng(301);
  const Matrix sigma = random_spd(4, rng, 0.3);
  const Vector mu0 = random_vec(4, rng);
  const Vector mu1 = random_vec(4, rng);
  const TwoClassModel m =
      make_two_class_model(0.5, make_class_model(mu0, sigma, 0.2),
                           make_class_model(mu1, sigma, 0.2));

  const SolverResult res = solve_quadro(m, tight_config());
  CHECK(res.converged);

  const double omega_norm = res.projection.omega.norm();
  const double delta_norm = res.projection.delta.norm();
  CHECK(delta_norm > 0.0);
  CHECK(omega_norm <= 1e-6 * delta_norm);

  const Vector dir = linear_rq_direction(m);
  CHECK(cosine(-2.0 * res.projection.delta, dir) >= 0.999);
}

TEST_CASE("extreme penalties select the single best constraint coordinate") {
  const TwoClassModel m = figure1_model();
  const double lambda = 1e6;

  // Constraint coefficients per unit of L1 mass: C_ij for omega entries
  // (an off-diagonal pair costs twice and contributes twice, so its rate
  // is still |C_ij|) and 2|mu0 - mu1|_j for delta entries.
  const Matrix cmat = m.class0.sigma - m.class1.sigma +
                      m.class0.mu * m.class0.mu.transpose() -
                      m.class1.mu * m.class1.mu.transpose();
  const Vector mdiff = m.class0.mu - m.class1.mu;
  double best_rate = 0.0;
  int best_i = -1, best_j = -1;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (std::abs(cmat(i, j)) > best_rate) {
        best_rate = std::abs(cmat(i, j));
        best_i = i;
        best_j = j;
      }
    }
  }
  bool best_is_delta = false;
  for (int j = 0; j < 2; ++j) {
    if (2.0 * std::abs(mdiff(j)) > best_rate) {
      best_rate = 2.0 * std::abs(mdiff(j));
      best_is_delta = true;
      best_i = j;
    }
  }
  REQUIRE_FALSE(best_is_delta);  // for this model the (0,0) entry wins
  REQUIRE(best_i == 0);
  REQUIRE(best_j == 0);

  Matrix om_star = Matrix::Zero(2, 2);
  om_star(0, 0) = 1.0 / cmat(0, 0);
  const QuadraticProjection q_star = make_projection(om_star, Vector::Zero(2));
  const double expected =
      smooth_objective(m, q_star) + lambda / best_rate;

  SolverConfig cfg;
  cfg.lambda_omega = lambda;
  cfg.lambda_delta = lambda;
  cfg.tol_feas = 1e-7;
  cfg.tol_rel = 1e-9;
  const SolverResult res = solve_quadro(m, cfg);
  CHECK_FALSE(res.did_not_converge);
  CHECK(res.objective == doctest::Approx(expected).epsilon(0.01));

  const double main_mass = std::abs(res.projection.omega(0, 0));
  CHECK(main_mass >= 0.9 / best_rate);
  CHECK(std::abs(res.projection.omega(0, 1)) <= 1e-3 * main_mass);
  CHECK(std::abs(res.projection.omega(1, 1)) <= 1e-3 * main_mass);
  CHECK(res.projection.delta.cwiseAbs().maxCoeff() <= 1e-3 * main_mass);
}

TEST_CASE("objective equals the reciprocal Rayleigh quotient when feasible") {
  const TwoClassModel models[] = {figure1_model(),
                                  random_model(2, 401, 0.3, 0.3, 0.5),
                                  random_model(3, 402, 0.0, 0.25, 0.45)};
  for (const TwoClassModel& m : models) {
    const SolverResult res = solve_quadro(m, tight_config());
    REQUIRE(res.converged);
    const double g = gap(m, res.projection);
    const QuadraticProjection scaled =
        make_projection(res.projection.omega / g, res.projection.delta / g);
    const double d_val = smooth_objective(m, scaled);
    CHECK(rayleigh(m, scaled).r ==
          doctest::Approx(1.0 / d_val).epsilon(1e-10));
    // With the penalty off, the reported objective is exactly the smooth part.
    CHECK(res.objective ==
          doctest::Approx(smooth_objective(m, res.projection)).epsilon(1e-12));
  }
}

TEST_CASE("solver beats the exhaustive grid in low dimension") {
  struct Case {
    TwoClassModel model;
    int resolution;
  };
  const Case cases[] = {
      {random_model(1, 501, 0.0, 0.4, 0.55), 41},
      {figure1_model(), 9},
      {random_model(2, 502, 0.2, 0.2, 0.5), 9},
  };
  for (const Case& c : cases) {
    const GridSearchResult grid = grid_search_rq(c.model, c.resolution);
    const SolverResult res = solve_quadro(c.model, tight_config());
    REQUIRE(res.converged);
    const double r_hat = rayleigh(c.model, res.projection).r;
    CHECK(r_hat >= 0.99 * grid.r);
  }
}

TEST_CASE("inner loop is monotone and the trace is well-formed") {
  SolverConfig cfg;
  cfg.lambda_omega = 1e-3;
  cfg.lambda_delta = 1e-3;
  const SolverResult res = solve_quadro(figure1_model(), cfg);

  CHECK(res.converged);
  CHECK(res.max_inner_increase <= 1e-12);
  REQUIRE(!res.trace.empty());
  for (const SolverTraceEntry& t : res.trace) {
    CHECK(t.omega_asymmetry <= 1e-14);
    CHECK(t.rho >= 1.0);
    CHECK(t.rho <= 1e8);
    CHECK(std::isfinite(t.objective));
    CHECK(t.feas_residual >= 0.0);
  }
}

TEST_CASE("iteration caps set the did-not-converge flag") {
  SolverConfig cfg;
  cfg.tol_feas = 1e-14;
  cfg.tol_rel = 1e-14;
  cfg.max_outer = 1;
  cfg.max_inner = 1;
  const SolverResult res = solve_quadro(figure1_model(), cfg);
  CHECK_FALSE(res.converged);
  CHECK(res.did_not_converge);
  CHECK(res.projection.delta.allFinite());
  CHECK(res.projection.omega.allFinite());
}

TEST_CASE("solution path") {
  const TwoClassModel m = figure1_model();

  SUBCASE("a single unpenalized point reproduces the direct solve") {
    SolverConfig cfg = tight_config();
    const SolverResult direct = solve_quadro(m, cfg);
    const std::vector<SolverResult> path =
        solution_path(m, {{0.0, 0.0}}, cfg);
    REQUIRE(path.size() == 1);
    CHECK(path[0].projection.delta(0) == direct.projection.delta(0));
    CHECK(path[0].projection.delta(1) == direct.projection.delta(1));
    CHECK(path[0].projection.omega(0, 0) == direct.projection.omega(0, 0));
    CHECK(path[0].projection.omega(0, 1) == direct.projection.omega(0, 1));
    CHECK(path[0].projection.omega(1, 1) == direct.projection.omega(1, 1));
    CHECK(path[0].dual == direct.dual);
    CHECK(path[0].objective == direct.objective);
  }

  SUBCASE("restarting at an optimum is an exact no-op") {
    SolverConfig cfg;
    const std::vector<SolverResult> path =
        solution_path(m, {{0.01, 0.01}, {0.01, 0.01}}, cfg);
    REQUIRE(path.size() == 2);
    CHECK(path[1].converged);
    CHECK(path[1].inner_iterations == 0);
    for (int i = 0; i < 2; ++i) {
      CHECK(path[1].projection.delta(i) == path[0].projection.delta(i));
      for (int j = 0; j < 2; ++j) {
        CHECK(path[1].projection.omega(i, j) == path[0].projection.omega(i, j));
      }
    }
    CHECK(path[1].dual == path[0].dual);
    CHECK(path[1].objective == path[0].objective);
  }

  SUBCASE("active set shrinks as the penalty grows") {
    // Sparse ground truth: differences concentrated in features 1, 3, 5
    // (1-based): a mean shift on 1 and 3, a variance shift on 5.
    const int d = 10;
    Vector mu1 = Vector::Zero(d);
    mu1(0) = 0.8;
    mu1(2) = 0.6;
    Matrix s1 = Matrix::Identity(d, d);
    s1(4, 4) = 3.0;
    const TwoClassModel sparse = make_two_class_model(
        0.5, make_class_model(Vector::Zero(d), Matrix::Identity(d, d), 0.0),
        make_class_model(mu1, s1, 0.0));

    std::vector<std::pair<double, double>> lambdas;
    const int n_points = 11;
    for (int i = 0; i < n_points; ++i) {
      const double t = static_cast<double>(i) / (n_points - 1);
      const double lam = 3.0 * std::pow(1e-3 / 3.0, t);
      lambdas.emplace_back(lam, lam);
    }
    SolverConfig cfg;
    const std::vector<SolverResult> path = solution_path(sparse, lambdas, cfg);
    REQUIRE(path.size() == lambdas.size());

    int monotone = 0;
    std::size_t prev = projection_sparsity(path[0].projection, 1e-8)
                           .active_features.size();
    for (std::size_t i = 1; i < path.size(); ++i) {
      const std::size_t cur = projection_sparsity(path[i].projection, 1e-8)
                                  .active_features.size();
      if (cur >= prev) ++monotone;  // descending penalties admit features
      prev = cur;
    }
    CHECK(monotone >= 9);  // at least 90% of the 10 adjacent pairs
  }

  SUBCASE("grids must be sorted by descending total penalty") {
    SolverConfig cfg;
    CHECK_THROWS_AS(solution_path(m, {{0.0, 0.0}, {1.0, 1.0}}, cfg),
                    InvalidConfig);
    CHECK_THROWS_AS(solution_path(m, {}, cfg), InvalidConfig);
  }
}
