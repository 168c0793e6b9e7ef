#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "quadro/errors.hpp"
#include "quadro/io.hpp"
#include "quadro/types.hpp"

using namespace quadro;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

bool bitwise_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

Matrix random_psd_with_noise(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) a(i, j) = normal(rng);
  Matrix s = a.transpose() * a + Matrix::Identity(d, d);
  for (Eigen::Index j = 0; j < d; ++j)  // small asymmetric perturbation
    for (Eigen::Index i = 0; i < d; ++i)
      if (i != j) s(i, j) += 0.01 * normal(rng);
  return s;
}

}  // namespace

TEST_CASE("class model symmetrizes its covariance bitwise") {
  Vector mu(2);
  mu << 0.0, 0.0;
  Matrix s(2, 2);
  s << 2.0, 0.3, 0.1, 1.0;
  const ClassModel m = make_class_model(mu, s, 0.0);
  CHECK(m.sigma(0, 1) == m.sigma(1, 0));
  CHECK(m.sigma(0, 1) == 0.2);

  const Matrix noisy = random_psd_with_noise(5, 77);
  const ClassModel big = make_class_model(Vector::Zero(5), noisy, 0.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(big.sigma(i, j) == big.sigma(j, i));
}

TEST_CASE("class model construction is idempotent on its own output") {
  const Matrix noisy = random_psd_with_noise(4, 123);
  Vector mu(4);
  mu << 0.5, -1.0, 2.0, 0.0;
  const ClassModel once = make_class_model(mu, noisy, 0.25);
  const ClassModel twice = make_class_model(once.mu, once.sigma, once.kappa);
  CHECK(bitwise_equal(once.sigma, twice.sigma));
  CHECK(bitwise_equal(once.mu, twice.mu));
  CHECK(once.kappa == twice.kappa);
}

TEST_CASE("class model validation") {
  Vector mu2 = Vector::Zero(2);
  const Matrix eye2 = Matrix::Identity(2, 2);

  CHECK_NOTHROW(make_class_model(mu2, eye2, 0.0));

  Vector mu_f1(2);
  mu_f1 << 1.28, 0.8;
  Matrix s_f1 = Matrix::Zero(2, 2);
  s_f1(0, 0) = 3.0;
  s_f1(1, 1) = 1.0 / 3.0;
  CHECK_NOTHROW(make_class_model(mu_f1, s_f1, 0.0));

  Matrix indef = Matrix::Zero(2, 2);
  indef(0, 0) = 1.0;
  indef(1, 1) = -1.0;
  CHECK_THROWS_AS(make_class_model(mu2, indef, 0.0), NotPositiveSemidefinite);

  CHECK_THROWS_AS(make_class_model(Vector::Zero(3), eye2, 0.0),
                  DimensionMismatch);
  CHECK_THROWS_AS(make_class_model(mu2, Matrix::Zero(2, 3), 0.0),
                  DimensionMismatch);

  // Kurtosis parameter bound: kappa >= -2/(d+2), here -0.5.
  CHECK_NOTHROW(make_class_model(mu2, eye2, -0.5));
  CHECK_NOTHROW(make_class_model(mu2, eye2, 5.0));
  CHECK_THROWS_AS(make_class_model(mu2, eye2, -0.5001), InvalidKurtosis);

  Vector bad = mu2;
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(make_class_model(bad, eye2, 0.0), InvalidConfig);
}

TEST_CASE("two class model validation") {
  const ClassModel c2 =
      make_class_model(Vector::Zero(2), Matrix::Identity(2, 2), 0.0);
  const ClassModel c3 =
      make_class_model(Vector::Zero(3), Matrix::Identity(3, 3), 0.0);

  const TwoClassModel m = make_two_class_model(0.55, c2, c2);
  CHECK(m.pi == 0.55);
  CHECK(m.dim() == 2);

  CHECK_THROWS_AS(make_two_class_model(0.0, c2, c2), InvalidConfig);
  CHECK_THROWS_AS(make_two_class_model(1.0, c2, c2), InvalidConfig);
  CHECK_THROWS_AS(make_two_class_model(-0.2, c2, c2), InvalidConfig);
  CHECK_THROWS_AS(make_two_class_model(0.5, c2, c3), DimensionMismatch);
}

TEST_CASE("projection symmetrization and evaluation") {
  Matrix omega(2, 2);
  omega << 1.0, 0.7, 0.3, 2.0;
  Vector delta(2);
  delta << 0.25, -1.0;
  const QuadraticProjection q = make_projection(omega, delta);
  CHECK(q.omega(0, 1) == q.omega(1, 0));
  CHECK(q.omega(0, 1) == 0.5);

  Vector x(2);
  x << 1.0, 2.0;
  CHECK(q.evaluate(x) == doctest::Approx(14.5).epsilon(1e-14));

  Matrix rows(3, 2);
  rows << 1.0, 2.0, 0.0, 0.0, -1.0, 0.5;
  const Vector s = q.scores(rows);
  REQUIRE(s.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(s(i) ==
          doctest::Approx(q.evaluate(rows.row(i).transpose())).epsilon(1e-13));
  }

  CHECK_THROWS_AS(q.evaluate(Vector::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(q.scores(Matrix::Zero(2, 3)), DimensionMismatch);
  CHECK_THROWS_AS(make_projection(Matrix::Zero(2, 3), delta),
                  DimensionMismatch);
}

TEST_CASE("linear projection represents a'x") {
  Vector a(2);
  a << 3.0, -2.0;
  const QuadraticProjection q = make_linear_projection(a);
  CHECK(q.omega.cwiseAbs().maxCoeff() == 0.0);
  Vector x(2);
  x << 1.0, 1.0;
  CHECK(q.evaluate(x) == doctest::Approx(1.0).epsilon(1e-14));

  const QuadraticProjection z = zero_projection(3);
  CHECK(z.dim() == 3);
  CHECK(z.evaluate(Vector::Ones(3)) == 0.0);
}

TEST_CASE("projection sparsity counts") {
  SUBCASE("zero projection") {
    const SparsityReport r = projection_sparsity(zero_projection(2), 0.0);
    CHECK(r.omega_nonzeros == 0);
    CHECK(r.delta_nonzeros == 0);
    CHECK(r.active_features.empty());
  }
  SUBCASE("diagonal omega and one delta entry") {
    Matrix omega = Matrix::Zero(2, 2);
    omega(0, 0) = 1.0;
    Vector delta(2);
    delta << 0.0, 2.0;
    const SparsityReport r =
        projection_sparsity(make_projection(omega, delta), 0.5);
    CHECK(r.omega_nonzeros == 1);
    CHECK(r.delta_nonzeros == 1);
    REQUIRE(r.active_features.size() == 2);
    CHECK(r.active_features[0] == 0);
    CHECK(r.active_features[1] == 1);
  }
  SUBCASE("off-diagonal entry marks both features") {
    Matrix omega = Matrix::Zero(2, 2);
    omega(0, 1) = omega(1, 0) = 0.9;
    const SparsityReport r =
        projection_sparsity(make_projection(omega, Vector::Zero(2)), 0.5);
    CHECK(r.omega_nonzeros == 1);  // upper triangle only
    CHECK(r.delta_nonzeros == 0);
    REQUIRE(r.active_features.size() == 2);
    CHECK(r.active_features[0] == 0);
    CHECK(r.active_features[1] == 1);
  }
  SUBCASE("negative threshold rejected") {
    CHECK_THROWS_AS(projection_sparsity(zero_projection(2), -1.0),
                    InvalidConfig);
  }
}

TEST_CASE("labeled dataset validation") {
  Matrix x(4, 2);
  x << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0;
  IntVector y(4);
  y << 0, 1, 1, 0;
  const LabeledDataset data = make_dataset(x, y);
  CHECK(data.n() == 4);
  CHECK(data.dim() == 2);
  CHECK(data.count(0) == 2);
  CHECK(data.count(1) == 2);

  IntVector bad = y;
  bad(2) = 2;
  CHECK_THROWS_AS(make_dataset(x, bad), InvalidConfig);

  Matrix xnan = x;
  xnan(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(make_dataset(xnan, y), InvalidConfig);

  CHECK_THROWS_AS(make_dataset(x, IntVector::Zero(3)), DimensionMismatch);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  SolverConfig bad = cfg;
  bad.lambda_omega = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.rho0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.rho_growth = 0.5;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.tol_feas = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.tol_rel = -1e-9;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.max_outer = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = cfg;
  bad.max_inner = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("feature restriction") {
  Vector mu0 = Vector::Zero(2);
  Vector mu1(2);
  mu1 << 1.28, 0.8;
  Matrix s1 = Matrix::Zero(2, 2);
  s1(0, 0) = 3.0;
  s1(1, 1) = 1.0 / 3.0;
  const TwoClassModel m =
      make_two_class_model(0.55, make_class_model(mu0, Matrix::Identity(2, 2), 0.0),
                           make_class_model(mu1, s1, 0.0));

  const TwoClassModel f0 = restrict_features(m, {0});
  CHECK(f0.dim() == 1);
  CHECK(f0.pi == 0.55);
  CHECK(f0.class1.mu(0) == 1.28);
  CHECK(f0.class1.sigma(0, 0) == 3.0);

  const TwoClassModel f1 = restrict_features(m, {1});
  CHECK(f1.class1.mu(0) == 0.8);
  CHECK(f1.class1.sigma(0, 0) == 1.0 / 3.0);

  CHECK_THROWS_AS(restrict_features(m, {0, 0}), InvalidConfig);
  CHECK_THROWS_AS(restrict_features(m, {2}), DimensionMismatch);
  CHECK_THROWS_AS(restrict_features(m, {}), InvalidConfig);
}

TEST_CASE("model JSON round trip preserves every field bitwise") {
  const Matrix s0 = random_psd_with_noise(3, 5);
  const Matrix s1 = random_psd_with_noise(3, 6);
  Vector mu0(3), mu1(3);
  mu0 << 0.1, -0.2, 0.3;
  mu1 << 1.0 / 3.0, 0.7, -2.0 / 7.0;
  const TwoClassModel m =
      make_two_class_model(0.55, make_class_model(mu0, s0, 0.125),
                           make_class_model(mu1, s1, 1.0 / 3.0));

  const TwoClassModel back = model_from_json(model_to_json(m));
  CHECK(back.pi == m.pi);
  CHECK(back.class0.kappa == m.class0.kappa);
  CHECK(back.class1.kappa == m.class1.kappa);
  CHECK(bitwise_equal(back.class0.mu, m.class0.mu));
  CHECK(bitwise_equal(back.class1.mu, m.class1.mu));
  CHECK(bitwise_equal(back.class0.sigma, m.class0.sigma));
  CHECK(bitwise_equal(back.class1.sigma, m.class1.sigma));
}

TEST_CASE("projection JSON round trip and error reporting") {
  Matrix omega(2, 2);
  omega << 0.5, -1.0 / 3.0, -1.0 / 3.0, 2.0;
  Vector delta(2);
  delta << 0.1, -0.7;
  const QuadraticProjection q = make_projection(omega, delta);
  const QuadraticProjection back = projection_from_json(projection_to_json(q));
  CHECK(bitwise_equal(back.omega, q.omega));
  CHECK(bitwise_equal(back.delta, q.delta));

  nlohmann::json j = projection_to_json(q);
  j.erase("delta");
  CHECK_THROWS_AS(projection_from_json(j), ParseError);

  nlohmann::json bad = projection_to_json(q);
  bad["omega"][0] = nlohmann::json::array({1.0});  // ragged rows
  CHECK_THROWS_AS(projection_from_json(bad), ParseError);
}

TEST_CASE("model JSON rejects inconsistent dimension field") {
  const TwoClassModel m = make_two_class_model(
      0.5, make_class_model(Vector::Zero(2), Matrix::Identity(2, 2), 0.0),
      make_class_model(Vector::Ones(2), Matrix::Identity(2, 2), 0.0));
  nlohmann::json j = model_to_json(m);
  j["d"] = 3;
  CHECK_THROWS_AS(model_from_json(j), ParseError);
  j = model_to_json(m);
  j.erase("pi");
  CHECK_THROWS_AS(model_from_json(j), ParseError);
}

TEST_CASE("JSON file round trip") {
  const TwoClassModel m = make_two_class_model(
      0.5, make_class_model(Vector::Zero(2), Matrix::Identity(2, 2), 0.0),
      make_class_model(Vector::Ones(2), Matrix::Identity(2, 2), 0.25));
  const std::string path = "test_model_roundtrip.json";
  save_json(path, model_to_json(m));
  const TwoClassModel back = model_from_json(load_json_file(path));
  CHECK(back.class1.kappa == 0.25);
  CHECK(bitwise_equal(back.class1.mu, m.class1.mu));
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_json_file("no_such_file_anywhere.json"), IoError);
}
