#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "doctest.h"
#include "vgp/cca.hpp"

using namespace vgp::cca;

namespace {

Eigen::MatrixXd gaussian_rows(int n, int d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("identical one-dimensional views are perfectly correlated") {
  std::mt19937_64 rng(1);
  const auto x = gaussian_rows(200, 1, rng);
  CCAOptions exact;
  exact.eta = 0.0;
  const auto m = fit_cca(x, x, 1, exact);
  CHECK(m.correlations[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scaled view with small noise") {
  std::mt19937_64 rng(2);
  const auto x = gaussian_rows(1000, 1, rng);
  const Eigen::MatrixXd y = 2.0 * x + gaussian_rows(1000, 1, rng, 0.01);
  CHECK(fit_cca(x, y, 1).correlations[0] >= 0.999);
}

TEST_CASE("independent views are weakly correlated") {
  std::mt19937_64 rng(3);
  const auto m = fit_cca(gaussian_rows(1000, 5, rng), gaussian_rows(1000, 5, rng), 5);
  CHECK(m.correlations[0] <= 0.15);
  for (Eigen::Index i = 0; i < m.correlations.size(); ++i) {
    CHECK(m.correlations[i] >= 0.0);
    CHECK(m.correlations[i] <= 1.0);
    if (i > 0) CHECK(m.correlations[i] <= m.correlations[i - 1]);
  }
}

TEST_CASE("top correlation matches the planted covariance") {
  // y = A x + e with x ~ N(0, I), e ~ N(0, s^2 I): the canonical correlations
  // are a_k / sqrt(a_k^2 + s^2) for the singular values a_k of A.
  std::mt19937_64 rng(4);
  const double sigma = 0.05;
  Eigen::VectorXd planted(8);
  planted << 0.1, 0.08, 0.06, 0.05, 0.04, 0.03, 0.02, 0.01;
  Eigen::HouseholderQR<Eigen::MatrixXd> q1(gaussian_rows(8, 8, rng)), q2(gaussian_rows(8, 8, rng));
  const Eigen::MatrixXd a = Eigen::MatrixXd(q1.householderQ()) * planted.asDiagonal() *
                            Eigen::MatrixXd(q2.householderQ()).transpose();
  const auto x = gaussian_rows(2000, 8, rng);
  const Eigen::MatrixXd y = x * a.transpose() + gaussian_rows(2000, 8, rng, sigma);
  const double analytic = planted[0] / std::sqrt(planted[0] * planted[0] + sigma * sigma);
  CHECK(std::abs(fit_cca(x, y, 8).correlations[0] - analytic) <= 0.02);
}

TEST_CASE("correlations survive invertible maps and view swaps") {
  std::mt19937_64 rng(5);
  const auto x = gaussian_rows(500, 4, rng);
  const Eigen::MatrixXd y = x.leftCols(3) * gaussian_rows(3, 3, rng) + gaussian_rows(500, 3, rng, 0.5);
  CCAOptions exact;
  exact.eta = 0.0;
  const auto base = fit_cca(x, y, 3, exact);
  Eigen::MatrixXd map = gaussian_rows(4, 4, rng) + 3.0 * Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd mapped = (x * map).rowwise() + Eigen::RowVectorXd::Constant(4, 7.0);
  const auto moved = fit_cca(mapped, y, 3, exact);
  CHECK((moved.correlations - base.correlations).cwiseAbs().maxCoeff() < 1e-6);
  const auto swapped = fit_cca(y, x, 3, exact);
  CHECK((swapped.correlations - base.correlations).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projections are unit length and zero inputs are flagged") {
  std::mt19937_64 rng(6);
  const auto x = gaussian_rows(300, 5, rng);
  const auto y = gaussian_rows(300, 4, rng);
  const auto m = fit_cca(x, y, 3);
  for (int i = 0; i < 10; ++i) {
    CHECK(project_entity(x.row(i).transpose(), m).values.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(project_region(y.row(i).transpose(), m).values.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto z = project_entity(m.entity_mean, m);
  CHECK(z.zero);
  CHECK(z.values.isZero());
  CHECK_THROWS(project_entity(Eigen::VectorXd::Zero(2), m));
}

TEST_CASE("identity-correlated views keep nearest neighbours") {
  std::mt19937_64 rng(7);
  const auto x = gaussian_rows(400, 3, rng);
  const Eigen::MatrixXd y = x + gaussian_rows(400, 3, rng, 0.01);
  CCAOptions flat;
  flat.power = 0.0;
  const auto m = fit_cca(x, y, 3, flat);
  // A full-dimension projection with unit column scaling is a rotation of the
  // whitened input, so cosine neighbours agree with any whitening.
  const Eigen::MatrixXd pts = x.topRows(10);
  auto nearest = [&](auto&& vec_of, int i) {
    int best = -1;
    double best_s = -2;
    for (int j = 0; j < 10; ++j) {
      if (j == i) continue;
      const double s = vec_of(i).dot(vec_of(j)) / (vec_of(i).norm() * vec_of(j).norm());
      if (s > best_s) {
        best_s = s;
        best = j;
      }
    }
    return best;
  };
  Eigen::MatrixXd cxx = (x.rowwise() - m.entity_mean.transpose()).transpose() * (x.rowwise() - m.entity_mean.transpose()) / 399.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cxx);
  for (int i = 0; i < 10; ++i) {
    auto white = [&](int k) -> Eigen::VectorXd {
      return llt.matrixL().solve(Eigen::VectorXd(pts.row(k).transpose() - m.entity_mean));
    };
    auto proj = [&](int k) -> Eigen::VectorXd { return project_entity(pts.row(k).transpose(), m).values; };
    CHECK(nearest(proj, i) == nearest(white, i));
  }
}

TEST_CASE("invalid CCA inputs") {
  std::mt19937_64 rng(8);
  const auto x = gaussian_rows(20, 3, rng);
  CHECK_THROWS(fit_cca(x, x.topRows(10), 2));
  CHECK_THROWS(fit_cca(x, x, 4));
  CHECK_THROWS(fit_cca(x.topRows(2), x.topRows(2), 2));
  Eigen::MatrixXd rank_deficient = x;
  rank_deficient.col(2) = rank_deficient.col(1);
  CCAOptions exact;
  exact.eta = 0.0;
  CHECK_THROWS(fit_cca(rank_deficient, x, 2, exact));
}
