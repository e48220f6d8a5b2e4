#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "vgp/embed.hpp"
#include "vgp/text.hpp"

using namespace vgp;
using namespace vgp::embed;

namespace {

corpus::Entity entity(std::vector<std::string> tokens) {
  corpus::Entity e;
  e.types = {"other"};
  e.surface_tokens = tokens;
  e.normalized_tokens = std::move(tokens);
  return e;
}

WordVectorTable table_of(const std::string& text) {
  std::istringstream in(text);
  return load_word_vectors(in);
}

Eigen::MatrixXd gaussian_rows(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("word vector files") {
  const auto t = table_of("red 1.0 0.0\nblue 0.0 1.0\nred 5 5\n");
  CHECK(t.dimension() == 2);
  CHECK(t.size() == 2);
  CHECK(*t.lookup("RED") == Eigen::Vector2d(1.0, 0.0));
  CHECK_FALSE(t.lookup("green"));
  CHECK_THROWS_AS(table_of("red 1.0 0.0\nblue 1.0\n"), ParseError);
  CHECK_THROWS_AS(table_of("red 1.0 zero\n"), ParseError);
  CHECK_THROWS(table_of(""));
}

TEST_CASE("word-embedding average") {
  const auto t = table_of("red 1 0\njersey 0 1\n");
  const auto avg = embed_average(entity({"red", "jersey"}), t);
  CHECK(avg.values.isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK_FALSE(avg.oov);
  CHECK(embed_average(entity({"red"}), t).values == Eigen::Vector2d(1, 0));
  const auto oov = embed_average(entity({"green", "hat"}), t);
  CHECK(oov.oov);
  CHECK(oov.values.isZero());
  CHECK(token_matrix(entity({"red", "hat", "jersey"}), t).rows() == 2);
}

TEST_CASE("mixture recovers separated clouds") {
  Eigen::MatrixXd x = 0.2 * gaussian_rows(400, 2, 1);
  x.bottomRows(200).array() += 10.0;
  const auto fit = fit_mixture(x, 2, 3);
  Eigen::MatrixXd means = fit.model.means;
  if (means(0, 0) > means(1, 0)) means.row(0).swap(means.row(1));
  const Eigen::RowVector2d lo = x.topRows(200).colwise().mean();
  const Eigen::RowVector2d hi = x.bottomRows(200).colwise().mean();
  CHECK((means.row(0) - lo).norm() < 0.1);
  CHECK((means.row(1) - hi).norm() < 0.1);
  CHECK(fit.model.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((fit.model.scales.array() > 0).all());
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
}

TEST_CASE("single-component mixture sits at the sample mean") {
  const auto x = gaussian_rows(50, 3, 4);
  const auto fit = fit_mixture(x, 1, 0);
  CHECK(fit.model.means.row(0).isApprox(x.colwise().mean(), 1e-12));
}

TEST_CASE("mixture fits are reproducible for a seed") {
  const auto x = gaussian_rows(120, 4, 8);
  const auto a = fit_mixture(x, 3, 42);
  const auto b = fit_mixture(x, 3, 42);
  CHECK(a.model.means == b.model.means);
  CHECK(a.model.scales == b.model.scales);
  CHECK(a.model.weights == b.model.weights);
  CHECK_THROWS(fit_mixture(x.topRows(2), 3, 0));
}

TEST_CASE("Fisher vector length and token-order invariance") {
  const auto x = gaussian_rows(80, 2, 5);
  const auto model = fit_mixture(x, 3, 1).model;
  const auto fv = encode_fisher(x.topRows(4), model);
  CHECK(fv.size() == 12);
  CHECK(fv.norm() == doctest::Approx(1.0));
  Eigen::MatrixXd reversed = x.topRows(4).colwise().reverse();
  CHECK(encode_fisher(reversed, model).isApprox(fv, 1e-12));
  CHECK_THROWS(encode_fisher(Eigen::MatrixXd::Zero(1, 5), model));
  MixtureModel big;
  big.weights = Eigen::VectorXd::Constant(30, 1.0 / 30);
  big.means = Eigen::MatrixXd::Zero(30, 300);
  big.scales = Eigen::MatrixXd::Ones(30, 300);
  CHECK(encode_fisher(gaussian_rows(2, 300, 6), big).size() == 18000);
}

TEST_CASE("PCA on planar data is exact and orthonormal") {
  const auto coeffs = gaussian_rows(60, 2, 7);
  Eigen::MatrixXd basis(2, 5);
  basis << 1, 2, 0, -1, 0.5, 0, 1, 1, 3, -2;
  const Eigen::MatrixXd x = (coeffs * basis).rowwise() + Eigen::RowVectorXd::LinSpaced(5, 1, 5);
  const auto p = fit_pca(x, 2);
  CHECK((p.components * p.components.transpose()).isApprox(Eigen::Matrix2d::Identity(), 1e-6));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd z = apply_pca(x.row(i).transpose(), p);
    const Eigen::VectorXd back = p.components.transpose() * z + p.mean;
    CHECK((back - x.row(i).transpose()).norm() < 1e-8);
  }
  CHECK(p.explained_variance[0] >= p.explained_variance[1]);
}

TEST_CASE("full-rank PCA preserves distances") {
  const auto x = gaussian_rows(30, 4, 9);
  const auto p = fit_pca(x, 4);
  for (int i = 0; i < 10; ++i) {
    const double before = (x.row(i) - x.row(i + 1)).norm();
    const double after = (apply_pca(x.row(i).transpose(), p) - apply_pca(x.row(i + 1).transpose(), p)).norm();
    CHECK(after == doctest::Approx(before).epsilon(1e-8));
  }
  double kept = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const double now = fit_pca(x, k).explained_variance.sum();
    CHECK(now >= kept);
    kept = now;
  }
  CHECK(kept == doctest::Approx(p.total_variance));
  CHECK_THROWS(fit_pca(x, 5));
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)) == 0.0);
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)) == 0.0);
  CHECK_THROWS(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd a = gaussian_rows(1, 6, rng()).transpose();
    const Eigen::VectorXd b = gaussian_rows(1, 6, rng()).transpose();
    const double s = cosine_similarity(a, b);
    CHECK(s == cosine_similarity(b, a));
    CHECK(std::abs(s) <= 1.0);
  }
}
