#include <cmath>
#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "vgp/cluster.hpp"
#include "vgp/eval.hpp"

using namespace vgp::cluster;

namespace {

Eigen::MatrixXd neg_sq_dist(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = -(points.row(i) - points.row(j)).squaredNorm();
  return s;
}

Eigen::MatrixXd blobs(int per_blob, double noise, std::uint64_t seed, std::vector<int>* labels) {
  const double centers[3][2] = {{0, 0}, {6, 0}, {3, 5}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, noise);
  Eigen::MatrixXd p(3 * per_blob, 2);
  for (int b = 0; b < 3; ++b) {
    for (int k = 0; k < per_blob; ++k) {
      p(b * per_blob + k, 0) = centers[b][0] + nd(rng);
      p(b * per_blob + k, 1) = centers[b][1] + nd(rng);
      if (labels) labels->push_back(b);
    }
  }
  return p;
}

void check_partition(const Clustering& c, std::size_t n) {
  REQUIRE(c.exemplar.size() == n);
  std::vector<int> seen(n, 0);
  for (const auto& cl : c.clusters) {
    CHECK_FALSE(cl.empty());
    for (auto i : cl) ++seen[i];
  }
  for (auto v : seen) CHECK(v == 1);
  for (std::size_t i = 0; i < n; ++i) CHECK(c.exemplar[c.exemplar[i]] == c.exemplar[i]);
}

}  // namespace

TEST_CASE("similarity matrix symmetrizes scores and carries the preference") {
  auto sym = build_similarity_matrix(3, [](std::size_t i, std::size_t j) { return 0.1 * static_cast<double>(i + j); }, -1.0);
  CHECK(sym.values(0, 1) == doctest::Approx(0.1));
  CHECK(sym.values(1, 2) == doctest::Approx(0.3));
  CHECK(sym.values(2, 2) == -1.0);
  auto one = build_similarity_matrix(1, [](std::size_t, std::size_t) { return 0.0; }, 0.7);
  CHECK(one.size() == 1);
  CHECK(one.values(0, 0) == 0.7);
  auto asym = build_similarity_matrix(2, [](std::size_t i, std::size_t) { return i == 0 ? 0.2 : 0.4; }, 0.0);
  CHECK(asym.values(0, 1) == doctest::Approx(0.3));
  CHECK(asym.values(1, 0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(build_similarity_matrix(2, [](std::size_t, std::size_t) { return std::nan(""); }, 0.0),
                  std::domain_error);
}

TEST_CASE("single point is its own cluster") {
  SimilarityMatrix s{Eigen::MatrixXd::Constant(1, 1, -3.0)};
  const auto c = affinity_propagation(s, {});
  CHECK(c.clusters.size() == 1);
  CHECK(c.exemplar[0] == 0);
}

TEST_CASE("two tight pairs far apart give two clusters") {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 0.1, 0, 10, 10, 10.1, 10;
  Eigen::MatrixXd s = neg_sq_dist(p);
  APConfig cfg;
  cfg.preference = median_off_diagonal(s);
  const auto c = affinity_propagation(s, cfg);
  REQUIRE(c.clusters.size() == 2);
  const auto l = c.labels();
  CHECK(l[0] == l[1]);
  CHECK(l[2] == l[3]);
  CHECK(l[0] != l[2]);
  check_partition(c, 4);
}

TEST_CASE("indistinguishable points with a high preference stay apart") {
  const Eigen::MatrixXd s = Eigen::MatrixXd::Zero(5, 5);
  APConfig cfg;
  cfg.preference = 1.0;
  const auto c = affinity_propagation(s, cfg);
  CHECK(c.clusters.size() == 5);
  check_partition(c, 5);
}

TEST_CASE("an isolated symmetric pair forms its own cluster") {
  // Without the index tie-break r+a of both points settles at exactly 0.
  Eigen::MatrixXd s(4, 4);
  s << 0, -1, -50, -50, -1, 0, -50, -50, -50, -50, 0, -1, -50, -50, -1, 0;
  APConfig cfg;
  cfg.preference = -2.0;
  const auto c = affinity_propagation(s, cfg);
  CHECK(c.clusters.size() == 2);
  cfg.tie_break = -1.0;
  CHECK_THROWS(affinity_propagation(s, cfg));
}

TEST_CASE("first sweep with no damping equals the closed-form responsibility") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd s(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) s(i, j) = nd(rng);
  APState st{Eigen::MatrixXd::Zero(6, 6), Eigen::MatrixXd::Zero(6, 6), 0};
  update_messages(s, st, 0.0);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index k = 0; k < 6; ++k) {
      double best = -1e300;
      for (Eigen::Index kk = 0; kk < 6; ++kk)
        if (kk != k) best = std::max(best, s(i, kk));
      CHECK(st.responsibility(i, k) == doctest::Approx(s(i, k) - best).epsilon(1e-12));
    }
  }
  CHECK(st.iteration == 1);
  CHECK(st.availability.allFinite());
}

TEST_CASE("three blobs are recovered and the run is deterministic") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> gold;
    const auto s = neg_sq_dist(blobs(20, 0.5, seed, &gold));
    APConfig cfg;
    cfg.preference = median_off_diagonal(s);
    const auto c = affinity_propagation(s, cfg);
    check_partition(c, 60);
    CHECK(vgp::eval::adjusted_rand_index(c.labels(), gold) >= 0.95);
    const auto again = affinity_propagation(s, cfg);
    CHECK(again.exemplar == c.exemplar);
    CHECK(again.iterations == c.iterations);
  }
}

TEST_CASE("raising the preference never lowers the cluster count") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = neg_sq_dist(blobs(6, 1.5, 100 + seed, nullptr));
    const double lo = s.minCoeff();
    std::size_t previous = 0;
    for (int g = 0; g <= 40; ++g) {
      APConfig cfg;
      cfg.preference = lo + (0.0 - lo) * g / 40.0;
      const auto count = affinity_propagation(s, cfg).clusters.size();
      CHECK(count >= previous);
      previous = count;
    }
  }
}

TEST_CASE("invalid configurations are rejected") {
  const Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  APConfig cfg;
  cfg.damping = 1.0;
  CHECK_THROWS(affinity_propagation(s, cfg));
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS(affinity_propagation(s, cfg));
}

TEST_CASE("median of off-diagonal entries") {
  Eigen::MatrixXd s(3, 3);
  s << 9, 1, 2, 3, 9, 4, 5, 6, 9;
  CHECK(median_off_diagonal(s) == doctest::Approx(3.5));
  CHECK(median_off_diagonal(Eigen::MatrixXd::Zero(1, 1)) == 0.0);
}
