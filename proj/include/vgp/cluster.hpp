#pragma once

// Affinity propagation over a per-image similarity matrix.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace vgp::cluster {

/// n x n similarities; the diagonal holds the preference.
struct SimilarityMatrix {
  Eigen::MatrixXd values;
  Eigen::Index size() const { return values.rows(); }
};

struct APConfig {
  double preference = 0.0;
  double damping = 0.5;       // in [0, 1)
  int max_iterations = 200;
  int convergence_window = 15;
  // Column k of s is lowered by tie_break * max(1, max|s|) * k / n before
  // message passing, so symmetric configurations resolve toward the smaller
  // index instead of parking r(k,k)+a(k,k) at exactly 0. 0 disables it.
  double tie_break = 1e-12;
};

struct APState {
  Eigen::MatrixXd responsibility;
  Eigen::MatrixXd availability;
  int iteration = 0;
};

struct Clustering {
  std::vector<std::size_t> exemplar;            // exemplar index per point
  std::vector<std::vector<std::size_t>> clusters;  // ordered by exemplar index
  int iterations = 0;
  bool converged = false;

  std::vector<int> labels() const;
};

using PairScorer = std::function<double(std::size_t, std::size_t)>;

/// Off-diagonal entries are (s(i,j)+s(j,i))/2; the diagonal is the preference.
/// Throws std::domain_error naming the pair on a non-finite score.
SimilarityMatrix build_similarity_matrix(std::size_t n, const PairScorer& scorer, double preference);

/// Copy of `s` with the diagonal replaced by `preference`.
SimilarityMatrix with_preference(const SimilarityMatrix& s, double preference);

/// One damped responsibility + availability sweep.
void update_messages(const Eigen::MatrixXd& s, APState& state, double damping);

Clustering affinity_propagation(const SimilarityMatrix& s, const APConfig& cfg);

/// Preference is taken from `cfg` and written onto the diagonal first.
Clustering affinity_propagation(const Eigen::MatrixXd& off_diagonal, const APConfig& cfg);

/// Median of the off-diagonal entries; 0 for n < 2.
double median_off_diagonal(const Eigen::MatrixXd& s);

}  // namespace vgp::cluster
