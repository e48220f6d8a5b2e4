#include "vgp/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vgp::cluster {

std::vector<int> Clustering::labels() const {
  std::vector<int> out(exemplar.size(), -1);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto i : clusters[c]) out[i] = static_cast<int>(c);
  return out;
}

SimilarityMatrix build_similarity_matrix(std::size_t n, const PairScorer& scorer, double preference) {
  SimilarityMatrix s{Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = preference;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = scorer(i, j);
      const double b = scorer(j, i);
      if (!std::isfinite(a) || !std::isfinite(b)) {
        throw std::domain_error("non-finite similarity for pair (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
      }
      const double v = 0.5 * (a + b);
      s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      s.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return s;
}

SimilarityMatrix with_preference(const SimilarityMatrix& s, double preference) {
  SimilarityMatrix out = s;
  out.values.diagonal().setConstant(preference);
  return out;
}

double median_off_diagonal(const Eigen::MatrixXd& s) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j) v.push_back(s(i, j));
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void update_messages(const Eigen::MatrixXd& s, APState& state, double damping) {
  const Eigen::Index n = s.rows();
  auto& r = state.responsibility;
  auto& a = state.availability;

  // r(i,k) = s(i,k) - max_{k' != k} (a(i,k') + s(i,k'))
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    double second = best;
    Eigen::Index best_k = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = a(i, k) + s(i, k);
      if (v > best) {
        second = best;
        best = v;
        best_k = k;
      } else if (v > second) {
        second = v;
      }
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double competitor = k == best_k ? second : best;
      const double fresh = s(i, k) - competitor;
      r(i, k) = (1.0 - damping) * fresh + damping * r(i, k);
    }
  }

  // a(i,k) = min{0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k))}, i != k
  // a(k,k) = sum_{i' != k} max(0, r(i',k))
  for (Eigen::Index k = 0; k < n; ++k) {
    double positive_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != k) positive_sum += std::max(0.0, r(i, k));
    for (Eigen::Index i = 0; i < n; ++i) {
      double fresh;
      if (i == k) {
        fresh = positive_sum;
      } else {
        fresh = std::min(0.0, r(k, k) + positive_sum - std::max(0.0, r(i, k)));
      }
      a(i, k) = (1.0 - damping) * fresh + damping * a(i, k);
    }
  }
  ++state.iteration;
}

namespace {

Clustering assign(const Eigen::MatrixXd& s, const std::vector<std::size_t>& exemplars) {
  const auto n = static_cast<std::size_t>(s.rows());
  Clustering c;
  c.exemplar.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::binary_search(exemplars.begin(), exemplars.end(), i)) {
      c.exemplar[i] = i;
      continue;
    }
    std::size_t best = exemplars.front();
    for (auto k : exemplars)
      if (s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) >
          s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)))
        best = k;
    c.exemplar[i] = best;
  }
  for (auto k : exemplars) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (c.exemplar[i] == k) members.push_back(i);
    c.clusters.push_back(std::move(members));
  }
  return c;
}

}  // namespace

Clustering affinity_propagation(const SimilarityMatrix& sm, const APConfig& cfg) {
  if (!(cfg.damping >= 0.0 && cfg.damping < 1.0)) throw std::invalid_argument("damping must lie in [0, 1)");
  if (cfg.max_iterations <= 0 || cfg.convergence_window <= 0) {
    throw std::invalid_argument("iteration counts must be positive");
  }
  if (cfg.tie_break < 0.0) throw std::invalid_argument("tie_break must be >= 0");
  const Eigen::MatrixXd& s = sm.values;
  const Eigen::Index n = s.rows();
  if (n == 0) return {};
  if (n == 1) {
    Clustering c;
    c.exemplar = {0};
    c.clusters = {{0}};
    c.converged = true;
    return c;
  }

  Eigen::MatrixXd messages_s = s;
  if (cfg.tie_break > 0.0) {
    const double step = cfg.tie_break * std::max(1.0, s.cwiseAbs().maxCoeff()) / static_cast<double>(n);
    for (Eigen::Index k = 1; k < n; ++k) messages_s.col(k).array() -= step * static_cast<double>(k);
  }
  APState state{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), 0};
  std::vector<bool> previous(static_cast<std::size_t>(n), false);
  int stable = 0;
  bool converged = false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    update_messages(messages_s, state, cfg.damping);
    std::vector<bool> current(static_cast<std::size_t>(n));
    bool any = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      current[static_cast<std::size_t>(k)] = state.responsibility(k, k) + state.availability(k, k) > 0.0;
      any = any || current[static_cast<std::size_t>(k)];
    }
    stable = (current == previous) ? stable + 1 : 1;
    previous = std::move(current);
    if (any && stable >= cfg.convergence_window) {
      converged = true;
      break;
    }
  }

  std::vector<std::size_t> exemplars;
  for (Eigen::Index k = 0; k < n; ++k)
    if (state.responsibility(k, k) + state.availability(k, k) > 0.0) exemplars.push_back(static_cast<std::size_t>(k));

  Clustering c;
  if (exemplars.empty()) {
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = state.responsibility(k, k) + state.availability(k, k);
      if (v > best_value) {
        best_value = v;
        best = static_cast<std::size_t>(k);
      }
    }
    c.exemplar.assign(static_cast<std::size_t>(n), best);
    c.clusters.emplace_back();
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) c.clusters.back().push_back(i);
  } else {
    c = assign(s, exemplars);
  }
  c.iterations = state.iteration;
  c.converged = converged;
  return c;
}

Clustering affinity_propagation(const Eigen::MatrixXd& off_diagonal, const APConfig& cfg) {
  return affinity_propagation(with_preference(SimilarityMatrix{off_diagonal}, cfg.preference), cfg);
}

}  // namespace vgp::cluster
