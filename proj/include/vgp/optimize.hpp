#pragma once

// Preference tuning by 1-D Bayesian optimization and pairwise threshold tuning.

#include <cstdint>
#include <functional>
#include <vector>

#include "vgp/eval.hpp"

namespace vgp::optimize {

/// Squared-exponential GP over a scalar input.
class GPSurrogate {
 public:
  struct Hyper {
    double length_scale = 0.2;
    double signal_variance = 1.0;
  };

  GPSurrogate(std::vector<double> x, std::vector<double> y, Hyper hyper, double noise_variance = 0.0,
              double jitter = 1e-8);

  double mean(double x) const;
  double variance(double x) const;
  double log_marginal_likelihood() const { return log_marginal_; }
  const Hyper& hyper() const { return hyper_; }

  /// Picks the hyperparameters maximizing the marginal likelihood over a
  /// 3 x 3 grid of (length scale, signal variance).
  static GPSurrogate fit(std::vector<double> x, std::vector<double> y, double noise_variance = 0.0);

 private:
  double kernel(double a, double b) const;

  std::vector<double> x_;
  Hyper hyper_;
  double noise_;
  double jitter_;
  Eigen::MatrixXd chol_l_;  // lower Cholesky factor of K + (noise + jitter) I
  Eigen::VectorXd alpha_;
  double log_marginal_ = 0.0;
};

/// Expected improvement for maximization; zero where the posterior variance
/// is zero (below jitter).
double expected_improvement(const GPSurrogate& gp, double x, double best, double xi = 0.01);

struct TuneConfig {
  double lower = 0.0;
  double upper = 1.0;
  int budget = 25;
  int initial_points = 5;
  int grid_points = 512;
  double noise_variance = 1e-6;
  std::uint64_t seed = 0;
};

struct TuneStep {
  int iteration = 0;
  double x = 0.0;
  double objective = 0.0;  // as returned (may be non-finite)
};

struct TuneResult {
  double best_x = 0.0;
  double best_objective = 0.0;
  std::vector<TuneStep> history;
  std::vector<double> best_so_far;  // running max of recorded objectives
};

/// Latin-hypercube start, then expected improvement on a grid. Returns the
/// observed maximizer; ties resolve to the median tied x.
TuneResult tune_preference(const std::function<double(double)>& objective, const TuneConfig& cfg);

struct ThresholdResult {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

/// Sweeps midpoints between consecutive distinct similarities plus one
/// sentinel below the minimum and one at/above the maximum; best F wins,
/// ties broken by higher precision then lower threshold.
ThresholdResult tune_threshold(const std::vector<eval::ScoredPair>& pairs);

}  // namespace vgp::optimize
