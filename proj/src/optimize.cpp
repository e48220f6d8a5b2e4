#include "vgp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace vgp::optimize {
namespace {

constexpr double kLengthScales[] = {0.05, 0.15, 0.4};
constexpr double kSignalVariances[] = {0.25, 1.0, 4.0};

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

GPSurrogate::GPSurrogate(std::vector<double> x, std::vector<double> y, Hyper hyper, double noise_variance,
                         double jitter)
    : x_(std::move(x)), hyper_(hyper), noise_(noise_variance), jitter_(jitter) {
  if (x_.size() != y.size() || x_.empty()) throw std::invalid_argument("GP needs matching, non-empty x and y");
  if (noise_ < 0.0) throw std::invalid_argument("GP noise variance must be >= 0");
  const auto n = static_cast<Eigen::Index>(x_.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel(x_[i], x_[j]);
  k.diagonal().array() += noise_ + jitter_;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw std::runtime_error("GP kernel matrix is not positive definite");
  chol_l_ = llt.matrixL();
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  alpha_ = llt.solve(yv);
  log_marginal_ = -0.5 * yv.dot(alpha_) - chol_l_.diagonal().array().log().sum() -
                  0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

double GPSurrogate::kernel(double a, double b) const {
  const double d = (a - b) / hyper_.length_scale;
  return hyper_.signal_variance * std::exp(-0.5 * d * d);
}

double GPSurrogate::mean(double x) const {
  double m = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) m += kernel(x, x_[i]) * alpha_[static_cast<Eigen::Index>(i)];
  return m;
}

double GPSurrogate::variance(double x) const {
  Eigen::VectorXd k(static_cast<Eigen::Index>(x_.size()));
  for (std::size_t i = 0; i < x_.size(); ++i) k[static_cast<Eigen::Index>(i)] = kernel(x, x_[i]);
  const Eigen::VectorXd v = chol_l_.triangularView<Eigen::Lower>().solve(k);
  const double var = hyper_.signal_variance - v.squaredNorm();
  // Anything at the jitter level is numerical residue of an observed point.
  return var <= 10.0 * jitter_ * hyper_.signal_variance ? 0.0 : var;
}

GPSurrogate GPSurrogate::fit(std::vector<double> x, std::vector<double> y, double noise_variance) {
  std::optional<GPSurrogate> best;
  for (double ls : kLengthScales) {
    for (double sv : kSignalVariances) {
      GPSurrogate gp(x, y, Hyper{ls, sv}, noise_variance);
      if (!best || gp.log_marginal_likelihood() > best->log_marginal_likelihood()) best = std::move(gp);
    }
  }
  return std::move(*best);
}

double expected_improvement(const GPSurrogate& gp, double x, double best, double xi) {
  const double mu = gp.mean(x);
  const double var = gp.variance(x);
  const double gain = mu - best - xi;
  if (var <= 0.0) return std::max(0.0, gain);
  const double sigma = std::sqrt(var);
  const double z = gain / sigma;
  return std::max(0.0, gain * normal_cdf(z) + sigma * normal_pdf(z));
}

TuneResult tune_preference(const std::function<double(double)>& objective, const TuneConfig& cfg) {
  if (!std::isfinite(cfg.lower) || !std::isfinite(cfg.upper) || !(cfg.lower < cfg.upper)) {
    throw std::invalid_argument("preference bounds must be finite with lower < upper");
  }
  if (cfg.initial_points < 1 || cfg.budget < cfg.initial_points) {
    throw std::invalid_argument("budget must be at least the initial design size");
  }
  const double span = cfg.upper - cfg.lower;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> unit_x;  // inputs rescaled to [0, 1]
  TuneResult result;
  auto evaluate = [&](double u) {
    u = std::clamp(u, 0.0, 1.0);
    const double x = cfg.lower + u * span;
    const double y = objective(x);
    unit_x.push_back(u);
    result.history.push_back({static_cast<int>(result.history.size()), x, y});
    const double recorded = std::isfinite(y) ? y : -std::numeric_limits<double>::infinity();
    const double prev = result.best_so_far.empty() ? -std::numeric_limits<double>::infinity()
                                                   : result.best_so_far.back();
    result.best_so_far.push_back(std::max(prev, recorded));
  };

  // Latin hypercube in one dimension: one draw per stratum, shuffled.
  std::vector<double> design;
  for (int k = 0; k < cfg.initial_points; ++k) design.push_back((k + unit(rng)) / cfg.initial_points);
  std::shuffle(design.begin(), design.end(), rng);
  for (double u : design) evaluate(u);

  std::vector<double> grid(static_cast<std::size_t>(cfg.grid_points));
  for (int g = 0; g < cfg.grid_points; ++g)
    grid[static_cast<std::size_t>(g)] = cfg.grid_points == 1 ? 0.5 : static_cast<double>(g) / (cfg.grid_points - 1);

  while (static_cast<int>(result.history.size()) < cfg.budget) {
    // Non-finite objectives are recorded as the worst finite observation.
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& h : result.history)
      if (std::isfinite(h.objective)) worst = std::min(worst, h.objective);
    if (!std::isfinite(worst)) worst = 0.0;
    std::vector<double> ys;
    for (const auto& h : result.history) ys.push_back(std::isfinite(h.objective) ? h.objective : worst);
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    double sd = 0.0;
    for (double y : ys) sd += (y - mean) * (y - mean);
    sd = std::sqrt(sd / static_cast<double>(ys.size()));
    if (sd <= 0.0) sd = 1.0;
    for (double& y : ys) y = (y - mean) / sd;
    const double best = *std::max_element(ys.begin(), ys.end());

    const auto gp = GPSurrogate::fit(unit_x, ys, cfg.noise_variance);
    double best_ei = 0.0;
    double next = -1.0;
    for (double u : grid) {
      const double ei = expected_improvement(gp, u, best);
      if (ei > best_ei) {
        best_ei = ei;
        next = u;
      }
    }
    if (next < 0.0) {
      // EI vanished everywhere: take the grid point farthest from the data.
      double best_gap = -1.0;
      for (double u : grid) {
        double gap = std::numeric_limits<double>::infinity();
        for (double o : unit_x) gap = std::min(gap, std::abs(u - o));
        if (gap > best_gap) {
          best_gap = gap;
          next = u;
        }
      }
    }
    evaluate(next);
  }

  // Ties for the best objective resolve to the median x among them (lower
  // median for an even count), i.e. the middle of a flat optimum.
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& h : result.history)
    if (std::isfinite(h.objective)) top = std::max(top, h.objective);
  std::vector<double> tied;
  for (const auto& h : result.history)
    if (std::isfinite(h.objective) && h.objective == top) tied.push_back(h.x);
  if (tied.empty()) {
    result.best_x = result.history.front().x;
    result.best_objective = std::numeric_limits<double>::quiet_NaN();
  } else {
    std::sort(tied.begin(), tied.end());
    result.best_x = tied[(tied.size() - 1) / 2];
    result.best_objective = top;
  }
  return result;
}

ThresholdResult tune_threshold(const std::vector<eval::ScoredPair>& pairs) {
  std::size_t gold = 0;
  for (const auto& p : pairs) gold += p.gold_positive;
  if (gold == 0) throw std::invalid_argument("threshold tuning needs at least one positive pair");

  // Distinct values in descending order with positive/total counts.
  std::vector<eval::ScoredPair> sorted = pairs;
  std::sort(sorted.begin(), sorted.end(),
            [](const eval::ScoredPair& a, const eval::ScoredPair& b) { return a.similarity > b.similarity; });
  struct Level {
    double value;
    std::size_t count;
    std::size_t positives;
  };
  std::vector<Level> levels;
  for (const auto& p : sorted) {
    if (levels.empty() || levels.back().value != p.similarity) levels.push_back({p.similarity, 0, 0});
    ++levels.back().count;
    levels.back().positives += p.gold_positive;
  }
  const double max_v = levels.front().value;
  const double min_v = levels.back().value;

  ThresholdResult best;
  bool have = false;
  auto consider = [&](double threshold, std::size_t predicted, std::size_t tp) {
    const auto m = eval::prf_from_counts(predicted, tp, gold);
    const bool better = !have || m.f_score > best.f_score ||
                        (m.f_score == best.f_score &&
                         (m.precision > best.precision ||
                          (m.precision == best.precision && threshold < best.threshold)));
    if (better) {
      best = {threshold, m.precision, m.recall, m.f_score};
      have = true;
    }
  };

  // Threshold at/above the maximum predicts nothing.
  consider(max_v < 1.0 ? 1.0 : max_v, 0, 0);
  std::size_t predicted = 0, tp = 0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    predicted += levels[l].count;
    tp += levels[l].positives;
    const double threshold = l + 1 < levels.size() ? 0.5 * (levels[l].value + levels[l + 1].value)
                                                   : (min_v > 0.0 ? 0.0 : min_v - 1.0);
    consider(threshold, predicted, tp);
  }
  return best;
}

}  // namespace vgp::optimize
