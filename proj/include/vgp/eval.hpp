#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vgp::eval {

/// Adjusted Rand index between two labelings of the same items.
/// Identical partitions (up to relabeling, including n <= 1) score 1.0; a zero
/// denominator with non-identical partitions scores 0.0.
double adjusted_rand_index(const std::vector<int>& predicted, const std::vector<int>& gold);

struct ScoredPair {
  double similarity = 0.0;
  bool gold_positive = false;
};

struct PRF {
  double precision = 1.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::size_t predicted = 0;
  std::size_t true_positives = 0;
  std::size_t gold_positives = 0;
};

/// A pair is predicted when similarity > threshold. Precision is 1.0 when
/// nothing is predicted. Throws when there are no gold positives.
PRF pairwise_prf(const std::vector<ScoredPair>& pairs, double threshold);

PRF prf_from_counts(std::size_t predicted, std::size_t true_positives, std::size_t gold_positives);

enum class Breakdown { kAll, kSingle, kMulti };
const char* breakdown_name(Breakdown b);

/// Per-image inputs for split evaluation. Entities are indexed 0..n-1.
struct ImageEvaluation {
  std::string image_id;
  std::vector<int> predicted;          // cluster label per entity
  std::vector<int> gold;               // gold cluster label per entity
  std::vector<std::size_t> token_counts;  // normalized token count per entity
  Eigen::MatrixXd similarity;          // off-diagonal pair similarities
};

struct Metrics {
  double ari = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::size_t images = 0;
  std::size_t entities = 0;
  std::size_t pairs = 0;
  std::size_t gold_pairs = 0;
};

struct EvalReport {
  std::string method;
  double threshold = 0.0;
  double preference = 0.0;
  Metrics all;
  Metrics single;
  Metrics multi;

  const Metrics& at(Breakdown b) const;
};

struct EvalOptions {
  // Pool pair counts over the split (default) or average per-image P/R/F.
  bool per_image_pairwise = false;
};

/// Entity restricted to a breakdown: single = one normalized token,
/// multi = two or more; a pair belongs to a restricted breakdown only when
/// both entities do.
bool in_breakdown(std::size_t token_count, Breakdown b);

EvalReport evaluate_split(const std::vector<ImageEvaluation>& images, double threshold,
                          const EvalOptions& options = {});

/// Same-image (i<j) pairs with gold labels; used by threshold tuning.
std::vector<ScoredPair> collect_pairs(const ImageEvaluation& image, Breakdown b = Breakdown::kAll);

/// Table-style text and JSON renderings of reports.
std::string format_table(const std::vector<EvalReport>& reports);
std::string to_json(const std::vector<EvalReport>& reports);
std::vector<EvalReport> reports_from_json(const std::string& text);

}  // namespace vgp::eval
