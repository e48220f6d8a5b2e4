#include "vgp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vgp::eval {
namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("ARI: partitions cover different entity sets");
  }
  const std::size_t n = predicted.size();
  if (n <= 1) return 1.0;

  std::map<std::pair<int, int>, double> contingency;
  std::map<int, double> row, col;
  for (std::size_t i = 0; i < n; ++i) {
    contingency[{predicted[i], gold[i]}] += 1.0;
    row[predicted[i]] += 1.0;
    col[gold[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, c] : contingency) index += choose2(c);
  for (const auto& [_, c] : row) sum_rows += choose2(c);
  for (const auto& [_, c] : col) sum_cols += choose2(c);
  const double total = choose2(static_cast<double>(n));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) {
    // Only reachable when both partitions are all-singletons or one block.
    const bool identical = contingency.size() == row.size() && row.size() == col.size();
    return identical ? 1.0 : 0.0;
  }
  return (index - expected) / denom;
}

PRF prf_from_counts(std::size_t predicted, std::size_t true_positives, std::size_t gold_positives) {
  if (gold_positives == 0) throw std::invalid_argument("pairwise P/R/F needs at least one gold-positive pair");
  PRF m;
  m.predicted = predicted;
  m.true_positives = true_positives;
  m.gold_positives = gold_positives;
  m.precision = predicted == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(predicted);
  m.recall = static_cast<double>(true_positives) / static_cast<double>(gold_positives);
  m.f_score = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

PRF pairwise_prf(const std::vector<ScoredPair>& pairs, double threshold) {
  std::size_t predicted = 0, tp = 0, gold = 0;
  for (const auto& p : pairs) {
    const bool pred = p.similarity > threshold;
    predicted += pred;
    gold += p.gold_positive;
    tp += pred && p.gold_positive;
  }
  return prf_from_counts(predicted, tp, gold);
}

const char* breakdown_name(Breakdown b) {
  switch (b) {
    case Breakdown::kAll: return "all";
    case Breakdown::kSingle: return "single";
    case Breakdown::kMulti: return "multi";
  }
  return "?";
}

bool in_breakdown(std::size_t token_count, Breakdown b) {
  switch (b) {
    case Breakdown::kAll: return true;
    case Breakdown::kSingle: return token_count == 1;
    case Breakdown::kMulti: return token_count >= 2;
  }
  return false;
}

const Metrics& EvalReport::at(Breakdown b) const {
  switch (b) {
    case Breakdown::kSingle: return single;
    case Breakdown::kMulti: return multi;
    default: return all;
  }
}

std::vector<ScoredPair> collect_pairs(const ImageEvaluation& image, Breakdown b) {
  std::vector<ScoredPair> out;
  const std::size_t n = image.gold.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_breakdown(image.token_counts[i], b)) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!in_breakdown(image.token_counts[j], b)) continue;
      out.push_back({image.similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                     image.gold[i] == image.gold[j]});
    }
  }
  return out;
}

namespace {

Metrics evaluate_breakdown(const std::vector<ImageEvaluation>& images, double threshold, Breakdown b,
                           const EvalOptions& options) {
  Metrics m;
  double ari_sum = 0.0;
  std::size_t predicted = 0, tp = 0, gold = 0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  std::size_t prf_images = 0;
  for (const auto& img : images) {
    const std::size_t n = img.gold.size();
    if (img.predicted.size() != n || img.token_counts.size() != n) {
      throw std::invalid_argument("evaluation inputs for image " + img.image_id + " disagree in size");
    }
    std::vector<int> pred, gl;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_breakdown(img.token_counts[i], b)) continue;
      pred.push_back(img.predicted[i]);
      gl.push_back(img.gold[i]);
    }
    if (pred.empty()) continue;
    ++m.images;
    m.entities += pred.size();
    ari_sum += adjusted_rand_index(pred, gl);

    std::size_t ip = 0, itp = 0, ig = 0;
    for (const auto& p : collect_pairs(img, b)) {
      const bool is_pred = p.similarity > threshold;
      ip += is_pred;
      itp += is_pred && p.gold_positive;
      ig += p.gold_positive;
      ++m.pairs;
    }
    predicted += ip;
    tp += itp;
    gold += ig;
    if (options.per_image_pairwise && ig > 0) {
      const auto prf = prf_from_counts(ip, itp, ig);
      p_sum += prf.precision;
      r_sum += prf.recall;
      f_sum += prf.f_score;
      ++prf_images;
    }
  }
  m.gold_pairs = gold;
  if (m.images > 0) m.ari = ari_sum / static_cast<double>(m.images);
  if (options.per_image_pairwise) {
    if (prf_images > 0) {
      m.precision = p_sum / static_cast<double>(prf_images);
      m.recall = r_sum / static_cast<double>(prf_images);
      m.f_score = f_sum / static_cast<double>(prf_images);
    }
  } else if (gold > 0) {
    const auto prf = prf_from_counts(predicted, tp, gold);
    m.precision = prf.precision;
    m.recall = prf.recall;
    m.f_score = prf.f_score;
  }
  return m;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"ari", m.ari},           {"precision", m.precision}, {"recall", m.recall},
          {"f_score", m.f_score},   {"images", m.images},       {"entities", m.entities},
          {"pairs", m.pairs},       {"gold_pairs", m.gold_pairs}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.ari = j.at("ari");
  m.precision = j.at("precision");
  m.recall = j.at("recall");
  m.f_score = j.at("f_score");
  m.images = j.at("images");
  m.entities = j.at("entities");
  m.pairs = j.at("pairs");
  m.gold_pairs = j.at("gold_pairs");
  return m;
}

}  // namespace

EvalReport evaluate_split(const std::vector<ImageEvaluation>& images, double threshold, const EvalOptions& options) {
  EvalReport r;
  r.threshold = threshold;
  r.all = evaluate_breakdown(images, threshold, Breakdown::kAll, options);
  r.single = evaluate_breakdown(images, threshold, Breakdown::kSingle, options);
  r.multi = evaluate_breakdown(images, threshold, Breakdown::kMulti, options);
  return r;
}

std::string format_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s | %-23s | %-23s | %-23s | %-23s\n", "Method", "ARI", "Precision",
                "Recall", "F-score");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-24s | %-23s | %-23s | %-23s | %-23s\n", "", "all / single / multi",
                "all / single / multi", "all / single / multi", "all / single / multi");
  out << buf << std::string(24 + 4 * 26, '-') << '\n';
  auto cell = [](double a, double s, double m) {
    char c[64];
    std::snprintf(c, sizeof c, "%6.2f / %6.2f / %6.2f", 100 * a, 100 * s, 100 * m);
    return std::string(c);
  };
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-24s | %s | %s | %s | %s\n", r.method.c_str(),
                  cell(r.all.ari, r.single.ari, r.multi.ari).c_str(),
                  cell(r.all.precision, r.single.precision, r.multi.precision).c_str(),
                  cell(r.all.recall, r.single.recall, r.multi.recall).c_str(),
                  cell(r.all.f_score, r.single.f_score, r.multi.f_score).c_str());
    out << buf;
  }
  return out.str();
}

std::string to_json(const std::vector<EvalReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"method", r.method},
                   {"threshold", r.threshold},
                   {"preference", r.preference},
                   {"all", metrics_json(r.all)},
                   {"single", metrics_json(r.single)},
                   {"multi", metrics_json(r.multi)}});
  }
  return arr.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  std::vector<EvalReport> out;
  for (const auto& j : arr) {
    EvalReport r;
    r.method = j.at("method");
    r.threshold = j.at("threshold");
    r.preference = j.at("preference");
    r.all = metrics_from_json(j.at("all"));
    r.single = metrics_from_json(j.at("single"));
    r.multi = metrics_from_json(j.at("multi"));
    out.push_back(r);
  }
  return out;
}

}  // namespace vgp::eval
