#pragma once

// Entity feature vectors: word-embedding average, diagonal-Gaussian Fisher
// vectors, and PCA reduction.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "vgp/corpus.hpp"

namespace vgp::embed {

enum class VectorKind { kWEA, kFV, kFVPCA, kCCA };
const char* kind_name(VectorKind k);

struct EntityVector {
  Eigen::VectorXd values;
  VectorKind kind = VectorKind::kWEA;
  bool oov = false;  // no token of the entity was found (values are zero)
};

class WordVectorTable {
 public:
  explicit WordVectorTable(int dimension = 0) : dimension_(dimension) {}

  int dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }

  /// Inserts a (case-folded) token; returns false if it already exists.
  bool insert(const std::string& token, const Eigen::VectorXd& v);
  /// Case-folded lookup.
  std::optional<Eigen::VectorXd> lookup(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  int dimension_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> tokens_;
  std::vector<Eigen::VectorXd> vectors_;
};

/// Text format `<token> <f1> ... <fD>`; D is fixed by the first data line.
/// Duplicate tokens keep the first occurrence.
WordVectorTable load_word_vectors(std::istream& in);

EntityVector embed_average(const corpus::Entity& e, const WordVectorTable& table);

/// Word vectors of the entity's normalized tokens found in the table (rows).
Eigen::MatrixXd token_matrix(const corpus::Entity& e, const WordVectorTable& table);

struct MixtureModel {
  Eigen::VectorXd weights;  // K
  Eigen::MatrixXd means;    // K x D
  Eigen::MatrixXd scales;   // K x D standard deviations

  int components() const { return static_cast<int>(weights.size()); }
  int dimension() const { return static_cast<int>(means.cols()); }
};

struct MixtureFit {
  MixtureModel model;
  std::vector<double> log_likelihood;  // at initialization, then after each EM step
  int floored_scales = 0;
};

constexpr double kScaleFloor = 1e-4;

/// EM for a diagonal Gaussian mixture, seeded k-means++ style. Stops when the
/// relative log-likelihood gain drops below 1e-6 or after `max_iterations`.
MixtureFit fit_mixture(const Eigen::MatrixXd& samples, int components, std::uint64_t seed,
                       int max_iterations = 200);

/// Average log-likelihood per sample.
double mixture_log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& samples);

/// Fisher vector of a set of vectors (rows): first- then second-order
/// statistics per component, followed by signed square root and L2
/// normalization. Length 2*K*D.
Eigen::VectorXd encode_fisher(const Eigen::MatrixXd& token_vectors, const MixtureModel& model);

struct PCAProjection {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // out_dim x D, orthonormal rows
  Eigen::VectorXd explained_variance;  // out_dim, descending
  double total_variance = 0.0;

  int output_dimension() const { return static_cast<int>(components.rows()); }
};

PCAProjection fit_pca(const Eigen::MatrixXd& samples, int out_dim);
Eigen::VectorXd apply_pca(const Eigen::VectorXd& v, const PCAProjection& proj);

/// Cosine similarity; 0 when either vector is zero. Throws on size mismatch.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct EmbedPreset {
  int word_dimension;
  int components;
  int pca_dimension;
};
inline constexpr EmbedPreset kPaperPreset{300, 30, 4096};
inline constexpr EmbedPreset kDeskPreset{16, 4, 32};

}  // namespace vgp::embed
