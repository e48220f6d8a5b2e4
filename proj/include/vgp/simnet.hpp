#pragma once

// Supervised pair scorer. Two modes share one MLP head:
//   SNN        logit = MLP([t_i, t_j])
//   SNN_IMAGE  logit = MLP([y_i, y_j]) with y from the attention fusion net
// Forward and backward passes are written out by hand.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vgp::simnet {

enum class ScorerMode { kSNN, kSNNImage };
const char* mode_name(ScorerMode m);
ScorerMode parse_mode(const std::string& s);

/// N x d_v grid features of one image; N must be a perfect square.
struct FeatureMap {
  std::string image_id;
  Eigen::MatrixXd values;

  FeatureMap() = default;
  FeatureMap(std::string id, Eigen::MatrixXd v);
  int grid() const;
};

struct Dimensions {
  int text = 0;      // d_t
  int visual = 0;    // d_v
  int hidden = 512;  // d_h, width of the W1/W2 projections and of w
  int fused = 512;   // d_y, rows of U
  int mlp_hidden = 128;

  int mlp_input(ScorerMode mode) const { return 2 * (mode == ScorerMode::kSNN ? text : fused); }
  bool operator==(const Dimensions&) const = default;
};

/// All learnable tensors. Vectors are stored as single-column matrices and the
/// output layer as a 1 x mlp_hidden row. SNN mode leaves the fusion tensors empty.
struct FusionParams {
  ScorerMode mode = ScorerMode::kSNN;
  Dimensions dims;
  Eigen::MatrixXd W1, b1, W2, b2, w, U, d;  // fusion net
  Eigen::MatrixXd M1, c1, M2, c2;           // MLP head

  template <class F>
  void for_each_tensor(F&& f) {
    for_each_impl(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for_each_impl(*this, f);
  }

  /// Same shapes, all zeros.
  FusionParams zeros_like() const;
  double squared_norm() const;
  bool operator==(const FusionParams& other) const;

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& f) {
    if (self.mode == ScorerMode::kSNNImage) {
      f("W1", self.W1); f("b1", self.b1); f("W2", self.W2); f("b2", self.b2);
      f("w", self.w); f("U", self.U); f("d", self.d);
    }
    f("M1", self.M1); f("c1", self.c1); f("M2", self.M2); f("c2", self.c2);
  }
};

FusionParams init_params(ScorerMode mode, const Dimensions& dims, std::uint64_t seed);

/// Rounds every tensor to float precision (what checkpoints store).
void round_to_float(FusionParams& p);

inline constexpr double kNormEpsilon = 1e-12;

/// Image-side part of the fusion net; depends only on (V, W1, b1).
struct VisualProjection {
  Eigen::MatrixXd projected;   // N x d_h, W1 v_n + b1
  Eigen::VectorXd norms;       // ||W1 v_n + b1||
  Eigen::MatrixXd normalized;  // N x d_h, rows are v~_n
};

VisualProjection project_visual(const FeatureMap& v, const FusionParams& p);

struct FusionActivations {
  Eigen::VectorXd text_projected;  // W2 t + b2
  double text_norm = 0.0;
  Eigen::VectorXd text_hidden;     // t~
  Eigen::MatrixXd pre_relu;        // N x d_h, v~_n + t~
  Eigen::MatrixXd hidden;          // h_n
  Eigen::VectorXd energies;        // e_n
  Eigen::VectorXd attention;       // a_n
  Eigen::VectorXd context;         // c = sum a_n v_n
  double context_norm = 0.0;
  Eigen::VectorXd context_hidden;  // norm(c)
  Eigen::VectorXd fused;           // y
};

FusionActivations forward_fusion(const Eigen::VectorXd& t, const FeatureMap& v, const VisualProjection& visual,
                                 const FusionParams& p);
FusionActivations forward_fusion(const Eigen::VectorXd& t, const FeatureMap& v, const FusionParams& p);

/// MLP logit of the ordered pair of (already fused, or raw in SNN mode) vectors.
double mlp_logit(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const FusionParams& p);

/// sigmoid of the mean logit over both argument orders; exactly symmetric.
/// `image` may be null in SNN mode and is required in SNN_IMAGE mode.
double score_pair(const Eigen::VectorXd& t_i, const Eigen::VectorXd& t_j, const FeatureMap* image,
                  const FusionParams& p);

double ensemble_score(double snn, double snn_image);

double sigmoid(double x);
/// Numerically stable sigmoid cross-entropy of a logit against a 0/1 label.
double sigmoid_cross_entropy(double logit, double label);

struct LabeledPair {
  std::size_t first = 0;  // entity indices into PairDataset
  std::size_t second = 0;
  bool positive = false;
};

struct PairDataset {
  std::vector<Eigen::VectorXd> entity_vectors;
  std::vector<std::size_t> entity_image;  // index into feature_maps
  std::vector<FeatureMap> feature_maps;   // may be empty for SNN
  std::vector<LabeledPair> positives;
  std::vector<LabeledPair> negatives;
};

struct BatchStats {
  double loss = 0.0;                      // mean cross-entropy + weight decay term
  double max_attention_deviation = 0.0;   // max |sum_n a_n - 1|
};

/// Loss over a batch; accumulates gradients into `grad` when non-null
/// (grad must be zeros_like(p)).
BatchStats batch_loss(const FusionParams& p, const PairDataset& data, std::span<const LabeledPair> batch,
                      double weight_decay, FusionParams* grad);

struct TrainConfig {
  int batch_size = 300;
  double positive_fraction = 0.15;
  double learning_rate = 0.01;
  double decay_per_epoch = 0.5;
  double weight_decay = 1e-4;
  int epochs = 5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  int positives_per_batch() const;
  int negatives_per_batch() const { return batch_size - positives_per_batch(); }
  double learning_rate_at(int epoch) const;
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  int batches = 0;
  double max_attention_deviation = 0.0;
};

struct TrainResult {
  FusionParams params;
  std::vector<EpochLog> log;
};

/// Adam with an L2 weight-decay loss term; each batch holds
/// positives_per_batch() positives and the rest sampled negatives. An epoch
/// has max(ceil(P / positives), ceil(N / negatives)) batches. Returned parameters are rounded to float precision.
TrainResult train(const PairDataset& data, ScorerMode mode, const Dimensions& dims, const TrainConfig& cfg);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::vector<std::pair<std::string, double>> per_tensor;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries where both gradients vanish
};

/// Analytic gradients of the full batch loss against central differences,
/// relative error |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const FusionParams& p, const PairDataset& data,
                                   std::span<const LabeledPair> batch, double epsilon, double weight_decay);

/// sqrt(N) x sqrt(N) attention grid of one entity over its image.
Eigen::MatrixXd attention_grid(const Eigen::VectorXd& t, const FeatureMap& v, const FusionParams& p);

struct CheckpointInfo {
  TrainConfig config;
  std::vector<EpochLog> log;
};

void save_checkpoint(const std::filesystem::path& dir, const FusionParams& p, const CheckpointInfo& info);
FusionParams load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

}  // namespace vgp::simnet
