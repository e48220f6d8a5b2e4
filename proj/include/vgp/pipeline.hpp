#pragma once

// End-to-end orchestration: load inputs, compute per-image similarities with
// one method, tune preference and threshold on validation, cluster and
// evaluate the test split.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vgp/align.hpp"
#include "vgp/cca.hpp"
#include "vgp/cluster.hpp"
#include "vgp/corpus.hpp"
#include "vgp/embed.hpp"
#include "vgp/eval.hpp"
#include "vgp/locsim.hpp"
#include "vgp/optimize.hpp"
#include "vgp/simnet.hpp"

namespace vgp::pipeline {

enum class Method { kPL, kTP, kWEA, kFV, kFVCCA, kSNN, kSNNImage, kEnsemble };
const char* method_name(Method m);
Method parse_method(const std::string& s);

/// Entity-vector kinds accepted in configs: WEA, FV, FV_PCA, CCA.
embed::VectorKind parse_vector_kind(const std::string& s);

enum class Split { kTrain, kValidation, kTest };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct PipelineConfig {
  std::filesystem::path corpus, regions, stopwords, word_vectors, feature_maps, localization, region_vectors,
      region_pairs;
  std::filesystem::path train, validation, test;  // one image id per line
  std::filesystem::path output_dir = "vgp_out";

  Method method = Method::kWEA;
  embed::VectorKind vector_kind = embed::VectorKind::kWEA;  // input of the SNN scorers
  std::uint64_t seed = 0;
  int jobs = 1;

  cluster::APConfig ap;
  optimize::TuneConfig tune;  // bounds come from validation similarities
  // Preference search range: [q(lower_quantile) - range, q(upper_quantile)]
  // over off-diagonal validation similarities.
  double lower_quantile = 0.01;
  double upper_quantile = 1.0;
  std::optional<double> preference;  // skips preference tuning
  std::optional<double> threshold;   // skips threshold tuning

  int fv_components = embed::kPaperPreset.components;
  int pca_dimension = embed::kPaperPreset.pca_dimension;
  int cca_dimension = 128;
  cca::CCAOptions cca;
  align::AlignOptions align;
  std::size_t candidates = locsim::kDefaultCandidates;

  simnet::TrainConfig snn;
  int snn_hidden = 512;
  int snn_fused = 512;
  int snn_mlp_hidden = 128;
  std::filesystem::path checkpoint_snn, checkpoint_snn_image;

  eval::EvalOptions eval;

  /// Applies one `key = value` setting; relative paths resolve against `base`.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base = {});
  /// `key=value` override from the command line (paths relative to the cwd).
  void apply_override(const std::string& assignment);
};

/// `key = value` lines; `#` starts a comment. Paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& file);

/// Similarity matrix over one image's evaluable entities.
struct ImageSimilarity {
  std::string image_id;
  std::vector<std::string> keys;
  Eigen::MatrixXd values;  // symmetric; diagonal unused
};

struct TuningOutcome {
  double preference = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  optimize::TuneResult search;  // empty when the preference was fixed
  optimize::ThresholdResult threshold;
};

/// Loaded inputs plus lazily built features for one configuration.
class Workspace {
 public:
  /// Validates the configuration and loads the corpus; throws before any
  /// heavy computation when an input required by the method is missing.
  explicit Workspace(PipelineConfig cfg);
  ~Workspace();
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const PipelineConfig& config() const { return cfg_; }
  const std::vector<corpus::ImageRecord>& images() const { return images_; }
  std::vector<const corpus::ImageRecord*> split(Split s) const;
  const corpus::ImageRecord& image(const std::string& image_id) const;

  /// Vectors for every evaluable entity, keyed by (image_id, entity_key).
  const std::map<locsim::EntityRef, Eigen::VectorXd>& entity_vectors(embed::VectorKind kind);
  const align::AlignedCorpus& aligned();
  const locsim::LocalizationTable& localization();
  const simnet::FeatureMap& feature_map(const std::string& image_id);

  /// Loads the configured checkpoint, or trains on the training split and
  /// saves under `<output_dir>/checkpoints/<mode>`.
  const simnet::FusionParams& scorer(simnet::ScorerMode mode);

  std::vector<ImageSimilarity> similarities(Split s);
  ImageSimilarity similarity(const corpus::ImageRecord& image);

  TuningOutcome tune(const std::vector<ImageSimilarity>& validation);
  std::vector<cluster::Clustering> cluster_all(const std::vector<ImageSimilarity>& sims, double preference);
  std::vector<eval::ImageEvaluation> evaluations(const std::vector<ImageSimilarity>& sims,
                                                 const std::vector<cluster::Clustering>& clusterings);

 private:
  struct Cache;
  PipelineConfig cfg_;
  std::vector<corpus::ImageRecord> images_;
  std::map<std::string, std::size_t> image_index_;
  std::map<Split, std::vector<std::string>> splits_;
  std::unique_ptr<Cache> cache_;
};

/// Mean ARI over images that have at least one entity.
double mean_ari(const Workspace& ws, const std::vector<ImageSimilarity>& sims,
                const std::vector<cluster::Clustering>& clusterings);

/// Runs every stage and writes similarities.tsv, clusters.tsv, tuning.tsv,
/// report.json and report.txt under the output directory.
eval::EvalReport run_pipeline(const PipelineConfig& cfg);

void write_similarities(const std::filesystem::path& path, const std::vector<ImageSimilarity>& sims);
void write_clusters(const std::filesystem::path& path, const std::vector<ImageSimilarity>& sims,
                    const std::vector<cluster::Clustering>& clusterings);
void write_tuning_log(const std::filesystem::path& path, const optimize::TuneResult& search);

struct AttentionDump {
  std::string entity_key;
  Eigen::MatrixXd grid;
};

/// Attention grids of two entities of one image under an SNN_IMAGE
/// checkpoint; written as `<entity_key>\t<row>\t<col>\t<weight>` lines.
std::vector<AttentionDump> emit_attention(Workspace& ws, const std::string& image_id,
                                          const std::string& key_i, const std::string& key_j,
                                          const std::filesystem::path& checkpoint,
                                          const std::filesystem::path& out);

}  // namespace vgp::pipeline
