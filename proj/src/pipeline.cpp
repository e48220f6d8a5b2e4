#include "vgp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vgp/tensor_io.hpp"
#include "vgp/text.hpp"

namespace vgp::pipeline {

namespace fs = std::filesystem;

const char* method_name(Method m) {
  switch (m) {
    case Method::kPL: return "PL";
    case Method::kTP: return "TP";
    case Method::kWEA: return "WEA";
    case Method::kFV: return "FV";
    case Method::kFVCCA: return "FV_CCA";
    case Method::kSNN: return "SNN";
    case Method::kSNNImage: return "SNN_IMAGE";
    case Method::kEnsemble: return "ENSEMBLE";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::kPL, Method::kTP, Method::kWEA, Method::kFV, Method::kFVCCA, Method::kSNN,
                   Method::kSNNImage, Method::kEnsemble}) {
    if (s == method_name(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + s + "'");
}

embed::VectorKind parse_vector_kind(const std::string& s) {
  if (s == "WEA") return embed::VectorKind::kWEA;
  if (s == "FV") return embed::VectorKind::kFV;
  if (s == "FV_PCA") return embed::VectorKind::kFVPCA;
  if (s == "CCA") return embed::VectorKind::kCCA;
  throw std::invalid_argument("unknown entity-vector kind '" + s + "'");
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "'");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw std::invalid_argument("config " + key + ": expected a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  if (!parse_long(v, out)) throw std::invalid_argument("config " + key + ": expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(to_long(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = to_lower(v);
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw std::invalid_argument("config " + key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value, const fs::path& base) {
  auto path = [&]() { return value.empty() ? fs::path{} : (base.empty() ? fs::path(value) : base / value); };
  if (key == "corpus") corpus = path();
  else if (key == "regions") regions = path();
  else if (key == "stopwords") stopwords = path();
  else if (key == "word_vectors") word_vectors = path();
  else if (key == "feature_maps") feature_maps = path();
  else if (key == "localization") localization = path();
  else if (key == "region_vectors") region_vectors = path();
  else if (key == "region_pairs") region_pairs = path();
  else if (key == "train") train = path();
  else if (key == "val") validation = path();
  else if (key == "test") test = path();
  else if (key == "output_dir") output_dir = path();
  else if (key == "checkpoint_snn") checkpoint_snn = path();
  else if (key == "checkpoint_snn_image") checkpoint_snn_image = path();
  else if (key == "method") method = parse_method(value);
  else if (key == "vector_kind") vector_kind = parse_vector_kind(value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(key, value));
  else if (key == "jobs") jobs = to_int(key, value);
  else if (key == "preference") preference = to_double(key, value);
  else if (key == "threshold") threshold = to_double(key, value);
  else if (key == "ap.damping") ap.damping = to_double(key, value);
  else if (key == "ap.max_iterations") ap.max_iterations = to_int(key, value);
  else if (key == "ap.convergence_window") ap.convergence_window = to_int(key, value);
  else if (key == "ap.tie_break") ap.tie_break = to_double(key, value);
  else if (key == "tune.budget") tune.budget = to_int(key, value);
  else if (key == "tune.initial_points") tune.initial_points = to_int(key, value);
  else if (key == "tune.grid_points") tune.grid_points = to_int(key, value);
  else if (key == "tune.lower_quantile") lower_quantile = to_double(key, value);
  else if (key == "tune.upper_quantile") upper_quantile = to_double(key, value);
  else if (key == "tune.noise_variance") tune.noise_variance = to_double(key, value);
  else if (key == "fv.components") fv_components = to_int(key, value);
  else if (key == "pca.dimension") pca_dimension = to_int(key, value);
  else if (key == "cca.dimension") cca_dimension = to_int(key, value);
  else if (key == "cca.eta") cca.eta = to_double(key, value);
  else if (key == "cca.power") cca.power = to_double(key, value);
  else if (key == "ibm1.iterations") align.ibm1.iterations = to_int(key, value);
  else if (key == "ibm1.null_prob") align.ibm1.null_prob = to_double(key, value);
  else if (key == "gdfa.final_and") {
    if (value == "both") align.final_and = align::FinalAnd::kBothDirections;
    else if (value == "either") align.final_and = align::FinalAnd::kEitherDirection;
    else throw std::invalid_argument("config gdfa.final_and: expected both or either");
  } else if (key == "locsim.candidates") candidates = static_cast<std::size_t>(to_long(key, value));
  else if (key == "snn.batch_size") snn.batch_size = to_int(key, value);
  else if (key == "snn.positive_fraction") snn.positive_fraction = to_double(key, value);
  else if (key == "snn.learning_rate") snn.learning_rate = to_double(key, value);
  else if (key == "snn.decay") snn.decay_per_epoch = to_double(key, value);
  else if (key == "snn.weight_decay") snn.weight_decay = to_double(key, value);
  else if (key == "snn.epochs") snn.epochs = to_int(key, value);
  else if (key == "snn.hidden") snn_hidden = to_int(key, value);
  else if (key == "snn.fused") snn_fused = to_int(key, value);
  else if (key == "snn.mlp_hidden") snn_mlp_hidden = to_int(key, value);
  else if (key == "eval.per_image_pairwise") eval.per_image_pairwise = to_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must look like key=value: " + assignment);
  set(std::string(trim(std::string_view(assignment).substr(0, eq))),
      std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  PipelineConfig cfg;
  const fs::path base = file.parent_path();
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(number, "expected key = value");
    try {
      cfg.set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))), base);
    } catch (const std::invalid_argument& e) {
      throw ParseError(number, e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Workspace

struct Workspace::Cache {
  std::optional<embed::WordVectorTable> words;
  std::map<embed::VectorKind, std::map<locsim::EntityRef, Eigen::VectorXd>> vectors;
  std::optional<align::AlignedCorpus> aligned;
  std::optional<locsim::LocalizationTable> localization;
  std::optional<std::map<std::string, fs::path>> map_files;
  std::map<std::string, simnet::FeatureMap> maps;
  std::map<simnet::ScorerMode, simnet::FusionParams> scorers;
};

namespace {

std::ifstream open_input(const fs::path& p, const char* what) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error(std::string("cannot open ") + what + " " + p.string());
  return in;
}

std::vector<std::string> read_ids(const fs::path& p, const char* what) {
  auto in = open_input(p, what);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t.front() != '#') ids.emplace_back(t);
  }
  return ids;
}

void require(const fs::path& p, const char* key, Method m) {
  if (p.empty()) {
    throw std::invalid_argument(std::string("method ") + method_name(m) + " requires '" + key + "' in the config");
  }
  if (!fs::exists(p)) throw std::invalid_argument(std::string(key) + " not found: " + p.string());
}

bool needs_vectors(Method m) {
  return m == Method::kWEA || m == Method::kFV || m == Method::kFVCCA || m == Method::kSNN ||
         m == Method::kSNNImage;
}

}  // namespace

Workspace::Workspace(PipelineConfig cfg) : cfg_(std::move(cfg)), cache_(std::make_unique<Cache>()) {
  const Method m = cfg_.method;
  require(cfg_.corpus, "corpus", m);
  require(cfg_.train, "train", m);
  require(cfg_.validation, "val", m);
  require(cfg_.test, "test", m);
  if (needs_vectors(m)) require(cfg_.word_vectors, "word_vectors", m);
  if (m == Method::kPL) require(cfg_.localization, "localization", m);
  const bool snn_cca = (m == Method::kSNN || m == Method::kSNNImage) && cfg_.vector_kind == embed::VectorKind::kCCA;
  if (m == Method::kFVCCA || snn_cca) {
    require(cfg_.region_vectors, "region_vectors", m);
    require(cfg_.region_pairs, "region_pairs", m);
  }
  if (m == Method::kSNNImage || m == Method::kEnsemble) require(cfg_.feature_maps, "feature_maps", m);
  if (m == Method::kEnsemble) {
    for (const auto& [path, name] : {std::pair{cfg_.checkpoint_snn, "checkpoint_snn"},
                                     std::pair{cfg_.checkpoint_snn_image, "checkpoint_snn_image"}}) {
      if (path.empty() || !fs::exists(path / "manifest.json")) {
        throw std::invalid_argument(std::string("checkpoint required: ENSEMBLE needs a trained ") + name);
      }
    }
  }
  if (!cfg_.regions.empty() && !fs::exists(cfg_.regions)) {
    throw std::invalid_argument("regions not found: " + cfg_.regions.string());
  }
  if (!cfg_.stopwords.empty() && !fs::exists(cfg_.stopwords)) {
    throw std::invalid_argument("stopwords not found: " + cfg_.stopwords.string());
  }
  if (cfg_.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (!(0.0 <= cfg_.lower_quantile && cfg_.lower_quantile <= cfg_.upper_quantile && cfg_.upper_quantile <= 1.0)) {
    throw std::invalid_argument("preference quantiles must satisfy 0 <= lower <= upper <= 1");
  }

  auto corpus_in = open_input(cfg_.corpus, "corpus");
  auto parsed = corpus::parse_annotations(corpus_in);
  if (!cfg_.regions.empty()) {
    auto in = open_input(cfg_.regions, "regions");
    corpus::apply_regions(parsed.entities, corpus::load_regions(in));
  }
  corpus::StopWordList stops = corpus::StopWordList::bundled();
  if (!cfg_.stopwords.empty()) {
    auto in = open_input(cfg_.stopwords, "stopwords");
    stops = corpus::StopWordList::load(in);
  }
  images_ = corpus::prepare_images(parsed, stops);
  for (std::size_t i = 0; i < images_.size(); ++i) image_index_[images_[i].image_id] = i;

  splits_[Split::kTrain] = read_ids(cfg_.train, "train split");
  splits_[Split::kValidation] = read_ids(cfg_.validation, "val split");
  splits_[Split::kTest] = read_ids(cfg_.test, "test split");
  std::set<std::string> seen;
  for (const auto& [s, ids] : splits_) {
    for (const auto& id : ids) {
      if (!image_index_.count(id)) {
        throw std::invalid_argument(std::string(split_name(s)) + " split names unknown image " + id);
      }
      if (!seen.insert(id).second) throw std::invalid_argument("image " + id + " appears in more than one split");
    }
  }
}

Workspace::~Workspace() = default;

std::vector<const corpus::ImageRecord*> Workspace::split(Split s) const {
  std::vector<const corpus::ImageRecord*> out;
  for (const auto& id : splits_.at(s)) out.push_back(&images_[image_index_.at(id)]);
  return out;
}

const corpus::ImageRecord& Workspace::image(const std::string& image_id) const {
  auto it = image_index_.find(image_id);
  if (it == image_index_.end()) throw std::invalid_argument("unknown image " + image_id);
  return images_[it->second];
}

const std::map<locsim::EntityRef, Eigen::VectorXd>& Workspace::entity_vectors(embed::VectorKind kind) {
  if (auto it = cache_->vectors.find(kind); it != cache_->vectors.end()) return it->second;
  if (!cache_->words) {
    require(cfg_.word_vectors, "word_vectors", cfg_.method);
    auto in = open_input(cfg_.word_vectors, "word vectors");
    cache_->words = embed::load_word_vectors(in);
  }
  const auto& words = *cache_->words;
  std::map<locsim::EntityRef, Eigen::VectorXd> out;
  const auto train = split(Split::kTrain);

  if (kind == embed::VectorKind::kWEA) {
    for (const auto& img : images_)
      for (const auto& e : img.entities) out[{img.image_id, e.key()}] = embed_average(e, words).values;
  } else if (kind == embed::VectorKind::kFV) {
    std::vector<Eigen::VectorXd> rows;
    for (const auto* img : train) {
      for (const auto& e : img->entities) {
        const auto tokens = embed::token_matrix(e, words);
        for (Eigen::Index r = 0; r < tokens.rows(); ++r) rows.push_back(tokens.row(r).transpose());
      }
    }
    if (rows.size() < static_cast<std::size_t>(cfg_.fv_components)) {
      throw std::runtime_error("too few training tokens to fit the Fisher-vector mixture");
    }
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(rows.size()), words.dimension());
    for (std::size_t r = 0; r < rows.size(); ++r) samples.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    const auto fit = embed::fit_mixture(samples, cfg_.fv_components, cfg_.seed);
    for (const auto& img : images_)
      for (const auto& e : img.entities)
        out[{img.image_id, e.key()}] = embed::encode_fisher(embed::token_matrix(e, words), fit.model);
  } else if (kind == embed::VectorKind::kFVPCA) {
    const auto fv = entity_vectors(embed::VectorKind::kFV);
    std::vector<const Eigen::VectorXd*> rows;
    for (const auto* img : train)
      for (const auto& e : img->entities) rows.push_back(&fv.at({img->image_id, e.key()}));
    if (rows.empty()) throw std::runtime_error("training split has no evaluable entities for PCA");
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(rows.size()), rows.front()->size());
    for (std::size_t r = 0; r < rows.size(); ++r) samples.row(static_cast<Eigen::Index>(r)) = rows[r]->transpose();
    int dim = cfg_.pca_dimension;
    const int cap = static_cast<int>(std::min(samples.rows(), samples.cols()));
    if (dim > cap) {
      warn("PCA dimension " + std::to_string(dim) + " reduced to " + std::to_string(cap));
      dim = cap;
    }
    const auto pca = embed::fit_pca(samples, dim);
    for (const auto& [ref, v] : fv) out[ref] = embed::apply_pca(v, pca);
  } else {
    const auto base = entity_vectors(embed::VectorKind::kFVPCA);
    const Eigen::MatrixXd regions = to_matrix(load_tensor(cfg_.region_vectors));
    auto in = open_input(cfg_.region_pairs, "region pairs");
    std::map<locsim::EntityRef, Eigen::Index> row_of;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (trim(line).empty()) continue;
      const auto f = vgp::split(line, '\t');
      long row = 0;
      if (f.size() != 3 || !parse_long(f[2], row) || row < 0 || row >= regions.rows()) {
        throw ParseError(number, "expected <image_id>\\t<entity_key>\\t<row> with a valid row");
      }
      row_of[{std::string(f[0]), std::string(f[1])}] = row;
    }
    std::vector<std::pair<const Eigen::VectorXd*, Eigen::Index>> paired;
    for (const auto* img : train) {
      for (const auto& e : img->entities) {
        auto it = row_of.find({img->image_id, e.key()});
        if (it != row_of.end()) paired.emplace_back(&base.at({img->image_id, e.key()}), it->second);
      }
    }
    if (paired.empty()) throw std::runtime_error("no training entity has a paired region vector");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(paired.size()), paired.front().first->size());
    Eigen::MatrixXd y(x.rows(), regions.cols());
    for (std::size_t r = 0; r < paired.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = paired[r].first->transpose();
      y.row(static_cast<Eigen::Index>(r)) = regions.row(paired[r].second);
    }
    int dim = std::min({cfg_.cca_dimension, static_cast<int>(x.cols()), static_cast<int>(y.cols())});
    if (dim >= x.rows()) dim = static_cast<int>(x.rows()) - 1;
    if (dim != cfg_.cca_dimension) warn("CCA dimension reduced to " + std::to_string(dim));
    const auto model = cca::fit_cca(x, y, dim, cfg_.cca);
    for (const auto& [ref, v] : base) out[ref] = cca::project_entity(v, model).values;
  }
  return cache_->vectors.emplace(kind, std::move(out)).first->second;
}

const align::AlignedCorpus& Workspace::aligned() {
  if (!cache_->aligned) cache_->aligned = align::align_corpus(images_, cfg_.align);
  return *cache_->aligned;
}

const locsim::LocalizationTable& Workspace::localization() {
  if (!cache_->localization) {
    require(cfg_.localization, "localization", cfg_.method);
    std::set<locsim::EntityRef> known;
    for (const auto& img : images_)
      for (const auto& e : img.all_entities) known.insert({img.image_id, e.key()});
    auto in = open_input(cfg_.localization, "localization scores");
    cache_->localization = locsim::load_localization_scores(in, cfg_.candidates, &known);
  }
  return *cache_->localization;
}

const simnet::FeatureMap& Workspace::feature_map(const std::string& image_id) {
  if (auto it = cache_->maps.find(image_id); it != cache_->maps.end()) return it->second;
  if (!cache_->map_files) {
    require(cfg_.feature_maps, "feature_maps", cfg_.method);
    auto in = open_input(cfg_.feature_maps, "feature-map index");
    std::map<std::string, fs::path> files;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (trim(line).empty()) continue;
      const auto f = vgp::split(line, '\t');
      if (f.size() != 2) throw ParseError(number, "expected <image_id>\\t<file>");
      files[std::string(f[0])] = cfg_.feature_maps.parent_path() / std::string(f[1]);
    }
    cache_->map_files = std::move(files);
  }
  auto it = cache_->map_files->find(image_id);
  if (it == cache_->map_files->end()) throw std::runtime_error("no feature map for image " + image_id);
  return cache_->maps.emplace(image_id, simnet::FeatureMap(image_id, to_matrix(load_tensor(it->second))))
      .first->second;
}

const simnet::FusionParams& Workspace::scorer(simnet::ScorerMode mode) {
  if (auto it = cache_->scorers.find(mode); it != cache_->scorers.end()) return it->second;
  const fs::path configured = mode == simnet::ScorerMode::kSNN ? cfg_.checkpoint_snn : cfg_.checkpoint_snn_image;
  if (!configured.empty() && fs::exists(configured / "manifest.json")) {
    auto p = simnet::load_checkpoint(configured);
    if (p.mode != mode) throw std::runtime_error("checkpoint " + configured.string() + " has the wrong mode");
    return cache_->scorers.emplace(mode, std::move(p)).first->second;
  }
  if (cfg_.method == Method::kEnsemble) throw std::runtime_error("checkpoint required for ENSEMBLE");

  const auto& vectors = entity_vectors(cfg_.vector_kind);
  simnet::PairDataset data;
  std::map<std::string, std::size_t> map_slot;
  for (const auto* img : split(Split::kTrain)) {
    const std::size_t first = data.entity_vectors.size();
    const auto& es = img->entities;
    if (es.size() < 2) continue;
    std::size_t slot = 0;
    if (mode == simnet::ScorerMode::kSNNImage) {
      slot = data.feature_maps.size();
      data.feature_maps.push_back(feature_map(img->image_id));
    }
    for (const auto& e : es) {
      data.entity_vectors.push_back(vectors.at({img->image_id, e.key()}));
      data.entity_image.push_back(slot);
    }
    const auto gold = img->gold.labels(es.size());
    for (std::size_t i = 0; i < es.size(); ++i) {
      for (std::size_t j = i + 1; j < es.size(); ++j) {
        simnet::LabeledPair lp{first + i, first + j, gold[i] == gold[j]};
        (lp.positive ? data.positives : data.negatives).push_back(lp);
      }
    }
  }
  simnet::Dimensions dims;
  dims.text = static_cast<int>(vectors.begin()->second.size());
  dims.visual = data.feature_maps.empty() ? 0 : static_cast<int>(data.feature_maps.front().values.cols());
  dims.hidden = cfg_.snn_hidden;
  dims.fused = cfg_.snn_fused;
  dims.mlp_hidden = cfg_.snn_mlp_hidden;
  simnet::TrainConfig tc = cfg_.snn;
  tc.seed = cfg_.seed + (mode == simnet::ScorerMode::kSNN ? 0 : 1);
  auto result = simnet::train(data, mode, dims, tc);
  simnet::save_checkpoint(cfg_.output_dir / "checkpoints" / simnet::mode_name(mode), result.params,
                          {tc, result.log});
  return cache_->scorers.emplace(mode, std::move(result.params)).first->second;
}

namespace {

// Same arithmetic as simnet::score_pair, with the fused vectors computed once per entity.
double symmetric_score(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, const simnet::FusionParams& p) {
  return simnet::sigmoid(0.5 * (simnet::mlp_logit(xi, xj, p) + simnet::mlp_logit(xj, xi, p)));
}

Eigen::MatrixXd snn_matrix(const std::vector<Eigen::VectorXd>& t, const simnet::FeatureMap* fmap,
                           const simnet::FusionParams& p) {
  std::vector<Eigen::VectorXd> x = t;
  if (p.mode == simnet::ScorerMode::kSNNImage) {
    const auto visual = simnet::project_visual(*fmap, p);
    for (auto& v : x) v = simnet::forward_fusion(v, *fmap, visual, p).fused;
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s(i, j) = s(j, i) = symmetric_score(x[i], x[j], p);
  return s;
}

}  // namespace

ImageSimilarity Workspace::similarity(const corpus::ImageRecord& image) {
  ImageSimilarity out;
  out.image_id = image.image_id;
  const auto& es = image.entities;
  const auto n = static_cast<Eigen::Index>(es.size());
  for (const auto& e : es) out.keys.push_back(e.key());
  out.values = Eigen::MatrixXd::Zero(n, n);
  auto fill = [&](const std::function<double(std::size_t, std::size_t)>& f) {
    out.values = cluster::build_similarity_matrix(es.size(), f, 0.0).values;
    out.values.diagonal().setZero();
  };
  auto vectors_of = [&](embed::VectorKind kind) {
    const auto& table = entity_vectors(kind);
    std::vector<Eigen::VectorXd> v;
    for (const auto& e : es) v.push_back(table.at({image.image_id, e.key()}));
    return v;
  };

  switch (cfg_.method) {
    case Method::kPL: {
      const auto& table = localization();
      fill([&](std::size_t i, std::size_t j) {
        return locsim::localization_similarity({image.image_id, out.keys[i]}, {image.image_id, out.keys[j]}, table);
      });
      break;
    }
    case Method::kTP: {
      const auto& table = aligned().table;
      fill([&](std::size_t i, std::size_t j) { return align::translation_similarity(es[i].form(), es[j].form(), table); });
      break;
    }
    case Method::kWEA:
    case Method::kFV:
    case Method::kFVCCA: {
      const auto kind = cfg_.method == Method::kWEA  ? embed::VectorKind::kWEA
                        : cfg_.method == Method::kFV ? embed::VectorKind::kFVPCA
                                                     : embed::VectorKind::kCCA;
      const auto v = vectors_of(kind);
      fill([&](std::size_t i, std::size_t j) { return embed::cosine_similarity(v[i], v[j]); });
      break;
    }
    case Method::kSNN:
      out.values = snn_matrix(vectors_of(cfg_.vector_kind), nullptr, scorer(simnet::ScorerMode::kSNN));
      break;
    case Method::kSNNImage:
      out.values = snn_matrix(vectors_of(cfg_.vector_kind), &feature_map(image.image_id),
                              scorer(simnet::ScorerMode::kSNNImage));
      break;
    case Method::kEnsemble: {
      const auto v = vectors_of(cfg_.vector_kind);
      const auto a = snn_matrix(v, nullptr, scorer(simnet::ScorerMode::kSNN));
      const auto b = snn_matrix(v, &feature_map(image.image_id), scorer(simnet::ScorerMode::kSNNImage));
      out.values = a.binaryExpr(b, [](double x, double y) { return simnet::ensemble_score(x, y); });
      break;
    }
  }
  return out;
}

std::vector<ImageSimilarity> Workspace::similarities(Split s) {
  const auto records = split(s);
  // Shared lazily-built state is populated up front so the workers only read.
  if (!records.empty()) similarity(*records.front());
  for (const auto* r : records) {
    if (cfg_.method == Method::kSNNImage || cfg_.method == Method::kEnsemble) feature_map(r->image_id);
  }
  std::vector<ImageSimilarity> out(records.size());
  parallel_for(records.size(), cfg_.jobs, [&](std::size_t i) { out[i] = similarity(*records[i]); });
  return out;
}

std::vector<cluster::Clustering> Workspace::cluster_all(const std::vector<ImageSimilarity>& sims,
                                                        double preference) {
  std::vector<cluster::Clustering> out(sims.size());
  cluster::APConfig ap = cfg_.ap;
  ap.preference = preference;
  parallel_for(sims.size(), cfg_.jobs, [&](std::size_t i) {
    if (sims[i].values.rows() > 0) out[i] = cluster::affinity_propagation(sims[i].values, ap);
  });
  return out;
}

std::vector<eval::ImageEvaluation> Workspace::evaluations(const std::vector<ImageSimilarity>& sims,
                                                          const std::vector<cluster::Clustering>& clusterings) {
  std::vector<eval::ImageEvaluation> out;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const auto& img = image(sims[i].image_id);
    if (img.entities.empty()) continue;
    eval::ImageEvaluation ev;
    ev.image_id = img.image_id;
    ev.predicted = clusterings[i].labels();
    ev.gold = img.gold.labels(img.entities.size());
    for (const auto& e : img.entities) ev.token_counts.push_back(e.normalized_tokens.size());
    ev.similarity = sims[i].values;
    out.push_back(std::move(ev));
  }
  return out;
}

double mean_ari(const Workspace& ws, const std::vector<ImageSimilarity>& sims,
                const std::vector<cluster::Clustering>& clusterings) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const auto& img = ws.image(sims[i].image_id);
    if (img.entities.empty()) continue;
    total += eval::adjusted_rand_index(clusterings[i].labels(), img.gold.labels(img.entities.size()));
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TuningOutcome Workspace::tune(const std::vector<ImageSimilarity>& validation) {
  TuningOutcome out;
  std::vector<double> off;
  for (const auto& s : validation)
    for (Eigen::Index i = 0; i < s.values.rows(); ++i)
      for (Eigen::Index j = i + 1; j < s.values.cols(); ++j) off.push_back(s.values(i, j));

  if (cfg_.preference) {
    out.preference = out.lower = out.upper = *cfg_.preference;
  } else {
    if (off.empty()) throw std::runtime_error("validation split has no entity pairs to tune on");
    std::sort(off.begin(), off.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(off.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, off.size() - 1);
      return off[lo] + (pos - static_cast<double>(lo)) * (off[hi] - off[lo]);
    };
    double range = off.back() - off.front();
    if (range <= 0.0) range = 1.0;
    out.lower = quantile(cfg_.lower_quantile) - range;
    out.upper = quantile(cfg_.upper_quantile);
    optimize::TuneConfig tc = cfg_.tune;
    tc.lower = out.lower;
    tc.upper = out.upper;
    tc.seed = cfg_.seed;
    out.search = optimize::tune_preference(
        [&](double p) { return mean_ari(*this, validation, cluster_all(validation, p)); }, tc);
    out.preference = out.search.best_x;
  }

  if (cfg_.threshold) {
    out.threshold.threshold = *cfg_.threshold;
  } else {
    std::vector<eval::ScoredPair> pairs;
    const auto clusterings = cluster_all(validation, out.preference);
    for (const auto& ev : evaluations(validation, clusterings)) {
      const auto p = eval::collect_pairs(ev);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    out.threshold = optimize::tune_threshold(pairs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_similarities(const fs::path& path, const std::vector<ImageSimilarity>& sims) {
  auto out = open_output(path);
  for (const auto& s : sims)
    for (std::size_t i = 0; i < s.keys.size(); ++i)
      for (std::size_t j = i + 1; j < s.keys.size(); ++j)
        out << s.image_id << '\t' << s.keys[i] << '\t' << s.keys[j] << '\t'
            << format_double(s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
}

void write_clusters(const fs::path& path, const std::vector<ImageSimilarity>& sims,
                    const std::vector<cluster::Clustering>& clusterings) {
  auto out = open_output(path);
  for (std::size_t k = 0; k < sims.size(); ++k)
    for (std::size_t i = 0; i < sims[k].keys.size(); ++i)
      out << sims[k].image_id << '\t' << sims[k].keys[i] << '\t' << sims[k].keys[clusterings[k].exemplar[i]] << '\n';
}

void write_tuning_log(const fs::path& path, const optimize::TuneResult& search) {
  auto out = open_output(path);
  for (const auto& step : search.history)
    out << step.iteration << '\t' << format_double(step.x) << '\t' << format_double(step.objective) << '\n';
}

eval::EvalReport run_pipeline(const PipelineConfig& cfg) {
  Workspace ws(cfg);
  const auto validation = ws.similarities(Split::kValidation);
  const auto tuned = ws.tune(validation);
  const auto test = ws.similarities(Split::kTest);
  const auto clusterings = ws.cluster_all(test, tuned.preference);

  auto report = eval::evaluate_split(ws.evaluations(test, clusterings), tuned.threshold.threshold, cfg.eval);
  report.method = method_name(cfg.method);
  report.preference = tuned.preference;

  const auto& dir = cfg.output_dir;
  fs::create_directories(dir);
  std::vector<ImageSimilarity> all = validation;
  all.insert(all.end(), test.begin(), test.end());
  write_similarities(dir / "similarities.tsv", all);
  write_clusters(dir / "clusters.tsv", test, clusterings);
  write_tuning_log(dir / "tuning.tsv", tuned.search);
  open_output(dir / "report.json") << eval::to_json({report}) << '\n';
  open_output(dir / "report.txt") << eval::format_table({report});
  return report;
}

std::vector<AttentionDump> emit_attention(Workspace& ws, const std::string& image_id, const std::string& key_i,
                                          const std::string& key_j, const fs::path& checkpoint,
                                          const fs::path& out) {
  const auto params = simnet::load_checkpoint(checkpoint);
  if (params.mode != simnet::ScorerMode::kSNNImage) {
    throw std::invalid_argument("attention needs an SNN_IMAGE checkpoint");
  }
  const auto& img = ws.image(image_id);
  const auto& vectors = ws.entity_vectors(ws.config().vector_kind);
  const auto& fmap = ws.feature_map(image_id);
  std::vector<AttentionDump> dumps;
  for (const auto& key : {key_i, key_j}) {
    const bool known = std::any_of(img.entities.begin(), img.entities.end(),
                                   [&](const corpus::Entity& e) { return e.key() == key; });
    if (!known) throw std::invalid_argument("unknown entity " + key + " in image " + image_id);
    dumps.push_back({key, simnet::attention_grid(vectors.at({image_id, key}), fmap, params)});
  }
  auto o = open_output(out);
  for (const auto& d : dumps)
    for (Eigen::Index r = 0; r < d.grid.rows(); ++r)
      for (Eigen::Index c = 0; c < d.grid.cols(); ++c)
        o << d.entity_key << '\t' << r << '\t' << c << '\t' << format_double(d.grid(r, c)) << '\n';
  return dumps;
}

}  // namespace vgp::pipeline
