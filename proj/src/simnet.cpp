#include "vgp/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "vgp/tensor_io.hpp"

namespace vgp::simnet {

const char* mode_name(ScorerMode m) { return m == ScorerMode::kSNN ? "SNN" : "SNN_IMAGE"; }

ScorerMode parse_mode(const std::string& s) {
  if (s == "SNN") return ScorerMode::kSNN;
  if (s == "SNN_IMAGE") return ScorerMode::kSNNImage;
  throw std::invalid_argument("unknown scorer mode '" + s + "'");
}

FeatureMap::FeatureMap(std::string id, Eigen::MatrixXd v) : image_id(std::move(id)), values(std::move(v)) {
  if (grid() < 0) throw std::invalid_argument("feature map rows must form a square grid");
  if (!values.allFinite()) throw std::invalid_argument("feature map has non-finite values");
}

int FeatureMap::grid() const {
  const auto n = values.rows();
  const auto g = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  return g * g == n && n > 0 ? static_cast<int>(g) : -1;
}

// ---------------------------------------------------------------------------
// Parameters

FusionParams FusionParams::zeros_like() const {
  FusionParams z = *this;
  z.for_each_tensor([](const char*, Eigen::MatrixXd& m) { m.setZero(); });
  return z;
}

double FusionParams::squared_norm() const {
  double s = 0.0;
  for_each_tensor([&](const char*, const Eigen::MatrixXd& m) { s += m.squaredNorm(); });
  return s;
}

bool FusionParams::operator==(const FusionParams& other) const {
  if (mode != other.mode || !(dims == other.dims)) return false;
  std::vector<const Eigen::MatrixXd*> mine, theirs;
  for_each_tensor([&](const char*, const Eigen::MatrixXd& m) { mine.push_back(&m); });
  other.for_each_tensor([&](const char*, const Eigen::MatrixXd& m) { theirs.push_back(&m); });
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
    if (*mine[i] != *theirs[i]) return false;
  }
  return true;
}

FusionParams init_params(ScorerMode mode, const Dimensions& dims, std::uint64_t seed) {
  if (dims.text <= 0 || dims.mlp_hidden <= 0) throw std::invalid_argument("scorer dimensions must be positive");
  if (mode == ScorerMode::kSNNImage && (dims.visual <= 0 || dims.hidden <= 0 || dims.fused <= 0)) {
    throw std::invalid_argument("fusion dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto weight = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    const double sd = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = sd * normal(rng);
    return m;
  };
  FusionParams p;
  p.mode = mode;
  p.dims = dims;
  if (mode == ScorerMode::kSNNImage) {
    p.W1 = weight(dims.hidden, dims.visual);
    p.b1 = Eigen::MatrixXd::Zero(dims.hidden, 1);
    p.W2 = weight(dims.hidden, dims.text);
    p.b2 = Eigen::MatrixXd::Zero(dims.hidden, 1);
    p.w = weight(dims.hidden, 1) / std::sqrt(static_cast<double>(dims.hidden));
    p.U = weight(dims.fused, dims.visual + dims.hidden);
    p.d = Eigen::MatrixXd::Zero(dims.fused, 1);
  }
  p.M1 = weight(dims.mlp_hidden, dims.mlp_input(mode));
  p.c1 = Eigen::MatrixXd::Zero(dims.mlp_hidden, 1);
  p.M2 = weight(1, dims.mlp_hidden);
  p.c2 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

void round_to_float(FusionParams& p) {
  p.for_each_tensor([](const char*, Eigen::MatrixXd& m) {
    m = m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  });
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Eigen::VectorXd normalized(const Eigen::VectorXd& x, double& norm) {
  norm = x.norm();
  return x / std::max(norm, kNormEpsilon);
}

// Gradient of x / max(||x||, eps) given the upstream gradient g.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& unit, double norm, const Eigen::VectorXd& g) {
  if (norm < kNormEpsilon) return g / kNormEpsilon;
  return (g - unit * unit.dot(g)) / norm;
}

void check_text(const Eigen::VectorXd& t, const FusionParams& p) {
  if (t.size() != p.dims.text) throw std::invalid_argument("entity vector has wrong dimension");
}

}  // namespace

VisualProjection project_visual(const FeatureMap& v, const FusionParams& p) {
  if (p.mode != ScorerMode::kSNNImage) throw std::logic_error("SNN parameters have no fusion net");
  if (v.values.cols() != p.dims.visual) throw std::invalid_argument("feature map has wrong dimension");
  VisualProjection out;
  out.projected = (v.values * p.W1.transpose()).rowwise() + p.b1.col(0).transpose();
  out.norms.resize(out.projected.rows());
  out.normalized.resize(out.projected.rows(), out.projected.cols());
  for (Eigen::Index n = 0; n < out.projected.rows(); ++n) {
    double norm = 0.0;
    out.normalized.row(n) = normalized(out.projected.row(n).transpose(), norm).transpose();
    out.norms[n] = norm;
  }
  return out;
}

FusionActivations forward_fusion(const Eigen::VectorXd& t, const FeatureMap& v, const VisualProjection& visual,
                                 const FusionParams& p) {
  check_text(t, p);
  FusionActivations a;
  a.text_projected = p.W2 * t + p.b2.col(0);
  a.text_hidden = normalized(a.text_projected, a.text_norm);
  a.pre_relu = visual.normalized.rowwise() + a.text_hidden.transpose();
  a.hidden = a.pre_relu.cwiseMax(0.0);
  a.energies = a.hidden * p.w.col(0);
  const double shift = a.energies.maxCoeff();
  a.attention = (a.energies.array() - shift).exp().matrix();
  a.attention /= a.attention.sum();
  a.context = v.values.transpose() * a.attention;
  a.context_hidden = normalized(a.context, a.context_norm);
  Eigen::VectorXd z(a.context_hidden.size() + a.text_hidden.size());
  z << a.context_hidden, a.text_hidden;
  a.fused = p.U * z + p.d.col(0);
  return a;
}

FusionActivations forward_fusion(const Eigen::VectorXd& t, const FeatureMap& v, const FusionParams& p) {
  return forward_fusion(t, v, project_visual(v, p), p);
}

double mlp_logit(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const FusionParams& p) {
  Eigen::VectorXd x(x_i.size() + x_j.size());
  x << x_i, x_j;
  if (x.size() != p.M1.cols()) throw std::invalid_argument("MLP input has wrong dimension");
  const Eigen::VectorXd g = (p.M1 * x + p.c1.col(0)).cwiseMax(0.0);
  return p.M2.row(0).dot(g) + p.c2(0, 0);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_cross_entropy(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double score_pair(const Eigen::VectorXd& t_i, const Eigen::VectorXd& t_j, const FeatureMap* image,
                  const FusionParams& p) {
  check_text(t_i, p);
  check_text(t_j, p);
  double forward, backward;
  if (p.mode == ScorerMode::kSNNImage) {
    if (!image) throw std::invalid_argument("SNN_IMAGE scoring requires a feature map");
    const auto visual = project_visual(*image, p);
    const auto yi = forward_fusion(t_i, *image, visual, p).fused;
    const auto yj = forward_fusion(t_j, *image, visual, p).fused;
    forward = mlp_logit(yi, yj, p);
    backward = mlp_logit(yj, yi, p);
  } else {
    forward = mlp_logit(t_i, t_j, p);
    backward = mlp_logit(t_j, t_i, p);
  }
  // Summation is commutative in IEEE arithmetic, so the swap is exact.
  return sigmoid(0.5 * (forward + backward));
}

double ensemble_score(double snn, double snn_image) { return 0.5 * (snn + snn_image); }

// ---------------------------------------------------------------------------
// Backward

namespace {

// Accumulates fusion-net gradients for one entity; the visual-side gradient is
// added to `d_visual` (N x d_h, w.r.t. v~_n) and finished per image later.
void fusion_backward(const Eigen::VectorXd& t, const FeatureMap& v, const FusionActivations& a,
                     const FusionParams& p, const Eigen::VectorXd& d_fused, FusionParams& g,
                     Eigen::MatrixXd& d_visual) {
  const Eigen::Index dv = a.context_hidden.size();
  Eigen::VectorXd z(dv + a.text_hidden.size());
  z << a.context_hidden, a.text_hidden;
  g.U.noalias() += d_fused * z.transpose();
  g.d.col(0) += d_fused;
  const Eigen::VectorXd dz = p.U.transpose() * d_fused;
  Eigen::VectorXd d_text_hidden = dz.tail(a.text_hidden.size());

  const Eigen::VectorXd d_context = normalize_backward(a.context_hidden, a.context_norm, dz.head(dv));
  const Eigen::VectorXd d_attention = v.values * d_context;
  const Eigen::VectorXd d_energy =
      (a.attention.array() * (d_attention.array() - a.attention.dot(d_attention))).matrix();
  g.w.col(0).noalias() += a.hidden.transpose() * d_energy;
  Eigen::MatrixXd d_pre = d_energy * p.w.col(0).transpose();
  d_pre = (a.pre_relu.array() > 0.0).select(d_pre, 0.0);
  d_visual += d_pre;
  d_text_hidden += d_pre.colwise().sum().transpose();

  const Eigen::VectorXd d_text_proj = normalize_backward(a.text_hidden, a.text_norm, d_text_hidden);
  g.W2.noalias() += d_text_proj * t.transpose();
  g.b2.col(0) += d_text_proj;
}

void visual_backward(const FeatureMap& v, const VisualProjection& visual, const Eigen::MatrixXd& d_visual,
                     FusionParams& g) {
  Eigen::MatrixXd d_proj(d_visual.rows(), d_visual.cols());
  for (Eigen::Index n = 0; n < d_visual.rows(); ++n) {
    d_proj.row(n) = normalize_backward(visual.normalized.row(n).transpose(), visual.norms[n],
                                       d_visual.row(n).transpose())
                        .transpose();
  }
  g.W1.noalias() += d_proj.transpose() * v.values;
  g.b1.col(0) += d_proj.colwise().sum().transpose();
}

}  // namespace

BatchStats batch_loss(const FusionParams& p, const PairDataset& data, std::span<const LabeledPair> batch,
                      double weight_decay, FusionParams* grad) {
  BatchStats stats;
  if (batch.empty()) return stats;
  const bool image_mode = p.mode == ScorerMode::kSNNImage;
  const double scale = 1.0 / static_cast<double>(batch.size());

  // Per-image caches, in order of first use.
  std::map<std::size_t, std::pair<VisualProjection, Eigen::MatrixXd>> images;
  auto visual_for = [&](std::size_t image) -> std::pair<VisualProjection, Eigen::MatrixXd>& {
    auto it = images.find(image);
    if (it == images.end()) {
      auto vp = project_visual(data.feature_maps.at(image), p);
      Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(vp.normalized.rows(), vp.normalized.cols());
      it = images.emplace(image, std::make_pair(std::move(vp), std::move(dv))).first;
    }
    return it->second;
  };

  double total = 0.0;
  for (const auto& pair : batch) {
    const auto& ti = data.entity_vectors.at(pair.first);
    const auto& tj = data.entity_vectors.at(pair.second);
    Eigen::VectorXd xi, xj;
    FusionActivations ai, aj;
    std::size_t image = 0;
    if (image_mode) {
      image = data.entity_image.at(pair.first);
      if (data.entity_image.at(pair.second) != image) throw std::invalid_argument("pair spans two images");
      auto& [visual, _] = visual_for(image);
      const auto& fmap = data.feature_maps[image];
      ai = forward_fusion(ti, fmap, visual, p);
      aj = forward_fusion(tj, fmap, visual, p);
      stats.max_attention_deviation = std::max({stats.max_attention_deviation, std::abs(ai.attention.sum() - 1.0),
                                                std::abs(aj.attention.sum() - 1.0)});
      xi = ai.fused;
      xj = aj.fused;
    } else {
      xi = ti;
      xj = tj;
    }
    Eigen::VectorXd x(xi.size() + xj.size());
    x << xi, xj;
    const Eigen::VectorXd pre = p.M1 * x + p.c1.col(0);
    const Eigen::VectorXd hidden = pre.cwiseMax(0.0);
    const double logit = p.M2.row(0).dot(hidden) + p.c2(0, 0);
    const double label = pair.positive ? 1.0 : 0.0;
    total += sigmoid_cross_entropy(logit, label);
    if (!grad) continue;

    auto& g = *grad;
    const double d_logit = (sigmoid(logit) - label) * scale;
    g.M2.row(0) += d_logit * hidden.transpose();
    g.c2(0, 0) += d_logit;
    Eigen::VectorXd d_pre = d_logit * p.M2.row(0).transpose();
    d_pre = (pre.array() > 0.0).select(d_pre, 0.0);
    g.M1.noalias() += d_pre * x.transpose();
    g.c1.col(0) += d_pre;
    if (image_mode) {
      const Eigen::VectorXd dx = p.M1.transpose() * d_pre;
      auto& [visual, d_visual] = visual_for(image);
      const auto& fmap = data.feature_maps[image];
      fusion_backward(ti, fmap, ai, p, dx.head(xi.size()), g, d_visual);
      fusion_backward(tj, fmap, aj, p, dx.tail(xj.size()), g, d_visual);
    }
  }
  if (grad && image_mode) {
    for (auto& [image, cache] : images) visual_backward(data.feature_maps[image], cache.first, cache.second, *grad);
  }

  stats.loss = total * scale + 0.5 * weight_decay * p.squared_norm();
  if (grad && weight_decay != 0.0) {
    std::vector<const Eigen::MatrixXd*> params;
    p.for_each_tensor([&](const char*, const Eigen::MatrixXd& m) { params.push_back(&m); });
    std::size_t k = 0;
    grad->for_each_tensor([&](const char*, Eigen::MatrixXd& m) { m += weight_decay * *params[k++]; });
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Training

int TrainConfig::positives_per_batch() const {
  return static_cast<int>(std::lround(positive_fraction * static_cast<double>(batch_size)));
}

double TrainConfig::learning_rate_at(int epoch) const { return learning_rate * std::pow(decay_per_epoch, epoch); }

void TrainConfig::validate() const {
  if (batch_size <= 0 || epochs <= 0) throw std::invalid_argument("batch size and epochs must be positive");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw std::invalid_argument("positive fraction must lie in (0, 1)");
  }
  if (positives_per_batch() < 1 || negatives_per_batch() < 1) {
    throw std::invalid_argument("batch must hold at least one positive and one negative");
  }
  if (learning_rate <= 0.0 || weight_decay < 0.0) throw std::invalid_argument("invalid optimizer settings");
}

TrainResult train(const PairDataset& data, ScorerMode mode, const Dimensions& dims, const TrainConfig& cfg) {
  cfg.validate();
  if (data.positives.empty()) throw std::invalid_argument("training needs at least one positive pair");
  if (data.negatives.empty()) throw std::invalid_argument("training needs at least one negative pair");
  if (mode == ScorerMode::kSNNImage && data.feature_maps.empty()) {
    throw std::invalid_argument("SNN_IMAGE training needs feature maps");
  }

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.params = init_params(mode, dims, rng());
  auto& p = result.params;
  FusionParams m1 = p.zeros_like(), m2 = p.zeros_like();
  long step = 0;

  const int pos_per_batch = cfg.positives_per_batch();
  const int neg_per_batch = cfg.negatives_per_batch();
  // One epoch covers the larger of the two pools once in expectation.
  auto ceil_div = [](std::size_t a, int b) { return (a + static_cast<std::size_t>(b) - 1) / static_cast<std::size_t>(b); };
  const std::size_t batches =
      std::max(ceil_div(data.positives.size(), pos_per_batch), ceil_div(data.negatives.size(), neg_per_batch));
  std::uniform_int_distribution<std::size_t> pick_negative(0, data.negatives.size() - 1);
  std::bernoulli_distribution flip(0.5);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate_at(epoch);
    std::vector<std::size_t> order(data.positives.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log{epoch, lr, 0.0, 0, 0.0};
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<LabeledPair> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      auto oriented = [&](LabeledPair lp) {
        if (flip(rng)) std::swap(lp.first, lp.second);
        return lp;
      };
      for (int k = 0; k < pos_per_batch; ++k) batch.push_back(oriented(data.positives[order[cursor++ % order.size()]]));
      for (int k = 0; k < neg_per_batch; ++k) batch.push_back(oriented(data.negatives[pick_negative(rng)]));

      FusionParams g = p.zeros_like();
      const auto stats = batch_loss(p, data, batch, cfg.weight_decay, &g);
      log.mean_loss += stats.loss;
      log.max_attention_deviation = std::max(log.max_attention_deviation, stats.max_attention_deviation);
      ++log.batches;

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      std::vector<Eigen::MatrixXd*> grads, first, second;
      g.for_each_tensor([&](const char*, Eigen::MatrixXd& m) { grads.push_back(&m); });
      m1.for_each_tensor([&](const char*, Eigen::MatrixXd& m) { first.push_back(&m); });
      m2.for_each_tensor([&](const char*, Eigen::MatrixXd& m) { second.push_back(&m); });
      std::size_t k = 0;
      p.for_each_tensor([&](const char*, Eigen::MatrixXd& theta) {
        auto& gm = *grads[k];
        auto& mm = *first[k];
        auto& vm = *second[k];
        mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * gm;
        vm = cfg.beta2 * vm + (1.0 - cfg.beta2) * gm.cwiseProduct(gm);
        theta.array() -= lr * (mm.array() / c1) / ((vm.array() / c2).sqrt() + cfg.adam_epsilon);
        ++k;
      });
    }
    if (log.batches > 0) log.mean_loss /= log.batches;
    result.log.push_back(log);
  }
  round_to_float(p);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check

GradientCheckResult gradient_check(const FusionParams& p, const PairDataset& data, std::span<const LabeledPair> batch,
                                   double epsilon, double weight_decay) {
  FusionParams analytic = p.zeros_like();
  batch_loss(p, data, batch, weight_decay, &analytic);

  GradientCheckResult result;
  FusionParams probe = p;
  std::vector<Eigen::MatrixXd*> probe_tensors;
  probe.for_each_tensor([&](const char*, Eigen::MatrixXd& m) { probe_tensors.push_back(&m); });
  std::size_t k = 0;
  analytic.for_each_tensor([&](const char* name, const Eigen::MatrixXd& grad) {
    Eigen::MatrixXd& theta = *probe_tensors[k++];
    double worst = 0.0;
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      for (Eigen::Index r = 0; r < theta.rows(); ++r) {
        const double saved = theta(r, c);
        theta(r, c) = saved + epsilon;
        const double up = batch_loss(probe, data, batch, weight_decay, nullptr).loss;
        theta(r, c) = saved - epsilon;
        const double down = batch_loss(probe, data, batch, weight_decay, nullptr).loss;
        theta(r, c) = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = grad(r, c);
        if (std::abs(a) < 1e-12 && std::abs(numeric) < 1e-12) {
          ++result.skipped;
          continue;
        }
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, rel);
        ++result.checked;
      }
    }
    result.per_tensor.emplace_back(name, worst);
    if (worst >= result.max_relative_error) {
      result.max_relative_error = worst;
      result.worst_tensor = name;
    }
  });
  return result;
}

Eigen::MatrixXd attention_grid(const Eigen::VectorXd& t, const FeatureMap& v, const FusionParams& p) {
  const int g = v.grid();
  if (g < 0) throw std::invalid_argument("feature map is not a square grid");
  const auto a = forward_fusion(t, v, p).attention;
  Eigen::MatrixXd out(g, g);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) out(r, c) = a[r * g + c];
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},     {"positive_fraction", c.positive_fraction},
          {"learning_rate", c.learning_rate}, {"decay_per_epoch", c.decay_per_epoch},
          {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
          {"seed", c.seed},                 {"beta1", c.beta1},
          {"beta2", c.beta2},               {"adam_epsilon", c.adam_epsilon}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size");
  c.positive_fraction = j.at("positive_fraction");
  c.learning_rate = j.at("learning_rate");
  c.decay_per_epoch = j.at("decay_per_epoch");
  c.weight_decay = j.at("weight_decay");
  c.epochs = j.at("epochs");
  c.seed = j.at("seed");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.adam_epsilon = j.at("adam_epsilon");
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const FusionParams& p, const CheckpointInfo& info) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "vgp-checkpoint";
  manifest["version"] = 1;
  manifest["mode"] = mode_name(p.mode);
  manifest["dims"] = {{"text", p.dims.text},
                      {"visual", p.dims.visual},
                      {"hidden", p.dims.hidden},
                      {"fused", p.dims.fused},
                      {"mlp_hidden", p.dims.mlp_hidden}};
  manifest["seed"] = info.config.seed;
  manifest["config"] = config_json(info.config);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : info.log) {
    log.push_back({{"epoch", e.epoch},
                   {"learning_rate", e.learning_rate},
                   {"mean_loss", e.mean_loss},
                   {"batches", e.batches},
                   {"max_attention_deviation", e.max_attention_deviation}});
  }
  manifest["log"] = log;
  nlohmann::json tensors = nlohmann::json::array();
  p.for_each_tensor([&](const char* name, const Eigen::MatrixXd& m) {
    const std::string file = std::string(name) + ".vgpt";
    save_tensor(dir / file, to_tensor(m));
    tensors.push_back({{"name", name}, {"file", file}, {"shape", {m.rows(), m.cols()}}});
  });
  manifest["tensors"] = tensors;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

FusionParams load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("checkpoint required: no manifest.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.at("format") != "vgp-checkpoint") throw std::runtime_error("not a vgp checkpoint: " + dir.string());
  FusionParams p;
  p.mode = parse_mode(manifest.at("mode"));
  const auto& d = manifest.at("dims");
  p.dims = {d.at("text"), d.at("visual"), d.at("hidden"), d.at("fused"), d.at("mlp_hidden")};
  std::map<std::string, std::string> files;
  for (const auto& t : manifest.at("tensors")) files[t.at("name")] = t.at("file");
  p.for_each_tensor([&](const char* name, Eigen::MatrixXd& m) {
    auto it = files.find(name);
    if (it == files.end()) throw std::runtime_error(std::string("checkpoint is missing tensor ") + name);
    m = to_matrix(load_tensor(dir / it->second));
  });
  // Shapes must agree with a freshly initialized model of the same dimensions.
  const auto reference = init_params(p.mode, p.dims, 0);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  reference.for_each_tensor([&](const char*, const Eigen::MatrixXd& m) { shapes.emplace_back(m.rows(), m.cols()); });
  std::size_t k = 0;
  p.for_each_tensor([&](const char* name, const Eigen::MatrixXd& m) {
    if (shapes[k].first != m.rows() || shapes[k].second != m.cols()) {
      throw std::runtime_error(std::string("checkpoint tensor ") + name + " has the wrong shape");
    }
    ++k;
  });
  if (info) {
    info->config = config_from_json(manifest.at("config"));
    info->log.clear();
    for (const auto& e : manifest.at("log")) {
      info->log.push_back({e.at("epoch"), e.at("learning_rate"), e.at("mean_loss"), e.at("batches"),
                           e.at("max_attention_deviation")});
    }
  }
  return p;
}

}  // namespace vgp::simnet
