#include "vgp/embed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "vgp/text.hpp"

namespace vgp::embed {

const char* kind_name(VectorKind k) {
  switch (k) {
    case VectorKind::kWEA: return "WEA";
    case VectorKind::kFV: return "FV";
    case VectorKind::kFVPCA: return "FV_PCA";
    case VectorKind::kCCA: return "CCA";
  }
  return "?";
}

bool WordVectorTable::insert(const std::string& token, const Eigen::VectorXd& v) {
  if (v.size() != dimension_) throw std::invalid_argument("word vector has wrong dimension");
  auto key = to_lower(token);
  if (index_.count(key)) return false;
  index_.emplace(key, vectors_.size());
  tokens_.push_back(key);
  vectors_.push_back(v);
  return true;
}

std::optional<Eigen::VectorXd> WordVectorTable::lookup(const std::string& token) const {
  auto it = index_.find(to_lower(token));
  if (it == index_.end()) return std::nullopt;
  return vectors_[it->second];
}

WordVectorTable load_word_vectors(std::istream& in) {
  std::optional<WordVectorTable> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw ParseError(line_no, "word vector line has no values");
    const int dim = static_cast<int>(fields.size()) - 1;
    if (!table) table.emplace(dim);
    if (dim != table->dimension()) {
      throw ParseError(line_no, "expected " + std::to_string(table->dimension()) + " values, found " +
                                    std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) {
      if (!parse_double(fields[static_cast<std::size_t>(d) + 1], v[d]) || !std::isfinite(v[d])) {
        throw ParseError(line_no, "non-numeric value '" + fields[static_cast<std::size_t>(d) + 1] + "'");
      }
    }
    table->insert(fields[0], v);
  }
  if (!table) throw std::runtime_error("word vector file is empty");
  return std::move(*table);
}

Eigen::MatrixXd token_matrix(const corpus::Entity& e, const WordVectorTable& table) {
  std::vector<Eigen::VectorXd> rows;
  for (const auto& t : e.normalized_tokens)
    if (auto v = table.lookup(t)) rows.push_back(std::move(*v));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), table.dimension());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

EntityVector embed_average(const corpus::Entity& e, const WordVectorTable& table) {
  EntityVector out{Eigen::VectorXd::Zero(table.dimension()), VectorKind::kWEA, false};
  int found = 0;
  for (const auto& t : e.normalized_tokens) {
    if (auto v = table.lookup(t)) {
      out.values += *v;
      ++found;
    }
  }
  if (found == 0) {
    out.oov = true;
  } else {
    out.values /= static_cast<double>(found);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal Gaussian mixture

namespace {

constexpr double kWeightFloor = 1e-12;

// log N(x | mean, diag(scale^2)) for each component; rows = samples.
Eigen::MatrixXd component_log_densities(const MixtureModel& m, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), k = m.means.rows(), d = m.means.cols();
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::ArrayXd inv_var = m.scales.row(c).array().square().inverse();
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
                            m.scales.row(c).array().log().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXd diff = (x.row(i) - m.means.row(c)).transpose().array();
      out(i, c) = log_norm - 0.5 * (diff.square() * inv_var).sum();
    }
  }
  return out;
}

// Posterior responsibilities (rows) and the total log-likelihood.
double posteriors(const MixtureModel& m, const Eigen::MatrixXd& x, Eigen::MatrixXd& gamma) {
  gamma = component_log_densities(m, x);
  const Eigen::ArrayXd log_w = m.weights.array().log();
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    gamma.row(i).array() += log_w.transpose();
    const double mx = gamma.row(i).maxCoeff();
    const double lse = mx + std::log((gamma.row(i).array() - mx).exp().sum());
    gamma.row(i) = (gamma.row(i).array() - lse).exp().matrix();
    total += lse;
  }
  return total;
}

}  // namespace

double mixture_log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& samples) {
  Eigen::MatrixXd gamma;
  return posteriors(model, samples, gamma) / static_cast<double>(samples.rows());
}

MixtureFit fit_mixture(const Eigen::MatrixXd& x, int components, std::uint64_t seed, int max_iterations) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (components < 1) throw std::invalid_argument("mixture needs K >= 1");
  if (n < components) throw std::invalid_argument("mixture needs at least K samples");
  const Eigen::Index k = components;

  std::mt19937_64 rng(seed);
  MixtureFit fit;
  auto& m = fit.model;
  m.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  m.means.resize(k, d);
  m.scales.resize(k, d);

  // k-means++ seeding of the locations.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  m.means.row(0) = x.row(pick(rng));
  Eigen::VectorXd dist2 = (x.rowwise() - m.means.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        u -= dist2[chosen];
        if (u < 0.0) break;
      }
    }
    m.means.row(c) = x.row(chosen);
    dist2 = dist2.cwiseMin((x.rowwise() - m.means.row(c)).rowwise().squaredNorm());
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd global_sd =
      ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt().max(kScaleFloor);
  for (Eigen::Index c = 0; c < k; ++c) m.scales.row(c) = global_sd;

  Eigen::MatrixXd gamma;
  double ll = posteriors(m, x, gamma);
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < max_iterations; ++it) {
    // M-step from the responsibilities of the current parameters.
    const Eigen::VectorXd nk = gamma.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      if (nk[c] <= std::numeric_limits<double>::min()) continue;  // dead component keeps its parameters
      const Eigen::RowVectorXd mu = (gamma.col(c).transpose() * x) / nk[c];
      const Eigen::RowVectorXd var =
          (gamma.col(c).transpose() * (x.rowwise() - mu).array().square().matrix()) / nk[c];
      m.means.row(c) = mu;
      for (Eigen::Index j = 0; j < d; ++j) {
        double sd = std::sqrt(std::max(0.0, var[j]));
        if (sd < kScaleFloor) {
          sd = kScaleFloor;
          ++fit.floored_scales;
        }
        m.scales(c, j) = sd;
      }
    }
    m.weights = (nk / static_cast<double>(n)).cwiseMax(kWeightFloor);
    m.weights /= m.weights.sum();

    const double next = posteriors(m, x, gamma);
    if (next < ll - 1e-8 * std::max(1.0, std::abs(ll))) {
      throw std::logic_error("EM log-likelihood decreased");
    }
    fit.log_likelihood.push_back(next);
    const double gain = std::abs(next - ll) / std::max(std::abs(ll), std::numeric_limits<double>::min());
    ll = next;
    if (gain < 1e-6) break;
  }
  if (fit.floored_scales > 0) {
    warn("mixture fit floored " + std::to_string(fit.floored_scales) + " degenerate scale(s) at 1e-4");
  }
  return fit;
}

Eigen::VectorXd encode_fisher(const Eigen::MatrixXd& tokens, const MixtureModel& m) {
  const Eigen::Index k = m.means.rows(), d = m.means.cols();
  if (tokens.cols() != d) throw std::invalid_argument("Fisher encoding: token dimension mismatch");
  Eigen::VectorXd fv = Eigen::VectorXd::Zero(2 * k * d);
  if (tokens.rows() == 0) return fv;
  Eigen::MatrixXd gamma;
  posteriors(m, tokens, gamma);
  const double t = static_cast<double>(tokens.rows());
  for (Eigen::Index c = 0; c < k; ++c) {
    const double w = m.weights[c];
    Eigen::ArrayXd first = Eigen::ArrayXd::Zero(d);
    Eigen::ArrayXd second = Eigen::ArrayXd::Zero(d);
    for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
      const Eigen::ArrayXd z = ((tokens.row(i) - m.means.row(c)).array() / m.scales.row(c).array()).transpose();
      first += gamma(i, c) * z;
      second += gamma(i, c) * (z.square() - 1.0);
    }
    fv.segment(c * d, d) = (first / (t * std::sqrt(w))).matrix();
    fv.segment(k * d + c * d, d) = (second / (t * std::sqrt(2.0 * w))).matrix();
  }
  fv = fv.unaryExpr([](double v) { return v < 0 ? -std::sqrt(-v) : std::sqrt(v); });
  const double norm = fv.norm();
  if (norm > 0.0) fv /= norm;
  return fv;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

// Fills rows [from, rows) of `basis` with unit vectors orthogonal to all earlier rows.
void complete_basis(Eigen::MatrixXd& basis, Eigen::Index from) {
  const Eigen::Index dim = basis.cols();
  Eigen::Index row = from;
  for (Eigen::Index e = 0; e < dim && row < basis.rows(); ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, e);
    for (Eigen::Index r = 0; r < row; ++r) v -= basis.row(r).dot(v) * basis.row(r).transpose();
    for (Eigen::Index r = 0; r < row; ++r) v -= basis.row(r).dot(v) * basis.row(r).transpose();
    const double nv = v.norm();
    if (nv < 1e-6) continue;
    basis.row(row++) = (v / nv).transpose();
  }
}

}  // namespace

PCAProjection fit_pca(const Eigen::MatrixXd& samples, int out_dim) {
  const Eigen::Index n = samples.rows(), dim = samples.cols();
  if (out_dim < 1 || out_dim > std::min(n, dim)) {
    throw std::invalid_argument("PCA output dimension " + std::to_string(out_dim) +
                                " exceeds min(sample size, input dimension)");
  }
  PCAProjection p;
  p.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - p.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  p.total_variance = centered.array().square().sum() / denom;
  p.components.resize(out_dim, dim);
  p.explained_variance.resize(out_dim);

  if (n >= dim) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int r = 0; r < out_dim; ++r) {
      const Eigen::Index src = dim - 1 - r;  // eigenvalues ascend
      p.components.row(r) = es.eigenvectors().col(src).transpose();
      p.explained_variance[r] = std::max(0.0, es.eigenvalues()[src]);
    }
  } else {
    // Gram trick: eigenvectors of X X^T map to those of X^T X.
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::Index filled = 0;
    for (int r = 0; r < out_dim; ++r) {
      const Eigen::Index src = n - 1 - r;
      const double lambda = es.eigenvalues()[src];
      p.explained_variance[r] = std::max(0.0, lambda);
      if (lambda <= 1e-12 * std::max(1.0, es.eigenvalues()[n - 1])) continue;
      Eigen::VectorXd v = centered.transpose() * es.eigenvectors().col(src);
      p.components.row(filled++) = (v / v.norm()).transpose();
    }
    complete_basis(p.components, filled);
  }
  for (int r = 0; r < out_dim; ++r) {
    Eigen::Index arg = 0;
    p.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (p.components(r, arg) < 0) p.components.row(r) *= -1.0;
  }
  return p;
}

Eigen::VectorXd apply_pca(const Eigen::VectorXd& v, const PCAProjection& proj) {
  if (v.size() != proj.mean.size()) throw std::invalid_argument("PCA input dimension mismatch");
  return proj.components * (v - proj.mean);
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine similarity: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace vgp::embed
