#include "vgp/cca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace vgp::cca {
namespace {

// (C + ridge I)^{-1/2} via the symmetric eigendecomposition.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& cov, double eta, const char* view) {
  const double mean_diag = cov.diagonal().mean();
  const double ridge = eta * (mean_diag > 0 ? mean_diag : 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double largest = std::max(ev.maxCoeff(), 0.0);
  if (eta <= 0.0 && ev.minCoeff() <= 1e-12 * std::max(largest, 1e-300)) {
    throw std::runtime_error(std::string(view) +
                             " covariance is rank deficient; use a positive regularizer eta > 0");
  }
  const Eigen::VectorXd shifted = (ev.array().max(0.0) + ridge).matrix();
  return es.eigenvectors() * shifted.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Projected project(const Eigen::VectorXd& v, const Eigen::VectorXd& mean, const Eigen::MatrixXd& w) {
  if (v.size() != mean.size()) throw std::invalid_argument("CCA projection: dimension mismatch");
  Projected p;
  p.values = w.transpose() * (v - mean);
  const double norm = p.values.norm();
  if (norm == 0.0 || !std::isfinite(norm)) {
    p.values.setZero();
    p.zero = true;
  } else {
    p.values /= norm;
  }
  return p;
}

}  // namespace

CCAModel fit_cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int out_dim, const CCAOptions& options) {
  if (x.rows() != y.rows()) throw std::invalid_argument("CCA views must have the same number of rows");
  const Eigen::Index n = x.rows();
  if (out_dim < 1 || out_dim > std::min(x.cols(), y.cols())) {
    throw std::invalid_argument("CCA output dimension must be in [1, min(view dims)]");
  }
  if (n <= out_dim) throw std::invalid_argument("CCA needs more samples than output dimensions");
  if (options.eta < 0.0) throw std::invalid_argument("CCA regularizer must be >= 0");

  CCAModel m;
  m.eta = options.eta;
  m.power = options.power;
  m.entity_mean = x.colwise().mean().transpose();
  m.region_mean = y.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - m.entity_mean.transpose();
  const Eigen::MatrixXd yc = y.rowwise() - m.region_mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const Eigen::MatrixXd cxx = xc.transpose() * xc / denom;
  const Eigen::MatrixXd cyy = yc.transpose() * yc / denom;
  const Eigen::MatrixXd cxy = xc.transpose() * yc / denom;

  const Eigen::MatrixXd wx = inverse_sqrt(cxx, options.eta, "entity");
  const Eigen::MatrixXd wy = inverse_sqrt(cyy, options.eta, "region");
  // Singular values of Cxx^{-1/2} Cxy Cyy^{-1/2} are the square roots of the
  // eigenvalues of Cxx^{-1} Cxy Cyy^{-1} Cyx.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wx * cxy * wy, Eigen::ComputeThinU | Eigen::ComputeThinV);
  m.correlations = svd.singularValues().head(out_dim).cwiseMax(0.0).cwiseMin(1.0);
  const Eigen::VectorXd scale = m.correlations.array().pow(options.power).matrix();
  m.entity_projection = wx * svd.matrixU().leftCols(out_dim) * scale.asDiagonal();
  m.region_projection = wy * svd.matrixV().leftCols(out_dim) * scale.asDiagonal();
  return m;
}

Projected project_entity(const Eigen::VectorXd& v, const CCAModel& model) {
  return project(v, model.entity_mean, model.entity_projection);
}

Projected project_region(const Eigen::VectorXd& v, const CCAModel& model) {
  return project(v, model.region_mean, model.region_projection);
}

}  // namespace vgp::cca
