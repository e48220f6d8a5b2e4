#pragma once

// Regularized CCA between entity vectors and region vectors, with columns of
// the projections scaled by a power of the canonical correlations.

#include <Eigen/Core>

namespace vgp::cca {

struct CCAModel {
  Eigen::VectorXd entity_mean;
  Eigen::VectorXd region_mean;
  Eigen::MatrixXd entity_projection;  // dx x out_dim, columns scaled by corr^p
  Eigen::MatrixXd region_projection;  // dy x out_dim
  Eigen::VectorXd correlations;       // descending, in [0, 1]
  double eta = 1e-4;
  double power = 1.0;

  int output_dimension() const { return static_cast<int>(correlations.size()); }
};

struct CCAOptions {
  double eta = 1e-4;   // ridge, relative to the mean covariance diagonal of each view
  double power = 1.0;  // eigenvalue scaling exponent
};

/// Rows of `entity` and `region` are paired samples.
CCAModel fit_cca(const Eigen::MatrixXd& entity, const Eigen::MatrixXd& region, int out_dim,
                 const CCAOptions& options = {});

struct Projected {
  Eigen::VectorXd values;
  bool zero = false;  // input projected to the zero vector; values are zero
};

Projected project_entity(const Eigen::VectorXd& v, const CCAModel& model);
Projected project_region(const Eigen::VectorXd& v, const CCAModel& model);

}  // namespace vgp::cca
